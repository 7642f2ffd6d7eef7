use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Fact, Mode, Origin};
use crate::model::{
    topological_order, validate, Carry, Channel, FeatureTag, MitigationRef, ModelError, Network,
    SiteId,
};

/// Id used for a summarized channel's conditional relation rows when no
/// descriptive mitigation covers the tag.
pub(crate) const INTERIOR_BLOCKER: &str = "interior";

/// A fact leaving a channel, with the conditional mitigations that would
/// remove it if they are effective.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Emitted {
    pub fact: Fact,
    pub blockers: BTreeSet<MitigationRef>,
}

impl Emitted {
    pub fn survives(&self, mode: Mode) -> bool {
        !mode.conditional_effective() || self.blockers.is_empty()
    }
}

/// Facts emitted at `output` of `channel`, either for one incoming fact at
/// one input or, with `incoming == None`, for the channel's own
/// introductions. Unconditional drops are already applied.
pub(crate) fn transfer(
    channel: &Channel,
    output: &SiteId,
    incoming: Option<(&SiteId, &Fact)>,
) -> Vec<Emitted> {
    let Some(flow) = channel.flow.output(output) else {
        return Vec::new();
    };
    let hard_drops = flow.active_drops(false);
    let blockers_for = |tag: &FeatureTag| -> BTreeSet<MitigationRef> {
        flow.conditional_blockers(tag)
            .map(|m| MitigationRef::new(channel.id.clone(), m.id.clone()))
            .collect()
    };

    if let Carry::Summary(entries) = &flow.carries {
        let mut out = Vec::new();
        for e in entries {
            let fact = match (incoming, &e.input, &e.from) {
                (Some((input, fact)), Some(ei), Some(from)) if ei == input && from == &fact.tag => {
                    let mut chain = fact.chain.clone();
                    chain.extend(e.via.iter().cloned());
                    Fact {
                        tag: e.to.clone(),
                        origin: fact.origin.clone(),
                        chain,
                    }
                }
                (None, None, _) => Fact {
                    tag: e.to.clone(),
                    origin: Origin::Channel(channel.id.clone()),
                    chain: e.via.clone(),
                },
                _ => continue,
            };
            let mut blockers = BTreeSet::new();
            if e.conditional {
                let touched: BTreeSet<&FeatureTag> =
                    e.from.iter().chain(&e.via).chain([&e.to]).collect();
                for m in flow.drops.values().filter(|m| m.conditional) {
                    if m.tags.iter().any(|t| touched.contains(t)) {
                        blockers.insert(MitigationRef::new(channel.id.clone(), m.id.clone()));
                    }
                }
                if blockers.is_empty() {
                    blockers.insert(MitigationRef::new(channel.id.clone(), INTERIOR_BLOCKER));
                }
            }
            out.push(Emitted { fact, blockers });
        }
        return out;
    }

    let mut candidates = Vec::new();
    match incoming {
        Some((input, fact)) => {
            if !flow.carries.admits(input, &fact.tag) {
                return Vec::new();
            }
            candidates.push(fact.clone());
            for p in flow.proxies.iter().filter(|p| p.source == fact.tag) {
                let mut chain = fact.chain.clone();
                chain.push(fact.tag.clone());
                candidates.push(Fact {
                    tag: p.proxy.clone(),
                    origin: fact.origin.clone(),
                    chain,
                });
            }
        }
        None => {
            for i in &flow.introduces {
                candidates.push(Fact::new(
                    i.tag.clone(),
                    Origin::Channel(channel.id.clone()),
                ));
            }
        }
    }
    candidates
        .into_iter()
        .filter(|f| !hard_drops.contains(&f.tag))
        .map(|fact| {
            let blockers = blockers_for(&fact.tag);
            Emitted { fact, blockers }
        })
        .collect()
}

pub(crate) fn check_analyzable(network: &Network) -> Result<(), AnalysisError> {
    if !network.alternatives.is_empty() {
        return Err(AnalysisError::UnresolvedAlternatives);
    }
    let report = validate(network);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report).into());
    }
    Ok(())
}

/// Facts present at every site under one mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub mode: Mode,
    pub sites: BTreeMap<SiteId, BTreeSet<Fact>>,
}

impl FeatureMap {
    pub fn facts(&self, site: &str) -> impl Iterator<Item = &Fact> {
        self.sites.get(site).into_iter().flatten()
    }

    /// Whether a fact matching `tag` (directly or as a proxy) is at `site`.
    pub fn has_tag(&self, site: &str, tag: &FeatureTag) -> bool {
        self.facts(site).any(|f| f.matches(tag))
    }

    /// Distinct tags at `site`.
    pub fn tags_at(&self, site: &str) -> BTreeSet<&FeatureTag> {
        self.facts(site).map(|f| &f.tag).collect()
    }
}

/// Least fixpoint of fact propagation over the topological order.
pub fn propagate_features(network: &Network, mode: Mode) -> Result<FeatureMap, AnalysisError> {
    check_analyzable(network)?;
    Ok(propagate_unchecked(network, mode))
}

pub(crate) fn propagate_unchecked(network: &Network, mode: Mode) -> FeatureMap {
    let mut sites: BTreeMap<SiteId, BTreeSet<Fact>> = network
        .sites
        .values()
        .map(|s| {
            let facts = s
                .seeds
                .iter()
                .map(|t| Fact::new(t.clone(), Origin::Site(s.id.clone())))
                .collect();
            (s.id.clone(), facts)
        })
        .collect();

    let order = topological_order(network).expect("validated network is acyclic");
    for cid in order {
        let channel = &network.channels[&cid];
        for output in &channel.outputs {
            let mut produced: BTreeSet<Fact> = transfer(channel, output, None)
                .into_iter()
                .filter(|e| e.survives(mode))
                .map(|e| e.fact)
                .collect();
            for input in &channel.inputs {
                for fact in sites.get(input).into_iter().flatten() {
                    produced.extend(
                        transfer(channel, output, Some((input, fact)))
                            .into_iter()
                            .filter(|e| e.survives(mode))
                            .map(|e| e.fact),
                    );
                }
            }
            sites.entry(output.clone()).or_default().extend(produced);
        }
    }
    FeatureMap { mode, sites }
}

fn is_input_site(network: &Network, site: &SiteId) -> bool {
    !network.channels.values().any(|c| c.outputs.contains(site))
}

/// Sites holding facts that entered at `origin`, optionally restricted to
/// facts matching `tag`. An input site origin always includes itself when
/// no tag is given.
pub fn downstream_of(
    network: &Network,
    origin: &Origin,
    tag: Option<&FeatureTag>,
    mode: Mode,
) -> Result<BTreeSet<SiteId>, AnalysisError> {
    check_origin(network, origin)?;
    let map = propagate_features(network, mode)?;
    let mut out: BTreeSet<SiteId> = map
        .sites
        .iter()
        .filter(|(_, facts)| {
            facts
                .iter()
                .any(|f| &f.origin == origin && tag.is_none_or(|t| f.matches(t)))
        })
        .map(|(s, _)| s.clone())
        .collect();
    if let (Origin::Site(s), None) = (origin, tag) {
        if is_input_site(network, s) {
            out.insert(s.clone());
        }
    }
    Ok(out)
}

/// Origins (seeded input sites and introducing channels) whose facts reach
/// `site`, optionally restricted to facts matching `tag`.
pub fn upstream_of(
    network: &Network,
    site: &SiteId,
    tag: Option<&FeatureTag>,
    mode: Mode,
) -> Result<BTreeSet<Origin>, AnalysisError> {
    if !network.sites.contains_key(site) {
        return Err(AnalysisError::UnknownSite(site.to_string()));
    }
    let map = propagate_features(network, mode)?;
    let mut out: BTreeSet<Origin> = map
        .facts(site.as_str())
        .filter(|f| tag.is_none_or(|t| f.matches(t)))
        .map(|f| f.origin.clone())
        .collect();
    if tag.is_none() && is_input_site(network, site) {
        out.insert(Origin::Site(site.clone()));
    }
    Ok(out)
}

pub(crate) fn check_origin(network: &Network, origin: &Origin) -> Result<(), AnalysisError> {
    let known = match origin {
        Origin::Site(s) => network.sites.contains_key(s),
        Origin::Channel(c) => network.channels.contains_key(c),
    };
    if known {
        Ok(())
    } else {
        Err(AnalysisError::UnknownId(origin.id().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channel, Introduce, Mitigation, Proxy, Site};

    fn line() -> Network {
        let mut n = Network::default();
        let mut a = Site::new("A");
        a.seeds.insert("g".into());
        n.add_site(a);
        n.add_channel(Channel::new("c1", ["A"], ["B"]));
        n
    }

    #[test]
    fn carry_all_propagates_seed() {
        let map = propagate_features(&line(), Mode::Optimistic).unwrap();
        assert!(map.has_tag("B", &"g".into()));
    }

    #[test]
    fn conditional_drop_only_optimistic() {
        let mut n = line();
        let flow = n
            .channels
            .get_mut("c1")
            .unwrap()
            .flow
            .outputs
            .get_mut("B")
            .unwrap();
        flow.drops.insert(
            "normalize".into(),
            Mitigation {
                id: "normalize".into(),
                tags: ["g".into()].into_iter().collect(),
                conditional: true,
                note: String::new(),
            },
        );
        assert!(!propagate_features(&n, Mode::Optimistic)
            .unwrap()
            .has_tag("B", &"g".into()));
        assert!(propagate_features(&n, Mode::Pessimistic)
            .unwrap()
            .has_tag("B", &"g".into()));
    }

    #[test]
    fn proxy_keeps_provenance() {
        let mut n = line();
        n.add_channel(Channel::new("c2", ["B"], ["C"]));
        let flow = n
            .channels
            .get_mut("c1")
            .unwrap()
            .flow
            .outputs
            .get_mut("B")
            .unwrap();
        flow.proxies.insert(Proxy {
            source: "g".into(),
            proxy: "p".into(),
        });
        let map = propagate_features(&n, Mode::Optimistic).unwrap();
        let proxied: Vec<&Fact> = map.facts("C").filter(|f| f.tag.as_str() == "p").collect();
        assert_eq!(proxied.len(), 1);
        assert_eq!(proxied[0].origin, Origin::Site("A".into()));
        assert_eq!(proxied[0].chain, vec![FeatureTag::from("g")]);
        assert!(map.has_tag("C", &"g".into()));
        // proxy facts match their source tag
        assert_eq!(map.facts("C").filter(|f| f.matches(&"g".into())).count(), 2);
    }

    #[test]
    fn introductions_originate_at_channel() {
        let mut n = line();
        n.channels
            .get_mut("c1")
            .unwrap()
            .flow
            .outputs
            .get_mut("B")
            .unwrap()
            .introduces
            .insert(Introduce {
                tag: "x".into(),
                kind: "Interpretation".into(),
            });
        let origin = Origin::Channel("c1".into());
        let down = downstream_of(&n, &origin, Some(&"x".into()), Mode::Optimistic).unwrap();
        assert_eq!(down, ["B".into()].into_iter().collect());
        let up = upstream_of(&n, &"B".into(), Some(&"x".into()), Mode::Optimistic).unwrap();
        assert_eq!(up, [origin].into_iter().collect());
    }

    #[test]
    fn sink_and_input_edge_cases() {
        let n = line();
        let sink = downstream_of(&n, &Origin::Site("B".into()), None, Mode::Pessimistic).unwrap();
        assert!(sink.is_empty());
        let up = upstream_of(&n, &"A".into(), None, Mode::Pessimistic).unwrap();
        assert_eq!(up, [Origin::Site("A".into())].into_iter().collect());
        assert!(matches!(
            downstream_of(&n, &Origin::Site("Z".into()), None, Mode::Optimistic),
            Err(AnalysisError::UnknownId(_))
        ));
        assert!(matches!(
            upstream_of(&n, &"Z".into(), None, Mode::Optimistic),
            Err(AnalysisError::UnknownSite(_))
        ));
    }

    #[test]
    fn alternatives_rejected() {
        use crate::model::{AlternativeSet, Toggle};
        let mut n = line();
        n.alternatives.insert(
            "x".into(),
            AlternativeSet::optional(
                "x",
                "present",
                Toggle::Channel {
                    channel: "c1".into(),
                },
            ),
        );
        assert!(matches!(
            propagate_features(&n, Mode::Optimistic),
            Err(AnalysisError::UnresolvedAlternatives)
        ));
    }
}
