use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::propagate::{check_analyzable, check_origin, transfer, Emitted};
use super::{AnalysisError, Fact, Mode, Origin};
use crate::model::{ChannelId, FeatureTag, MitigationRef, Network, SiteId};

pub const DEFAULT_MAX_PATHS: usize = 1000;

/// One channel crossing. `from` is `None` for the introducing channel a
/// path starts with.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub channel: ChannelId,
    pub from: Option<SiteId>,
    pub to: SiteId,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImpactPath {
    pub origin: Origin,
    pub hops: Vec<Hop>,
    /// Tag as it arrives at the target.
    pub tag: FeatureTag,
    /// Proxy sources the tag was derived from, oldest first.
    pub chain: Vec<FeatureTag>,
    /// Conditional mitigations crossed that would block this path.
    pub blockers: Vec<MitigationRef>,
}

impl ImpactPath {
    pub fn channels(&self) -> Vec<&ChannelId> {
        self.hops.iter().map(|h| &h.channel).collect()
    }

    pub fn channel_ids(&self) -> Vec<String> {
        self.hops.iter().map(|h| h.channel.to_string()).collect()
    }

    /// Open even when conditional mitigations are effective.
    pub fn is_unconditional(&self) -> bool {
        self.blockers.is_empty()
    }

    fn sort_key(
        &self,
    ) -> (
        Vec<&ChannelId>,
        Vec<&SiteId>,
        &FeatureTag,
        &Vec<FeatureTag>,
        &Origin,
    ) {
        (
            self.channels(),
            self.hops.iter().map(|h| &h.to).collect(),
            &self.tag,
            &self.chain,
            &self.origin,
        )
    }

    /// The path with its status-dependent part removed.
    pub(crate) fn identity(&self) -> (Origin, Vec<Hop>, FeatureTag, Vec<FeatureTag>) {
        (
            self.origin.clone(),
            self.hops.clone(),
            self.tag.clone(),
            self.chain.clone(),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTrace {
    pub paths: Vec<ImpactPath>,
    pub truncated: bool,
}

pub(crate) struct PathQuery<'a> {
    pub origins: Vec<Origin>,
    pub target: &'a SiteId,
    /// A path qualifies when its fact matches any of these.
    pub tags: &'a BTreeSet<FeatureTag>,
    /// When set, a path must cross at least one of these channels.
    pub via: Option<&'a BTreeSet<ChannelId>>,
    pub mode: Mode,
}

struct State {
    site: SiteId,
    fact: Fact,
    hops: Vec<Hop>,
    blockers: BTreeSet<MitigationRef>,
}

fn start_states(network: &Network, origin: &Origin, mode: Mode) -> Vec<State> {
    match origin {
        Origin::Site(s) => network
            .sites
            .get(s)
            .into_iter()
            .flat_map(|site| site.seeds.iter())
            .map(|t| State {
                site: s.clone(),
                fact: Fact::new(t.clone(), origin.clone()),
                hops: Vec::new(),
                blockers: BTreeSet::new(),
            })
            .collect(),
        Origin::Channel(c) => {
            let Some(channel) = network.channels.get(c) else {
                return Vec::new();
            };
            let mut out = Vec::new();
            for o in &channel.outputs {
                for e in transfer(channel, o, None) {
                    if e.survives(mode) {
                        out.push(State {
                            site: o.clone(),
                            fact: e.fact,
                            hops: vec![Hop {
                                channel: c.clone(),
                                from: None,
                                to: o.clone(),
                            }],
                            blockers: e.blockers,
                        });
                    }
                }
            }
            out
        }
    }
}

/// Sites from which `target` is reachable along channel edges (target included).
fn reaches_target<'a>(network: &'a Network, target: &'a SiteId) -> BTreeSet<&'a SiteId> {
    let mut seen: BTreeSet<&SiteId> = BTreeSet::from([target]);
    let mut stack = vec![target];
    while let Some(s) = stack.pop() {
        for c in network.channels.values().filter(|c| c.outputs.contains(s)) {
            for i in &c.inputs {
                if seen.insert(i) {
                    stack.push(i);
                }
            }
        }
    }
    seen
}

/// Channel successors of a site in id order.
fn successors<'a>(
    network: &'a Network,
    consumers: &BTreeMap<&SiteId, Vec<&'a ChannelId>>,
    site: &SiteId,
    fact: &Fact,
    mode: Mode,
    useful: &BTreeSet<&SiteId>,
) -> Vec<(Hop, Emitted)> {
    let mut out = Vec::new();
    for cid in consumers.get(site).into_iter().flatten() {
        let channel = &network.channels[*cid];
        for o in &channel.outputs {
            if !useful.contains(o) {
                continue;
            }
            for e in transfer(channel, o, Some((site, fact))) {
                if e.survives(mode) {
                    let hop = Hop {
                        channel: (*cid).clone(),
                        from: Some(site.clone()),
                        to: o.clone(),
                    };
                    out.push((hop, e));
                }
            }
        }
    }
    out
}

fn accepts(q: &PathQuery<'_>, site: &SiteId, fact: &Fact, hops: &[Hop]) -> bool {
    site == q.target
        && !hops.is_empty()
        && q.tags.iter().any(|t| fact.matches(t))
        && q.via
            .is_none_or(|via| hops.iter().any(|h| via.contains(&h.channel)))
}

/// All qualifying simple paths, sorted by channel sequence, truncated at `max`.
pub(crate) fn enumerate(network: &Network, q: &PathQuery<'_>, max: usize) -> PathTrace {
    let consumers = network.consumers();
    let useful = reaches_target(network, q.target);
    let cap = max.saturating_mul(16).max(4096);
    let mut found: Vec<ImpactPath> = Vec::new();
    let mut exhausted = false;

    let mut stack: Vec<State> = Vec::new();
    for origin in &q.origins {
        stack.extend(start_states(network, origin, q.mode));
    }
    stack.reverse();
    while let Some(state) = stack.pop() {
        if accepts(q, &state.site, &state.fact, &state.hops) {
            found.push(ImpactPath {
                origin: state.fact.origin.clone(),
                hops: state.hops,
                tag: state.fact.tag,
                chain: state.fact.chain,
                blockers: state.blockers.into_iter().collect(),
            });
            if found.len() >= cap {
                exhausted = true;
                break;
            }
            continue;
        }
        if &state.site == q.target || !useful.contains(&state.site) {
            continue;
        }
        let mut next: Vec<State> = successors(
            network,
            &consumers,
            &state.site,
            &state.fact,
            q.mode,
            &useful,
        )
        .into_iter()
        .map(|(hop, e)| {
            let mut hops = state.hops.clone();
            hops.push(hop);
            let mut blockers = state.blockers.clone();
            blockers.extend(e.blockers);
            State {
                site: hops.last().expect("just pushed").to.clone(),
                fact: e.fact,
                hops,
                blockers,
            }
        })
        .collect();
        next.reverse();
        stack.extend(next);
    }

    found.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    found.dedup();
    let truncated = exhausted || found.len() > max;
    found.truncate(max);
    PathTrace {
        paths: found,
        truncated,
    }
}

/// Whether any qualifying path exists. Exact regardless of path counts.
pub(crate) fn exists(network: &Network, q: &PathQuery<'_>) -> bool {
    let consumers = network.consumers();
    let useful = reaches_target(network, q.target);
    let mut seen: BTreeSet<(SiteId, Fact, bool)> = BTreeSet::new();
    let mut stack: Vec<(SiteId, Fact, bool, bool)> = Vec::new();
    let crosses = |c: &ChannelId| q.via.is_none_or(|via| via.contains(c));
    for origin in &q.origins {
        for s in start_states(network, origin, q.mode) {
            let passed = q.via.is_none() || s.hops.iter().any(|h| crosses(&h.channel));
            let moved = !s.hops.is_empty();
            stack.push((s.site, s.fact, passed, moved));
        }
    }
    while let Some((site, fact, passed, moved)) = stack.pop() {
        if moved && passed && &site == q.target && q.tags.iter().any(|t| fact.matches(t)) {
            return true;
        }
        if &site == q.target || !useful.contains(&site) {
            continue;
        }
        if !seen.insert((site.clone(), fact.clone(), passed)) {
            continue;
        }
        for (hop, e) in successors(network, &consumers, &site, &fact, q.mode, &useful) {
            let passed = passed || crosses(&hop.channel);
            stack.push((hop.to, e.fact, passed, true));
        }
    }
    false
}

/// Simple channel paths from `origin` to `target` on which `tag` (or a
/// proxy derived from it) survives under `mode`.
pub fn trace_paths(
    network: &Network,
    origin: &Origin,
    target: &SiteId,
    tag: &FeatureTag,
    mode: Mode,
    max_paths: usize,
) -> Result<PathTrace, AnalysisError> {
    check_analyzable(network)?;
    check_origin(network, origin)?;
    if !network.sites.contains_key(target) {
        return Err(AnalysisError::UnknownSite(target.to_string()));
    }
    if !network.tag_universe().contains(tag) {
        return Err(AnalysisError::UnknownTag(tag.to_string()));
    }
    let tags = BTreeSet::from([tag.clone()]);
    let q = PathQuery {
        origins: vec![origin.clone()],
        target,
        tags: &tags,
        via: None,
        mode,
    };
    Ok(enumerate(network, &q, max_paths))
}
