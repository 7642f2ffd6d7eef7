use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::paths::{enumerate, exists, ImpactPath, PathQuery, DEFAULT_MAX_PATHS};
use super::propagate::check_analyzable;
use super::{AnalysisError, Mode, Origin};
use crate::model::{
    expand_configurations, AltId, ChannelId, FeatureTag, MitigationRef, Network, SiteId, Violation,
};

/// A stakeholder impact query: sensitive tags (or their proxies) arriving
/// at a target site constitute structural risk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub id: String,
    pub description: String,
    pub target: SiteId,
    pub tags: BTreeSet<FeatureTag>,
    /// Restrict to facts entering at these sites or channels. Empty means any.
    pub from: BTreeSet<String>,
    /// Restrict to paths crossing a channel of this subnet.
    pub via: Option<String>,
    pub note: String,
}

impl OutcomeSpec {
    pub fn new(id: impl Into<String>, target: impl Into<SiteId>, tags: &[&str]) -> Self {
        OutcomeSpec {
            id: id.into(),
            description: String::new(),
            target: target.into(),
            tags: tags.iter().map(|t| FeatureTag::from(*t)).collect(),
            from: BTreeSet::new(),
            via: None,
            note: String::new(),
        }
    }

    /// Checks every reference against `network`.
    pub fn check(&self, network: &Network) -> Result<(), AnalysisError> {
        if !network.sites.contains_key(&self.target) {
            return Err(AnalysisError::UnknownSite(self.target.to_string()));
        }
        let universe = network.tag_universe();
        if let Some(t) = self.tags.iter().find(|t| !universe.contains(*t)) {
            return Err(AnalysisError::UnknownTag(t.to_string()));
        }
        for id in &self.from {
            Origin::resolve(network, id)?;
        }
        if let Some(v) = &self.via {
            if !network.subnets.contains_key(v) {
                return Err(AnalysisError::UnknownSubnet(v.clone()));
            }
        }
        Ok(())
    }

    fn origins(&self, network: &Network) -> Vec<Origin> {
        if self.from.is_empty() {
            let sites = network.sites.keys().map(|s| Origin::Site(s.clone()));
            let channels = network.channels.keys().map(|c| Origin::Channel(c.clone()));
            return sites.chain(channels).collect();
        }
        let mut out: BTreeSet<Origin> = BTreeSet::new();
        for id in &self.from {
            if let Some(s) = network.sites.get(id.as_str()) {
                out.insert(Origin::Site(s.id.clone()));
            }
            if let Some(c) = network.channels.get(id.as_str()) {
                out.insert(Origin::Channel(c.id.clone()));
            }
        }
        out.into_iter().collect()
    }
}

/// A named impact pathway: channel sequences expected to be open for the
/// linked outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactSpec {
    pub id: String,
    pub description: String,
    pub outcomes: Vec<String>,
    pub paths: Vec<Vec<ChannelId>>,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// No path, even with conditional mitigations ineffective.
    Closed,
    /// Every path crosses a conditional mitigation.
    Conditional,
    /// Some path survives all mitigations.
    Open,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Open => "OPEN",
            Verdict::Conditional => "CONDITIONAL",
            Verdict::Closed => "CLOSED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeAssessment {
    pub outcome: String,
    pub verdict: Verdict,
    /// Paths with conditional mitigations assumed ineffective.
    pub open_paths: Vec<ImpactPath>,
    /// Paths surviving even effective conditional mitigations.
    pub unconditionally_open_paths: Vec<ImpactPath>,
    /// Smallest set of conditional mitigations blocking every path; only
    /// filled for CONDITIONAL verdicts.
    pub blocking_mitigations: Vec<MitigationRef>,
    pub truncated: bool,
}

/// Verdict and witnesses for one outcome on an alternative-free network.
pub fn assess_outcome(
    network: &Network,
    outcome: &OutcomeSpec,
) -> Result<OutcomeAssessment, AnalysisError> {
    assess_outcome_bounded(network, outcome, DEFAULT_MAX_PATHS)
}

pub fn assess_outcome_bounded(
    network: &Network,
    outcome: &OutcomeSpec,
    max_paths: usize,
) -> Result<OutcomeAssessment, AnalysisError> {
    check_analyzable(network)?;
    outcome.check(network)?;
    Ok(assess_unchecked(network, outcome, max_paths))
}

fn assess_unchecked(
    network: &Network,
    outcome: &OutcomeSpec,
    max_paths: usize,
) -> OutcomeAssessment {
    let via = outcome.via.as_ref().map(|v| network.subnet_channels(v));
    let origins = outcome.origins(network);
    let query = |mode| PathQuery {
        origins: origins.clone(),
        target: &outcome.target,
        tags: &outcome.tags,
        via: via.as_ref(),
        mode,
    };
    let opt_q = query(Mode::Optimistic);
    let pess_q = query(Mode::Pessimistic);
    let verdict = if exists(network, &opt_q) {
        Verdict::Open
    } else if exists(network, &pess_q) {
        Verdict::Conditional
    } else {
        Verdict::Closed
    };
    let pess = enumerate(network, &pess_q, max_paths);
    let opt = enumerate(network, &opt_q, max_paths);
    let blocking_mitigations = if verdict == Verdict::Conditional {
        let sets: Vec<BTreeSet<MitigationRef>> = pess
            .paths
            .iter()
            .map(|p| p.blockers.iter().cloned().collect())
            .collect();
        minimum_blocking_set(&sets)
    } else {
        Vec::new()
    };
    OutcomeAssessment {
        outcome: outcome.id.clone(),
        verdict,
        truncated: pess.truncated || opt.truncated,
        open_paths: pess.paths,
        unconditionally_open_paths: opt.paths,
        blocking_mitigations,
    }
}

/// Minimum-cardinality set hitting every given set; ties broken by the
/// lexicographically smallest sorted member list. Falls back to a greedy
/// cover above twenty candidates.
pub fn minimum_blocking_set(sets: &[BTreeSet<MitigationRef>]) -> Vec<MitigationRef> {
    let universe: Vec<&MitigationRef> = sets
        .iter()
        .flatten()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let hits =
        |chosen: &[&MitigationRef]| sets.iter().all(|s| chosen.iter().any(|m| s.contains(*m)));
    if universe.len() <= 20 {
        for k in 0..=universe.len() {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                let chosen: Vec<&MitigationRef> = idx.iter().map(|i| universe[*i]).collect();
                if hits(&chosen) {
                    return chosen.into_iter().cloned().collect();
                }
                // next k-combination in lexicographic order
                let mut i = k;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    if idx[i] != i + universe.len() - k {
                        idx[i] += 1;
                        for j in i + 1..k {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                    if i == 0 {
                        idx.clear();
                        break;
                    }
                }
                if idx.len() != k || k == 0 {
                    break;
                }
            }
        }
        return universe.into_iter().cloned().collect();
    }
    let mut remaining: Vec<&BTreeSet<MitigationRef>> = sets.iter().collect();
    let mut chosen = BTreeSet::new();
    while !remaining.is_empty() {
        let best = universe
            .iter()
            .max_by_key(|m| {
                (
                    remaining.iter().filter(|s| s.contains(**m)).count(),
                    std::cmp::Reverse(**m),
                )
            })
            .expect("nonempty sets have members");
        chosen.insert((*best).clone());
        remaining.retain(|s| !s.contains(*best));
    }
    chosen.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationAssessment {
    pub name: String,
    pub assignment: BTreeMap<AltId, String>,
    /// Violations of the resolved network; assessments are empty when set.
    pub violations: Vec<Violation>,
    pub assessments: Vec<OutcomeAssessment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeAggregate {
    pub outcome: String,
    pub any_configuration_open: bool,
    /// Strictest verdict over valid configurations.
    pub worst: Verdict,
    pub verdicts: BTreeMap<String, Verdict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentMatrix {
    pub configurations: Vec<ConfigurationAssessment>,
    pub aggregate: Vec<OutcomeAggregate>,
}

impl AssessmentMatrix {
    pub fn configuration(&self, name: &str) -> Option<&ConfigurationAssessment> {
        self.configurations.iter().find(|c| c.name == name)
    }

    /// Strictest verdict anywhere, `None` when there are no outcomes.
    pub fn worst(&self) -> Option<Verdict> {
        self.aggregate.iter().map(|a| a.worst).max()
    }

    pub fn has_invalid_configuration(&self) -> bool {
        self.configurations.iter().any(|c| !c.violations.is_empty())
    }
}

/// Assesses every outcome in every configuration, in configuration order.
pub fn assess_all(
    network: &Network,
    outcomes: &[OutcomeSpec],
    max_paths: usize,
) -> Result<AssessmentMatrix, AnalysisError> {
    for o in outcomes {
        o.check(network)?;
    }
    let configs = expand_configurations(network);
    let configurations: Vec<ConfigurationAssessment> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                scope.spawn(move || {
                    let assessments = if cfg.is_valid() {
                        outcomes
                            .iter()
                            .map(|o| assess_unchecked(&cfg.network, o, max_paths))
                            .collect()
                    } else {
                        Vec::new()
                    };
                    ConfigurationAssessment {
                        name: cfg.name(),
                        assignment: cfg.assignment.clone(),
                        violations: cfg.report.violations.clone(),
                        assessments,
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("assessment thread panicked"))
            .collect()
    });

    let aggregate = outcomes
        .iter()
        .map(|o| {
            let verdicts: BTreeMap<String, Verdict> = configurations
                .iter()
                .filter_map(|c| {
                    c.assessments
                        .iter()
                        .find(|a| a.outcome == o.id)
                        .map(|a| (c.name.clone(), a.verdict))
                })
                .collect();
            OutcomeAggregate {
                outcome: o.id.clone(),
                any_configuration_open: verdicts.values().any(|v| *v == Verdict::Open),
                worst: verdicts.values().copied().max().unwrap_or(Verdict::Closed),
                verdicts,
            }
        })
        .collect();
    Ok(AssessmentMatrix {
        configurations,
        aggregate,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactStatus {
    pub id: String,
    /// Every declared path is unconditionally open for a linked outcome.
    pub open: bool,
    /// Declared paths that were not found open.
    pub missing: Vec<Vec<ChannelId>>,
}

/// Matches declared impact pathways against one configuration's assessments.
pub fn impact_statuses(
    impacts: &[ImpactSpec],
    assessments: &[OutcomeAssessment],
) -> Vec<ImpactStatus> {
    impacts
        .iter()
        .map(|imp| {
            let open: BTreeSet<Vec<&ChannelId>> = assessments
                .iter()
                .filter(|a| imp.outcomes.contains(&a.outcome))
                .flat_map(|a| {
                    a.unconditionally_open_paths
                        .iter()
                        .map(ImpactPath::channels)
                })
                .collect();
            let missing: Vec<Vec<ChannelId>> = imp
                .paths
                .iter()
                .filter(|p| !open.contains(&p.iter().collect::<Vec<_>>()))
                .cloned()
                .collect();
            ImpactStatus {
                id: imp.id.clone(),
                open: missing.is_empty() && !imp.paths.is_empty(),
                missing,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(names: &[&str]) -> BTreeSet<MitigationRef> {
        names
            .iter()
            .map(|n| MitigationRef::parse(n).unwrap())
            .collect()
    }

    #[test]
    fn hitting_set_prefers_smallest() {
        let sets = vec![refs(&["b1.n"]), refs(&["b2.n"]), refs(&["a.d", "b2.n"])];
        let h = minimum_blocking_set(&sets);
        assert_eq!(
            h.iter().map(ToString::to_string).collect::<Vec<_>>(),
            vec!["b1.n", "b2.n"]
        );
    }

    #[test]
    fn hitting_set_empty_input() {
        assert!(minimum_blocking_set(&[]).is_empty());
    }

    #[test]
    fn hitting_set_single_shared_member() {
        let sets = vec![refs(&["a.x", "b.y"]), refs(&["b.y", "c.z"])];
        assert_eq!(
            minimum_blocking_set(&sets),
            vec![MitigationRef::parse("b.y").unwrap()]
        );
    }

    #[test]
    fn verdict_order_is_strictness() {
        assert!(Verdict::Open > Verdict::Conditional);
        assert!(Verdict::Conditional > Verdict::Closed);
    }
}
