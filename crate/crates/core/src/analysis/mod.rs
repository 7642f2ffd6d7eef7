//! Downstream bias propagation, upstream impact tracing, verdicts under
//! mitigation assumptions, what-if scenarios and channel summaries.
//!
//! Every fact the engine tracks is a feature tag with provenance: the point
//! where it entered the network (a seeded input site or an introducing
//! channel) and the chain of tags it was derived from through proxies.
//! Channels transform facts one at a time, so reachability is an exact
//! least fixpoint over the topological order.

mod assess;
mod paths;
mod propagate;
mod summary;
mod whatif;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChannelId, FeatureTag, ModelError, Network, SiteId, ValidationReport};

pub use assess::{
    assess_all, assess_outcome, assess_outcome_bounded, impact_statuses, minimum_blocking_set,
    AssessmentMatrix, ConfigurationAssessment, ImpactSpec, ImpactStatus, OutcomeAggregate,
    OutcomeAssessment, OutcomeSpec, Verdict,
};
pub use paths::{trace_paths, Hop, ImpactPath, PathTrace, DEFAULT_MAX_PATHS};
pub use propagate::{downstream_of, propagate_features, upstream_of, FeatureMap};
pub use summary::summarize_as_channel;
pub use whatif::{
    apply_edits, what_if, AssessmentDelta, Edit, OutcomeChange, PathChange, PathStatus,
};

/// Assumption about conditional mitigations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Conditional mitigations are effective.
    Optimistic,
    /// Conditional mitigations are ineffective.
    Pessimistic,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Optimistic, Mode::Pessimistic];

    pub fn conditional_effective(self) -> bool {
        matches!(self, Mode::Optimistic)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opt" | "optimistic" => Ok(Mode::Optimistic),
            "pess" | "pessimistic" => Ok(Mode::Pessimistic),
            other => Err(format!("unknown mode `{other}` (expected opt or pess)")),
        }
    }
}

/// Where a fact entered the network.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Origin {
    Site(SiteId),
    Channel(ChannelId),
}

impl Origin {
    pub fn id(&self) -> &str {
        match self {
            Origin::Site(s) => s.as_str(),
            Origin::Channel(c) => c.as_str(),
        }
    }

    /// Resolves a bare id against the network, preferring sites. Ids may be
    /// prefixed with `site:` or `channel:` to disambiguate.
    pub fn resolve(network: &Network, id: &str) -> Result<Origin, AnalysisError> {
        if let Some(rest) = id.strip_prefix("site:") {
            return network
                .site(rest)
                .map(|s| Origin::Site(s.id.clone()))
                .ok_or_else(|| AnalysisError::UnknownId(id.to_string()));
        }
        if let Some(rest) = id.strip_prefix("channel:") {
            return network
                .channel(rest)
                .map(|c| Origin::Channel(c.id.clone()))
                .ok_or_else(|| AnalysisError::UnknownId(id.to_string()));
        }
        if let Some(s) = network.site(id) {
            Ok(Origin::Site(s.id.clone()))
        } else if let Some(c) = network.channel(id) {
            Ok(Origin::Channel(c.id.clone()))
        } else {
            Err(AnalysisError::UnknownId(id.to_string()))
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A feature tag at a site, with provenance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub tag: FeatureTag,
    pub origin: Origin,
    /// Tags this one was derived from through proxies, oldest first.
    pub chain: Vec<FeatureTag>,
}

impl Fact {
    pub fn new(tag: impl Into<FeatureTag>, origin: Origin) -> Self {
        Fact {
            tag: tag.into(),
            origin,
            chain: Vec::new(),
        }
    }

    /// True when the fact is `tag` or descends from it through proxies.
    pub fn matches(&self, tag: &FeatureTag) -> bool {
        &self.tag == tag || self.chain.contains(tag)
    }

    /// The tag as it entered the network.
    pub fn root(&self) -> &FeatureTag {
        self.chain.first().unwrap_or(&self.tag)
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("network has unresolved alternatives; analyze a configuration")]
    UnresolvedAlternatives,
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("unknown feature tag `{0}`")]
    UnknownTag(String),
    #[error("unknown subnet `{0}`")]
    UnknownSubnet(String),
    #[error("invalid edit `{edit}`: {reason}")]
    InvalidEdit { edit: String, reason: String },
    #[error("edited network is invalid")]
    EditedNetworkInvalid(ValidationReport),
}
