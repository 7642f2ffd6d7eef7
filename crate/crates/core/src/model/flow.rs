//! Per-channel flow declarations: which feature tags a channel carries from
//! each input to each output, which it drops, introduces, or re-emits under
//! a proxy name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::{ChannelId, FeatureTag, SiteId};

/// Selection of tags carried from one input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSelection {
    All,
    Tags(BTreeSet<FeatureTag>),
}

impl TagSelection {
    pub fn contains(&self, tag: &FeatureTag) -> bool {
        match self {
            TagSelection::All => true,
            TagSelection::Tags(tags) => tags.contains(tag),
        }
    }
}

/// One row of a summarized (abstract) channel's transfer relation.
///
/// `input == None` rows describe tags introduced inside the summarized
/// network. `via` is the sequence of proxy sources crossed inside, appended
/// to a fact's proxy chain when it passes the channel.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub input: Option<SiteId>,
    pub from: Option<FeatureTag>,
    pub via: Vec<FeatureTag>,
    pub to: FeatureTag,
    /// Holds only when conditional mitigations inside are ineffective.
    pub conditional: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carry {
    /// Every input tag reaches the output.
    #[default]
    All,
    /// Inputs not listed carry nothing.
    Explicit(BTreeMap<SiteId, TagSelection>),
    /// Exact transfer relation of a summarized network. Drops, introduces
    /// and proxies on the same output are descriptive only.
    Summary(BTreeSet<SummaryEntry>),
}

impl Carry {
    /// Whether `tag` present at `input` enters the transformation (ignoring drops).
    pub fn admits(&self, input: &SiteId, tag: &FeatureTag) -> bool {
        match self {
            Carry::All => true,
            Carry::Explicit(map) => map.get(input).is_some_and(|sel| sel.contains(tag)),
            Carry::Summary(entries) => entries
                .iter()
                .any(|e| e.input.as_ref() == Some(input) && e.from.as_ref() == Some(tag)),
        }
    }
}

/// A declared drop of feature tags ("targeted information loss").
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mitigation {
    pub id: String,
    pub tags: BTreeSet<FeatureTag>,
    /// Effective only under the optimistic assumption.
    pub conditional: bool,
    pub note: String,
}

/// Fully qualified reference to a mitigation, printed as `channel.id`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MitigationRef {
    pub channel: ChannelId,
    pub id: String,
}

impl MitigationRef {
    pub fn new(channel: impl Into<ChannelId>, id: impl Into<String>) -> Self {
        MitigationRef {
            channel: channel.into(),
            id: id.into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (channel, id) = s.split_once('.')?;
        if channel.is_empty() || id.is_empty() {
            return None;
        }
        Some(MitigationRef::new(channel, id))
    }
}

impl fmt::Display for MitigationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.channel, self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Introduce {
    pub tag: FeatureTag,
    /// Open-vocabulary bias kind label.
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Proxy {
    pub source: FeatureTag,
    pub proxy: FeatureTag,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFlow {
    pub carries: Carry,
    pub drops: BTreeMap<String, Mitigation>,
    pub introduces: BTreeSet<Introduce>,
    pub proxies: BTreeSet<Proxy>,
}

impl OutputFlow {
    /// Tags removed under the given assumption about conditional mitigations.
    pub fn active_drops(&self, conditional_effective: bool) -> BTreeSet<&FeatureTag> {
        self.drops
            .values()
            .filter(|m| conditional_effective || !m.conditional)
            .flat_map(|m| m.tags.iter())
            .collect()
    }

    /// Conditional mitigations on this output that drop `tag`.
    pub fn conditional_blockers<'a>(
        &'a self,
        tag: &'a FeatureTag,
    ) -> impl Iterator<Item = &'a Mitigation> + 'a {
        self.drops
            .values()
            .filter(move |m| m.conditional && m.tags.contains(tag))
    }

    pub fn is_default(&self) -> bool {
        *self == OutputFlow::default()
    }
}

/// Flow declaration for one channel, keyed by output site.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub outputs: BTreeMap<SiteId, OutputFlow>,
}

impl FlowSpec {
    /// Default flow for the given outputs: everything propagates.
    pub fn carry_all(outputs: &[SiteId]) -> Self {
        FlowSpec {
            outputs: outputs
                .iter()
                .map(|o| (o.clone(), OutputFlow::default()))
                .collect(),
        }
    }

    pub fn output(&self, site: &SiteId) -> Option<&OutputFlow> {
        self.outputs.get(site)
    }

    /// All mitigations on all outputs, deduplicated by id.
    pub fn mitigations(&self) -> BTreeMap<&str, &Mitigation> {
        self.outputs
            .values()
            .flat_map(|f| f.drops.values())
            .map(|m| (m.id.as_str(), m))
            .collect()
    }

    pub fn introduced_tags(&self) -> BTreeSet<&FeatureTag> {
        self.outputs
            .values()
            .flat_map(|f| f.introduces.iter().map(|i| &i.tag))
            .collect()
    }
}
