use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::alternatives::AlternativeSet;
use super::flow::FlowSpec;
use super::ids::{ActorId, AltId, ChannelId, FeatureTag, SiteId, TypeId};
use super::types::TypeSystem;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    /// Display name; empty means "use the id".
    pub name: String,
    pub types: BTreeSet<TypeId>,
    pub actor: Option<ActorId>,
    pub seeds: BTreeSet<FeatureTag>,
    pub subnet: Option<String>,
}

impl Site {
    pub fn new(id: impl Into<SiteId>) -> Self {
        Site {
            id: id.into(),
            name: String::new(),
            types: BTreeSet::new(),
            actor: None,
            seeds: BTreeSet::new(),
            subnet: None,
        }
    }

    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            self.id.as_str()
        } else {
            &self.name
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: ChannelId,
    pub name: String,
    /// What the channel does, e.g. "Feature extraction".
    #[serde(default)]
    pub operation: String,
    pub inputs: Vec<SiteId>,
    pub outputs: Vec<SiteId>,
    pub types: BTreeSet<TypeId>,
    pub actor: Option<ActorId>,
    pub subnet: Option<String>,
    pub flow: FlowSpec,
    pub bias_kinds: BTreeSet<String>,
    /// Interior network for an abstract channel.
    pub definition: Option<Box<Network>>,
}

impl Channel {
    /// A channel with the default carry-everything flow.
    pub fn new(
        id: impl Into<ChannelId>,
        inputs: impl IntoIterator<Item = impl Into<SiteId>>,
        outputs: impl IntoIterator<Item = impl Into<SiteId>>,
    ) -> Self {
        let inputs: Vec<SiteId> = inputs.into_iter().map(Into::into).collect();
        let outputs: Vec<SiteId> = outputs.into_iter().map(Into::into).collect();
        let flow = FlowSpec::carry_all(&outputs);
        Channel {
            id: id.into(),
            name: String::new(),
            operation: String::new(),
            inputs,
            outputs,
            types: BTreeSet::new(),
            actor: None,
            subnet: None,
            flow,
            bias_kinds: BTreeSet::new(),
            definition: None,
        }
    }

    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            self.id.as_str()
        } else {
            &self.name
        }
    }
}

/// A named grouping of sites and channels. Groupings nest via `parent`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subnet {
    pub name: String,
    pub parent: Option<String>,
    /// Channel id used when the grouping is collapsed into one channel.
    pub abstract_id: Option<ChannelId>,
    /// Presentation hint.
    pub color: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    /// Declared feature-tag vocabulary.
    pub tags: BTreeSet<FeatureTag>,
    pub type_system: TypeSystem,
    pub sites: BTreeMap<SiteId, Site>,
    pub channels: BTreeMap<ChannelId, Channel>,
    pub subnets: BTreeMap<String, Subnet>,
    pub alternatives: BTreeMap<AltId, AlternativeSet>,
}

/// Partition of the sites of a valid network.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteClasses {
    #[serde(rename = "in")]
    pub inputs: BTreeSet<SiteId>,
    #[serde(rename = "out")]
    pub outputs: BTreeSet<SiteId>,
    pub mid: BTreeSet<SiteId>,
}

impl Network {
    pub fn add_site(&mut self, site: Site) {
        self.sites.insert(site.id.clone(), site);
    }

    /// Adds a channel, creating any referenced site that does not exist yet.
    pub fn add_channel(&mut self, channel: Channel) {
        for s in channel.inputs.iter().chain(&channel.outputs) {
            if !self.sites.contains_key(s) {
                self.add_site(Site::new(s.clone()));
            }
        }
        self.channels.insert(channel.id.clone(), channel);
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.get(id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.get(id)
    }

    /// Site → channels producing it (valid networks have at most one).
    pub fn producers(&self) -> BTreeMap<&SiteId, Vec<&ChannelId>> {
        let mut map: BTreeMap<&SiteId, Vec<&ChannelId>> = BTreeMap::new();
        for c in self.channels.values() {
            for o in &c.outputs {
                map.entry(o).or_default().push(&c.id);
            }
        }
        map
    }

    /// Site → channels consuming it, in channel id order.
    pub fn consumers(&self) -> BTreeMap<&SiteId, Vec<&ChannelId>> {
        let mut map: BTreeMap<&SiteId, Vec<&ChannelId>> = BTreeMap::new();
        for c in self.channels.values() {
            for i in &c.inputs {
                let list = map.entry(i).or_default();
                if !list.contains(&&c.id) {
                    list.push(&c.id);
                }
            }
        }
        map
    }

    /// In/Out/Mid partition by direct scan. Callers are expected to have
    /// validated the network; see [`crate::model::classify_sites`].
    pub(crate) fn classes_unchecked(&self) -> SiteClasses {
        let produced: BTreeSet<&SiteId> = self.channels.values().flat_map(|c| &c.outputs).collect();
        let consumed: BTreeSet<&SiteId> = self.channels.values().flat_map(|c| &c.inputs).collect();
        let mut classes = SiteClasses::default();
        for id in self.sites.keys() {
            if !produced.contains(id) {
                classes.inputs.insert(id.clone());
            } else if !consumed.contains(id) {
                classes.outputs.insert(id.clone());
            } else {
                classes.mid.insert(id.clone());
            }
        }
        // A site that is neither produced nor consumed is both In and Out by
        // the set definitions; keep the partition disjoint by listing it as In.
        classes
    }

    /// Subnet `name` together with every subnet nested beneath it.
    pub fn subnet_closure(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(name.to_string());
        loop {
            let before = out.len();
            for s in self.subnets.values() {
                if let Some(p) = &s.parent {
                    if out.contains(p) {
                        out.insert(s.name.clone());
                    }
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }

    /// Channels grouped under `subnet`, nested groupings included.
    pub fn subnet_channels(&self, subnet: &str) -> BTreeSet<ChannelId> {
        let names = self.subnet_closure(subnet);
        self.channels
            .values()
            .filter(|c| c.subnet.as_ref().is_some_and(|s| names.contains(s)))
            .map(|c| c.id.clone())
            .collect()
    }

    /// Every feature tag mentioned anywhere in the network.
    pub fn tag_universe(&self) -> BTreeSet<FeatureTag> {
        use super::flow::{Carry, TagSelection};
        let mut tags = self.tags.clone();
        for s in self.sites.values() {
            tags.extend(s.seeds.iter().cloned());
        }
        for c in self.channels.values() {
            for f in c.flow.outputs.values() {
                for m in f.drops.values() {
                    tags.extend(m.tags.iter().cloned());
                }
                for i in &f.introduces {
                    tags.insert(i.tag.clone());
                }
                for p in &f.proxies {
                    tags.insert(p.source.clone());
                    tags.insert(p.proxy.clone());
                }
                match &f.carries {
                    Carry::All => {}
                    Carry::Explicit(map) => {
                        for sel in map.values() {
                            if let TagSelection::Tags(t) = sel {
                                tags.extend(t.iter().cloned());
                            }
                        }
                    }
                    Carry::Summary(entries) => {
                        for e in entries {
                            tags.extend(e.from.iter().cloned());
                            tags.extend(e.via.iter().cloned());
                            tags.insert(e.to.clone());
                        }
                    }
                }
            }
        }
        tags
    }
}
