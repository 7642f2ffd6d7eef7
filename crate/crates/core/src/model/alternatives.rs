//! `?`-marked alternatives and their expansion into alternative-free
//! configurations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::flow::Carry;
use super::ids::{AltId, ChannelId, SiteId};
use super::network::Network;
use super::validate::{validate, ValidationReport};

/// A structural element whose presence an alternative controls.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Toggle {
    /// The edge from `input` into `channel`.
    Edge {
        channel: ChannelId,
        input: SiteId,
    },
    Channel {
        channel: ChannelId,
    },
    Mitigation {
        channel: ChannelId,
        mitigation: String,
    },
}

impl fmt::Display for Toggle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Toggle::Edge { channel, input } => write!(f, "edge {input} -> {channel}"),
            Toggle::Channel { channel } => write!(f, "channel {channel}"),
            Toggle::Mitigation {
                channel,
                mitigation,
            } => write!(f, "mitigation {channel}.{mitigation}"),
        }
    }
}

/// A named member of an alternative set: the controlled elements it keeps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub present: BTreeSet<Toggle>,
}

/// Name used for the empty (∅) member.
pub const ABSENT: &str = "absent";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativeSet {
    pub id: AltId,
    pub variants: Vec<Variant>,
    /// Whether ∅ is a member.
    pub includes_absent: bool,
}

impl AlternativeSet {
    /// `A? = ?{A, ∅}` over a single element.
    pub fn optional(id: impl Into<AltId>, variant: &str, toggle: Toggle) -> Self {
        AlternativeSet {
            id: id.into(),
            variants: vec![Variant {
                name: variant.to_string(),
                present: [toggle].into_iter().collect(),
            }],
            includes_absent: true,
        }
    }

    pub fn member_count(&self) -> usize {
        self.variants.len() + usize::from(self.includes_absent)
    }

    /// Member names in declaration order, `absent` last.
    pub fn member_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        if self.includes_absent {
            names.push(ABSENT);
        }
        names
    }

    /// Every element any member controls.
    pub fn controlled(&self) -> BTreeSet<&Toggle> {
        self.variants.iter().flat_map(|v| &v.present).collect()
    }

    fn kept_by(&self, member: &str) -> Option<BTreeSet<&Toggle>> {
        if member == ABSENT && self.includes_absent {
            return Some(BTreeSet::new());
        }
        self.variants
            .iter()
            .find(|v| v.name == member)
            .map(|v| v.present.iter().collect())
    }
}

/// One fully resolved, alternative-free network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub assignment: BTreeMap<AltId, String>,
    pub network: Network,
    /// Empty when the resolved network is valid.
    pub report: ValidationReport,
}

impl Configuration {
    /// `alt=member` pairs joined by commas; `base` when there are none.
    pub fn name(&self) -> String {
        configuration_name(&self.assignment)
    }

    pub fn is_valid(&self) -> bool {
        self.report.is_valid()
    }
}

pub fn configuration_name(assignment: &BTreeMap<AltId, String>) -> String {
    if assignment.is_empty() {
        return "base".to_string();
    }
    assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Removes one controlled element from the network. Unknown targets are a no-op.
pub(crate) fn remove_element(network: &mut Network, toggle: &Toggle) {
    match toggle {
        Toggle::Edge { channel, input } => {
            if let Some(c) = network.channels.get_mut(channel) {
                c.inputs.retain(|i| i != input);
                for f in c.flow.outputs.values_mut() {
                    match &mut f.carries {
                        Carry::All => {}
                        Carry::Explicit(map) => {
                            map.remove(input);
                        }
                        Carry::Summary(entries) => {
                            entries.retain(|e| e.input.as_ref() != Some(input));
                        }
                    }
                }
                if let Some(def) = c.definition.as_deref_mut() {
                    let readers: Vec<ChannelId> = def
                        .channels
                        .values()
                        .filter(|d| d.inputs.contains(input))
                        .map(|d| d.id.clone())
                        .collect();
                    for r in readers {
                        remove_element(
                            def,
                            &Toggle::Edge {
                                channel: r,
                                input: input.clone(),
                            },
                        );
                    }
                    let referenced = def
                        .channels
                        .values()
                        .any(|d| d.inputs.contains(input) || d.outputs.contains(input));
                    if !referenced {
                        def.sites.remove(input);
                    }
                }
            }
        }
        Toggle::Channel { channel } => {
            network.channels.remove(channel);
        }
        Toggle::Mitigation {
            channel,
            mitigation,
        } => {
            if let Some(c) = network.channels.get_mut(channel) {
                for f in c.flow.outputs.values_mut() {
                    f.drops.remove(mitigation);
                }
            }
        }
    }
}

/// Resolves the given member choice for each alternative set. Sets not in
/// `assignment` must not exist; the result carries no alternatives.
pub fn resolve(network: &Network, assignment: &BTreeMap<AltId, String>) -> Result<Network, String> {
    let mut out = network.clone();
    out.alternatives.clear();
    for (id, alt) in &network.alternatives {
        let member = assignment
            .get(id)
            .ok_or_else(|| format!("no member chosen for alternative `{id}`"))?;
        let kept = alt
            .kept_by(member)
            .ok_or_else(|| format!("alternative `{id}` has no member `{member}`"))?;
        for toggle in alt.controlled() {
            if !kept.contains(toggle) {
                remove_element(&mut out, toggle);
            }
        }
    }
    Ok(out)
}

/// Cartesian product over all alternative sets, in declaration order of
/// set ids and member order. Each configuration carries its own
/// validation report.
pub fn expand_configurations(network: &Network) -> Vec<Configuration> {
    let mut assignments: Vec<BTreeMap<AltId, String>> = vec![BTreeMap::new()];
    for (id, alt) in &network.alternatives {
        let mut next = Vec::with_capacity(assignments.len() * alt.member_count());
        for partial in &assignments {
            for member in alt.member_names() {
                let mut a = partial.clone();
                a.insert(id.clone(), member.to_string());
                next.push(a);
            }
        }
        assignments = next;
    }
    assignments
        .into_iter()
        .map(|assignment| {
            let resolved = resolve(network, &assignment).expect("assignment built from the sets");
            let report = validate(&resolved);
            Configuration {
                assignment,
                network: resolved,
                report,
            }
        })
        .collect()
}
