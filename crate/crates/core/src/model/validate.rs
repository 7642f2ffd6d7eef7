//! Structural laws of a network. Violations are data, never failures.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::alternatives::Toggle;
use super::flow::Carry;
use super::ids::{ChannelId, SiteId};
use super::network::Network;
use super::types::TypeViolation;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Witness path of sites, first and last equal.
    Cycle {
        sites: Vec<SiteId>,
    },
    DualProducer {
        site: SiteId,
        channels: Vec<ChannelId>,
    },
    DanglingReference {
        context: String,
        target: String,
    },
    InputOutputOverlap {
        channel: ChannelId,
        sites: Vec<SiteId>,
    },
    EmptyEndpoints {
        channel: ChannelId,
        side: String,
    },
    DuplicateEndpoint {
        channel: ChannelId,
        site: SiteId,
    },
    SeedOnProducedSite {
        site: SiteId,
    },
    FlowConflict {
        channel: ChannelId,
        detail: String,
    },
    NestingBoundary {
        channel: ChannelId,
        detail: String,
    },
    TypeSystem {
        violation: TypeViolation,
    },
    Alternative {
        alt: String,
        detail: String,
    },
    SubnetCycle {
        subnet: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
            items
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(sep)
        }
        match self {
            Violation::Cycle { sites } => write!(f, "cycle through sites [{}]", join(sites, ", ")),
            Violation::DualProducer { site, channels } => write!(
                f,
                "site `{site}` is the output of more than one channel ({})",
                join(channels, ", ")
            ),
            Violation::DanglingReference { context, target } => {
                write!(f, "{context} references unknown `{target}`")
            }
            Violation::InputOutputOverlap { channel, sites } => write!(
                f,
                "channel `{channel}` has sites both as input and output ({})",
                join(sites, ", ")
            ),
            Violation::EmptyEndpoints { channel, side } => {
                write!(f, "channel `{channel}` has no {side}")
            }
            Violation::DuplicateEndpoint { channel, site } => {
                write!(f, "channel `{channel}` lists `{site}` twice")
            }
            Violation::SeedOnProducedSite { site } => {
                write!(
                    f,
                    "site `{site}` has seed tags but is produced by a channel"
                )
            }
            Violation::FlowConflict { channel, detail } => {
                write!(f, "channel `{channel}`: {detail}")
            }
            Violation::NestingBoundary { channel, detail } => {
                write!(f, "definition of channel `{channel}`: {detail}")
            }
            Violation::TypeSystem { violation } => write!(f, "type system: {violation}"),
            Violation::Alternative { alt, detail } => write!(f, "alternative `{alt}`: {detail}"),
            Violation::SubnetCycle { subnet } => {
                write!(f, "subnet `{subnet}` is nested inside itself")
            }
        }
    }
}

impl Violation {
    /// Stable diagnostic code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::Cycle { .. } => "V001",
            Violation::DualProducer { .. } => "V002",
            Violation::DanglingReference { .. } => "V003",
            Violation::InputOutputOverlap { .. } => "V004",
            Violation::EmptyEndpoints { .. } => "V005",
            Violation::DuplicateEndpoint { .. } => "V006",
            Violation::SeedOnProducedSite { .. } => "V007",
            Violation::FlowConflict { .. } => "V008",
            Violation::NestingBoundary { .. } => "V009",
            Violation::TypeSystem { .. } => "V010",
            Violation::Alternative { .. } => "V011",
            Violation::SubnetCycle { .. } => "V012",
        }
    }

    /// The model element the violation is best reported against.
    pub fn subject(&self) -> Option<String> {
        match self {
            Violation::Cycle { sites } => sites.first().map(ToString::to_string),
            Violation::DualProducer { site, .. } | Violation::SeedOnProducedSite { site } => {
                Some(site.to_string())
            }
            Violation::InputOutputOverlap { channel, .. }
            | Violation::EmptyEndpoints { channel, .. }
            | Violation::DuplicateEndpoint { channel, .. }
            | Violation::FlowConflict { channel, .. }
            | Violation::NestingBoundary { channel, .. } => Some(channel.to_string()),
            Violation::Alternative { alt, .. } => Some(alt.clone()),
            Violation::SubnetCycle { subnet } => Some(subnet.clone()),
            Violation::DanglingReference { context, .. } => {
                context.split('`').nth(1).map(str::to_string)
            }
            Violation::TypeSystem { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural law and returns all violations found.
pub fn validate(network: &Network) -> ValidationReport {
    let mut v = Vec::new();

    v.extend(
        network
            .type_system
            .check()
            .into_iter()
            .map(|violation| Violation::TypeSystem { violation }),
    );

    check_references(network, &mut v);
    check_channels(network, &mut v);

    for (site, channels) in network.producers() {
        if channels.len() > 1 {
            v.push(Violation::DualProducer {
                site: site.clone(),
                channels: channels.into_iter().cloned().collect(),
            });
        }
    }
    let produced: BTreeSet<&SiteId> = network.channels.values().flat_map(|c| &c.outputs).collect();
    for s in network.sites.values() {
        if !s.seeds.is_empty() && produced.contains(&s.id) {
            v.push(Violation::SeedOnProducedSite { site: s.id.clone() });
        }
    }

    v.extend(find_cycles(network));
    check_subnets(network, &mut v);
    check_alternatives(network, &mut v);
    check_definitions(network, &mut v);

    ValidationReport { violations: v }
}

fn check_references(network: &Network, v: &mut Vec<Violation>) {
    let ts = &network.type_system;
    for s in network.sites.values() {
        for t in &s.types {
            if !ts.types.contains(t) {
                v.push(Violation::DanglingReference {
                    context: format!("site `{}` type", s.id),
                    target: t.to_string(),
                });
            }
        }
        if let Some(sub) = &s.subnet {
            if !network.subnets.contains_key(sub) {
                v.push(Violation::DanglingReference {
                    context: format!("site `{}` subnet", s.id),
                    target: sub.clone(),
                });
            }
        }
    }
    for c in network.channels.values() {
        for s in c.inputs.iter().chain(&c.outputs) {
            if !network.sites.contains_key(s) {
                v.push(Violation::DanglingReference {
                    context: format!("channel `{}`", c.id),
                    target: s.to_string(),
                });
            }
        }
        for t in &c.types {
            if !ts.types.contains(t) {
                v.push(Violation::DanglingReference {
                    context: format!("channel `{}` type", c.id),
                    target: t.to_string(),
                });
            }
        }
        if let Some(sub) = &c.subnet {
            if !network.subnets.contains_key(sub) {
                v.push(Violation::DanglingReference {
                    context: format!("channel `{}` subnet", c.id),
                    target: sub.clone(),
                });
            }
        }
    }
}

fn check_channels(network: &Network, v: &mut Vec<Violation>) {
    for c in network.channels.values() {
        if c.inputs.is_empty() {
            v.push(Violation::EmptyEndpoints {
                channel: c.id.clone(),
                side: "inputs".into(),
            });
        }
        if c.outputs.is_empty() {
            v.push(Violation::EmptyEndpoints {
                channel: c.id.clone(),
                side: "outputs".into(),
            });
        }
        for side in [&c.inputs, &c.outputs] {
            let mut seen = BTreeSet::new();
            for s in side {
                if !seen.insert(s) {
                    v.push(Violation::DuplicateEndpoint {
                        channel: c.id.clone(),
                        site: s.clone(),
                    });
                }
            }
        }
        let overlap: Vec<SiteId> = c
            .inputs
            .iter()
            .filter(|i| c.outputs.contains(i))
            .cloned()
            .collect();
        if !overlap.is_empty() {
            v.push(Violation::InputOutputOverlap {
                channel: c.id.clone(),
                sites: overlap,
            });
        }

        let keys: BTreeSet<&SiteId> = c.flow.outputs.keys().collect();
        let outs: BTreeSet<&SiteId> = c.outputs.iter().collect();
        if keys != outs {
            v.push(Violation::FlowConflict {
                channel: c.id.clone(),
                detail: "flow entries do not match the channel outputs".into(),
            });
        }
        for (out, flow) in &c.flow.outputs {
            if let Carry::Explicit(map) = &flow.carries {
                for input in map.keys() {
                    if !c.inputs.contains(input) {
                        v.push(Violation::DanglingReference {
                            context: format!("channel `{}` carry", c.id),
                            target: input.to_string(),
                        });
                    }
                }
            }
            if let Carry::Summary(entries) = &flow.carries {
                if entries
                    .iter()
                    .any(|e| e.input.is_some() != e.from.is_some())
                {
                    v.push(Violation::FlowConflict {
                        channel: c.id.clone(),
                        detail: "summary rows need both an input and a source tag, or neither"
                            .into(),
                    });
                }
                for input in entries.iter().filter_map(|e| e.input.as_ref()) {
                    if !c.inputs.contains(input) {
                        v.push(Violation::DanglingReference {
                            context: format!("channel `{}` summary", c.id),
                            target: input.to_string(),
                        });
                    }
                }
            }
            let summarized = matches!(flow.carries, Carry::Summary(_));
            for m in flow.drops.values() {
                if m.tags.is_empty() {
                    v.push(Violation::FlowConflict {
                        channel: c.id.clone(),
                        detail: format!("mitigation `{}` drops no tags", m.id),
                    });
                }
                if summarized {
                    continue;
                }
                for i in &flow.introduces {
                    if m.tags.contains(&i.tag) {
                        v.push(Violation::FlowConflict {
                            channel: c.id.clone(),
                            detail: format!(
                                "tag `{}` is both introduced and dropped at output `{out}`",
                                i.tag
                            ),
                        });
                    }
                }
            }
            for p in &flow.proxies {
                if p.source == p.proxy {
                    v.push(Violation::FlowConflict {
                        channel: c.id.clone(),
                        detail: format!("proxy of `{}` onto itself", p.source),
                    });
                }
            }
        }
    }
}

fn check_subnets(network: &Network, v: &mut Vec<Violation>) {
    for s in network.subnets.values() {
        if let Some(p) = &s.parent {
            if !network.subnets.contains_key(p) {
                v.push(Violation::DanglingReference {
                    context: format!("subnet `{}` parent", s.name),
                    target: p.clone(),
                });
            }
        }
        let mut cur = s.parent.as_ref();
        let mut steps = 0;
        while let Some(p) = cur {
            if p == &s.name || steps > network.subnets.len() {
                v.push(Violation::SubnetCycle {
                    subnet: s.name.clone(),
                });
                break;
            }
            steps += 1;
            cur = network.subnets.get(p).and_then(|n| n.parent.as_ref());
        }
    }
}

fn toggle_exists(network: &Network, toggle: &Toggle) -> bool {
    match toggle {
        Toggle::Edge { channel, input } => network
            .channels
            .get(channel)
            .is_some_and(|c| c.inputs.contains(input)),
        Toggle::Channel { channel } => network.channels.contains_key(channel),
        Toggle::Mitigation {
            channel,
            mitigation,
        } => network
            .channels
            .get(channel)
            .is_some_and(|c| c.flow.mitigations().contains_key(mitigation.as_str())),
    }
}

fn check_alternatives(network: &Network, v: &mut Vec<Violation>) {
    for alt in network.alternatives.values() {
        if alt.member_count() < 2 {
            v.push(Violation::Alternative {
                alt: alt.id.to_string(),
                detail: "needs at least two members (counting absent)".into(),
            });
        }
        let mut names = BTreeSet::new();
        for name in alt.member_names() {
            if !names.insert(name) {
                v.push(Violation::Alternative {
                    alt: alt.id.to_string(),
                    detail: format!("duplicate member `{name}`"),
                });
            }
        }
        for t in alt.controlled() {
            if !toggle_exists(network, t) {
                v.push(Violation::Alternative {
                    alt: alt.id.to_string(),
                    detail: format!("toggle references missing {t}"),
                });
            }
        }
    }
}

fn check_definitions(network: &Network, v: &mut Vec<Violation>) {
    for c in network.channels.values() {
        let Some(def) = &c.definition else { continue };
        for inner in validate(def).violations {
            v.push(Violation::NestingBoundary {
                channel: c.id.clone(),
                detail: inner.to_string(),
            });
        }
        let classes = def.classes_unchecked();
        let inputs: BTreeSet<&SiteId> = c.inputs.iter().collect();
        let def_in: BTreeSet<&SiteId> = classes.inputs.iter().collect();
        if inputs != def_in {
            v.push(Violation::NestingBoundary {
                channel: c.id.clone(),
                detail: format!(
                    "interior inputs [{}] do not match channel inputs [{}]",
                    join_ids(def_in.iter().copied()),
                    join_ids(inputs.iter().copied())
                ),
            });
        }
        for o in &c.outputs {
            if !classes.outputs.contains(o) {
                v.push(Violation::NestingBoundary {
                    channel: c.id.clone(),
                    detail: format!("output `{o}` is not an output of the interior"),
                });
            }
        }
    }
}

fn join_ids<'a>(ids: impl Iterator<Item = &'a SiteId>) -> String {
    ids.map(SiteId::as_str).collect::<Vec<_>>().join(", ")
}

/// Site-level successor map: each input of a channel points at each output.
fn site_edges(network: &Network) -> BTreeMap<&SiteId, BTreeSet<&SiteId>> {
    let mut edges: BTreeMap<&SiteId, BTreeSet<&SiteId>> = BTreeMap::new();
    for c in network.channels.values() {
        for i in &c.inputs {
            for o in &c.outputs {
                if i != o {
                    edges.entry(i).or_default().insert(o);
                }
            }
        }
    }
    edges
}

/// One witness per strongly connected group of sites.
fn find_cycles(network: &Network) -> Vec<Violation> {
    let edges = site_edges(network);
    let reach = |from: &SiteId| -> BTreeSet<&SiteId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&SiteId> = edges.get(from).into_iter().flatten().copied().collect();
        while let Some(s) = stack.pop() {
            if seen.insert(s) {
                stack.extend(edges.get(s).into_iter().flatten().copied());
            }
        }
        seen
    };
    let nodes: BTreeSet<&SiteId> = edges
        .iter()
        .flat_map(|(k, vs)| std::iter::once(*k).chain(vs.iter().copied()))
        .collect();
    let reach_of: BTreeMap<&SiteId, BTreeSet<&SiteId>> =
        nodes.iter().map(|n| (*n, reach(n))).collect();

    let mut covered: BTreeSet<&SiteId> = BTreeSet::new();
    let mut out = Vec::new();
    for n in &nodes {
        if covered.contains(n) || !reach_of[n].contains(n) {
            continue;
        }
        let component: BTreeSet<&SiteId> = reach_of[n]
            .iter()
            .filter(|m| reach_of[*m].contains(n))
            .copied()
            .collect();
        covered.extend(component.iter().copied());
        out.push(Violation::Cycle {
            sites: shortest_cycle(n, &edges, &component),
        });
    }
    out
}

fn shortest_cycle<'a>(
    start: &'a SiteId,
    edges: &BTreeMap<&'a SiteId, BTreeSet<&'a SiteId>>,
    component: &BTreeSet<&'a SiteId>,
) -> Vec<SiteId> {
    let mut prev: BTreeMap<&SiteId, &SiteId> = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    let mut seen = BTreeSet::new();
    while let Some(s) = queue.pop_front() {
        for next in edges.get(s).into_iter().flatten() {
            if !component.contains(next) {
                continue;
            }
            if *next == start {
                let mut path = vec![start.clone()];
                let mut cur = s;
                while cur != start {
                    path.push(cur.clone());
                    cur = prev[cur];
                }
                path.push(start.clone());
                path.reverse();
                return path;
            }
            if seen.insert(*next) {
                prev.insert(next, s);
                queue.push_back(next);
            }
        }
    }
    vec![start.clone()]
}

/// Channels in dependency order, ties broken by id. `None` when cyclic.
pub fn topological_order(network: &Network) -> Option<Vec<ChannelId>> {
    let producers = network.producers();
    let mut deps: BTreeMap<&ChannelId, BTreeSet<&ChannelId>> = BTreeMap::new();
    for c in network.channels.values() {
        let entry = deps.entry(&c.id).or_default();
        for i in &c.inputs {
            for p in producers.get(i).into_iter().flatten() {
                if *p != &c.id {
                    entry.insert(*p);
                }
            }
        }
    }
    let mut order = Vec::with_capacity(deps.len());
    let mut done: BTreeSet<&ChannelId> = BTreeSet::new();
    while order.len() < deps.len() {
        let ready = deps
            .iter()
            .find(|(c, d)| !done.contains(*c) && d.iter().all(|x| done.contains(x)))
            .map(|(c, _)| *c)?;
        done.insert(ready);
        order.push(ready.clone());
    }
    Some(order)
}
