#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeMap, BTreeSet};

use ifm_core::analysis::{Fact, Mode, Origin};
use ifm_core::model::{
    validate, Carry, Channel, ChannelId, FeatureTag, Introduce, Mitigation, MitigationRef, Network,
    OutputFlow, Proxy, Site, SiteId, Subnet, TagSelection,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Limits {
    pub sites: usize,
    pub channels: usize,
    pub tags: usize,
}

pub const SMALL: Limits = Limits {
    sites: 10,
    channels: 12,
    tags: 4,
};

fn tag_name(i: usize) -> FeatureTag {
    FeatureTag::from(format!("t{i}"))
}

fn subset<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], p: f64) -> Vec<T> {
    items.iter().filter(|_| rng.gen_bool(p)).cloned().collect()
}

fn nonempty_subset<T: Clone>(rng: &mut ChaCha8Rng, items: &[T], p: f64) -> Vec<T> {
    let mut s = subset(rng, items, p);
    if s.is_empty() {
        s.push(items.choose(rng).expect("nonempty").clone());
    }
    s
}

/// A random valid, alternative-free network whose site order S0, S1, ... is
/// topological.
pub fn random_network(rng: &mut ChaCha8Rng, lim: &Limits) -> Network {
    let n_sites = rng.gen_range(2..=lim.sites);
    let n_tags = rng.gen_range(1..=lim.tags);
    let tags: Vec<FeatureTag> = (0..n_tags).map(tag_name).collect();
    let site_ids: Vec<SiteId> = (0..n_sites)
        .map(|i| SiteId::from(format!("S{i}")))
        .collect();
    let mut net = Network {
        name: "random".into(),
        ..Network::default()
    };
    for s in &site_ids {
        net.add_site(Site::new(s.clone()));
    }
    let mut produced: BTreeSet<usize> = BTreeSet::new();
    let n_channels = rng.gen_range(0..=lim.channels);
    for ci in 0..n_channels {
        let free: Vec<usize> = (1..n_sites).filter(|i| !produced.contains(i)).collect();
        let Some(&first) = free.choose(rng) else {
            break;
        };
        let mut outs = vec![first];
        if rng.gen_bool(0.25) {
            if let Some(&second) = free
                .iter()
                .filter(|i| **i != first)
                .collect::<Vec<_>>()
                .choose(rng)
            {
                outs.push(*second);
            }
        }
        let lowest = *outs.iter().min().expect("one output");
        let candidates: Vec<usize> = (0..lowest).collect();
        let mut ins = nonempty_subset(rng, &candidates, 0.35);
        ins.truncate(3);
        produced.extend(outs.iter().copied());

        let inputs: Vec<SiteId> = ins.iter().map(|i| site_ids[*i].clone()).collect();
        let outputs: Vec<SiteId> = outs.iter().map(|i| site_ids[*i].clone()).collect();
        let mut ch = Channel::new(format!("c{ci}"), inputs.clone(), outputs.clone());
        for (k, o) in outputs.iter().enumerate() {
            ch.flow
                .outputs
                .insert(o.clone(), random_flow(rng, &inputs, &tags, k));
        }
        net.add_channel(ch);
    }
    for (i, s) in site_ids.iter().enumerate() {
        if !produced.contains(&i) {
            let seeds = subset(rng, &tags, 0.4);
            net.sites.get_mut(s).expect("added").seeds = seeds.into_iter().collect();
        }
    }
    net.tags = net.tag_universe();
    net.tags.extend(tags);
    debug_assert!(validate(&net).is_valid());
    net
}

fn random_flow(
    rng: &mut ChaCha8Rng,
    inputs: &[SiteId],
    tags: &[FeatureTag],
    k: usize,
) -> OutputFlow {
    let mut f = OutputFlow::default();
    if rng.gen_bool(0.5) {
        let mut map = BTreeMap::new();
        for i in inputs {
            if rng.gen_bool(0.75) {
                let sel = if rng.gen_bool(0.4) {
                    TagSelection::All
                } else {
                    TagSelection::Tags(subset(rng, tags, 0.6).into_iter().collect())
                };
                map.insert(i.clone(), sel);
            }
        }
        f.carries = Carry::Explicit(map);
    }
    let introduced = if rng.gen_bool(0.25) {
        let t = tags.choose(rng).expect("tags").clone();
        f.introduces.insert(Introduce {
            tag: t.clone(),
            kind: "Interpretation".into(),
        });
        Some(t)
    } else {
        None
    };
    let droppable: Vec<FeatureTag> = tags
        .iter()
        .filter(|t| Some(*t) != introduced.as_ref())
        .cloned()
        .collect();
    for m in 0..2 {
        if droppable.is_empty() || !rng.gen_bool(if m == 0 { 0.4 } else { 0.15 }) {
            continue;
        }
        let id = format!("m{k}{m}");
        f.drops.insert(
            id.clone(),
            Mitigation {
                id,
                tags: nonempty_subset(rng, &droppable, 0.4).into_iter().collect(),
                conditional: rng.gen_bool(0.5),
                note: String::new(),
            },
        );
    }
    if tags.len() > 1 && rng.gen_bool(0.2) {
        let pair: Vec<&FeatureTag> = tags.choose_multiple(rng, 2).collect();
        f.proxies.insert(Proxy {
            source: pair[0].clone(),
            proxy: pair[1].clone(),
        });
    }
    f
}

/// Puts a random subset of channels under subnet `g`.
pub fn assign_subnet(rng: &mut ChaCha8Rng, net: &mut Network, p: f64) -> BTreeSet<ChannelId> {
    net.subnets.insert(
        "g".into(),
        Subnet {
            name: "g".into(),
            ..Subnet::default()
        },
    );
    let mut members = BTreeSet::new();
    for c in net.channels.values_mut() {
        c.subnet = None;
        if rng.gen_bool(p) {
            c.subnet = Some("g".into());
            members.insert(c.id.clone());
        }
    }
    members
}

// Independent reference semantics.

fn mode_drops(flow: &OutputFlow, mode: Mode) -> BTreeSet<FeatureTag> {
    flow.drops
        .values()
        .filter(|m| !m.conditional || mode == Mode::Optimistic)
        .flat_map(|m| m.tags.iter().cloned())
        .collect()
}

fn admits(flow: &OutputFlow, input: &SiteId, tag: &FeatureTag) -> bool {
    match &flow.carries {
        Carry::All => true,
        Carry::Explicit(map) => match map.get(input) {
            Some(TagSelection::All) => true,
            Some(TagSelection::Tags(t)) => t.contains(tag),
            None => false,
        },
        Carry::Summary(_) => panic!("oracle handles plain flows only"),
    }
}

/// Facts emitted at `output` together with the conditional mitigations on
/// that output that remove them.
pub fn oracle_step(
    ch: &Channel,
    output: &SiteId,
    incoming: Option<(&SiteId, &Fact)>,
    mode: Mode,
) -> Vec<(Fact, BTreeSet<MitigationRef>)> {
    let flow = &ch.flow.outputs[output];
    let mut cands = Vec::new();
    match incoming {
        None => {
            for i in &flow.introduces {
                cands.push(Fact {
                    tag: i.tag.clone(),
                    origin: Origin::Channel(ch.id.clone()),
                    chain: vec![],
                });
            }
        }
        Some((input, fact)) => {
            if !admits(flow, input, &fact.tag) {
                return vec![];
            }
            cands.push(fact.clone());
            for p in &flow.proxies {
                if p.source == fact.tag {
                    let mut chain = fact.chain.clone();
                    chain.push(fact.tag.clone());
                    cands.push(Fact {
                        tag: p.proxy.clone(),
                        origin: fact.origin.clone(),
                        chain,
                    });
                }
            }
        }
    }
    let dropped = mode_drops(flow, mode);
    cands
        .into_iter()
        .filter(|f| !dropped.contains(&f.tag))
        .map(|f| {
            let blockers = flow
                .drops
                .values()
                .filter(|m| m.conditional && m.tags.contains(&f.tag))
                .map(|m| MitigationRef::new(ch.id.clone(), m.id.clone()))
                .collect();
            (f, blockers)
        })
        .collect()
}

fn seed_states(net: &Network) -> Vec<(SiteId, Fact)> {
    net.sites
        .values()
        .flat_map(|s| {
            s.seeds.iter().map(|t| {
                (
                    s.id.clone(),
                    Fact::new(t.clone(), Origin::Site(s.id.clone())),
                )
            })
        })
        .collect()
}

fn intro_states(net: &Network, c: &Channel, mode: Mode) -> Vec<(SiteId, Fact)> {
    let _ = net;
    c.outputs
        .iter()
        .flat_map(|o| {
            oracle_step(c, o, None, mode)
                .into_iter()
                .map(move |(f, _)| (o.clone(), f))
        })
        .collect()
}

/// Worklist closure over (site, fact) states.
fn closure(net: &Network, start: Vec<(SiteId, Fact)>, mode: Mode) -> BTreeSet<(SiteId, Fact)> {
    let mut seen: BTreeSet<(SiteId, Fact)> = BTreeSet::new();
    let mut queue: std::collections::VecDeque<(SiteId, Fact)> = start.into_iter().collect();
    while let Some((site, fact)) = queue.pop_front() {
        if !seen.insert((site.clone(), fact.clone())) {
            continue;
        }
        for c in net.channels.values().filter(|c| c.inputs.contains(&site)) {
            for o in &c.outputs {
                for (f, _) in oracle_step(c, o, Some((&site, &fact)), mode) {
                    queue.push_back((o.clone(), f));
                }
            }
        }
    }
    seen
}

pub fn oracle_features(net: &Network, mode: Mode) -> BTreeMap<SiteId, BTreeSet<Fact>> {
    let mut start = seed_states(net);
    for c in net.channels.values() {
        start.extend(intro_states(net, c, mode));
    }
    let mut out: BTreeMap<SiteId, BTreeSet<Fact>> = net
        .sites
        .keys()
        .map(|s| (s.clone(), BTreeSet::new()))
        .collect();
    for (s, f) in closure(net, start, mode) {
        out.entry(s).or_default().insert(f);
    }
    out
}

pub fn oracle_downstream(
    net: &Network,
    origin: &Origin,
    tag: Option<&FeatureTag>,
    mode: Mode,
) -> BTreeSet<SiteId> {
    let start = match origin {
        Origin::Site(s) => seed_states(net)
            .into_iter()
            .filter(|(site, _)| site == s)
            .collect(),
        Origin::Channel(c) => intro_states(net, &net.channels[c], mode),
    };
    let mut out: BTreeSet<SiteId> = closure(net, start, mode)
        .into_iter()
        .filter(|(_, f)| tag.is_none_or(|t| f.tag == *t || f.chain.contains(t)))
        .map(|(s, _)| s)
        .collect();
    if let (Origin::Site(s), None) = (origin, tag) {
        if !net.channels.values().any(|c| c.outputs.contains(s)) {
            out.insert(s.clone());
        }
    }
    out
}

/// One enumerated path: origin, (channel, from, to) hops, final fact, blockers.
pub type OraclePath = (
    Origin,
    Vec<(ChannelId, Option<SiteId>, SiteId)>,
    FeatureTag,
    Vec<FeatureTag>,
    Vec<MitigationRef>,
);

/// Exhaustive DFS over every channel walk from `origin`.
pub fn oracle_paths(
    net: &Network,
    origin: &Origin,
    target: &SiteId,
    tag: &FeatureTag,
    mode: Mode,
) -> BTreeSet<OraclePath> {
    type Hop = (ChannelId, Option<SiteId>, SiteId);
    let mut out = BTreeSet::new();
    let mut stack: Vec<(SiteId, Fact, Vec<Hop>, BTreeSet<MitigationRef>)> = Vec::new();
    match origin {
        Origin::Site(s) => {
            for t in &net.sites[s].seeds {
                stack.push((
                    s.clone(),
                    Fact::new(t.clone(), origin.clone()),
                    vec![],
                    BTreeSet::new(),
                ));
            }
        }
        Origin::Channel(c) => {
            let ch = &net.channels[c];
            for o in &ch.outputs {
                for (f, b) in oracle_step(ch, o, None, mode) {
                    stack.push((o.clone(), f, vec![(c.clone(), None, o.clone())], b));
                }
            }
        }
    }
    while let Some((site, fact, hops, blockers)) = stack.pop() {
        if &site == target && !hops.is_empty() && (fact.tag == *tag || fact.chain.contains(tag)) {
            out.insert((
                fact.origin.clone(),
                hops.clone(),
                fact.tag.clone(),
                fact.chain.clone(),
                blockers.iter().cloned().collect(),
            ));
        }
        for c in net.channels.values().filter(|c| c.inputs.contains(&site)) {
            for o in &c.outputs {
                for (f, b) in oracle_step(c, o, Some((&site, &fact)), mode) {
                    let mut h = hops.clone();
                    h.push((c.id.clone(), Some(site.clone()), o.clone()));
                    let mut bl = blockers.clone();
                    bl.extend(b);
                    stack.push((o.clone(), f, h, bl));
                }
            }
        }
    }
    out
}

/// Every site and every channel of the network as an origin.
pub fn all_origins(net: &Network) -> Vec<Origin> {
    net.sites
        .keys()
        .map(|s| Origin::Site(s.clone()))
        .chain(net.channels.keys().map(|c| Origin::Channel(c.clone())))
        .collect()
}
