//! Property checks shared by the core suites and the acceptance target.
//! Each returns `Err` with a description of the first violation.

use std::collections::{BTreeMap, BTreeSet};

use super::*;
use ifm_core::analysis::{
    downstream_of, propagate_features, trace_paths, what_if, Edit, Fact, ImpactSpec, Mode, Origin,
    OutcomeSpec,
};
use ifm_core::dsl::{parse_model_with, SourceModel};
use ifm_core::model::{
    classify_sites, collapse, expand, expand_configurations, infer_types, AlternativeSet,
    ChannelId, Conclusion, Condition, InferenceRule, MitigationRef, ModelError, Network, SiteId,
    Subnet, Toggle, TypeId, TypeSystem, Variant,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

macro_rules! check {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("check failed: {}", stringify!($cond)));
        }
    };
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

macro_rules! check_eq {
    ($a:expr, $b:expr) => {
        check_eq!($a, $b, "")
    };
    ($a:expr, $b:expr, $($fmt:tt)+) => {{
        let (a, b) = (&$a, &$b);
        if a != b {
            return Err(format!("{}: {:?} != {:?} {}", stringify!($a), a, b, format!($($fmt)+)));
        }
    }};
}

pub const UNBOUNDED: usize = 1_000_000;

/// Engine propagation, downstream sets and traces against the brute-force
/// oracles, in both modes.
pub fn oracle_equivalence(seed: u64) -> Result<(), String> {
    let net = random_network(&mut rng(seed), &SMALL);
    let tags: Vec<_> = net.tag_universe().into_iter().collect();
    let origins = all_origins(&net);
    for mode in Mode::BOTH {
        let fm = propagate_features(&net, mode).unwrap();
        let oracle = oracle_features(&net, mode);
        for (site, want) in &oracle {
            let got: BTreeSet<_> = fm.facts(site.as_str()).cloned().collect();
            check_eq!(&got, want, "features at {} ({:?})", site, mode);
        }
        for origin in &origins {
            let got = downstream_of(&net, origin, None, mode).unwrap();
            check_eq!(got, oracle_downstream(&net, origin, None, mode));
            for t in &tags {
                let got = downstream_of(&net, origin, Some(t), mode).unwrap();
                check_eq!(got, oracle_downstream(&net, origin, Some(t), mode));
                for target in net.sites.keys() {
                    let trace = trace_paths(&net, origin, target, t, mode, UNBOUNDED).unwrap();
                    check!(!trace.truncated);
                    let got: BTreeSet<OraclePath> = trace
                        .paths
                        .iter()
                        .map(|p| {
                            (
                                p.origin.clone(),
                                p.hops
                                    .iter()
                                    .map(|h| (h.channel.clone(), h.from.clone(), h.to.clone()))
                                    .collect(),
                                p.tag.clone(),
                                p.chain.clone(),
                                p.blockers.clone(),
                            )
                        })
                        .collect();
                    check_eq!(got.len(), trace.paths.len());
                    check_eq!(got, oracle_paths(&net, origin, target, t, mode));
                }
            }
        }
    }
    Ok(())
}

pub fn random_outcomes(rng: &mut ChaCha8Rng, net: &Network) -> Vec<OutcomeSpec> {
    let sites: Vec<_> = net.sites.keys().cloned().collect();
    let tags: Vec<_> = net.tag_universe().into_iter().collect();
    let origins = all_origins(net);
    (0..rng.gen_range(1..=3))
        .map(|i| {
            let mut o = OutcomeSpec::new(format!("O{i}"), sites.choose(rng).unwrap().clone(), &[]);
            o.tags.insert(tags.choose(rng).unwrap().clone());
            if rng.gen_bool(0.3) {
                o.tags.insert(tags.choose(rng).unwrap().clone());
            }
            if rng.gen_bool(0.3) {
                o.from.insert(origins.choose(rng).unwrap().id().to_string());
            }
            if rng.gen_bool(0.2) && net.subnets.contains_key("g") {
                o.via = Some("g".into());
            }
            o
        })
        .collect()
}

fn add_edit(rng: &mut ChaCha8Rng, net: &Network) -> Option<Edit> {
    let c = net
        .channels
        .values()
        .collect::<Vec<_>>()
        .choose(rng)
        .copied()?;
    let tags: Vec<_> = net.tag_universe().into_iter().collect();
    let tag = tags.choose(rng)?.clone();
    Some(Edit::AddMitigation {
        channel: c.id.clone(),
        tag,
        conditional: rng.gen_bool(0.5),
    })
}

fn remove_edit(rng: &mut ChaCha8Rng, net: &Network) -> Option<Edit> {
    let refs: Vec<MitigationRef> = net
        .channels
        .values()
        .flat_map(|c| {
            c.flow
                .mitigations()
                .into_keys()
                .map(|m| MitigationRef::new(c.id.clone(), m))
                .collect::<Vec<_>>()
        })
        .collect();
    refs.choose(rng).cloned().map(Edit::DisableMitigation)
}

/// One random (network, single drop edit) pair. `None` when the network
/// offers no applicable edit; otherwise the number of verdicts compared.
pub fn monotonic_pair(seed: u64, adding: bool) -> Option<Result<usize, String>> {
    let mut r = rng(seed);
    let mut net = random_network(&mut r, &SMALL);
    if r.gen_bool(0.5) {
        assign_subnet(&mut r, &mut net, 0.4);
    }
    let outcomes = random_outcomes(&mut r, &net);
    let edit = if adding {
        add_edit(&mut r, &net)
    } else {
        remove_edit(&mut r, &net)
    }?;
    let delta = what_if(&net, &outcomes, std::slice::from_ref(&edit), usize::MAX).ok()?;
    for c in &delta.changes {
        let (b, a) = (c.before.unwrap(), c.after.unwrap());
        let ok = if adding { a <= b } else { a >= b };
        if !ok {
            return Some(Err(format!(
                "seed {seed}: {edit} moved {} from {b} to {a}",
                c.outcome
            )));
        }
    }
    Some(Ok(outcomes.len()))
}

fn exterior_facts(
    net: &Network,
    mode: Mode,
    members: &BTreeSet<ChannelId>,
    abstract_id: &ChannelId,
    keep: &BTreeSet<SiteId>,
) -> BTreeMap<SiteId, BTreeSet<Fact>> {
    let fm = propagate_features(net, mode).unwrap();
    fm.sites
        .into_iter()
        .filter(|(s, _)| keep.contains(s))
        .map(|(s, facts)| {
            let mapped = facts
                .into_iter()
                .map(|mut f| {
                    if let Origin::Channel(c) = &f.origin {
                        if members.contains(c) {
                            f.origin = Origin::Channel(abstract_id.clone());
                        }
                    }
                    f
                })
                .collect();
            (s, mapped)
        })
        .collect()
}

/// Collapses a random subnet `g`. `None` when the draw has fewer than two
/// members or the collapse is rejected.
pub fn abstraction_case(seed: u64) -> Option<Result<(), String>> {
    let mut r = rng(seed);
    let mut net = random_network(&mut r, &SMALL);
    let p = r.gen_range(0.3..0.7);
    let members = assign_subnet(&mut r, &mut net, p);
    if members.len() < 2 {
        return None;
    }
    let collapsed = match collapse(&net, "g") {
        Ok(c) => c,
        Err(ModelError::CollapseRejected(_)) => return None,
        Err(e) => return Some(Err(format!("seed {seed}: {e}"))),
    };
    Some((|| {
        let abstract_id = ChannelId::from("g");
        check!(collapsed.channels[&abstract_id].definition.is_some());
        let keep: BTreeSet<SiteId> = collapsed.sites.keys().cloned().collect();
        for mode in Mode::BOTH {
            let before = exterior_facts(&net, mode, &members, &abstract_id, &keep);
            let after = exterior_facts(&collapsed, mode, &members, &abstract_id, &keep);
            check_eq!(before, after, "seed {} {:?}", seed, mode);
        }
        let back = expand(&collapsed, "g").map_err(|e| e.to_string())?;
        check_eq!(back.channels, net.channels, "seed {}", seed);
        check_eq!(back.sites, net.sites, "seed {}", seed);
        check_eq!(back.subnets, net.subnets, "seed {}", seed);
        Ok(())
    })())
}

pub fn random_types(r: &mut ChaCha8Rng) -> TypeSystem {
    let n = r.gen_range(1..=7);
    let types: Vec<TypeId> = (0..n).map(|i| TypeId::from(format!("T{i}"))).collect();
    let mut ts = TypeSystem {
        types: types.iter().cloned().collect(),
        ..TypeSystem::default()
    };
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(0.3) {
                ts.subtypes.insert((types[i].clone(), types[j].clone()));
            }
        }
    }
    for k in 0..r.gen_range(0..4) {
        let mut conditions = Vec::new();
        for _ in 0..r.gen_range(1..=2) {
            let t = types.choose(r).unwrap().clone();
            conditions.push(match r.gen_range(0..3) {
                0 => Condition::ChannelHasType(t),
                1 => Condition::InputHasType(t),
                _ => Condition::OutputHasType(t),
            });
        }
        let t = types.choose(r).unwrap().clone();
        let conclusion = if r.gen_bool(0.5) {
            Conclusion::Channel(t)
        } else {
            Conclusion::Output {
                position: if r.gen_bool(0.5) { Some(0) } else { None },
                ty: t,
            }
        };
        ts.rules.insert(
            format!("r{k}"),
            InferenceRule {
                name: format!("r{k}"),
                conditions,
                conclusion,
            },
        );
    }
    ts
}

pub fn typed_network(seed: u64) -> Network {
    let mut r = rng(seed);
    let mut net = random_network(&mut r, &SMALL);
    net.type_system = random_types(&mut r);
    let types: Vec<TypeId> = net.type_system.types.iter().cloned().collect();
    for s in net.sites.values_mut() {
        if r.gen_bool(0.5) {
            s.types.insert(types.choose(&mut r).unwrap().clone());
        }
    }
    for c in net.channels.values_mut() {
        if r.gen_bool(0.3) {
            c.types.insert(types.choose(&mut r).unwrap().clone());
        }
    }
    net
}

/// Reflexive-transitive reachability over the raw edges.
fn above(ts: &TypeSystem, t: &TypeId) -> BTreeSet<TypeId> {
    let mut seen = BTreeSet::from([t.clone()]);
    loop {
        let next: BTreeSet<TypeId> = ts
            .subtypes
            .iter()
            .filter(|(a, _)| seen.contains(a))
            .map(|(_, b)| b.clone())
            .collect();
        let before = seen.len();
        seen.extend(next);
        if seen.len() == before {
            return seen;
        }
    }
}

pub fn law_partition(seed: u64) -> Result<(), String> {
    let net = random_network(&mut rng(seed), &SMALL);
    let c = classify_sites(&net).unwrap();
    let all: BTreeSet<_> = net.sites.keys().cloned().collect();
    let union: BTreeSet<_> = c
        .inputs
        .iter()
        .chain(&c.outputs)
        .chain(&c.mid)
        .cloned()
        .collect();
    check_eq!(union, all);
    check!(c.inputs.is_disjoint(&c.outputs));
    check!(c.inputs.is_disjoint(&c.mid));
    check!(c.outputs.is_disjoint(&c.mid));
    let produced: BTreeSet<_> = net
        .channels
        .values()
        .flat_map(|c| c.outputs.clone())
        .collect();
    let consumed: BTreeSet<_> = net
        .channels
        .values()
        .flat_map(|c| c.inputs.clone())
        .collect();
    for s in net.sites.keys() {
        check_eq!(c.inputs.contains(s), !produced.contains(s));
        check_eq!(
            c.mid.contains(s),
            produced.contains(s) && consumed.contains(s)
        );
        check_eq!(
            c.outputs.contains(s),
            produced.contains(s) && !consumed.contains(s)
        );
    }
    Ok(())
}

pub fn law_subtype_closure(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let ts = random_types(&mut r);
    check!(ts.check().is_empty());
    let all: Vec<TypeId> = ts.types.iter().cloned().collect();
    for a in &all {
        check_eq!(ts.supertypes(a), above(&ts, a));
        check!(ts.is_subtype(a, a));
        for b in &all {
            for c in &all {
                if ts.is_subtype(a, b) && ts.is_subtype(b, c) {
                    check!(ts.is_subtype(a, c));
                }
            }
            if a != b && ts.is_subtype(a, b) {
                check!(!ts.is_subtype(b, a));
            }
        }
    }
    let set: BTreeSet<TypeId> = all.iter().filter(|_| r.gen_bool(0.4)).cloned().collect();
    let closed = ts.close(&set);
    check!(closed.is_superset(&set));
    check_eq!(ts.close(&closed), closed.clone());
    for (sub, sup) in &ts.subtypes {
        if closed.contains(sub) {
            check!(closed.contains(sup));
        }
    }
    Ok(())
}

pub fn law_inference_idempotent(seed: u64) -> Result<(), String> {
    let net = typed_network(seed);
    let once = infer_types(&net);
    check_eq!(infer_types(&once), once.clone());
    for (id, s) in &net.sites {
        check!(once.sites[id].types.is_superset(&s.types));
        check_eq!(
            net.type_system.close(&once.sites[id].types),
            once.sites[id].types.clone()
        );
    }
    for (id, c) in &net.channels {
        check!(once.channels[id].types.is_superset(&c.types));
    }
    Ok(())
}

pub fn law_configuration_product(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let mut net = random_network(&mut r, &SMALL);
    let channels: Vec<_> = net.channels.values().cloned().collect();
    if channels.is_empty() {
        return Ok(());
    }
    let mut used = BTreeSet::new();
    for k in 0..r.gen_range(0..=3) {
        let mut variants = Vec::new();
        for v in 0..r.gen_range(1..=3) {
            let c = channels.choose(&mut r).unwrap();
            let toggle = if r.gen_bool(0.5) && c.inputs.len() > 1 {
                Toggle::Edge {
                    channel: c.id.clone(),
                    input: c.inputs[0].clone(),
                }
            } else {
                Toggle::Channel {
                    channel: c.id.clone(),
                }
            };
            if !used.insert(toggle.clone()) {
                continue;
            }
            variants.push(Variant {
                name: format!("v{v}"),
                present: BTreeSet::from([toggle]),
            });
        }
        let includes_absent = variants.len() < 2 || r.gen_bool(0.5);
        if variants.is_empty() {
            continue;
        }
        net.alternatives.insert(
            format!("A{k}").into(),
            AlternativeSet {
                id: format!("A{k}").into(),
                variants,
                includes_absent,
            },
        );
    }
    let product: usize = net
        .alternatives
        .values()
        .map(AlternativeSet::member_count)
        .product();
    let configs = expand_configurations(&net);
    check_eq!(configs.len(), product);
    let names: BTreeSet<String> = configs.iter().map(|c| c.name()).collect();
    check_eq!(names.len(), product);
    for c in &configs {
        check!(c.network.alternatives.is_empty());
        let keys: BTreeMap<_, _> = c.assignment.clone();
        check_eq!(keys.len(), net.alternatives.len());
    }
    Ok(())
}

pub fn no_files(p: &str) -> Result<(String, String), String> {
    Err(format!("no file {p}"))
}

fn text(r: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 8] = [
        "Rec. filter",
        "a \"quoted\" word",
        "back\\slash",
        "line\nbreak",
        "tab\there",
        "plain",
        "ümlaut",
        "#hash",
    ];
    PIECES.choose(r).unwrap().to_string()
}

pub fn random_model(seed: u64) -> SourceModel {
    let mut r = rng(seed);
    let mut net = random_network(&mut r, &SMALL);
    net.name = text(&mut r);

    let types: Vec<TypeId> = (0..r.gen_range(0..4))
        .map(|i| TypeId::from(format!("T{i}")))
        .collect();
    net.type_system.types = types.iter().cloned().collect();
    if types.len() > 1 {
        net.type_system
            .subtypes
            .insert((types[0].clone(), types[1].clone()));
        net.type_system.rules.insert(
            "r0".into(),
            InferenceRule {
                name: "r0".into(),
                conditions: vec![
                    Condition::InputHasType(types[0].clone()),
                    Condition::ChannelHasType(types[1].clone()),
                ],
                conclusion: Conclusion::Output {
                    position: Some(0),
                    ty: types[1].clone(),
                },
            },
        );
    }

    let subnets = ["g", "Outer group", "inner"];
    for (i, name) in subnets.iter().enumerate() {
        if r.gen_bool(0.5) {
            continue;
        }
        let parent = if i > 0 && r.gen_bool(0.5) && net.subnets.contains_key(subnets[i - 1]) {
            Some(subnets[i - 1].to_string())
        } else {
            None
        };
        net.subnets.insert(
            name.to_string(),
            Subnet {
                name: name.to_string(),
                parent,
                abstract_id: r.gen_bool(0.3).then(|| format!("abs{i}").into()),
                color: r.gen_bool(0.3).then(|| "#aabbcc".to_string()),
            },
        );
    }
    let subnet_names: Vec<String> = net.subnets.keys().cloned().collect();

    for s in net.sites.values_mut() {
        if r.gen_bool(0.3) {
            s.name = text(&mut r);
        }
        if r.gen_bool(0.2) {
            s.actor = Some("Recruiter".into());
        }
        if let (true, Some(t)) = (r.gen_bool(0.3), types.choose(&mut r)) {
            s.types.insert(t.clone());
        }
        if r.gen_bool(0.2) {
            s.subnet = subnet_names.choose(&mut r).cloned();
        }
    }
    for c in net.channels.values_mut() {
        if r.gen_bool(0.4) {
            c.name = text(&mut r);
        }
        if r.gen_bool(0.3) {
            c.operation = text(&mut r);
        }
        if r.gen_bool(0.3) {
            c.bias_kinds =
                BTreeSet::from(["Interpretation".to_string(), "Score opacity".to_string()]);
        }
        if r.gen_bool(0.2) {
            c.actor = Some("AI".into());
        }
        if let (true, Some(t)) = (r.gen_bool(0.2), types.choose(&mut r)) {
            c.types.insert(t.clone());
        }
        if r.gen_bool(0.4) {
            c.subnet = subnet_names.choose(&mut r).cloned();
        }
        for f in c.flow.outputs.values_mut() {
            for m in f.drops.values_mut() {
                if r.gen_bool(0.3) {
                    m.note = text(&mut r);
                }
            }
        }
    }

    if net.subnets.contains_key("g") && r.gen_bool(0.5) {
        if let Ok(c) = collapse(&net, "g") {
            net = c;
        }
    }

    let channels: Vec<_> = net.channels.values().cloned().collect();
    if let Some(c) = channels.choose(&mut r) {
        if r.gen_bool(0.4) && c.definition.is_none() {
            let toggle = if c.inputs.len() > 1 {
                Toggle::Edge {
                    channel: c.id.clone(),
                    input: c.inputs[0].clone(),
                }
            } else {
                Toggle::Channel {
                    channel: c.id.clone(),
                }
            };
            net.alternatives.insert(
                "Q".into(),
                AlternativeSet {
                    id: "Q".into(),
                    variants: vec![Variant {
                        name: "with".into(),
                        present: BTreeSet::from([toggle]),
                    }],
                    includes_absent: true,
                },
            );
        }
    }
    net.tags = net.tag_universe();

    let mut m = SourceModel::from_network(net);
    let sites: Vec<_> = m.network.sites.keys().cloned().collect();
    let tags: Vec<_> = m.network.tag_universe().into_iter().collect();
    for i in 0..r.gen_range(0..3) {
        let mut o = OutcomeSpec::new(format!("O{i}"), sites.choose(&mut r).unwrap().clone(), &[]);
        o.tags.insert(tags.choose(&mut r).unwrap().clone());
        o.description = text(&mut r);
        if r.gen_bool(0.3) {
            o.note = text(&mut r);
        }
        if let (true, Some(s)) = (r.gen_bool(0.3), m.network.subnets.keys().next()) {
            o.via = Some(s.clone());
        }
        if r.gen_bool(0.3) {
            o.from.insert(sites[0].to_string());
        }
        m.outcomes.push(o);
    }
    if !m.outcomes.is_empty() && !channels.is_empty() {
        m.impacts.push(ImpactSpec {
            id: "I1".into(),
            description: text(&mut r),
            outcomes: vec![m.outcomes[0].id.clone()],
            paths: vec![m.network.channels.keys().take(2).cloned().collect()],
            note: String::new(),
        });
    }
    m
}

/// parse(serialize(m)) == m and serialization is byte-stable.
pub fn round_trip(m: &SourceModel) -> Result<(), String> {
    let text = m.to_text();
    let parsed =
        parse_model_with(&text, "gen.ifm", &no_files).map_err(|e| format!("{e}\n{text}"))?;
    check_eq!(&parsed, m, "{}", text);
    let again = parsed.to_text();
    check_eq!(&again, &text);
    let reparsed = parse_model_with(&again, "gen.ifm", &no_files).map_err(|e| e.to_string())?;
    check_eq!(reparsed, parsed);
    Ok(())
}
