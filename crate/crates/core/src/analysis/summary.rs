use std::collections::{BTreeMap, BTreeSet};

use super::propagate::{check_analyzable, propagate_unchecked};
use super::{AnalysisError, Mode, Origin};
use crate::model::{
    Carry, ChannelId, FlowSpec, Mitigation, Network, OutputFlow, SiteId, SummaryEntry,
};

/// Flow relation of a whole network seen as one channel from its input
/// sites to its output sites. The relation is exact: propagating through
/// the summary yields the same facts at the outputs as propagating through
/// the interior, in both modes.
pub fn summarize_as_channel(network: &Network) -> Result<FlowSpec, AnalysisError> {
    check_analyzable(network)?;
    let classes = network.classes_unchecked();
    if network.channels.len() == 1 {
        let only = network.channels.values().next().expect("one channel");
        let inputs: BTreeSet<&SiteId> = only.inputs.iter().collect();
        if inputs == classes.inputs.iter().collect() && only.definition.is_none() {
            return Ok(only.flow.clone());
        }
    }

    let mut seeded = network.clone();
    let universe = network.tag_universe();
    for s in seeded.sites.values_mut() {
        s.seeds = if classes.inputs.contains(&s.id) {
            universe.clone()
        } else {
            BTreeSet::new()
        };
    }
    let pess = propagate_unchecked(&seeded, Mode::Pessimistic);
    let opt = propagate_unchecked(&seeded, Mode::Optimistic);
    let ancestors = ancestor_channels(network);

    let mut outputs = BTreeMap::new();
    for out in &classes.outputs {
        let opt_facts: BTreeSet<_> = opt.facts(out.as_str()).collect();
        let mut entries = BTreeSet::new();
        let mut introduces = BTreeSet::new();
        for fact in pess.facts(out.as_str()) {
            let (input, from) = match &fact.origin {
                Origin::Site(s) => (Some(s.clone()), Some(fact.root().clone())),
                Origin::Channel(c) => {
                    let ch = &network.channels[c];
                    let root = fact.root();
                    for f in ch.flow.outputs.values() {
                        introduces.extend(f.introduces.iter().filter(|i| &i.tag == root).cloned());
                    }
                    (None, None)
                }
            };
            entries.insert(SummaryEntry {
                input,
                from,
                via: fact.chain.clone(),
                to: fact.tag.clone(),
                conditional: !opt_facts.contains(fact),
            });
        }
        let carries = if entries.is_empty() {
            Carry::Explicit(BTreeMap::new())
        } else {
            Carry::Summary(entries)
        };
        let mut flow = OutputFlow {
            carries,
            drops: BTreeMap::new(),
            introduces,
            proxies: BTreeSet::new(),
        };
        for cid in ancestors.get(out).into_iter().flatten() {
            let ch = &network.channels[cid];
            for f in ch.flow.outputs.values() {
                for m in f.drops.values() {
                    let id = format!("{cid}.{}", m.id);
                    flow.drops.insert(
                        id.clone(),
                        Mitigation {
                            id,
                            tags: m.tags.clone(),
                            conditional: m.conditional,
                            note: m.note.clone(),
                        },
                    );
                }
                flow.proxies.extend(f.proxies.iter().cloned());
            }
        }
        outputs.insert(out.clone(), flow);
    }
    Ok(FlowSpec { outputs })
}

/// Site → channels lying on some path into it.
fn ancestor_channels(network: &Network) -> BTreeMap<SiteId, BTreeSet<ChannelId>> {
    let producers = network.producers();
    let mut out = BTreeMap::new();
    for site in network.sites.keys() {
        let mut seen: BTreeSet<ChannelId> = BTreeSet::new();
        let mut stack = vec![site];
        while let Some(s) = stack.pop() {
            for cid in producers.get(s).into_iter().flatten() {
                if seen.insert((*cid).clone()) {
                    stack.extend(network.channels[*cid].inputs.iter());
                }
            }
        }
        out.insert(site.clone(), seen);
    }
    out
}
