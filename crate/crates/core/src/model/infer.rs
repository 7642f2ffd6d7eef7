//! Least-fixpoint type inference over the subtype order and the rule set.

use std::collections::BTreeSet;

use super::ids::TypeId;
use super::network::Network;
use super::types::{Conclusion, Condition, InferenceRule};

/// Returns a copy of `network` whose type assignments are closed under the
/// subtype order and under every inference rule.
///
/// Rule conditions match against closed assignments, so `input list` also
/// matches a site typed `sublist` when `sublist <: list`.
pub fn infer_types(network: &Network) -> Network {
    let mut out = network.clone();
    let ts = network.type_system.clone();
    for s in out.sites.values_mut() {
        s.types = ts.close(&s.types);
    }
    for c in out.channels.values_mut() {
        c.types = ts.close(&c.types);
    }

    loop {
        let mut changed = false;
        let channel_ids: Vec<_> = out.channels.keys().cloned().collect();
        for rule in ts.rules.values() {
            for cid in &channel_ids {
                if !rule_matches(&out, cid, rule) {
                    continue;
                }
                let added = ts.supertypes(rule.conclusion.ty());
                match &rule.conclusion {
                    Conclusion::Channel(_) => {
                        let c = out.channels.get_mut(cid).expect("listed above");
                        changed |= extend(&mut c.types, &added);
                    }
                    Conclusion::Output { position, .. } => {
                        let outputs = out.channels[cid].outputs.clone();
                        let targets: Vec<_> = match position {
                            Some(p) => outputs.get(*p).cloned().into_iter().collect(),
                            None => outputs,
                        };
                        for t in targets {
                            if let Some(site) = out.sites.get_mut(&t) {
                                changed |= extend(&mut site.types, &added);
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

fn extend(target: &mut BTreeSet<TypeId>, added: &BTreeSet<TypeId>) -> bool {
    let before = target.len();
    target.extend(added.iter().cloned());
    target.len() != before
}

fn rule_matches(network: &Network, channel: &super::ids::ChannelId, rule: &InferenceRule) -> bool {
    let c = &network.channels[channel];
    let site_has = |ids: &[super::ids::SiteId], t: &TypeId| {
        ids.iter().any(|s| {
            network
                .sites
                .get(s)
                .is_some_and(|site| site.types.contains(t))
        })
    };
    rule.conditions.iter().all(|cond| match cond {
        Condition::ChannelHasType(t) => c.types.contains(t),
        Condition::InputHasType(t) => site_has(&c.inputs, t),
        Condition::OutputHasType(t) => site_has(&c.outputs, t),
    })
}
