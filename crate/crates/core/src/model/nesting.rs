//! Collapsing a subnet into one abstract channel and expanding it back.

use std::collections::{BTreeMap, BTreeSet};

use super::alternatives::Toggle;
use super::ids::{ChannelId, SiteId};
use super::network::{Channel, Network};
use super::validate::topological_order;
use super::ModelError;
use crate::analysis::summarize_as_channel;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

/// Replaces the channels of `subnet` (nested subnets included) by a single
/// abstract channel whose definition holds the removed interior.
pub fn collapse(network: &Network, subnet: &str) -> Result<Network, ModelError> {
    let root = network
        .subnets
        .get(subnet)
        .ok_or_else(|| ModelError::UnknownSubnet(subnet.to_string()))?;
    let closure = network.subnet_closure(subnet);
    let members = network.subnet_channels(subnet);
    if members.is_empty() {
        return Err(ModelError::CollapseRejected(format!(
            "subnet `{subnet}` has no channels"
        )));
    }
    let member_channels: Vec<&Channel> = members.iter().map(|c| &network.channels[c]).collect();
    let consumed_in: BTreeSet<&SiteId> = member_channels.iter().flat_map(|c| &c.inputs).collect();
    let produced_in: BTreeSet<&SiteId> = member_channels.iter().flat_map(|c| &c.outputs).collect();
    let consumed_out: BTreeSet<&SiteId> = network
        .channels
        .values()
        .filter(|c| !members.contains(&c.id))
        .flat_map(|c| &c.inputs)
        .collect();

    let boundary_in: Vec<SiteId> = consumed_in
        .iter()
        .filter(|s| !produced_in.contains(*s))
        .map(|s| (*s).clone())
        .collect();
    let exposed: Vec<SiteId> = produced_in
        .iter()
        .filter(|s| consumed_out.contains(*s) || !consumed_in.contains(*s))
        .map(|s| (*s).clone())
        .collect();
    if let Some(s) = exposed.iter().find(|s| consumed_in.contains(s)) {
        return Err(ModelError::CollapseRejected(format!(
            "site `{s}` is used both inside and outside the subnet"
        )));
    }
    let interior: BTreeSet<SiteId> = produced_in
        .iter()
        .filter(|s| !exposed.contains(*s))
        .map(|s| (*s).clone())
        .collect();

    let abstract_id: ChannelId = if let Some(id) = &root.abstract_id {
        id.clone()
    } else if members.len() == 1 {
        members.iter().next().expect("one member").clone()
    } else {
        ChannelId::from(sanitize(subnet))
    };
    if !members.contains(&abstract_id) && network.channels.contains_key(&abstract_id) {
        return Err(ModelError::CollapseRejected(format!(
            "channel id `{abstract_id}` is already in use"
        )));
    }

    // alternatives may only toggle an edge whose input no other member reads
    let mut alternatives = network.alternatives.clone();
    for alt in alternatives.values_mut() {
        for v in &mut alt.variants {
            let mut present = BTreeSet::new();
            for t in &v.present {
                let remapped = match t {
                    Toggle::Edge { channel, input } if members.contains(channel) => {
                        let readers = member_channels
                            .iter()
                            .filter(|c| c.inputs.contains(input))
                            .count();
                        if readers != 1 || !boundary_in.contains(input) {
                            return Err(ModelError::CollapseRejected(format!(
                                "alternative `{}` toggles an interior edge",
                                alt.id
                            )));
                        }
                        Toggle::Edge {
                            channel: abstract_id.clone(),
                            input: input.clone(),
                        }
                    }
                    Toggle::Channel { channel } | Toggle::Mitigation { channel, .. }
                        if members.contains(channel) =>
                    {
                        return Err(ModelError::CollapseRejected(format!(
                            "alternative `{}` toggles {t} inside the subnet",
                            alt.id
                        )));
                    }
                    other => other.clone(),
                };
                present.insert(remapped);
            }
            v.present = present;
        }
    }

    let mut def = Network {
        name: subnet.to_string(),
        tags: network.tag_universe(),
        type_system: network.type_system.clone(),
        ..Network::default()
    };
    for s in boundary_in.iter().chain(&exposed).chain(&interior) {
        def.add_site(network.sites[s].clone());
    }
    for c in &member_channels {
        def.channels.insert(c.id.clone(), (*c).clone());
    }
    for name in &closure {
        let mut sub = network.subnets[name].clone();
        if name == subnet {
            sub.parent = None;
        }
        def.subnets.insert(name.clone(), sub);
    }

    let mut out = network.clone();
    out.alternatives = alternatives;
    for c in &members {
        out.channels.remove(c);
    }
    for s in &interior {
        out.sites.remove(s);
    }
    for name in &closure {
        out.subnets.remove(name);
    }
    for s in out.sites.values_mut() {
        if s.subnet.as_ref().is_some_and(|n| closure.contains(n)) {
            s.subnet = root.parent.clone();
        }
    }

    let mut channel = if members.len() == 1 {
        let mut c = member_channels[0].clone();
        c.id = abstract_id.clone();
        c
    } else {
        let flow = summarize_as_channel(&def).map_err(|e| {
            ModelError::CollapseRejected(format!("interior cannot be summarized: {e}"))
        })?;
        let mut c = Channel::new(abstract_id.clone(), boundary_in.clone(), exposed.clone());
        c.flow = flow;
        c.name = subnet.to_string();
        let actors: BTreeSet<_> = member_channels.iter().map(|c| &c.actor).collect();
        if actors.len() == 1 {
            c.actor = member_channels[0].actor.clone();
        }
        c.bias_kinds = member_channels
            .iter()
            .flat_map(|c| c.bias_kinds.iter().cloned())
            .collect();
        c
    };
    channel.subnet = root.parent.clone();
    if members.len() > 1 || channel.definition.is_none() {
        channel.definition = Some(Box::new(def));
    }
    out.channels.insert(abstract_id, channel);

    if topological_order(&out).is_none() {
        return Err(ModelError::CollapseRejected(
            "collapsing would create a cycle".into(),
        ));
    }
    Ok(out)
}

/// Replaces abstract channel `id` by its definition.
pub fn expand(network: &Network, id: &str) -> Result<Network, ModelError> {
    let channel = network
        .channels
        .get(id)
        .ok_or_else(|| ModelError::UnknownChannel(id.to_string()))?;
    let def = channel
        .definition
        .as_deref()
        .ok_or_else(|| ModelError::MissingDefinition(id.to_string()))?;
    let classes = def.classes_unchecked();
    let inputs: BTreeSet<&SiteId> = channel.inputs.iter().collect();
    let outputs: BTreeSet<&SiteId> = channel.outputs.iter().collect();
    if inputs != classes.inputs.iter().collect::<BTreeSet<_>>() {
        return Err(ModelError::BoundaryMismatch(format!(
            "interior inputs differ from the inputs of `{id}`"
        )));
    }
    if outputs != classes.outputs.iter().collect::<BTreeSet<_>>() {
        return Err(ModelError::BoundaryMismatch(format!(
            "interior outputs differ from the outputs of `{id}`"
        )));
    }

    let mut out = network.clone();
    out.channels.remove(id);
    for c in def.channels.values() {
        if out.channels.contains_key(&c.id) {
            return Err(ModelError::BoundaryMismatch(format!(
                "interior channel `{}` clashes with an existing channel",
                c.id
            )));
        }
        out.channels.insert(c.id.clone(), c.clone());
    }
    for s in def.sites.values() {
        if inputs.contains(&s.id) || outputs.contains(&s.id) {
            if let Some(outer) = out.sites.get_mut(&s.id) {
                outer.subnet = s.subnet.clone();
            }
            continue;
        }
        if out.sites.contains_key(&s.id) {
            return Err(ModelError::BoundaryMismatch(format!(
                "interior site `{}` clashes with an existing site",
                s.id
            )));
        }
        out.sites.insert(s.id.clone(), s.clone());
    }
    for (name, sub) in &def.subnets {
        if out.subnets.contains_key(name) {
            return Err(ModelError::BoundaryMismatch(format!(
                "interior subnet `{name}` clashes with an existing subnet"
            )));
        }
        let mut sub = sub.clone();
        if sub.parent.is_none() {
            sub.parent = channel.subnet.clone();
        }
        out.subnets.insert(name.clone(), sub);
    }

    let readers: BTreeMap<&SiteId, Vec<&ChannelId>> = def.consumers();
    for alt in out.alternatives.values_mut() {
        for v in &mut alt.variants {
            let mut present = BTreeSet::new();
            for t in &v.present {
                let remapped = match t {
                    Toggle::Edge { channel: c, input } if c.as_str() == id => {
                        match readers.get(input).map(Vec::as_slice) {
                            Some([only]) => Toggle::Edge {
                                channel: (*only).clone(),
                                input: input.clone(),
                            },
                            _ => {
                                return Err(ModelError::BoundaryMismatch(format!(
                                "alternative `{}` edge into `{id}` has no unique interior reader",
                                alt.id
                            )))
                            }
                        }
                    }
                    Toggle::Channel { channel: c } | Toggle::Mitigation { channel: c, .. }
                        if c.as_str() == id =>
                    {
                        return Err(ModelError::BoundaryMismatch(format!(
                            "alternative `{}` toggles {t}, which has no interior counterpart",
                            alt.id
                        )));
                    }
                    other => other.clone(),
                };
                present.insert(remapped);
            }
            v.present = present;
        }
    }
    Ok(out)
}
