use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::assess::{
    assess_all, AssessmentMatrix, ConfigurationAssessment, OutcomeAssessment, OutcomeSpec, Verdict,
};
use super::paths::Hop;
use super::{AnalysisError, Origin};
use crate::model::{
    configuration_name, is_valid_identifier, remove_element, validate, AltId, Carry, ChannelId,
    FeatureTag, Introduce, Mitigation, MitigationRef, Network, SiteId, Toggle,
};

const DEFAULT_INTRODUCE_KIND: &str = "Introduced";

/// A single hypothetical change to a network, written `kind:args` with
/// colon-separated arguments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Edit {
    DisableMitigation(MitigationRef),
    AddMitigation {
        channel: ChannelId,
        tag: FeatureTag,
        conditional: bool,
    },
    DisableChannel(ChannelId),
    Seed {
        site: SiteId,
        tag: FeatureTag,
    },
    Unseed {
        site: SiteId,
        tag: FeatureTag,
    },
    RemoveIntroduce {
        channel: ChannelId,
        tag: FeatureTag,
    },
    AddIntroduce {
        channel: ChannelId,
        tag: FeatureTag,
        kind: String,
    },
    /// Fixes an alternative set to one member.
    Alt {
        alt: AltId,
        member: String,
    },
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edit::DisableMitigation(m) => write!(f, "disable-mitigation:{m}"),
            Edit::AddMitigation {
                channel,
                tag,
                conditional,
            } => {
                write!(f, "add-mitigation:{channel}:{tag}")?;
                if *conditional {
                    f.write_str(":conditional")?;
                }
                Ok(())
            }
            Edit::DisableChannel(c) => write!(f, "disable-channel:{c}"),
            Edit::Seed { site, tag } => write!(f, "seed:{site}:{tag}"),
            Edit::Unseed { site, tag } => write!(f, "unseed:{site}:{tag}"),
            Edit::RemoveIntroduce { channel, tag } => write!(f, "remove-introduce:{channel}:{tag}"),
            Edit::AddIntroduce { channel, tag, kind } => {
                write!(f, "add-introduce:{channel}:{tag}")?;
                if kind != DEFAULT_INTRODUCE_KIND {
                    write!(f, ":{kind}")?;
                }
                Ok(())
            }
            Edit::Alt { alt, member } => write!(f, "alt:{alt}={member}"),
        }
    }
}

impl FromStr for Edit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("edit `{s}` has no `kind:` prefix"))?;
        let args: Vec<&str> = rest.split(':').collect();
        let ident = |a: &str| -> Result<String, String> {
            if is_valid_identifier(a) {
                Ok(a.to_string())
            } else {
                Err(format!("`{a}` is not a valid identifier in edit `{s}`"))
            }
        };
        let arity = |lo: usize, hi: usize| -> Result<(), String> {
            if args.len() < lo || args.len() > hi {
                Err(format!("edit `{s}` takes {lo}..={hi} arguments"))
            } else {
                Ok(())
            }
        };
        match kind {
            "disable-mitigation" => {
                arity(1, 1)?;
                MitigationRef::parse(args[0])
                    .map(Edit::DisableMitigation)
                    .ok_or_else(|| format!("expected `channel.mitigation` in edit `{s}`"))
            }
            "add-mitigation" => {
                arity(2, 3)?;
                let conditional = match args.get(2) {
                    None | Some(&"unconditional") => false,
                    Some(&"conditional") => true,
                    Some(other) => return Err(format!("unknown mitigation kind `{other}`")),
                };
                Ok(Edit::AddMitigation {
                    channel: ident(args[0])?.into(),
                    tag: ident(args[1])?.into(),
                    conditional,
                })
            }
            "disable-channel" => {
                arity(1, 1)?;
                Ok(Edit::DisableChannel(ident(args[0])?.into()))
            }
            "seed" | "unseed" => {
                arity(2, 2)?;
                let site = ident(args[0])?.into();
                let tag = ident(args[1])?.into();
                Ok(if kind == "seed" {
                    Edit::Seed { site, tag }
                } else {
                    Edit::Unseed { site, tag }
                })
            }
            "remove-introduce" => {
                arity(2, 2)?;
                Ok(Edit::RemoveIntroduce {
                    channel: ident(args[0])?.into(),
                    tag: ident(args[1])?.into(),
                })
            }
            "add-introduce" => {
                arity(2, 3)?;
                Ok(Edit::AddIntroduce {
                    channel: ident(args[0])?.into(),
                    tag: ident(args[1])?.into(),
                    kind: args.get(2).unwrap_or(&DEFAULT_INTRODUCE_KIND).to_string(),
                })
            }
            "alt" => {
                arity(1, 1)?;
                let (alt, member) = args[0]
                    .split_once('=')
                    .ok_or_else(|| format!("expected `alt:ID=member` in edit `{s}`"))?;
                Ok(Edit::Alt {
                    alt: ident(alt)?.into(),
                    member: ident(member)?,
                })
            }
            other => Err(format!("unknown edit kind `{other}`")),
        }
    }
}

impl TryFrom<String> for Edit {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Edit> for String {
    fn from(e: Edit) -> String {
        e.to_string()
    }
}

fn invalid(edit: &Edit, reason: impl Into<String>) -> AnalysisError {
    AnalysisError::InvalidEdit {
        edit: edit.to_string(),
        reason: reason.into(),
    }
}

/// Drops alternative toggles whose target no longer exists.
fn prune_toggles(network: &mut Network) {
    let alive = |n: &Network, t: &Toggle| match t {
        Toggle::Edge { channel, input } => n
            .channels
            .get(channel)
            .is_some_and(|c| c.inputs.contains(input)),
        Toggle::Channel { channel } => n.channels.contains_key(channel),
        Toggle::Mitigation {
            channel,
            mitigation,
        } => n
            .channels
            .get(channel)
            .is_some_and(|c| c.flow.mitigations().contains_key(mitigation.as_str())),
    };
    let snapshot = network.clone();
    for alt in network.alternatives.values_mut() {
        for v in &mut alt.variants {
            v.present.retain(|t| alive(&snapshot, t));
        }
    }
}

fn apply_one(network: &mut Network, edit: &Edit) -> Result<(), AnalysisError> {
    let channel_mut = |n: &mut Network, c: &ChannelId| {
        if n.channels.contains_key(c) {
            Ok(())
        } else {
            Err(invalid(edit, format!("unknown channel `{c}`")))
        }
    };
    match edit {
        Edit::DisableMitigation(m) => {
            channel_mut(network, &m.channel)?;
            let c = network.channels.get_mut(&m.channel).expect("checked");
            let mut found = false;
            for f in c.flow.outputs.values_mut() {
                found |= f.drops.remove(&m.id).is_some();
            }
            if !found {
                return Err(invalid(
                    edit,
                    format!("channel `{}` has no mitigation `{}`", m.channel, m.id),
                ));
            }
            prune_toggles(network);
        }
        Edit::AddMitigation {
            channel,
            tag,
            conditional,
        } => {
            channel_mut(network, channel)?;
            if !network.tag_universe().contains(tag) {
                return Err(invalid(edit, format!("unknown feature tag `{tag}`")));
            }
            let c = network.channels.get_mut(channel).expect("checked");
            if c.flow
                .outputs
                .values()
                .any(|f| matches!(f.carries, Carry::Summary(_)))
            {
                return Err(invalid(edit, "channel carries a summarized relation"));
            }
            let existing = c
                .flow
                .mitigations()
                .keys()
                .map(|k| k.to_string())
                .collect::<BTreeSet<_>>();
            let base = format!("whatif_{tag}");
            let mut id = base.clone();
            let mut n = 2;
            while existing.contains(&id) {
                id = format!("{base}{n}");
                n += 1;
            }
            for f in c.flow.outputs.values_mut() {
                f.drops.insert(
                    id.clone(),
                    Mitigation {
                        id: id.clone(),
                        tags: [tag.clone()].into_iter().collect(),
                        conditional: *conditional,
                        note: String::new(),
                    },
                );
            }
        }
        Edit::DisableChannel(c) => {
            channel_mut(network, c)?;
            remove_element(network, &Toggle::Channel { channel: c.clone() });
            prune_toggles(network);
        }
        Edit::Seed { site, tag } => {
            let s = network
                .sites
                .get_mut(site)
                .ok_or_else(|| invalid(edit, format!("unknown site `{site}`")))?;
            if !s.seeds.insert(tag.clone()) {
                return Err(invalid(
                    edit,
                    format!("site `{site}` already carries `{tag}`"),
                ));
            }
            network.tags.insert(tag.clone());
        }
        Edit::Unseed { site, tag } => {
            let s = network
                .sites
                .get_mut(site)
                .ok_or_else(|| invalid(edit, format!("unknown site `{site}`")))?;
            if !s.seeds.remove(tag) {
                return Err(invalid(
                    edit,
                    format!("site `{site}` is not seeded with `{tag}`"),
                ));
            }
        }
        Edit::RemoveIntroduce { channel, tag } => {
            channel_mut(network, channel)?;
            let c = network.channels.get_mut(channel).expect("checked");
            let mut found = false;
            for f in c.flow.outputs.values_mut() {
                let before = f.introduces.len();
                f.introduces.retain(|i| &i.tag != tag);
                found |= f.introduces.len() != before;
                if let Carry::Summary(entries) = &mut f.carries {
                    let before = entries.len();
                    entries
                        .retain(|e| !(e.input.is_none() && e.via.first().unwrap_or(&e.to) == tag));
                    found |= entries.len() != before;
                }
            }
            if !found {
                return Err(invalid(
                    edit,
                    format!("channel `{channel}` does not introduce `{tag}`"),
                ));
            }
        }
        Edit::AddIntroduce { channel, tag, kind } => {
            channel_mut(network, channel)?;
            let c = network.channels.get_mut(channel).expect("checked");
            if c.flow
                .outputs
                .values()
                .any(|f| matches!(f.carries, Carry::Summary(_)))
            {
                return Err(invalid(edit, "channel carries a summarized relation"));
            }
            for f in c.flow.outputs.values_mut() {
                f.introduces.insert(Introduce {
                    tag: tag.clone(),
                    kind: kind.clone(),
                });
            }
            network.tags.insert(tag.clone());
        }
        Edit::Alt { alt, member } => {
            let set = network
                .alternatives
                .get(alt)
                .ok_or_else(|| invalid(edit, format!("unknown alternative `{alt}`")))?
                .clone();
            if !set.member_names().contains(&member.as_str()) {
                return Err(invalid(
                    edit,
                    format!("alternative `{alt}` has no member `{member}`"),
                ));
            }
            let kept: BTreeSet<&Toggle> = set
                .variants
                .iter()
                .filter(|v| &v.name == member)
                .flat_map(|v| &v.present)
                .collect();
            network.alternatives.remove(alt);
            for t in set.controlled() {
                if !kept.contains(t) {
                    remove_element(network, t);
                }
            }
            prune_toggles(network);
        }
    }
    Ok(())
}

/// Applies `edits` in order. The result must still be a valid network.
pub fn apply_edits(network: &Network, edits: &[Edit]) -> Result<Network, AnalysisError> {
    let mut out = network.clone();
    for e in edits {
        apply_one(&mut out, e)?;
    }
    let report = validate(&out);
    if !report.is_valid() {
        return Err(AnalysisError::EditedNetworkInvalid(report));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathStatus {
    Open,
    Conditional,
    Absent,
}

/// A path whose status differs between the base and the edited network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathChange {
    pub origin: Origin,
    pub hops: Vec<Hop>,
    pub tag: FeatureTag,
    pub chain: Vec<FeatureTag>,
    pub before: PathStatus,
    pub after: PathStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeChange {
    pub configuration: String,
    pub outcome: String,
    /// `None` when the configuration was invalid on that side.
    pub before: Option<Verdict>,
    pub after: Option<Verdict>,
    pub paths: Vec<PathChange>,
}

impl OutcomeChange {
    pub fn verdict_changed(&self) -> bool {
        self.before != self.after
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentDelta {
    pub edits: Vec<Edit>,
    /// Only outcomes whose verdict or path statuses changed.
    pub changes: Vec<OutcomeChange>,
}

impl AssessmentDelta {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Outcome ids with a verdict change in any configuration.
    pub fn flipped_outcomes(&self) -> BTreeSet<&str> {
        self.changes
            .iter()
            .filter(|c| c.verdict_changed())
            .map(|c| c.outcome.as_str())
            .collect()
    }
}

type PathKey = (Origin, Vec<Hop>, FeatureTag, Vec<FeatureTag>);

fn statuses(a: Option<&OutcomeAssessment>) -> BTreeMap<PathKey, PathStatus> {
    let mut out = BTreeMap::new();
    if let Some(a) = a {
        for p in &a.open_paths {
            out.insert(p.identity(), PathStatus::Conditional);
        }
        for p in &a.unconditionally_open_paths {
            out.insert(p.identity(), PathStatus::Open);
        }
    }
    out
}

fn diff_outcome(
    configuration: &str,
    outcome: &str,
    before: Option<&OutcomeAssessment>,
    after: Option<&OutcomeAssessment>,
) -> Option<OutcomeChange> {
    let b = statuses(before);
    let a = statuses(after);
    let keys: BTreeSet<&PathKey> = b.keys().chain(a.keys()).collect();
    let mut paths = Vec::new();
    for k in keys {
        let sb = b.get(k).copied().unwrap_or(PathStatus::Absent);
        let sa = a.get(k).copied().unwrap_or(PathStatus::Absent);
        if sb != sa {
            paths.push(PathChange {
                origin: k.0.clone(),
                hops: k.1.clone(),
                tag: k.2.clone(),
                chain: k.3.clone(),
                before: sb,
                after: sa,
            });
        }
    }
    let change = OutcomeChange {
        configuration: configuration.to_string(),
        outcome: outcome.to_string(),
        before: before.map(|x| x.verdict),
        after: after.map(|x| x.verdict),
        paths,
    };
    (change.verdict_changed() || !change.paths.is_empty()).then_some(change)
}

fn find<'a>(
    row: Option<&'a ConfigurationAssessment>,
    outcome: &str,
) -> Option<&'a OutcomeAssessment> {
    row.and_then(|r| r.assessments.iter().find(|a| a.outcome == outcome))
}

/// Differences between two assessment matrices. Rows of `after` are matched
/// to rows of `before` after re-adding the alternatives fixed in `fixed`.
pub(crate) fn diff_matrices(
    before: &AssessmentMatrix,
    after: &AssessmentMatrix,
    outcomes: &[OutcomeSpec],
    fixed: &BTreeMap<AltId, String>,
) -> Vec<OutcomeChange> {
    let mut changes = Vec::new();
    for row in &after.configurations {
        let mut key = row.assignment.clone();
        key.extend(fixed.iter().map(|(k, v)| (k.clone(), v.clone())));
        let name = configuration_name(&key);
        let base = before.configuration(&name);
        for o in outcomes {
            if let Some(c) =
                diff_outcome(&row.name, &o.id, find(base, &o.id), find(Some(row), &o.id))
            {
                changes.push(c);
            }
        }
    }
    changes
}

/// Re-assesses `outcomes` after applying `edits` and reports what changed.
pub fn what_if(
    network: &Network,
    outcomes: &[OutcomeSpec],
    edits: &[Edit],
    max_paths: usize,
) -> Result<AssessmentDelta, AnalysisError> {
    let edited = apply_edits(network, edits)?;
    for o in outcomes {
        o.check(&edited).map_err(|e| AnalysisError::InvalidEdit {
            edit: edits
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
            reason: format!("outcome `{}` no longer applies: {e}", o.id),
        })?;
    }
    let before = assess_all(network, outcomes, max_paths)?;
    let after = assess_all(&edited, outcomes, max_paths)?;
    let fixed: BTreeMap<AltId, String> = edits
        .iter()
        .filter_map(|e| match e {
            Edit::Alt { alt, member } => Some((alt.clone(), member.clone())),
            _ => None,
        })
        .collect();
    Ok(AssessmentDelta {
        edits: edits.to_vec(),
        changes: diff_matrices(&before, &after, outcomes, &fixed),
    })
}
