//! Audit tables, DOT diagrams and the versioned JSON document shared by
//! the CLI and the HTTP service.

mod dot;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    apply_edits, assess_all, impact_statuses, what_if, AnalysisError, AssessmentDelta,
    AssessmentMatrix, Edit, ImpactSpec, OutcomeAggregate, OutcomeSpec,
};
use crate::dsl::{Provenance, SourceModel};
use crate::model::{
    topological_order, AlternativeSet, Carry, Channel, ChannelId, FeatureTag, Network, SiteId,
    Subnet, TagSelection,
};

pub use dot::render_dot;
pub use table::{render_csv, render_markdown};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version `{0}` (expected `{SCHEMA_VERSION}`)")]
    Version(String),
    #[error("unknown configuration `{0}`")]
    UnknownConfiguration(String),
    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRow {
    pub id: SiteId,
    pub name: String,
    pub types: Vec<String>,
    pub actor: Option<String>,
    pub seeds: Vec<FeatureTag>,
    pub subnet: Option<String>,
    /// `in`, `out` or `mid`.
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationRow {
    /// `channel.id`
    pub id: String,
    pub tags: Vec<FeatureTag>,
    pub conditional: bool,
    pub outputs: Vec<SiteId>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRow {
    pub output: SiteId,
    /// `*` for everything, `none`, `summary`, or `INPUT[tags]` items.
    pub carries: Vec<String>,
    pub introduces: Vec<FeatureTag>,
    pub proxies: Vec<String>,
}

/// One row of the transition table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub id: ChannelId,
    pub name: String,
    pub operation: String,
    pub inputs: Vec<SiteId>,
    pub outputs: Vec<SiteId>,
    /// Drawn as a junction node rather than a single edge.
    pub junction: bool,
    pub actor: Option<String>,
    pub subnet: Option<String>,
    pub types: Vec<String>,
    pub bias_kinds: Vec<String>,
    pub mitigations: Vec<MitigationRow>,
    pub flows: Vec<FlowRow>,
    /// Interior channel ids of an abstract channel.
    pub interior: Vec<ChannelId>,
    /// Outcomes with an open path through this channel in some configuration.
    pub outcomes: Vec<String>,
    /// Open impact pathways that include this channel.
    pub impacts: Vec<String>,
}

impl ChannelRow {
    pub fn transition(&self) -> String {
        format!("{} -> {}", join(&self.inputs), join(&self.outputs))
    }
}

fn join<T: AsRef<str>>(items: &[T]) -> String {
    items
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelView {
    pub name: String,
    pub provenance: Option<Provenance>,
    pub tags: Vec<FeatureTag>,
    pub sites: Vec<SiteRow>,
    pub subnets: Vec<Subnet>,
    pub alternatives: Vec<AlternativeSet>,
    pub configurations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub id: String,
    pub description: String,
    pub outcomes: Vec<String>,
    pub paths: Vec<Vec<ChannelId>>,
    pub note: String,
    /// Configuration name → all declared paths unconditionally open.
    pub open: BTreeMap<String, bool>,
}

/// Topology, outcomes and assessments for one model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    #[serde(rename = "schemaVersion")]
    pub schema_version: String,
    pub model: ModelView,
    pub channels: Vec<ChannelRow>,
    pub outcomes: Vec<OutcomeSpec>,
    pub impacts: Vec<ImpactReport>,
    pub assessments: AssessmentMatrix,
}

/// Topology only, as served for viewers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(rename = "schemaVersion")]
    pub schema_version: String,
    pub model: ModelView,
    pub channels: Vec<ChannelRow>,
    pub outcomes: Vec<OutcomeSpec>,
    pub impacts: Vec<ImpactSpec>,
}

/// Result of a what-if request: the delta and the verdicts after the edits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfDocument {
    #[serde(rename = "schemaVersion")]
    pub schema_version: String,
    pub edits: Vec<Edit>,
    pub delta: AssessmentDelta,
    pub after: Vec<OutcomeAggregate>,
}

/// Body of `POST /api/v1/whatif`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    /// Edit strings such as `disable-mitigation:b1.normalize`.
    pub edits: Vec<String>,
}

impl WhatIfRequest {
    /// Parses every edit, collecting one message per failure.
    pub fn parse(&self) -> Result<Vec<Edit>, Vec<String>> {
        let mut edits = Vec::new();
        let mut errors = Vec::new();
        for e in &self.edits {
            match e.parse::<Edit>() {
                Ok(edit) => edits.push(edit),
                Err(err) => errors.push(err.to_string()),
            }
        }
        if errors.is_empty() {
            Ok(edits)
        } else {
            Err(errors)
        }
    }
}

/// Payload of every non-2xx response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDocument {
    #[serde(rename = "schemaVersion")]
    pub schema_version: String,
    pub error: String,
    pub diagnostics: Vec<String>,
}

impl ErrorDocument {
    pub fn new(error: impl Into<String>, diagnostics: Vec<String>) -> Self {
        ErrorDocument {
            schema_version: SCHEMA_VERSION.into(),
            error: error.into(),
            diagnostics,
        }
    }
}

/// Channels in topological order, ties broken by id.
pub fn channel_order(network: &Network) -> Vec<ChannelId> {
    topological_order(network).unwrap_or_else(|| network.channels.keys().cloned().collect())
}

fn site_rows(network: &Network) -> Vec<SiteRow> {
    let classes = network.classes_unchecked();
    network
        .sites
        .values()
        .map(|s| SiteRow {
            id: s.id.clone(),
            name: s.name.clone(),
            types: s.types.iter().map(ToString::to_string).collect(),
            actor: s.actor.as_ref().map(ToString::to_string),
            seeds: s.seeds.iter().cloned().collect(),
            subnet: s.subnet.clone(),
            class: if classes.inputs.contains(&s.id) {
                "in"
            } else if classes.outputs.contains(&s.id) {
                "out"
            } else {
                "mid"
            }
            .to_string(),
        })
        .collect()
}

fn flow_rows(c: &Channel) -> (Vec<MitigationRow>, Vec<FlowRow>) {
    let mut mitigations: BTreeMap<String, MitigationRow> = BTreeMap::new();
    let mut flows = Vec::new();
    for out in &c.outputs {
        let Some(f) = c.flow.output(out) else {
            continue;
        };
        for m in f.drops.values() {
            let row = mitigations
                .entry(format!("{}.{}", c.id, m.id))
                .or_insert_with(|| MitigationRow {
                    id: format!("{}.{}", c.id, m.id),
                    tags: m.tags.iter().cloned().collect(),
                    conditional: m.conditional,
                    outputs: Vec::new(),
                    note: m.note.clone(),
                });
            row.outputs.push(out.clone());
        }
        let carries = match &f.carries {
            Carry::All => vec!["*".to_string()],
            Carry::Explicit(map) if map.is_empty() => vec!["none".to_string()],
            Carry::Explicit(map) => map
                .iter()
                .map(|(i, sel)| match sel {
                    TagSelection::All => format!("{i}[*]"),
                    TagSelection::Tags(t) => format!(
                        "{i}[{}]",
                        t.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(", ")
                    ),
                })
                .collect(),
            Carry::Summary(_) => vec!["summary".to_string()],
        };
        flows.push(FlowRow {
            output: out.clone(),
            carries,
            introduces: f.introduces.iter().map(|i| i.tag.clone()).collect(),
            proxies: f
                .proxies
                .iter()
                .map(|p| format!("{} -> {}", p.source, p.proxy))
                .collect(),
        });
    }
    (mitigations.into_values().collect(), flows)
}

fn channel_rows(
    network: &Network,
    matrix: Option<&AssessmentMatrix>,
    impacts: &[ImpactReport],
) -> Vec<ChannelRow> {
    let mut outcome_hits: BTreeMap<&ChannelId, BTreeSet<String>> = BTreeMap::new();
    for row in matrix
        .map(|m| m.configurations.as_slice())
        .unwrap_or_default()
    {
        for a in &row.assessments {
            for p in &a.open_paths {
                for c in p.channels() {
                    outcome_hits.entry(c).or_default().insert(a.outcome.clone());
                }
            }
        }
    }
    channel_order(network)
        .iter()
        .map(|id| {
            let c = &network.channels[id];
            let (mitigations, flows) = flow_rows(c);
            ChannelRow {
                id: c.id.clone(),
                name: c.name.clone(),
                operation: c.operation.clone(),
                inputs: c.inputs.clone(),
                outputs: c.outputs.clone(),
                junction: c.inputs.len() > 1 || c.outputs.len() > 1,
                actor: c.actor.as_ref().map(ToString::to_string),
                subnet: c.subnet.clone(),
                types: c.types.iter().map(ToString::to_string).collect(),
                bias_kinds: c.bias_kinds.iter().cloned().collect(),
                mitigations,
                flows,
                interior: c
                    .definition
                    .as_ref()
                    .map(|d| channel_order(d))
                    .unwrap_or_default(),
                outcomes: outcome_hits
                    .get(id)
                    .map(|s| s.iter().cloned().collect())
                    .unwrap_or_default(),
                impacts: impacts
                    .iter()
                    .filter(|i| {
                        i.open.values().any(|o| *o) && i.paths.iter().any(|p| p.contains(id))
                    })
                    .map(|i| i.id.clone())
                    .collect(),
            }
        })
        .collect()
}

fn model_view(m: &SourceModel, configurations: Vec<String>) -> ModelView {
    let n = &m.network;
    ModelView {
        name: n.name.clone(),
        provenance: m.provenance.clone(),
        tags: n.tag_universe().into_iter().collect(),
        sites: site_rows(n),
        subnets: n.subnets.values().cloned().collect(),
        alternatives: n.alternatives.values().cloned().collect(),
        configurations,
    }
}

fn configuration_names(n: &Network) -> Vec<String> {
    crate::model::expand_configurations(n)
        .iter()
        .map(|c| c.name())
        .collect()
}

/// Topology document.
pub fn model_document(m: &SourceModel) -> ModelDocument {
    ModelDocument {
        schema_version: SCHEMA_VERSION.into(),
        model: model_view(m, configuration_names(&m.network)),
        channels: channel_rows(&m.network, None, &[]),
        outcomes: m.outcomes.clone(),
        impacts: m.impacts.clone(),
    }
}

/// Assesses every outcome of `m` and assembles the report. `config`
/// restricts the document to one configuration by name.
pub fn build_report(
    m: &SourceModel,
    config: Option<&str>,
    max_paths: usize,
) -> Result<ReportDocument, ReportError> {
    let mut matrix = assess_all(&m.network, &m.outcomes, max_paths)?;
    if let Some(name) = config {
        if matrix.configuration(name).is_none() {
            return Err(ReportError::UnknownConfiguration(name.to_string()));
        }
        matrix.configurations.retain(|c| c.name == name);
        for agg in &mut matrix.aggregate {
            agg.verdicts.retain(|k, _| k == name);
            agg.worst = agg
                .verdicts
                .values()
                .copied()
                .max()
                .unwrap_or(crate::analysis::Verdict::Closed);
            agg.any_configuration_open = agg
                .verdicts
                .values()
                .any(|v| *v == crate::analysis::Verdict::Open);
        }
    }
    let impacts: Vec<ImpactReport> = m
        .impacts
        .iter()
        .map(|spec| {
            let open = matrix
                .configurations
                .iter()
                .filter(|row| row.violations.is_empty())
                .map(|row| {
                    let st = impact_statuses(std::slice::from_ref(spec), &row.assessments);
                    (row.name.clone(), st[0].open)
                })
                .collect();
            ImpactReport {
                id: spec.id.clone(),
                description: spec.description.clone(),
                outcomes: spec.outcomes.clone(),
                paths: spec.paths.clone(),
                note: spec.note.clone(),
                open,
            }
        })
        .collect();
    let configurations = matrix
        .configurations
        .iter()
        .map(|c| c.name.clone())
        .collect();
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION.into(),
        model: model_view(m, configurations),
        channels: channel_rows(&m.network, Some(&matrix), &impacts),
        outcomes: m.outcomes.clone(),
        impacts,
        assessments: matrix,
    })
}

/// Runs `edits` against `m` and reports the delta and the new verdicts.
pub fn build_whatif(
    m: &SourceModel,
    edits: &[Edit],
    max_paths: usize,
) -> Result<WhatIfDocument, ReportError> {
    let delta = what_if(&m.network, &m.outcomes, edits, max_paths)?;
    let edited = apply_edits(&m.network, edits)?;
    let after = assess_all(&edited, &m.outcomes, max_paths)?.aggregate;
    Ok(WhatIfDocument {
        schema_version: SCHEMA_VERSION.into(),
        edits: edits.to_vec(),
        delta,
        after,
    })
}

/// Pretty JSON with a trailing newline. Field order follows the type
/// declarations and every map is sorted, so output is deterministic.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

pub fn export_json(doc: &ReportDocument) -> Vec<u8> {
    to_json(doc)
}

/// Reads a report; fields this version does not know are ignored.
pub fn import_json(bytes: &[u8]) -> Result<ReportDocument, ReportError> {
    #[derive(Deserialize)]
    struct Head {
        #[serde(rename = "schemaVersion")]
        schema_version: String,
    }
    let head: Head = serde_json::from_slice(bytes)?;
    if head.schema_version != SCHEMA_VERSION {
        return Err(ReportError::Version(head.schema_version));
    }
    Ok(serde_json::from_slice(bytes)?)
}

/// Hops `(channel, from, to)` on the open paths of `outcome`, over every
/// configuration in the document.
pub fn highlighted_hops(
    doc: &ReportDocument,
    outcome: &str,
) -> Result<BTreeSet<(ChannelId, Option<SiteId>, SiteId)>, ReportError> {
    if !doc.outcomes.iter().any(|o| o.id == outcome) {
        return Err(ReportError::UnknownOutcome(outcome.to_string()));
    }
    Ok(doc
        .assessments
        .configurations
        .iter()
        .flat_map(|row| &row.assessments)
        .filter(|a| a.outcome == outcome)
        .flat_map(|a| &a.open_paths)
        .flat_map(|p| &p.hops)
        .map(|h| (h.channel.clone(), h.from.clone(), h.to.clone()))
        .collect())
}
