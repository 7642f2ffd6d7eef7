//! Textual model format: lexer, parser with positioned diagnostics, and a
//! byte-deterministic serializer.

mod diagnostic;
mod lexer;
mod parser;
mod serialize;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{ImpactSpec, OutcomeSpec};
use crate::model::{validate, Network};

pub use diagnostic::{Diagnostic, ParseError, Severity, Span};
pub use parser::Resolver;
pub use serialize::serialize;

/// Version written in the `ifm N;` header.
pub const FORMAT_VERSION: u64 = 1;

/// Where a model was read from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    /// Hex SHA-256 of the text with CRLF line endings normalized to LF.
    pub sha256: String,
}

impl Provenance {
    pub fn of(path: &str, text: &str) -> Self {
        let normalized = text.replace("\r\n", "\n");
        Provenance {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(normalized.as_bytes())),
        }
    }
}

/// A parsed model with its outcomes. Equality ignores provenance and
/// source positions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceModel {
    pub network: Network,
    pub outcomes: Vec<OutcomeSpec>,
    pub impacts: Vec<ImpactSpec>,
    pub provenance: Option<Provenance>,
    #[serde(skip)]
    pub spans: BTreeMap<String, Span>,
}

impl PartialEq for SourceModel {
    fn eq(&self, other: &Self) -> bool {
        self.network == other.network
            && self.outcomes == other.outcomes
            && self.impacts == other.impacts
    }
}

impl SourceModel {
    pub fn from_network(network: Network) -> Self {
        SourceModel {
            network,
            outcomes: Vec::new(),
            impacts: Vec::new(),
            provenance: None,
            spans: BTreeMap::new(),
        }
    }

    /// Canonical text; see [`serialize`].
    pub fn to_text(&self) -> String {
        serialize(&self.network, &self.outcomes, &self.impacts)
    }

    /// Adds outcomes and impacts read from a separate file, checking their
    /// references against this model.
    pub fn attach_outcomes(&mut self, text: &str, file: &str) -> Result<(), ParseError> {
        let doc = parser::parse_document(text, file, &no_files, 0)?;
        let n = &doc.network;
        if !n.sites.is_empty()
            || !n.channels.is_empty()
            || !n.alternatives.is_empty()
            || !n.subnets.is_empty()
        {
            return Err(Diagnostic::error(
                file,
                Span { line: 1, col: 1 },
                "P008",
                "outcome files may only declare outcomes and impacts",
            )
            .into());
        }
        let mut outcomes = self.outcomes.clone();
        outcomes.extend(doc.outcomes);
        outcomes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut impacts = self.impacts.clone();
        impacts.extend(doc.impacts);
        impacts.sort_by(|a, b| a.id.cmp(&b.id));
        let diags = check_references(&self.network, &outcomes, &impacts, &doc.spans, file);
        if !diags.is_empty() {
            return Err(ParseError { diagnostics: diags });
        }
        self.outcomes = outcomes;
        self.impacts = impacts;
        Ok(())
    }

    /// Structural violations as positioned diagnostics.
    pub fn validation_diagnostics(&self) -> Vec<Diagnostic> {
        let file = self
            .provenance
            .as_ref()
            .map_or("<model>", |p| p.path.as_str());
        validate(&self.network)
            .violations
            .iter()
            .map(|v| {
                let span = v
                    .subject()
                    .and_then(|s| {
                        ["channel", "site", "subnet", "alt"]
                            .iter()
                            .find_map(|k| self.spans.get(&format!("{k}:{s}")))
                    })
                    .copied()
                    .unwrap_or(Span { line: 1, col: 1 });
                Diagnostic::error(file, span, v.code(), v.to_string())
            })
            .collect()
    }
}

pub(crate) fn no_files(path: &str) -> Result<(String, String), String> {
    Err(format!("file references are not allowed here (`{path}`)"))
}

fn check_references(
    network: &Network,
    outcomes: &[OutcomeSpec],
    impacts: &[ImpactSpec],
    spans: &BTreeMap<String, Span>,
    file: &str,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let at = |key: String| spans.get(&key).copied().unwrap_or(Span { line: 1, col: 1 });
    for o in outcomes {
        if let Err(e) = o.check(network) {
            out.push(Diagnostic::error(
                file,
                at(format!("outcome:{}", o.id)),
                "P004",
                format!("outcome `{}`: {e}", o.id),
            ));
        }
    }
    for i in impacts {
        let span = at(format!("impact:{}", i.id));
        for o in &i.outcomes {
            if !outcomes.iter().any(|x| &x.id == o) {
                out.push(Diagnostic::error(
                    file,
                    span,
                    "P004",
                    format!("impact `{}`: unknown outcome `{o}`", i.id),
                ));
            }
        }
        for c in i.paths.iter().flatten() {
            if !network.channels.contains_key(c) {
                out.push(Diagnostic::error(
                    file,
                    span,
                    "P004",
                    format!("impact `{}`: unknown channel `{c}`", i.id),
                ));
            }
        }
    }
    out
}

/// Parses model text with an explicit loader for `defined-by "file"`.
pub fn parse_model_with(
    text: &str,
    file: &str,
    resolver: Resolver<'_>,
) -> Result<SourceModel, ParseError> {
    let doc = parser::parse_document(text, file, resolver, 0)?;
    let diags = check_references(&doc.network, &doc.outcomes, &doc.impacts, &doc.spans, file);
    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }
    Ok(SourceModel {
        network: doc.network,
        outcomes: doc.outcomes,
        impacts: doc.impacts,
        provenance: Some(Provenance::of(file, text)),
        spans: doc.spans,
    })
}

/// Parses model text. `defined-by "file"` references are resolved relative
/// to the directory of `file`.
pub fn parse_model(text: &str, file: &str) -> Result<SourceModel, ParseError> {
    let base = Path::new(file)
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let resolver = move |rel: &str| -> Result<(String, String), String> {
        let path = base.join(rel);
        std::fs::read_to_string(&path)
            .map(|t| (path.display().to_string(), t))
            .map_err(|e| e.to_string())
    };
    parse_model_with(text, file, &resolver)
}
