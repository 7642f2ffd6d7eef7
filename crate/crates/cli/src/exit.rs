//! Exit statuses: 0 clean, 1 findings, 2 usage, 3 parse or validation.

use std::fmt;

use ifm_client::ClientError;
use ifm_core::analysis::AnalysisError;
use ifm_core::dsl::{Diagnostic, ParseError};
use ifm_core::reporting::ReportError;

#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug)]
pub struct InvalidEdits(pub Vec<String>);

impl fmt::Display for InvalidEdits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid edits: {}", self.0.join("; "))
    }
}

impl std::error::Error for InvalidEdits {}

fn analysis_code(e: &AnalysisError) -> u8 {
    match e {
        AnalysisError::UnknownId(_)
        | AnalysisError::UnknownSite(_)
        | AnalysisError::UnknownTag(_)
        | AnalysisError::UnknownSubnet(_) => 2,
        _ => 3,
    }
}

/// Exit status and any positioned diagnostics carried by `e`.
pub fn classify(e: &anyhow::Error) -> (u8, Vec<Diagnostic>) {
    for cause in e.chain() {
        if let Some(p) = cause.downcast_ref::<ParseError>() {
            return (3, p.diagnostics.clone());
        }
        if cause.is::<Usage>() {
            return (2, Vec::new());
        }
        if cause.is::<InvalidEdits>() {
            return (3, Vec::new());
        }
        if let Some(a) = cause.downcast_ref::<AnalysisError>() {
            return (analysis_code(a), Vec::new());
        }
        if let Some(r) = cause.downcast_ref::<ReportError>() {
            return match r {
                ReportError::Analysis(a) => (analysis_code(a), Vec::new()),
                ReportError::UnknownConfiguration(_) | ReportError::UnknownOutcome(_) => {
                    (2, Vec::new())
                }
                _ => (3, Vec::new()),
            };
        }
        if let Some(c) = cause.downcast_ref::<ClientError>() {
            return match c {
                ClientError::Status { status, .. } if status.as_u16() == 400 => (3, Vec::new()),
                _ => (2, Vec::new()),
            };
        }
        if cause.is::<std::io::Error>() {
            return (2, Vec::new());
        }
    }
    (3, Vec::new())
}
