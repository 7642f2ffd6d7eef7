//! The recruitment model shipped with the crate, its outcomes and the
//! expected assessments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::analysis::{impact_statuses, ConfigurationAssessment, ImpactSpec, Verdict};
use crate::dsl::{parse_model_with, ParseError, SourceModel};

pub const MODEL_PATH: &str = "fixtures/recruitment.ifm";
pub const OUTCOMES_PATH: &str = "fixtures/recruitment.outcomes.ifm";
pub const GOLDEN_PATH: &str = "fixtures/recruitment.golden.json";

pub const MODEL_TEXT: &str = include_str!("../../../fixtures/recruitment.ifm");
pub const OUTCOMES_TEXT: &str = include_str!("../../../fixtures/recruitment.outcomes.ifm");
pub const GOLDEN_TEXT: &str = include_str!("../../../fixtures/recruitment.golden.json");

/// Expected result for one outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenExpectation {
    pub outcome: String,
    pub verdict: Verdict,
    /// Channel sequences of the unconditionally open paths, sorted.
    pub paths: Vec<Vec<String>>,
    /// Minimum blocking mitigations as `channel.id`.
    pub blockers: Vec<String>,
}

/// Expected status of one named impact pathway.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenImpact {
    pub impact: String,
    pub open: bool,
    pub paths: Vec<Vec<String>>,
}

/// Expectations that must hold in every configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Golden {
    pub configurations: Vec<String>,
    pub outcomes: Vec<GoldenExpectation>,
    pub impacts: Vec<GoldenImpact>,
}

/// The network alone.
pub fn load_recruitment_network() -> Result<SourceModel, ParseError> {
    parse_model_with(MODEL_TEXT, MODEL_PATH, &crate::dsl::no_files)
}

/// The network with outcomes O1..O4 and impacts I1..I3 attached.
pub fn load_recruitment_model() -> Result<SourceModel, ParseError> {
    let mut m = load_recruitment_network()?;
    m.attach_outcomes(OUTCOMES_TEXT, OUTCOMES_PATH)?;
    Ok(m)
}

pub fn golden_expectations() -> Golden {
    serde_json::from_str(GOLDEN_TEXT).expect("golden file is valid JSON")
}

/// Projects one configuration's assessments onto the golden shape.
pub fn observe(
    row: &ConfigurationAssessment,
    impacts: &[ImpactSpec],
) -> (Vec<GoldenExpectation>, Vec<GoldenImpact>) {
    let outcomes = row
        .assessments
        .iter()
        .map(|a| {
            let paths: BTreeSet<Vec<String>> = a
                .unconditionally_open_paths
                .iter()
                .map(|p| p.channel_ids())
                .collect();
            GoldenExpectation {
                outcome: a.outcome.clone(),
                verdict: a.verdict,
                paths: paths.into_iter().collect(),
                blockers: a
                    .blocking_mitigations
                    .iter()
                    .map(ToString::to_string)
                    .collect(),
            }
        })
        .collect();
    let statuses = impact_statuses(impacts, &row.assessments);
    let impacts = impacts
        .iter()
        .zip(statuses)
        .map(|(spec, st)| GoldenImpact {
            impact: spec.id.clone(),
            open: st.open,
            paths: spec
                .paths
                .iter()
                .map(|p| p.iter().map(ToString::to_string).collect())
                .collect(),
        })
        .collect();
    (outcomes, impacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{assess_all, DEFAULT_MAX_PATHS};
    use crate::model::{classify_sites, validate};

    #[test]
    fn fixture_parses_and_validates() {
        let m = load_recruitment_model().unwrap();
        assert!(
            validate(&m.network).is_valid(),
            "{:?}",
            validate(&m.network)
        );
        assert_eq!(m.network.channels.len(), 16);
        assert_eq!(m.outcomes.len(), 5);
        assert_eq!(m.impacts.len(), 3);
    }

    #[test]
    fn fixture_matches_golden() {
        let m = load_recruitment_model().unwrap();
        let golden = golden_expectations();
        let matrix = assess_all(&m.network, &m.outcomes, DEFAULT_MAX_PATHS).unwrap();
        let names: Vec<&str> = matrix
            .configurations
            .iter()
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(names, golden.configurations);
        for row in &matrix.configurations {
            let (outcomes, impacts) = observe(row, &m.impacts);
            assert_eq!(outcomes, golden.outcomes, "{}", row.name);
            assert_eq!(impacts, golden.impacts, "{}", row.name);
        }
    }

    #[test]
    fn endpoints() {
        let m = load_recruitment_network().unwrap();
        let classes = classify_sites(&m.network).unwrap();
        assert!(classes.outputs.iter().any(|s| s.as_str() == "C4"));
    }
}
