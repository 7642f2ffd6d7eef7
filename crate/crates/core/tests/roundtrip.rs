mod common;

use common::checks::{no_files, random_model, round_trip};
use ifm_core::casestudy::{load_recruitment_model, MODEL_TEXT};
use ifm_core::dsl::{parse_model_with, serialize};
use proptest::prelude::*;

#[test]
fn fixture_round_trips() {
    let m = parse_model_with(MODEL_TEXT, "recruitment.ifm", &no_files).unwrap();
    round_trip(&m).unwrap();
    let full = load_recruitment_model().unwrap();
    round_trip(&full).unwrap();
    assert_eq!(
        serialize(&full.network, &full.outcomes, &full.impacts),
        full.to_text()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn generated_models_round_trip(seed in any::<u64>()) {
        let m = random_model(seed);
        round_trip(&m).map_err(TestCaseError::fail)?;
        prop_assert_eq!(m.to_text(), m.clone().to_text());
    }
}
