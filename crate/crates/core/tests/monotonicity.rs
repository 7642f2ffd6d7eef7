mod common;

use common::checks::monotonic_pair;
use ifm_core::analysis::Verdict;

/// Runs `pairs` applicable (network, edit) pairs; returns how many verdicts
/// were compared.
fn run(pairs: usize, adding: bool) -> usize {
    let mut done = 0;
    let mut compared = 0;
    let mut seed = if adding { 0 } else { 1 << 32 };
    while done < pairs {
        seed += 1;
        let Some(result) = monotonic_pair(seed, adding) else {
            continue;
        };
        compared += result.unwrap();
        done += 1;
    }
    compared
}

#[test]
fn adding_a_drop_never_opens() {
    assert!(run(1000, true) >= 1000);
}

#[test]
fn removing_a_drop_never_closes() {
    assert!(run(1000, false) >= 1000);
}

#[test]
fn verdicts_are_ordered() {
    assert!(Verdict::Closed < Verdict::Conditional && Verdict::Conditional < Verdict::Open);
}
