mod common;

use common::checks::abstraction_case;

#[test]
fn collapse_preserves_exterior_reachability() {
    let mut checked = 0;
    let mut skipped = 0;
    let mut seed = 0u64;
    while checked < 200 {
        seed += 1;
        match abstraction_case(seed) {
            Some(result) => {
                result.unwrap();
                checked += 1;
            }
            None => skipped += 1,
        }
    }
    assert!(skipped < 20 * checked);
}
