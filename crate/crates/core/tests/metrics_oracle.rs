mod common;

use common::{attempt_matrix_of, check_hand_cases, check_metrics_case, record_matrix, to_records};
use dissent::metrics::{decision_robustness, writing_robustness};
use dissent::{KernelTag, OutcomeCategory, RecordGroups};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn library_metrics_match_brute_force(matrix in record_matrix()) {
        check_metrics_case(&matrix)?;
    }
}

#[test]
fn worked_examples() {
    check_hand_cases().unwrap();
}

#[test]
fn single_attempt_has_no_pairwise_metrics() {
    let records = to_records(&attempt_matrix_of(OutcomeCategory::Correct));
    let groups = RecordGroups::new(&records).unwrap();
    assert_eq!(decision_robustness::<f64>(&groups), None);
    assert_eq!(writing_robustness::<f64, _>(&groups, &KernelTag::Jaccard), None);
}
