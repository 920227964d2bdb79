mod common;

use common::{check_duality_case, task_and_nested_deltas};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn blocked_iff_no_feasible_path_and_fragility_is_monotone((task, small, large) in task_and_nested_deltas()) {
        check_duality_case(&task, &small, &large)?;
    }
}
