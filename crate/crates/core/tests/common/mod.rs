//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dissent::metrics::{completion_rate, decision_robustness, task_success_rate, writing_robustness};
use dissent::task::{fragility, generate_recipe_task, RecipeShape, Step};
use dissent::{
    feasible_paths, generate_single_chain_task, is_blocked, Atom, DisagreementSet, Exact, FactKey, KernelTag,
    OutcomeCategory, PathKind, RecordGroups, RunRecord, SolutionPath, Task,
};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Big = Ratio<i128>;

// ---------------------------------------------------------------- metrics

pub const ATOM_POOL: [&str; 5] = ["a", "b", "c", "d", "e"];

fn atom(name: &str) -> Atom {
    Atom::new(name, "uses", "x").unwrap()
}

/// (completed, outcome, atom indices) for one attempt.
pub type RawAttempt = (bool, OutcomeCategory, BTreeSet<usize>);

pub fn outcome_strategy() -> impl Strategy<Value = OutcomeCategory> {
    prop::sample::select(vec![
        OutcomeCategory::Correct,
        OutcomeCategory::WrongOutput,
        OutcomeCategory::InvalidForm,
        OutcomeCategory::Stalled,
    ])
}

fn attempt_strategy() -> impl Strategy<Value = RawAttempt> {
    (any::<bool>(), outcome_strategy(), prop::collection::btree_set(0..ATOM_POOL.len(), 0..=ATOM_POOL.len())).prop_map(
        |(completed, outcome, atoms)| {
            if completed {
                (true, outcome, atoms)
            } else {
                (false, OutcomeCategory::NoArtifact, atoms)
            }
        },
    )
}

/// N tasks by k attempts, both in 1..=4.
pub fn record_matrix() -> impl Strategy<Value = Vec<Vec<RawAttempt>>> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, k)| prop::collection::vec(prop::collection::vec(attempt_strategy(), k), n))
}

pub fn to_records(matrix: &[Vec<RawAttempt>]) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for (i, attempts) in matrix.iter().enumerate() {
        for (j, (completed, outcome, atoms)) in attempts.iter().enumerate() {
            out.push(RunRecord {
                scenario_id: "oracle".into(),
                repetition: 0,
                task_id: format!("t{i}"),
                attempt_index: j + 1,
                completed: *completed,
                final_answer: completed.then(|| "answer".into()),
                atoms_used: atoms.iter().map(|&a| atom(ATOM_POOL[a])).collect(),
                outcome: *outcome,
                outcome_detail: None,
                transcript: vec![],
                seed: 0,
            });
        }
    }
    // Interleave so grouping cannot rely on input order.
    out.reverse();
    out
}

fn big(n: usize) -> Big {
    Big::from_integer(n as i128)
}

fn set_jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> Big {
    let union: BTreeSet<_> = a.union(b).collect();
    if union.is_empty() {
        return Big::from_integer(1);
    }
    big(a.iter().filter(|x| b.contains(x)).count()) / big(union.len())
}

/// Metric values computed straight from the definitions: indicator sums
/// over all N*k cells, and for the pairwise metrics the average over all
/// ordered attempt pairs p != q of each task.
pub struct OracleMetrics {
    pub cr: Big,
    pub tsr: Big,
    pub cwr: Option<Big>,
    pub cdr: Option<Big>,
}

pub fn oracle(matrix: &[Vec<RawAttempt>]) -> OracleMetrics {
    let n = matrix.len();
    let k = matrix[0].len();
    let cells = big(n * k);
    let completed = matrix.iter().flatten().filter(|a| a.0).count();
    let correct = matrix.iter().flatten().filter(|a| a.1 == OutcomeCategory::Correct).count();
    let pairwise = |score: &dyn Fn(&RawAttempt, &RawAttempt) -> Big| -> Option<Big> {
        if k < 2 {
            return None;
        }
        let mut total = Big::from_integer(0);
        for attempts in matrix {
            let mut sum = Big::from_integer(0);
            for p in 0..k {
                for q in 0..k {
                    if p != q {
                        sum += score(&attempts[p], &attempts[q]);
                    }
                }
            }
            total += sum / big(k * (k - 1));
        }
        Some(total / big(n))
    };
    OracleMetrics {
        cr: big(completed) / cells.clone(),
        tsr: big(correct) / cells,
        cwr: pairwise(&|x, y| set_jaccard(&x.2, &y.2)),
        cdr: pairwise(&|x, y| Big::from_integer((x.1 == y.1) as i128)),
    }
}

fn widen(v: Exact) -> Big {
    Big::new(*v.numer() as i128, *v.denom() as i128)
}

pub fn check_metrics_case(matrix: &[Vec<RawAttempt>]) -> Result<(), TestCaseError> {
    let records = to_records(matrix);
    let groups = RecordGroups::new(&records).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let want = oracle(matrix);
    prop_assert_eq!(groups.n_tasks(), matrix.len());
    prop_assert_eq!(completion_rate::<Exact>(&groups).map(widen), Some(want.cr.clone()));
    prop_assert_eq!(task_success_rate::<Exact>(&groups).map(widen), Some(want.tsr.clone()));
    prop_assert_eq!(writing_robustness::<Exact, _>(&groups, &KernelTag::Jaccard).map(widen), want.cwr.clone());
    prop_assert_eq!(decision_robustness::<Exact>(&groups).map(widen), want.cdr.clone());
    let cwr64: Option<f64> = writing_robustness(&groups, &KernelTag::Jaccard);
    if let (Some(got), Some(w)) = (cwr64, &want.cwr) {
        let w = *w.numer() as f64 / *w.denom() as f64;
        prop_assert!((got - w).abs() < 1e-12);
    }
    Ok(())
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Runs the metric oracle comparison over `cases` generated record sets.
pub fn run_metric_oracle(cases: u32) -> Result<(), String> {
    deterministic_runner(cases)
        .run(&record_matrix(), |m| check_metrics_case(&m))
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- tasks

/// Recipe task over keys k0..k5 whose paths are arbitrary subsets, reduced
/// to an antichain so minimality holds. Paths may overlap freely.
pub fn overlapping_recipe_task() -> impl Strategy<Value = Task> {
    prop::collection::vec(prop::collection::btree_set(0usize..6, 1..=4), 1..=5).prop_map(|sets| {
        let mut kept: Vec<BTreeSet<usize>> = Vec::new();
        let mut sorted = sets;
        sorted.sort_by_key(BTreeSet::len);
        for s in sorted {
            if !kept.iter().any(|k| k.is_subset(&s)) {
                kept.push(s);
            }
        }
        let paths = kept
            .iter()
            .enumerate()
            .map(|(i, keys)| {
                let steps = keys
                    .iter()
                    .map(|k| Step::from(Atom::new(format!("k{k}"), "impl", format!("v{k}")).unwrap()))
                    .collect();
                SolutionPath::new(format!("p{i}"), PathKind::Recipe, steps).unwrap()
            })
            .collect();
        Task::new("overlap", "build", "gt", paths).unwrap()
    })
}

pub fn generated_task() -> impl Strategy<Value = Task> {
    prop_oneof![
        (any::<u64>(), 1usize..=4).prop_map(|(s, hops)| generate_single_chain_task(s, hops).unwrap()),
        (any::<u64>(), 1usize..=4, 0usize..=2, 3usize..=5).prop_map(|(s, n_paths, shared, steps)| {
            let shared = if n_paths > 1 { shared.min(steps - 1) } else { shared.min(steps) };
            generate_recipe_task(s, RecipeShape { n_paths, shared_keys: shared, steps_per_path: steps }).unwrap()
        }),
        overlapping_recipe_task(),
    ]
}

/// A task together with two nested disagreement sets. Keys are drawn from
/// the task and from outside it.
pub fn task_and_nested_deltas() -> impl Strategy<Value = (Task, DisagreementSet, DisagreementSet)> {
    generated_task().prop_flat_map(|task| {
        let mut keys: Vec<FactKey> = task.all_keys().into_iter().collect();
        keys.push(FactKey::new("elsewhere", "impl").unwrap());
        let n = keys.len();
        (Just(task), Just(keys), prop::collection::vec(0u8..3, n))
    })
    .prop_map(|(task, keys, membership)| {
        // 0: in neither, 1: only in the larger set, 2: in both.
        let mut small = DisagreementSet::new();
        let mut large = DisagreementSet::new();
        for (key, m) in keys.into_iter().zip(membership) {
            if m >= 1 {
                large.insert(key.clone(), ["x", "y"]).unwrap();
            }
            if m == 2 {
                small.insert(key, ["x", "y"]).unwrap();
            }
        }
        (task, small, large)
    })
}

pub fn check_duality_case(task: &Task, small: &DisagreementSet, large: &DisagreementSet) -> Result<(), TestCaseError> {
    for delta in [small, large] {
        let feasible = feasible_paths(task, delta);
        prop_assert_eq!(is_blocked(task, delta), feasible.is_empty());
        let by_hand = task
            .paths()
            .iter()
            .filter(|p| p.steps.iter().all(|s| !delta.contains_key(&s.key)))
            .count();
        prop_assert_eq!(feasible.len(), by_hand);
    }
    prop_assert!(small.is_subset_of(large));
    prop_assert!(fragility::<Exact>(task, small) <= fragility::<Exact>(task, large));
    prop_assert!(!is_blocked(task, small) || is_blocked(task, large));
    Ok(())
}

pub fn run_duality(cases: u32) -> Result<(), String> {
    deterministic_runner(cases)
        .run(&task_and_nested_deltas(), |(t, s, l)| check_duality_case(&t, &s, &l))
        .map_err(|e| e.to_string())
}

fn hand_attempt(outcome: OutcomeCategory, atoms: &[usize]) -> RawAttempt {
    (outcome != OutcomeCategory::NoArtifact, outcome, atoms.iter().copied().collect())
}

/// The two worked examples: outcome agreement over [Correct, Correct,
/// InvalidForm] is 1/3 and Jaccard overlap over {a,b},{a,b},{a,c} is 5/9.
pub fn check_hand_cases() -> Result<(), String> {
    let ok = OutcomeCategory::Correct;
    let decisions = vec![vec![
        hand_attempt(ok, &[0]),
        hand_attempt(ok, &[0]),
        hand_attempt(OutcomeCategory::InvalidForm, &[0]),
    ]];
    let writing = vec![vec![hand_attempt(ok, &[0, 1]), hand_attempt(ok, &[0, 1]), hand_attempt(ok, &[0, 2])]];
    let cdr_records = to_records(&decisions);
    let cwr_records = to_records(&writing);
    let cdr_groups = RecordGroups::new(&cdr_records).map_err(|e| e.to_string())?;
    let cwr_groups = RecordGroups::new(&cwr_records).map_err(|e| e.to_string())?;
    let cdr: f64 = decision_robustness(&cdr_groups).ok_or("CDR undefined")?;
    let cwr: f64 = writing_robustness(&cwr_groups, &KernelTag::Jaccard).ok_or("CWR undefined")?;
    let cdr_exact: Exact = decision_robustness(&cdr_groups).ok_or("CDR undefined")?;
    let cwr_exact: Exact = writing_robustness(&cwr_groups, &KernelTag::Jaccard).ok_or("CWR undefined")?;
    if cdr_exact != Exact::new(1, 3) || (cdr - 1.0 / 3.0).abs() > 1e-12 {
        return Err(format!("CDR hand case gave {cdr_exact}"));
    }
    if cwr_exact != Exact::new(5, 9) || (cwr - 5.0 / 9.0).abs() > 1e-12 {
        return Err(format!("CWR hand case gave {cwr_exact}"));
    }
    if oracle(&decisions).cdr != Some(Big::new(1, 3)) || oracle(&writing).cwr != Some(Big::new(5, 9)) {
        return Err("oracle disagrees with the hand cases".into());
    }
    Ok(())
}

/// One task with a single attempt of the given outcome.
pub fn attempt_matrix_of(outcome: OutcomeCategory) -> Vec<Vec<RawAttempt>> {
    vec![vec![hand_attempt(outcome, &[0])]]
}
