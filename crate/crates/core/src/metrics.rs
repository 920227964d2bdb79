//! Robustness metrics over run records, outcome classification, adoption
//! and self-repair analysis.
//!
//! Every metric is generic over [`Scalar`] so the same code runs in `f64`
//! for reports and in exact rationals for oracle comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::Proposal;
use crate::knowledge::{jaccard, Atom, EditSpec};
use crate::scalar::Scalar;
use crate::task::{Task, TaskUniverse};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("task {task_id} has {found} records, expected {expected}")]
    RaggedAttempts {
        task_id: String,
        expected: usize,
        found: usize,
    },
    #[error("task {task_id} repeats attempt {attempt}")]
    DuplicateAttempt { task_id: String, attempt: usize },
    #[error("no task definition for {0}")]
    UnknownTask(String),
}

/// Collapsed execution-error taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeCategory {
    Correct,
    WrongOutput,
    NoArtifact,
    InvalidForm,
    Stalled,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 5] = [
        OutcomeCategory::Correct,
        OutcomeCategory::WrongOutput,
        OutcomeCategory::NoArtifact,
        OutcomeCategory::InvalidForm,
        OutcomeCategory::Stalled,
    ];

    /// Short label used by the execution-error table this taxonomy mirrors.
    pub fn error_table_label(self) -> &'static str {
        match self {
            OutcomeCategory::Correct => "Pass",
            OutcomeCategory::WrongOutput => "Sample",
            OutcomeCategory::NoArtifact => "Miss",
            OutcomeCategory::InvalidForm => "Built-in",
            OutcomeCategory::Stalled => "Language",
        }
    }
}

impl fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One collaboration attempt on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    /// Outer repeat of the whole experiment, from 0.
    pub repetition: usize,
    pub task_id: String,
    pub attempt_index: usize,
    pub completed: bool,
    pub final_answer: Option<String>,
    pub atoms_used: BTreeSet<Atom>,
    pub outcome: OutcomeCategory,
    /// Finer error label for InvalidForm and friends.
    pub outcome_detail: Option<String>,
    pub transcript: Vec<Proposal>,
    pub seed: u64,
}

impl RunRecord {
    pub fn success(&self) -> bool {
        self.outcome == OutcomeCategory::Correct
    }
}

/// Classifies a finished deliberation.
///
/// Checked in order: no answer is NoArtifact, the ground truth is Correct,
/// an artifact built from an atom outside the task universe is InvalidForm,
/// anything else is WrongOutput. Stalled is never produced here.
pub fn classify_outcome(
    final_answer: Option<&str>,
    atoms_used: &BTreeSet<Atom>,
    task: &Task,
    universe: &TaskUniverse,
) -> (OutcomeCategory, Option<String>) {
    let Some(answer) = final_answer else {
        return (OutcomeCategory::NoArtifact, Some("CodeMissing".into()));
    };
    if answer == task.ground_truth() {
        return (OutcomeCategory::Correct, None);
    }
    if let Some(bad) = atoms_used.iter().find(|a| !universe.recognizes(a)) {
        return (OutcomeCategory::InvalidForm, Some(format!("NameError: {bad}")));
    }
    (OutcomeCategory::WrongOutput, Some("TestSampleError".into()))
}

/// Records partitioned by (repetition, task), every group holding the same
/// number of attempts.
#[derive(Debug, Clone)]
pub struct RecordGroups<'a> {
    groups: Vec<Vec<&'a RunRecord>>,
    k: usize,
    n_tasks: usize,
}

impl<'a> RecordGroups<'a> {
    /// Groups by repetition and `task_id` and checks rectangularity.
    pub fn new<I: IntoIterator<Item = &'a RunRecord>>(records: I) -> Result<Self, MetricsError> {
        let mut by_task: BTreeMap<(usize, &str), Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            by_task.entry((r.repetition, r.task_id.as_str())).or_default().push(r);
        }
        let k = by_task.values().map(Vec::len).next().unwrap_or(0);
        for ((_, task_id), rs) in &by_task {
            if rs.len() != k {
                return Err(MetricsError::RaggedAttempts {
                    task_id: (*task_id).to_owned(),
                    expected: k,
                    found: rs.len(),
                });
            }
            let mut seen = BTreeSet::new();
            for r in rs {
                if !seen.insert(r.attempt_index) {
                    return Err(MetricsError::DuplicateAttempt {
                        task_id: (*task_id).to_owned(),
                        attempt: r.attempt_index,
                    });
                }
            }
        }
        let n_tasks = by_task.keys().map(|(_, t)| *t).collect::<BTreeSet<_>>().len();
        Ok(Self {
            groups: by_task.into_values().collect(),
            k,
            n_tasks,
        })
    }

    /// Distinct tasks, not counting repetitions.
    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn attempts(&self) -> usize {
        self.k
    }

    pub fn groups(&self) -> &[Vec<&'a RunRecord>] {
        &self.groups
    }

    fn all(&self) -> impl Iterator<Item = &'a RunRecord> + '_ {
        self.groups.iter().flatten().copied()
    }

    fn indicator_mean<T: Scalar>(&self, f: impl Fn(&RunRecord) -> bool) -> Option<T> {
        let total = self.groups.len() * self.k;
        (total > 0).then(|| T::ratio(self.all().filter(|r| f(r)).count(), total))
    }

    /// Mean over tasks of the mean over unordered attempt pairs of `pair`.
    fn pairwise_mean<T: Scalar>(&self, pair: impl Fn(&RunRecord, &RunRecord) -> T) -> Option<T> {
        if self.k < 2 || self.groups.is_empty() {
            return None;
        }
        T::mean(self.groups.iter().map(|g| {
            let mut per_pair = Vec::with_capacity(self.k * (self.k - 1) / 2);
            for p in 0..g.len() {
                for q in p + 1..g.len() {
                    per_pair.push(pair(g[p], g[q]));
                }
            }
            T::mean(per_pair).expect("k >= 2 gives at least one pair")
        }))
    }
}

/// Share of attempts that produced an answer or artifact.
pub fn completion_rate<T: Scalar>(groups: &RecordGroups<'_>) -> Option<T> {
    groups.indicator_mean(|r| r.completed)
}

/// Share of attempts whose outcome is Correct.
pub fn task_success_rate<T: Scalar>(groups: &RecordGroups<'_>) -> Option<T> {
    groups.indicator_mean(RunRecord::success)
}

/// Similarity between two artifacts, each given as the set of atoms it used.
pub trait SimilarityKernel {
    fn similarity<T: Scalar>(&self, a: &BTreeSet<Atom>, b: &BTreeSet<Atom>) -> T;
}

/// Kernels selectable by name in configuration files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    /// Jaccard index of the atom sets; two empty artifacts score 1.
    #[default]
    Jaccard,
    /// 1 for identical atom sets, else 0.
    Exact,
}

impl KernelTag {
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "jaccard" => Some(KernelTag::Jaccard),
            "exact" => Some(KernelTag::Exact),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            KernelTag::Jaccard => "jaccard",
            KernelTag::Exact => "exact",
        }
    }
}

impl SimilarityKernel for KernelTag {
    fn similarity<T: Scalar>(&self, a: &BTreeSet<Atom>, b: &BTreeSet<Atom>) -> T {
        match self {
            KernelTag::Jaccard => jaccard(a, b),
            KernelTag::Exact => {
                if a == b {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Pairwise artifact similarity across attempts. Each pair is scored in
/// both orders and averaged, so asymmetric kernels are handled too.
pub fn writing_robustness<T: Scalar, K: SimilarityKernel>(groups: &RecordGroups<'_>, kernel: &K) -> Option<T> {
    let two = T::from_count(2);
    groups.pairwise_mean(|a, b| {
        (kernel.similarity::<T>(&a.atoms_used, &b.atoms_used) + kernel.similarity::<T>(&b.atoms_used, &a.atoms_used))
            / two.clone()
    })
}

/// Pairwise outcome-category agreement across attempts.
pub fn decision_robustness<T: Scalar>(groups: &RecordGroups<'_>) -> Option<T> {
    groups.pairwise_mean(|a, b| if a.outcome == b.outcome { T::one() } else { T::zero() })
}

/// Whether `record`'s final artifact uses any planted counterfactual.
pub fn adopted(record: &RunRecord, edits: &[EditSpec]) -> bool {
    edits.iter().any(|e| record.atoms_used.contains(&e.edited_atom()))
}

/// Fraction of records whose final artifact uses a planted counterfactual.
pub fn adoption_probability<T: Scalar>(records: &[RunRecord], edits: &[EditSpec]) -> Option<T> {
    (!records.is_empty()).then(|| T::ratio(records.iter().filter(|r| adopted(r, edits)).count(), records.len()))
}

/// A correct outcome reached without any planted counterfactual, where at
/// least one edit actually sat on a solution path.
pub fn detect_self_repair(record: &RunRecord, edits: &[EditSpec], task: &Task) -> bool {
    let task_keys = task.all_keys();
    record.success() && !adopted(record, edits) && edits.iter().any(|e| task_keys.contains(e.key()))
}

/// Fraction of records that self-repaired.
pub fn self_repair_rate<T: Scalar>(records: &[RunRecord], edits: &[EditSpec], task: &Task) -> Option<T> {
    (!records.is_empty()).then(|| {
        T::ratio(
            records.iter().filter(|r| detect_self_repair(r, edits, task)).count(),
            records.len(),
        )
    })
}

/// A record together with the edits injected for it and its task.
#[derive(Debug, Clone, Copy)]
pub struct EvaluatedRun<'a> {
    pub record: &'a RunRecord,
    pub edits: &'a [EditSpec],
    pub task: &'a Task,
}

/// Summary of one scenario. Rates that are undefined stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub n_tasks: usize,
    pub attempts_k: usize,
    pub cr: Option<T>,
    pub tsr: Option<T>,
    pub cwr: Option<T>,
    pub cdr: Option<T>,
    pub adoption_prob: Option<T>,
    pub self_repair_rate: Option<T>,
}

impl<T: Scalar> MetricsReport<T> {
    /// Computes every metric. Adoption and self-repair are taken over the
    /// runs that had at least one edit, and are absent when none did.
    pub fn compute<K: SimilarityKernel>(runs: &[EvaluatedRun<'_>], kernel: &K) -> Result<Self, MetricsError> {
        let groups = RecordGroups::new(runs.iter().map(|r| r.record))?;
        let edited: Vec<&EvaluatedRun<'_>> = runs.iter().filter(|r| !r.edits.is_empty()).collect();
        let share = |f: &dyn Fn(&EvaluatedRun<'_>) -> bool| {
            (!edited.is_empty()).then(|| T::ratio(edited.iter().filter(|r| f(r)).count(), edited.len()))
        };
        Ok(Self {
            n_tasks: groups.n_tasks(),
            attempts_k: groups.attempts(),
            cr: completion_rate(&groups),
            tsr: task_success_rate(&groups),
            cwr: writing_robustness(&groups, kernel),
            cdr: decision_robustness(&groups),
            adoption_prob: share(&|r| adopted(r.record, r.edits)),
            self_repair_rate: share(&|r| detect_self_repair(r.record, r.edits, r.task)),
        })
    }

    pub fn to_f64(&self) -> MetricsReport<f64> {
        let f = |v: &Option<T>| v.as_ref().map(Scalar::to_f64);
        MetricsReport {
            n_tasks: self.n_tasks,
            attempts_k: self.attempts_k,
            cr: f(&self.cr),
            tsr: f(&self.tsr),
            cwr: f(&self.cwr),
            cdr: f(&self.cdr),
            adoption_prob: f(&self.adoption_prob),
            self_repair_rate: f(&self.self_repair_rate),
        }
    }
}
