//! Deterministic simulator of disagreement in multi-agent collaboration.
//!
//! Agents hold layered knowledge bases of `(subject, relation, object)`
//! atoms, deliberate over tasks whose solution paths are explicit minimal
//! knowledge sets, and are scored with completion, success and pairwise
//! robustness metrics. Counterfactual edits can be planted in one agent to
//! study when a team is blocked and when it routes around the conflict.

pub mod scalar;
#[macro_use]
pub mod seed;
pub mod agent;
pub mod injection;
pub mod knowledge;
pub mod metrics;
pub mod runner;
pub mod task;

pub use num_rational::Ratio;

pub use agent::{
    aggregate, deliberate, propose, update_beliefs, Agent, AgentError, AgentProfile, AggregationPolicy, Proposal, Role,
    Team, Topology,
};
pub use knowledge::{
    apply_edit, conflict_set, Atom, DisagreementSet, EditMethod, EditSpec, FactKey, KnowledgeBase, KnowledgeError,
};
pub use metrics::{KernelTag, OutcomeCategory, RecordGroups, RunRecord, SimilarityKernel};
pub use scalar::Scalar;
pub use task::{
    evaluate_path, feasible_paths, generate_multi_recipe_task, generate_single_chain_task, is_blocked, PathKind,
    PathOutcome, SolutionPath, Task, TaskError,
};

/// Exact rational used by oracle comparisons.
pub type Exact = Ratio<i64>;

/// Metrics in floating point, as reported.
pub type MetricsReport = metrics::MetricsReport<f64>;
/// Metrics in exact arithmetic.
pub type ExactMetricsReport = metrics::MetricsReport<Exact>;

/// Jaccard overlap of two knowledge bases in `f64`.
pub fn kb_overlap(a: &KnowledgeBase, b: &KnowledgeBase) -> f64 {
    knowledge::kb_overlap(a, b)
}

/// Share of a task's paths made infeasible by `delta`, in `f64`.
pub fn fragility(task: &Task, delta: &DisagreementSet) -> f64 {
    task::fragility(task, delta)
}
