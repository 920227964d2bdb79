//! Tasks as families of minimal sufficient knowledge sets.
//!
//! A [`Task`] lists every [`SolutionPath`] that completes it. Chains are
//! ordered hop sequences whose later hops are keyed on the object the
//! previous hop resolved to; recipes are unordered sets of facts that must
//! all be right for the artifact to be right.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::knowledge::{Atom, DisagreementSet, FactKey, KnowledgeBase, KnowledgeError};
use crate::scalar::Scalar;
use crate::seed::rng_from;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TaskError {
    #[error("task {0} has no solution paths")]
    NoPaths(String),
    #[error("path {0} has no steps")]
    EmptyPath(String),
    #[error("duplicate path id {0}")]
    DuplicatePathId(String),
    #[error("chain {path} breaks at step {step}: subject {subject} is not the previous object {previous}")]
    BrokenChain {
        path: String,
        step: usize,
        subject: String,
        previous: String,
    },
    #[error("chain {path} ends in {end}, not the ground truth {ground_truth}")]
    ChainMissesGroundTruth {
        path: String,
        end: String,
        ground_truth: String,
    },
    #[error("path {redundant} is not minimal: its keys are covered by path {cover}")]
    NotMinimal { redundant: String, cover: String },
    #[error("invalid generator parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Chain,
    Recipe,
}

/// One fact a path relies on, with its ground-truth object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct Step {
    pub key: FactKey,
    pub expected: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRepr {
    subject: String,
    relation: String,
    expected: String,
}

impl TryFrom<StepRepr> for Step {
    type Error = KnowledgeError;

    fn try_from(r: StepRepr) -> Result<Self, Self::Error> {
        let atom = Atom::new(r.subject, r.relation, r.expected)?;
        Ok(Step::from(atom))
    }
}

impl From<Step> for StepRepr {
    fn from(s: Step) -> Self {
        StepRepr {
            subject: s.key.subject().to_owned(),
            relation: s.key.relation().to_owned(),
            expected: s.expected,
        }
    }
}

impl From<Atom> for Step {
    fn from(a: Atom) -> Self {
        Step {
            key: a.key().clone(),
            expected: a.object().to_owned(),
        }
    }
}

impl Step {
    pub fn atom(&self) -> Atom {
        self.key
            .with_object(self.expected.clone())
            .expect("step objects are validated on construction")
    }
}

/// One member of a task's family of minimal sufficient sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub path_id: String,
    pub kind: PathKind,
    pub steps: Vec<Step>,
}

impl SolutionPath {
    pub fn new(path_id: impl Into<String>, kind: PathKind, steps: Vec<Step>) -> Result<Self, TaskError> {
        let path = Self {
            path_id: path_id.into(),
            kind,
            steps,
        };
        path.validate()?;
        Ok(path)
    }

    fn validate(&self) -> Result<(), TaskError> {
        if self.path_id.is_empty() {
            return Err(KnowledgeError::EmptyIdentifier("path_id").into());
        }
        if self.steps.is_empty() {
            return Err(TaskError::EmptyPath(self.path_id.clone()));
        }
        if self.kind == PathKind::Chain {
            for (i, pair) in self.steps.windows(2).enumerate() {
                if pair[1].key.subject() != pair[0].expected {
                    return Err(TaskError::BrokenChain {
                        path: self.path_id.clone(),
                        step: i + 1,
                        subject: pair[1].key.subject().to_owned(),
                        previous: pair[0].expected.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn key_set(&self) -> BTreeSet<&FactKey> {
        self.steps.iter().map(|s| &s.key).collect()
    }

    pub fn touches(&self, delta: &DisagreementSet) -> bool {
        self.steps.iter().any(|s| delta.contains_key(&s.key))
    }

    /// Final object a faithful chase reaches.
    pub fn expected_end(&self) -> &str {
        &self.steps.last().expect("paths are non-empty").expected
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskRepr")]
pub struct Task {
    task_id: String,
    query: String,
    ground_truth: String,
    paths: Vec<SolutionPath>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRepr {
    task_id: String,
    query: String,
    ground_truth: String,
    paths: Vec<SolutionPath>,
}

impl TryFrom<TaskRepr> for Task {
    type Error = TaskError;

    fn try_from(r: TaskRepr) -> Result<Self, Self::Error> {
        Task::new(r.task_id, r.query, r.ground_truth, r.paths)
    }
}

impl Task {
    pub fn new(
        task_id: impl Into<String>,
        query: impl Into<String>,
        ground_truth: impl Into<String>,
        paths: Vec<SolutionPath>,
    ) -> Result<Self, TaskError> {
        let task = Self {
            task_id: task_id.into(),
            query: query.into(),
            ground_truth: ground_truth.into(),
            paths,
        };
        task.validate()?;
        Ok(task)
    }

    fn validate(&self) -> Result<(), TaskError> {
        if self.task_id.is_empty() {
            return Err(KnowledgeError::EmptyIdentifier("task_id").into());
        }
        if self.ground_truth.is_empty() {
            return Err(KnowledgeError::EmptyIdentifier("ground_truth").into());
        }
        if self.paths.is_empty() {
            return Err(TaskError::NoPaths(self.task_id.clone()));
        }
        let mut ids = BTreeSet::new();
        for p in &self.paths {
            p.validate()?;
            if !ids.insert(p.path_id.as_str()) {
                return Err(TaskError::DuplicatePathId(p.path_id.clone()));
            }
            if p.kind == PathKind::Chain && p.expected_end() != self.ground_truth {
                return Err(TaskError::ChainMissesGroundTruth {
                    path: p.path_id.clone(),
                    end: p.expected_end().to_owned(),
                    ground_truth: self.ground_truth.clone(),
                });
            }
        }
        // Equal key sets count as a violation too: two distinct paths over
        // the same facts are one route listed twice.
        let key_sets: Vec<_> = self.paths.iter().map(SolutionPath::key_set).collect();
        for (i, a) in key_sets.iter().enumerate() {
            for (j, b) in key_sets.iter().enumerate() {
                if i != j && a.is_subset(b) && (a.len() < b.len() || i > j) {
                    return Err(TaskError::NotMinimal {
                        redundant: self.paths[j].path_id.clone(),
                        cover: self.paths[i].path_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn ground_truth(&self) -> &str {
        &self.ground_truth
    }

    pub fn paths(&self) -> &[SolutionPath] {
        &self.paths
    }

    /// `Some(kind)` when every path has the same kind.
    pub fn kind(&self) -> Option<PathKind> {
        let first = self.paths[0].kind;
        self.paths.iter().all(|p| p.kind == first).then_some(first)
    }

    /// Union of every path's keys: the usual probe set for conflict analysis.
    pub fn all_keys(&self) -> BTreeSet<FactKey> {
        self.paths
            .iter()
            .flat_map(|p| p.steps.iter().map(|s| s.key.clone()))
            .collect()
    }

    /// Keys present in every path.
    pub fn shared_keys(&self) -> BTreeSet<FactKey> {
        let mut iter = self.paths.iter().map(|p| {
            p.steps
                .iter()
                .map(|s| s.key.clone())
                .collect::<BTreeSet<_>>()
        });
        let first = iter.next().unwrap_or_default();
        iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    }

    /// Distinct ground-truth atoms across all paths.
    pub fn path_atoms(&self) -> BTreeSet<Atom> {
        self.paths
            .iter()
            .flat_map(|p| p.steps.iter().map(Step::atom))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("task serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Every fact the simulated world knows about this task, plus the
    /// plausible-but-wrong atoms edits are drawn from. Derived from the task
    /// alone, so a task file fully determines its universe.
    pub fn universe(&self) -> TaskUniverse {
        TaskUniverse::derive(self)
    }
}

/// True iff every path touches a contested key.
pub fn is_blocked(task: &Task, delta: &DisagreementSet) -> bool {
    task.paths.iter().all(|p| p.touches(delta))
}

/// Paths whose keys avoid `delta`, in task order.
pub fn feasible_paths<'t>(task: &'t Task, delta: &DisagreementSet) -> Vec<&'t SolutionPath> {
    task.paths.iter().filter(|p| !p.touches(delta)).collect()
}

/// `1 - |feasible| / |paths|`.
pub fn fragility<T: Scalar>(task: &Task, delta: &DisagreementSet) -> T {
    let total = task.paths.len();
    let feasible = feasible_paths(task, delta).len();
    T::ratio(total - feasible, total)
}

/// What following a path against one knowledge base yields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathOutcome {
    /// Chain chased to the end; `answer` is the final believed object.
    Answer { answer: String, atoms_used: Vec<Atom> },
    /// Every recipe fact resolved; `correct` iff all match ground truth.
    Artifact { atoms_used: Vec<Atom>, correct: bool },
    /// Some fact was unknown; `missing` counts the steps that could not be
    /// taken.
    Incomplete { missing: usize, atoms_used: Vec<Atom> },
}

impl PathOutcome {
    pub fn atoms_used(&self) -> &[Atom] {
        match self {
            PathOutcome::Answer { atoms_used, .. }
            | PathOutcome::Artifact { atoms_used, .. }
            | PathOutcome::Incomplete { atoms_used, .. } => atoms_used,
        }
    }

    pub fn is_complete(&self) -> bool {
        !matches!(self, PathOutcome::Incomplete { .. })
    }

    pub fn missing(&self) -> usize {
        match self {
            PathOutcome::Incomplete { missing, .. } => *missing,
            _ => 0,
        }
    }
}

/// Follows `path` using the beliefs in `kb`.
///
/// Chains are re-keyed on what the agent believes: if hop 1 resolves to a
/// wrong entity, hop 2 is looked up on that entity, so an edit propagates
/// down the chain.
pub fn evaluate_path(path: &SolutionPath, kb: &KnowledgeBase) -> PathOutcome {
    let mut atoms_used = Vec::with_capacity(path.steps.len());
    match path.kind {
        PathKind::Chain => {
            let mut subject = path.steps[0].key.subject().to_owned();
            for (i, step) in path.steps.iter().enumerate() {
                let key = FactKey::new(subject, step.key.relation())
                    .expect("subjects come from non-empty identifiers");
                match kb.believed_object(&key) {
                    Some(o) => {
                        let o = o.to_owned();
                        atoms_used.push(key.with_object(o.clone()).expect("non-empty"));
                        subject = o;
                    }
                    None => {
                        return PathOutcome::Incomplete {
                            missing: path.steps.len() - i,
                            atoms_used,
                        }
                    }
                }
            }
            PathOutcome::Answer {
                answer: subject,
                atoms_used,
            }
        }
        PathKind::Recipe => {
            let mut missing = 0;
            let mut correct = true;
            for step in &path.steps {
                match kb.believed_object(&step.key) {
                    Some(o) => {
                        correct &= o == step.expected;
                        atoms_used.push(step.key.with_object(o).expect("non-empty"));
                    }
                    None => missing += 1,
                }
            }
            if missing > 0 {
                PathOutcome::Incomplete { missing, atoms_used }
            } else {
                PathOutcome::Artifact { atoms_used, correct }
            }
        }
    }
}

/// Number of confusable alternatives generated per path object.
pub const ALTERNATIVES_PER_OBJECT: usize = 2;
/// Background facts added per relation so coverage sampling has room.
pub const BACKGROUND_PER_RELATION: usize = 3;

/// The simulated world around one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskUniverse {
    /// Consistent true facts (at most one object per key).
    pub facts: BTreeSet<Atom>,
    /// Plausible wrong atoms on path keys; edits draw their targets here.
    pub confusables: BTreeMap<FactKey, Vec<String>>,
}

impl TaskUniverse {
    fn derive(task: &Task) -> Self {
        let mut facts: BTreeSet<Atom> = task.path_atoms();
        let mut taken: BTreeSet<String> = facts
            .iter()
            .flat_map(|a| [a.subject().to_owned(), a.object().to_owned()])
            .collect();
        taken.insert(task.ground_truth.clone());
        let mut confusables: BTreeMap<FactKey, Vec<String>> = BTreeMap::new();

        for path in &task.paths {
            // alternatives[i][j]: j-th confusable for the object of step i
            let mut alternatives: Vec<Vec<String>> = Vec::new();
            for (i, step) in path.steps.iter().enumerate() {
                let alts = confusables.entry(step.key.clone()).or_default();
                while alts.len() < ALTERNATIVES_PER_OBJECT {
                    let salt = seed_of!(task.task_id.as_str(), step.key.subject(), step.key.relation(), alts.len());
                    let alt = confusable(&step.expected, salt, &taken);
                    taken.insert(alt.clone());
                    alts.push(alt);
                }
                alternatives.push(alts.clone());
                // A wrong entity at hop i-1 still has a fact for hop i, so a
                // chase that went astray keeps going.
                if path.kind == PathKind::Chain && i > 0 {
                    for j in 0..ALTERNATIVES_PER_OBJECT {
                        let atom = Atom::new(
                            alternatives[i - 1][j].clone(),
                            step.key.relation(),
                            alternatives[i][j].clone(),
                        )
                        .expect("non-empty identifiers");
                        facts.insert(atom);
                    }
                }
            }
        }

        let relations: BTreeSet<&str> = task
            .paths
            .iter()
            .flat_map(|p| p.steps.iter().map(|s| s.key.relation()))
            .collect();
        let anchor = task.paths[0].steps[0].key.subject().to_owned();
        for rel in relations {
            for b in 0..BACKGROUND_PER_RELATION {
                let s = confusable(&anchor, seed_of!(task.task_id.as_str(), rel, b, "s"), &taken);
                taken.insert(s.clone());
                let o = confusable(&anchor, seed_of!(task.task_id.as_str(), rel, b, "o"), &taken);
                taken.insert(o.clone());
                facts.insert(Atom::new(s, rel, o).expect("non-empty identifiers"));
            }
        }
        Self { facts, confusables }
    }

    /// Membership in the recognizable vocabulary: true facts or confusables.
    pub fn recognizes(&self, atom: &Atom) -> bool {
        self.facts.contains(atom)
            || self
                .confusables
                .get(atom.key())
                .is_some_and(|alts| alts.iter().any(|o| o == atom.object()))
    }
}

/// An identifier shaped like `reference` but different from it and from
/// everything in `taken`.
///
/// Generated identifiers look like `<namespace>.<letter><digits>`; the
/// confusable keeps the namespace and letter and re-draws the digits, so it
/// sorts independently of the original.
pub fn confusable(reference: &str, salt: u64, taken: &BTreeSet<String>) -> String {
    let shaped = reference.rsplit_once('.').and_then(|(ns, last)| {
        let mut chars = last.chars();
        let letter = chars.next()?;
        let digits = chars.as_str();
        (letter.is_ascii_alphabetic() && digits.len() >= 3 && digits.bytes().all(|b| b.is_ascii_digit()))
            .then(|| (ns, letter, digits.len()))
    });
    let mut attempt = 0u64;
    loop {
        let h = seed_of!(reference, salt, attempt);
        let candidate = match shaped {
            Some((ns, letter, width)) => {
                let modulus = 10u64.pow(width.min(18) as u32);
                format!("{ns}.{letter}{:0width$}", h % modulus, width = width)
            }
            None => format!("{reference}~{:04x}", h & 0xffff),
        };
        if candidate != reference && !taken.contains(&candidate) {
            return candidate;
        }
        attempt += 1;
    }
}

fn entity_ids(ns: &str, letter: char, count: usize, seed: u64) -> Vec<String> {
    let mut rng = rng_from(seed);
    sample(&mut rng, 100_000, count)
        .into_iter()
        .map(|n| format!("{ns}.{letter}{n:05}"))
        .collect()
}

/// A single-path chain task with `hops` hops and fresh identifiers.
pub fn generate_single_chain_task(seed: u64, hops: usize) -> Result<Task, TaskError> {
    if hops == 0 {
        return Err(TaskError::BadParameters("a chain needs at least one hop".into()));
    }
    let ns = format!("c{:010x}", seed_of!("chain", seed, hops) >> 24);
    let entities = entity_ids(&ns, 'e', hops + 1, seed_of!("chain-entities", seed, hops));
    let relations: Vec<String> = (1..=hops).map(|i| format!("{ns}.r{i}")).collect();
    let steps = (0..hops)
        .map(|i| Atom::new(entities[i].clone(), relations[i].clone(), entities[i + 1].clone()).map(Step::from))
        .collect::<Result<Vec<_>, _>>()?;
    let query = format!(
        "{} of {}",
        relations.iter().rev().cloned().collect::<Vec<_>>().join(" of "),
        entities[0]
    );
    let path = SolutionPath::new("p0", PathKind::Chain, steps)?;
    Task::new(ns, query, entities[hops].clone(), vec![path])
}

/// Shape of a generated multi-path recipe task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeShape {
    pub n_paths: usize,
    /// Keys every path needs.
    pub shared_keys: usize,
    /// Total facts per path, shared ones included.
    pub steps_per_path: usize,
}

pub const DEFAULT_RECIPE_STEPS: usize = 5;

impl RecipeShape {
    pub fn new(n_paths: usize, shared_keys: usize) -> Self {
        Self {
            n_paths,
            shared_keys,
            steps_per_path: DEFAULT_RECIPE_STEPS,
        }
    }

    pub fn private_keys(&self) -> usize {
        self.steps_per_path.saturating_sub(self.shared_keys)
    }

    pub fn distinct_keys(&self) -> usize {
        self.shared_keys + self.n_paths * self.private_keys()
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.n_paths == 0 {
            return Err(TaskError::BadParameters("n_paths must be at least 1".into()));
        }
        if self.steps_per_path == 0 {
            return Err(TaskError::BadParameters("steps_per_path must be at least 1".into()));
        }
        if self.shared_keys > self.steps_per_path
            || (self.n_paths > 1 && self.shared_keys == self.steps_per_path)
        {
            return Err(TaskError::BadParameters(format!(
                "{} shared keys leave no private key in {}-step paths; paths would not be minimal",
                self.shared_keys, self.steps_per_path
            )));
        }
        Ok(())
    }
}

/// A recipe task with `n_paths` alternative paths over the default path
/// length, `shared_keys` of which every path needs.
pub fn generate_multi_recipe_task(seed: u64, n_paths: usize, shared_keys: usize) -> Result<Task, TaskError> {
    generate_recipe_task(seed, RecipeShape::new(n_paths, shared_keys))
}

pub fn generate_recipe_task(seed: u64, shape: RecipeShape) -> Result<Task, TaskError> {
    shape.validate()?;
    let ns = format!(
        "p{:010x}",
        seed_of!("recipe", seed, shape.n_paths, shape.shared_keys, shape.steps_per_path) >> 24
    );
    let n_keys = shape.distinct_keys();
    let ids = entity_ids(&ns, 'e', n_keys + 1, seed_of!("recipe-entities", seed, ns.as_str()));
    let relation = format!("{ns}.impl");
    let step = |k: usize| {
        Atom::new(format!("{ns}.s{k:03}"), relation.clone(), ids[k].clone()).map(Step::from)
    };
    let shared: Vec<Step> = (0..shape.shared_keys).map(step).collect::<Result<_, _>>()?;
    let mut paths = Vec::with_capacity(shape.n_paths);
    for p in 0..shape.n_paths {
        let first = shape.shared_keys + p * shape.private_keys();
        let mut steps = shared.clone();
        for k in first..first + shape.private_keys() {
            steps.push(step(k)?);
        }
        paths.push(SolutionPath::new(format!("p{p}"), PathKind::Recipe, steps)?);
    }
    let artifact = format!("{ns}.a{}", &ids[n_keys][ns.len() + 2..]);
    let query = format!("build {ns} ({} routes)", shape.n_paths);
    Task::new(ns, query, artifact, paths)
}
