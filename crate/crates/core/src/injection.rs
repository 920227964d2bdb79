//! Building teams with controlled knowledge differences and planting
//! task-critical counterfactual edits.
//!
//! Knowledge is drawn in two stages. A model family knows a fixed share of
//! a task's universe (`coverage`), chosen once per family and task. Each
//! agent of that family then recalls every family fact independently with
//! probability `recall`, redrawn per attempt, which plays the role of
//! sampling noise between otherwise identical agents.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentError, AgentProfile, AggregationPolicy, Role, Team, Topology};
use crate::knowledge::{apply_edit, Atom, EditMethod, EditSpec, FactKey, KnowledgeBase, KnowledgeError, DEFAULT_SIDE_EFFECT_RATE};
use crate::seed::rng_from;
use crate::task::{PathKind, RecipeShape, Task, TaskUniverse};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InjectionError {
    #[error("cannot replace {n_replace} members: only {available} replaceable")]
    TooManyReplacements { n_replace: usize, available: usize },
    #[error("pool offers {available} families other than the base family, {n_replace} needed")]
    PoolTooSmall { n_replace: usize, available: usize },
    #[error("agent index {index} is not an editable member (team of {size})")]
    BadEditTarget { index: usize, size: usize },
    #[error("policy {policy:?} cannot be applied to task {task_id}: {reason}")]
    Unsatisfiable {
        policy: TargetPolicy,
        task_id: String,
        reason: String,
    },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Default share of a task universe a family knows.
pub const DEFAULT_COVERAGE: f64 = 0.8;
/// Default probability an agent recalls a fact its family knows.
pub const DEFAULT_RECALL: f64 = 0.75;
/// Deliberation rounds when a scenario does not say.
pub const DEFAULT_ROUNDS: usize = 3;

/// Behavioural and knowledge parameters shared by all agents of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub conformity: f64,
    pub switch_propensity: f64,
    pub coverage: f64,
    pub recall: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            conformity: crate::agent::DEFAULT_CONFORMITY,
            switch_propensity: crate::agent::DEFAULT_SWITCH_PROPENSITY,
            coverage: DEFAULT_COVERAGE,
            recall: DEFAULT_RECALL,
        }
    }
}

/// Seeds for the two knowledge stages. `world` fixes what each family
/// knows; `draw` varies per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnowledgeSeeds {
    pub world: u64,
    pub draw: u64,
}

/// The facts `family` knows about `task`'s universe: exactly
/// `round(coverage * |facts|)` of them.
pub fn family_facts(universe: &TaskUniverse, family: &str, task_id: &str, coverage: f64, world_seed: u64) -> BTreeSet<Atom> {
    let facts: Vec<&Atom> = universe.facts.iter().collect();
    let n = ((coverage.clamp(0.0, 1.0) * facts.len() as f64).round() as usize).min(facts.len());
    let mut rng = rng_from(seed_of!(world_seed, "family", family, task_id));
    let mut chosen: Vec<usize> = sample(&mut rng, facts.len(), n).into_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| facts[i].clone()).collect()
}

/// One agent's recall of its family's facts.
pub fn member_kb(family: &BTreeSet<Atom>, recall: f64, seed: u64) -> KnowledgeBase {
    let mut rng = rng_from(seed);
    let recall = recall.clamp(0.0, 1.0);
    KnowledgeBase::from_facts(family.iter().filter(|_| rng.gen_bool(recall)).cloned())
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Participant => "participant",
        Role::Manager => "manager",
        Role::Coder => "coder",
        Role::Executor => "executor",
    }
}

const PERSONAS: [&str; 6] = ["analyst", "skeptic", "optimist", "pragmatist", "teacher", "tinkerer"];

/// Builds a team of `base_family` agents and swaps the last `n_replace`
/// participants or coders for agents of other families drawn from `pool`.
/// Managers and executors are never replaced.
pub fn make_mixed_team(
    base_family: &str,
    pool: &[String],
    n_replace: usize,
    topology: Topology,
    task: &Task,
    params: &AgentParams,
    seeds: KnowledgeSeeds,
) -> Result<Team, InjectionError> {
    let roles = topology.roles();
    let replaceable: Vec<usize> = (0..roles.len()).filter(|&i| roles[i].replaceable()).collect();
    if n_replace > replaceable.len() {
        return Err(InjectionError::TooManyReplacements {
            n_replace,
            available: replaceable.len(),
        });
    }
    let mut others: Vec<&str> = pool.iter().map(String::as_str).filter(|f| *f != base_family).collect();
    others.sort_unstable();
    others.dedup();
    if others.len() < n_replace {
        return Err(InjectionError::PoolTooSmall {
            n_replace,
            available: others.len(),
        });
    }
    let mut rng = rng_from(seed_of!(seeds.draw, "composition"));
    others.shuffle(&mut rng);

    let mut families = vec![base_family; roles.len()];
    for (slot, family) in replaceable[replaceable.len() - n_replace..].iter().zip(others) {
        families[*slot] = family;
    }

    let universe = task.universe();
    let mut members = Vec::with_capacity(roles.len());
    let mut role_counts = std::collections::BTreeMap::<Role, usize>::new();
    for (slot, (role, family)) in roles.iter().zip(&families).enumerate() {
        let count = role_counts.entry(*role).or_default();
        let id = if matches!(role, Role::Manager | Role::Executor) {
            role_name(*role).to_owned()
        } else {
            format!("{}{}", role_name(*role), *count)
        };
        *count += 1;
        let persona = PERSONAS[rng.gen_range(0..PERSONAS.len())];
        let profile = AgentProfile::new(id, persona, *family, params.conformity, false, params.switch_propensity)?;
        let known = family_facts(&universe, family, task.task_id(), params.coverage, seeds.world);
        let kb = member_kb(&known, params.recall, seed_of!(seeds.draw, "member", slot, *family));
        members.push(Agent::new(profile, kb));
    }
    Ok(Team::new(topology, members, AggregationPolicy::MajorityVote)?)
}

/// Which keys an edit command goes after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Uniformly among all path keys.
    RandomPathAtom,
    /// Keys every path needs first, then the rest at random.
    SharedAtomFirst,
    /// The last hop of chain paths.
    AnswerHop,
    /// Non-final hops of chain paths.
    IntermediateHop,
}

impl TargetPolicy {
    pub fn from_tag(tag: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(tag.to_owned())).ok()
    }
}

/// Request to plant `n_edits` counterfactuals in one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditCommand {
    pub n_edits: usize,
    pub method: EditMethod,
    pub target_policy: TargetPolicy,
    /// `None` picks the first participant or coder.
    pub edited_agent_index: Option<usize>,
    /// Collateral rate for global overrides; ignored by other methods.
    pub side_effect_rate: f64,
    pub stubborn: bool,
}

impl EditCommand {
    pub fn new(n_edits: usize, method: EditMethod, target_policy: TargetPolicy) -> Self {
        Self {
            n_edits,
            method,
            target_policy,
            edited_agent_index: None,
            side_effect_rate: DEFAULT_SIDE_EFFECT_RATE,
            stubborn: true,
        }
    }

    fn effective_rate(&self) -> f64 {
        if self.method == EditMethod::GlobalOverride {
            self.side_effect_rate
        } else {
            0.0
        }
    }
}

fn unsatisfiable(policy: TargetPolicy, task: &Task, reason: impl Into<String>) -> InjectionError {
    InjectionError::Unsatisfiable {
        policy,
        task_id: task.task_id().to_owned(),
        reason: reason.into(),
    }
}

/// Picks `n` distinct keys for `policy`, or explains why it cannot.
pub fn select_targets(task: &Task, policy: TargetPolicy, n: usize, rng: &mut impl Rng) -> Result<Vec<FactKey>, InjectionError> {
    let shuffled = |keys: BTreeSet<FactKey>, rng: &mut dyn rand::RngCore| {
        let mut v: Vec<FactKey> = keys.into_iter().collect();
        v.shuffle(rng);
        v
    };
    let candidates: Vec<FactKey> = match policy {
        TargetPolicy::RandomPathAtom => shuffled(task.all_keys(), rng),
        TargetPolicy::SharedAtomFirst => {
            let shared = task.shared_keys();
            let rest: BTreeSet<FactKey> = task.all_keys().difference(&shared).cloned().collect();
            let mut v = shuffled(shared, rng);
            v.extend(shuffled(rest, rng));
            v
        }
        TargetPolicy::AnswerHop | TargetPolicy::IntermediateHop => {
            if task.kind() != Some(PathKind::Chain) {
                return Err(unsatisfiable(policy, task, "hop policies need chain paths"));
            }
            let keys: BTreeSet<FactKey> = task
                .paths()
                .iter()
                .flat_map(|p| {
                    let last = p.steps.len() - 1;
                    p.steps.iter().enumerate().filter_map(move |(i, s)| {
                        let is_answer = i == last;
                        (is_answer == (policy == TargetPolicy::AnswerHop)).then(|| s.key.clone())
                    })
                })
                .collect();
            if keys.is_empty() {
                return Err(unsatisfiable(policy, task, "no intermediate hop in a single-hop chain"));
            }
            shuffled(keys, rng)
        }
    };
    if candidates.len() < n {
        return Err(unsatisfiable(
            policy,
            task,
            format!("{n} edits requested but only {} eligible keys", candidates.len()),
        ));
    }
    Ok(candidates.into_iter().take(n).collect())
}

/// Default edit target: the first participant or coder.
pub fn default_edit_target(team: &Team) -> usize {
    team.members()
        .iter()
        .position(|m| team.role_of(m.id()).is_some_and(Role::replaceable))
        .expect("every topology has a participant or coder")
}

/// Plants `cmd.n_edits` counterfactuals on distinct task keys in one
/// member and returns the edited team with the edits made.
pub fn inject_task_critical(
    team: &Team,
    task: &Task,
    cmd: &EditCommand,
    seed: u64,
) -> Result<(Team, Vec<EditSpec>), InjectionError> {
    if cmd.n_edits == 0 {
        return Ok((team.clone(), Vec::new()));
    }
    let index = cmd.edited_agent_index.unwrap_or_else(|| default_edit_target(team));
    let size = team.members().len();
    let target = team
        .members()
        .get(index)
        .filter(|m| team.role_of(m.id()).is_some_and(Role::proposes))
        .ok_or(InjectionError::BadEditTarget { index, size })?;

    let mut rng = rng_from(seed_of!(seed, "targets"));
    let keys = select_targets(task, cmd.target_policy, cmd.n_edits, &mut rng)?;
    let universe = task.universe();
    let expected = task.path_atoms();

    let mut kb = target.kb.clone();
    let mut edits = Vec::with_capacity(keys.len());
    for (i, key) in keys.into_iter().enumerate() {
        let truth = expected
            .iter()
            .find(|a| a.key() == &key)
            .map(|a| a.object().to_owned())
            .expect("selected keys lie on paths");
        let alts = &universe.confusables[&key];
        let new_object = alts[rng.gen_range(0..alts.len())].clone();
        let edit = EditSpec::new(key, truth, new_object, cmd.method, cmd.effective_rate())?;
        kb = apply_edit(&kb, &edit, seed_of!(seed, "edit", i))?;
        edits.push(edit);
    }
    let mut profile = target.profile.clone();
    if cmd.stubborn {
        profile = profile.into_stubborn();
    }
    let edited = team.clone().with_member(index, Agent::new(profile, kb))?;
    Ok((edited, edits))
}

/// How team knowledge differs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heterogeneity {
    Homogeneous { family: String },
    Mixed {
        base_family: String,
        families: Vec<String>,
        n_replace: usize,
    },
}

impl Heterogeneity {
    pub fn base_family(&self) -> &str {
        match self {
            Heterogeneity::Homogeneous { family } => family,
            Heterogeneity::Mixed { base_family, .. } => base_family,
        }
    }
}

/// Which synthetic tasks a scenario runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskSource {
    SingleChain { hops: usize },
    Recipe(RecipeShape),
}

impl TaskSource {
    pub fn kind(self) -> PathKind {
        match self {
            TaskSource::SingleChain { .. } => PathKind::Chain,
            TaskSource::Recipe(_) => PathKind::Recipe,
        }
    }

    pub fn generate(self, seed: u64) -> Result<Task, crate::task::TaskError> {
        match self {
            TaskSource::SingleChain { hops } => crate::task::generate_single_chain_task(seed, hops),
            TaskSource::Recipe(shape) => crate::task::generate_recipe_task(seed, shape),
        }
    }

    /// Stable label used when deriving task seeds, so scenarios drawing
    /// from the same source see the same tasks.
    pub fn label(self) -> String {
        match self {
            TaskSource::SingleChain { hops } => format!("chain/{hops}"),
            TaskSource::Recipe(s) => format!("recipe/{}/{}/{}", s.n_paths, s.shared_keys, s.steps_per_path),
        }
    }
}

/// Metrics a scenario asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Cr,
    Tsr,
    Cwr,
    Cdr,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [MetricName::Cr, MetricName::Tsr, MetricName::Cwr, MetricName::Cdr];

    pub fn pairwise(self) -> bool {
        matches!(self, MetricName::Cwr | MetricName::Cdr)
    }
}

/// One experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub topology: Topology,
    pub heterogeneity: Heterogeneity,
    pub edits: Vec<EditCommand>,
    pub rounds: usize,
    pub attempts_k: usize,
    pub n_tasks: usize,
    pub tasks: TaskSource,
    pub agents: AgentParams,
    pub metrics: BTreeSet<MetricName>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        message: message.into(),
    }
}

impl ScenarioSpec {
    /// Structural checks that do not depend on particular tasks.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.scenario_id.is_empty() {
            return Err(invalid("scenario_id", "must not be empty"));
        }
        for (field, v) in [("rounds", self.rounds), ("attempts_k", self.attempts_k), ("n_tasks", self.n_tasks)] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if let Topology::ProgrammingTeam { n_coders: 0 } = self.topology {
            return Err(invalid("n_coders", "must be at least 1"));
        }
        if let Some(kind) = self.topology.task_kind() {
            if kind != self.tasks.kind() {
                return Err(invalid(
                    "tasks",
                    format!("{} teams need {kind:?} tasks", self.topology),
                ));
            }
        }
        match self.tasks {
            TaskSource::SingleChain { hops: 0 } => return Err(invalid("hops", "must be at least 1")),
            TaskSource::Recipe(shape) => shape.validate().map_err(|e| invalid("tasks", e.to_string()))?,
            _ => {}
        }
        let size = self.topology.size();
        if let Heterogeneity::Mixed { n_replace, families, base_family } = &self.heterogeneity {
            if *n_replace >= size {
                return Err(invalid("n_replace", format!("{n_replace} must be below the team size {size}")));
            }
            let others: BTreeSet<&String> = families.iter().filter(|f| *f != base_family).collect();
            if others.len() < *n_replace {
                return Err(invalid(
                    "families",
                    format!("{} families besides {base_family}, {n_replace} needed", others.len()),
                ));
            }
        }
        let roles = self.topology.roles();
        for cmd in &self.edits {
            if let Some(i) = cmd.edited_agent_index {
                if !roles.get(i).is_some_and(|r| r.proposes()) {
                    return Err(invalid("edited_agent_index", format!("{i} is not an editable member")));
                }
            }
            if !(0.0..=1.0).contains(&cmd.side_effect_rate) {
                return Err(invalid("side_effect_rate", format!("{} is outside [0, 1]", cmd.side_effect_rate)));
            }
        }
        let a = &self.agents;
        for (field, v) in [
            ("conformity", a.conformity),
            ("switch_propensity", a.switch_propensity),
            ("coverage", a.coverage),
            ("recall", a.recall),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, format!("{v} is outside [0, 1]")));
            }
        }
        if self.attempts_k < 2 && self.metrics.iter().any(|m| m.pairwise()) {
            return Err(invalid("attempts_k", "pairwise metrics (cwr, cdr) need attempts_k >= 2"));
        }
        Ok(())
    }

    /// Team for one run before any edits.
    pub fn build_team(&self, task: &Task, seeds: KnowledgeSeeds) -> Result<Team, InjectionError> {
        let (base, pool, n): (&str, &[String], usize) = match &self.heterogeneity {
            Heterogeneity::Homogeneous { family } => (family, &[], 0),
            Heterogeneity::Mixed {
                base_family,
                families,
                n_replace,
            } => (base_family, families, *n_replace),
        };
        make_mixed_team(base, pool, n, self.topology, task, &self.agents, seeds)
    }

    /// Team for one run with every edit command applied in order.
    pub fn prepare(&self, task: &Task, seeds: KnowledgeSeeds, run_seed: u64) -> Result<(Team, Vec<EditSpec>), InjectionError> {
        let mut team = self.build_team(task, seeds)?;
        let mut all = Vec::new();
        for (i, cmd) in self.edits.iter().enumerate() {
            let (next, edits) = inject_task_critical(&team, task, cmd, seed_of!(run_seed, "inject", i))?;
            team = next;
            all.extend(edits);
        }
        Ok((team, all))
    }
}
