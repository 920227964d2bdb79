//! Agents, teams and the round-based deliberation protocol.
//!
//! Each round every proposing member picks the path that clashes least with
//! what earlier rounds asserted, chases it against its own beliefs and
//! publishes the atoms it used. After the round, non-stubborn members move
//! toward the per-key majority of that round's assertions. The final round's
//! proposals are aggregated by plurality.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::knowledge::{Atom, FactKey, KnowledgeBase};
use crate::metrics::{classify_outcome, RunRecord};
use crate::seed::{rng_from, SimRng};
use crate::task::{confusable, evaluate_path, PathKind, PathOutcome, Task};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AgentError {
    #[error("{field} = {value} is outside [0, 1] for agent {agent}")]
    OutOfUnitRange {
        agent: String,
        field: &'static str,
        value: f64,
    },
    #[error("empty agent id")]
    EmptyAgentId,
    #[error("duplicate agent id {0}")]
    DuplicateAgent(String),
    #[error("agent {0} has no role")]
    MissingRole(String),
    #[error("invalid team: {0}")]
    InvalidTopology(String),
    #[error("{topology} teams cannot work on {kind} tasks")]
    TopologyTaskMismatch { topology: Topology, kind: String },
    #[error("aggregation needs at least one proposal")]
    NoProposals,
    #[error("deliberation needs at least one round")]
    ZeroRounds,
}

/// Unedited agents adopt the round majority with this probability.
pub const DEFAULT_CONFORMITY: f64 = 0.5;
pub const DEFAULT_SWITCH_PROPENSITY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    agent_id: String,
    persona: String,
    family: String,
    conformity: f64,
    stubborn: bool,
    switch_propensity: f64,
}

impl AgentProfile {
    pub fn new(
        agent_id: impl Into<String>,
        persona: impl Into<String>,
        family: impl Into<String>,
        conformity: f64,
        stubborn: bool,
        switch_propensity: f64,
    ) -> Result<Self, AgentError> {
        let agent_id = agent_id.into();
        if agent_id.is_empty() {
            return Err(AgentError::EmptyAgentId);
        }
        for (field, value) in [("conformity", conformity), ("switch_propensity", switch_propensity)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AgentError::OutOfUnitRange {
                    agent: agent_id,
                    field,
                    value,
                });
            }
        }
        Ok(Self {
            agent_id,
            persona: persona.into(),
            family: family.into(),
            conformity,
            stubborn,
            switch_propensity,
        })
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn persona(&self) -> &str {
        &self.persona
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn conformity(&self) -> f64 {
        self.conformity
    }

    pub fn stubborn(&self) -> bool {
        self.stubborn
    }

    pub fn switch_propensity(&self) -> f64 {
        self.switch_propensity
    }

    /// Same profile, marked stubborn. Used for edited agents.
    pub fn into_stubborn(mut self) -> Self {
        self.stubborn = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub profile: AgentProfile,
    pub kb: KnowledgeBase,
}

impl Agent {
    pub fn new(profile: AgentProfile, kb: KnowledgeBase) -> Self {
        Self { profile, kb }
    }

    pub fn id(&self) -> &str {
        self.profile.agent_id()
    }
}

/// One agent's contribution in one round. `answer: None` is the Incomplete
/// marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub agent_id: String,
    pub round: usize,
    pub chosen_path: String,
    pub answer: Option<String>,
    pub atoms_used: BTreeSet<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Participant,
    Manager,
    Coder,
    Executor,
}

impl Role {
    pub fn proposes(self) -> bool {
        self != Role::Executor
    }

    /// Roles the heterogeneity experiments may swap out.
    pub fn replaceable(self) -> bool {
        matches!(self, Role::Participant | Role::Coder)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    /// A single participant; the reference for the homogeneous-collapse check.
    Solo,
    /// Three participants debating a reasoning question.
    ReasoningTrio,
    /// One manager, `n_coders` coders, one executor.
    ProgrammingTeam { n_coders: usize },
}

pub const DEFAULT_CODERS: usize = 3;

impl Topology {
    /// Roles in member order.
    pub fn roles(self) -> Vec<Role> {
        match self {
            Topology::Solo => vec![Role::Participant],
            Topology::ReasoningTrio => vec![Role::Participant; 3],
            Topology::ProgrammingTeam { n_coders } => {
                let mut r = vec![Role::Manager];
                r.extend(std::iter::repeat(Role::Coder).take(n_coders));
                r.push(Role::Executor);
                r
            }
        }
    }

    pub fn size(self) -> usize {
        self.roles().len()
    }

    /// Which task kinds the topology can work on; `None` means any.
    pub fn task_kind(self) -> Option<PathKind> {
        match self {
            Topology::Solo => None,
            Topology::ReasoningTrio => Some(PathKind::Chain),
            Topology::ProgrammingTeam { .. } => Some(PathKind::Recipe),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Solo => f.write_str("solo"),
            Topology::ReasoningTrio => f.write_str("reasoning_trio"),
            Topology::ProgrammingTeam { n_coders } => write!(f, "programming_team({n_coders})"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregationPolicy {
    #[default]
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Team {
    members: Vec<Agent>,
    roles: BTreeMap<String, Role>,
    topology: Topology,
    aggregation: AggregationPolicy,
}

impl Team {
    /// Assigns `topology`'s roles to `members` in order.
    pub fn new(topology: Topology, members: Vec<Agent>, aggregation: AggregationPolicy) -> Result<Self, AgentError> {
        let roles = topology.roles();
        if let Topology::ProgrammingTeam { n_coders: 0 } = topology {
            return Err(AgentError::InvalidTopology("a programming team needs at least one coder".into()));
        }
        if roles.len() != members.len() {
            return Err(AgentError::InvalidTopology(format!(
                "{topology} needs {} members, got {}",
                roles.len(),
                members.len()
            )));
        }
        let mut role_map = BTreeMap::new();
        for (agent, role) in members.iter().zip(roles) {
            if role_map.insert(agent.id().to_owned(), role).is_some() {
                return Err(AgentError::DuplicateAgent(agent.id().to_owned()));
            }
        }
        Ok(Self {
            members,
            roles: role_map,
            topology,
            aggregation,
        })
    }

    pub fn members(&self) -> &[Agent] {
        &self.members
    }

    pub fn roles(&self) -> &BTreeMap<String, Role> {
        &self.roles
    }

    pub fn role_of(&self, agent_id: &str) -> Option<Role> {
        self.roles.get(agent_id).copied()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn aggregation(&self) -> AggregationPolicy {
        self.aggregation
    }

    /// Replaces the member at `index`, keeping its role.
    pub fn with_member(mut self, index: usize, agent: Agent) -> Result<Self, AgentError> {
        let role = self.roles.remove(self.members[index].id()).expect("every member has a role");
        if self.roles.contains_key(agent.id()) {
            return Err(AgentError::DuplicateAgent(agent.id().to_owned()));
        }
        self.roles.insert(agent.id().to_owned(), role);
        self.members[index] = agent;
        Ok(self)
    }

    pub fn kbs(&self) -> impl Iterator<Item = &KnowledgeBase> + Clone {
        self.members.iter().map(|m| &m.kb)
    }

    /// Rejects tasks the topology is not meant for.
    pub fn check_task(&self, task: &Task) -> Result<(), AgentError> {
        if let Some(kind) = self.topology.task_kind() {
            if task.kind() != Some(kind) {
                return Err(AgentError::TopologyTaskMismatch {
                    topology: self.topology,
                    kind: match task.kind() {
                        Some(k) => format!("{k:?}"),
                        None => "mixed".into(),
                    },
                });
            }
        }
        Ok(())
    }
}

/// Label of the artifact a recipe produces: the task's canonical label when
/// correct, otherwise a label determined by the atoms used, so equal wrong
/// artifacts vote together.
pub fn artifact_label(task: &Task, atoms: &[Atom], correct: bool) -> String {
    if correct {
        return task.ground_truth().to_owned();
    }
    let mut sorted: Vec<&Atom> = atoms.iter().collect();
    sorted.sort();
    let fingerprint: String = sorted
        .iter()
        .map(|a| format!("{}\u{1f}{}\u{1f}{}\u{1e}", a.subject(), a.relation(), a.object()))
        .collect();
    let taken = BTreeSet::from([task.ground_truth().to_owned()]);
    confusable(task.ground_truth(), crate::seed_of!(fingerprint.as_str()), &taken)
}

struct Candidate<'t> {
    path_id: &'t str,
    outcome: PathOutcome,
    conflicts: usize,
}

/// Builds `agent`'s proposal for `round` given all proposals of earlier
/// rounds.
///
/// Paths are scored by how many of the atoms the agent would use clash with
/// an object asserted earlier for the same key. Among paths the agent can
/// complete it takes the least-clashing one (ties to the smallest path id);
/// if it can complete none, it reports Incomplete on the path with the
/// fewest missing facts. An agent whose previous path is still complete
/// keeps it unless another path clashes strictly less, and then moves with
/// probability `switch_propensity`.
pub fn propose(agent: &Agent, task: &Task, history: &[Proposal], round: usize, rng: &mut SimRng) -> Proposal {
    let mut asserted: BTreeMap<&FactKey, BTreeSet<&str>> = BTreeMap::new();
    for p in history {
        for a in &p.atoms_used {
            asserted.entry(a.key()).or_default().insert(a.object());
        }
    }
    let candidates: Vec<Candidate<'_>> = task
        .paths()
        .iter()
        .map(|path| {
            let outcome = evaluate_path(path, &agent.kb);
            let conflicts = outcome
                .atoms_used()
                .iter()
                .filter(|a| {
                    asserted
                        .get(a.key())
                        .is_some_and(|objs| objs.iter().any(|o| *o != a.object()))
                })
                .count();
            Candidate {
                path_id: &path.path_id,
                outcome,
                conflicts,
            }
        })
        .collect();

    let best = candidates
        .iter()
        .filter(|c| c.outcome.is_complete())
        .min_by(|a, b| (a.conflicts, a.path_id).cmp(&(b.conflicts, b.path_id)))
        .or_else(|| {
            candidates
                .iter()
                .min_by(|a, b| (a.outcome.missing(), a.conflicts, a.path_id).cmp(&(b.outcome.missing(), b.conflicts, b.path_id)))
        })
        .expect("tasks have at least one path");

    let previous = history
        .iter()
        .rev()
        .find(|p| p.agent_id == agent.id())
        .and_then(|p| candidates.iter().find(|c| c.path_id == p.chosen_path));
    let chosen = match previous {
        Some(prev) if prev.outcome.is_complete() => {
            if best.conflicts < prev.conflicts && rng.gen_bool(agent.profile.switch_propensity()) {
                best
            } else {
                prev
            }
        }
        _ => best,
    };

    let answer = match &chosen.outcome {
        PathOutcome::Answer { answer, .. } => Some(answer.clone()),
        PathOutcome::Artifact { atoms_used, correct } => Some(artifact_label(task, atoms_used, *correct)),
        PathOutcome::Incomplete { .. } => None,
    };
    Proposal {
        agent_id: agent.id().to_owned(),
        round,
        chosen_path: chosen.path_id.to_owned(),
        answer,
        atoms_used: chosen.outcome.atoms_used().iter().cloned().collect(),
    }
}

/// Object asserted most often for each key in `transcript`; ties go to the
/// lexicographically smallest object.
pub fn majority_assertions(transcript: &[Proposal]) -> BTreeMap<FactKey, String> {
    assertion_counts(transcript)
        .into_iter()
        .map(|(key, objs)| (key.clone(), plurality(objs).to_owned()))
        .collect()
}

/// Like [`majority_assertions`], restricted to keys for which the
/// transcript holds at least two distinct objects.
pub fn contested_majorities(transcript: &[Proposal]) -> BTreeMap<FactKey, String> {
    assertion_counts(transcript)
        .into_iter()
        .filter(|(_, objs)| objs.len() >= 2)
        .map(|(key, objs)| (key.clone(), plurality(objs).to_owned()))
        .collect()
}

fn assertion_counts(transcript: &[Proposal]) -> BTreeMap<&FactKey, BTreeMap<&str, usize>> {
    let mut counts: BTreeMap<&FactKey, BTreeMap<&str, usize>> = BTreeMap::new();
    for p in transcript {
        for a in &p.atoms_used {
            *counts.entry(a.key()).or_default().entry(a.object()).or_default() += 1;
        }
    }
    counts
}

fn plurality<'a>(objs: BTreeMap<&'a str, usize>) -> &'a str {
    objs.into_iter()
        .max_by(|(oa, ca), (ob, cb)| ca.cmp(cb).then_with(|| ob.cmp(oa)))
        .map(|(o, _)| o)
        .expect("every counted key has an object")
}

/// Revises `agent` after a round and reports the atoms it adopted.
///
/// A key is revisited when the round asserted two or more distinct objects
/// for it, or when the agent has no belief about it at all. Where the
/// plurality object differs from the agent's belief, a non-stubborn agent
/// adopts it with probability `conformity`, one independent draw per key in
/// key order. Stubborn agents are returned unchanged without consuming
/// randomness.
pub fn update_beliefs_logged(agent: &Agent, round_transcript: &[Proposal], rng: &mut SimRng) -> (Agent, Vec<Atom>) {
    let mut next = agent.clone();
    let mut adopted = Vec::new();
    if agent.profile.stubborn() {
        return (next, adopted);
    }
    for (key, objs) in assertion_counts(round_transcript) {
        let belief = agent.kb.believed_object(key);
        if objs.len() < 2 && belief.is_some() {
            continue;
        }
        let majority = plurality(objs);
        if belief == Some(majority) {
            continue;
        }
        if rng.gen_bool(agent.profile.conformity()) {
            let atom = key.with_object(majority).expect("asserted objects are non-empty");
            next.kb.adopt(atom.clone());
            adopted.push(atom);
        }
    }
    (next, adopted)
}

pub fn update_beliefs(agent: &Agent, round_transcript: &[Proposal], rng: &mut SimRng) -> Agent {
    update_beliefs_logged(agent, round_transcript, rng).0
}

/// Plurality vote over answers. Incomplete proposals abstain unless nobody
/// answered; ties go to the lexicographically smallest answer. Returns the
/// winner and the atoms of the earliest proposal carrying it.
pub fn aggregate(
    proposals: &[Proposal],
    policy: AggregationPolicy,
) -> Result<(Option<String>, BTreeSet<Atom>), AgentError> {
    if proposals.is_empty() {
        return Err(AgentError::NoProposals);
    }
    match policy {
        AggregationPolicy::MajorityVote => {
            let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
            for p in proposals {
                if let Some(a) = &p.answer {
                    *tally.entry(a.as_str()).or_default() += 1;
                }
            }
            let Some((winner, _)) = tally
                .into_iter()
                .max_by(|(aa, ca), (ab, cb)| ca.cmp(cb).then_with(|| ab.cmp(aa)))
            else {
                return Ok((None, BTreeSet::new()));
            };
            let atoms = proposals
                .iter()
                .find(|p| p.answer.as_deref() == Some(winner))
                .map(|p| p.atoms_used.clone())
                .unwrap_or_default();
            Ok((Some(winner.to_owned()), atoms))
        }
    }
}

/// Belief changes one member made after one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefUpdate {
    pub agent_id: String,
    pub round: usize,
    pub adopted: Vec<Atom>,
}

/// A finished deliberation with the belief-revision log alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Deliberation {
    pub record: RunRecord,
    pub belief_updates: Vec<BeliefUpdate>,
}

/// Runs `rounds` rounds of proposing and belief revision, then aggregates
/// the final round and classifies the outcome.
pub fn deliberate(team: &Team, task: &Task, rounds: usize, seed: u64) -> Result<RunRecord, AgentError> {
    deliberate_logged(team, task, rounds, seed).map(|d| d.record)
}

pub fn deliberate_logged(team: &Team, task: &Task, rounds: usize, seed: u64) -> Result<Deliberation, AgentError> {
    if rounds == 0 {
        return Err(AgentError::ZeroRounds);
    }
    team.check_task(task)?;
    let mut rng = rng_from(seed);
    let mut members: Vec<Agent> = team
        .members
        .iter()
        .filter(|m| team.role_of(m.id()).is_some_and(Role::proposes))
        .cloned()
        .collect();
    let mut transcript: Vec<Proposal> = Vec::new();
    let mut belief_updates = Vec::new();
    let mut last_round_start = 0;

    for round in 1..=rounds {
        let round_start = transcript.len();
        for m in &members {
            let p = propose(m, task, &transcript[..round_start], round, &mut rng);
            transcript.push(p);
        }
        for m in members.iter_mut() {
            let (next, adopted) = update_beliefs_logged(m, &transcript[round_start..], &mut rng);
            belief_updates.push(BeliefUpdate {
                agent_id: m.id().to_owned(),
                round,
                adopted,
            });
            *m = next;
        }
        last_round_start = round_start;
    }

    let (final_answer, atoms_used) = aggregate(&transcript[last_round_start..], team.aggregation)?;
    let (outcome, outcome_detail) = classify_outcome(final_answer.as_deref(), &atoms_used, task, &task.universe());
    let record = RunRecord {
        scenario_id: String::new(),
        repetition: 0,
        task_id: task.task_id().to_owned(),
        attempt_index: 1,
        completed: final_answer.is_some(),
        final_answer,
        atoms_used,
        outcome,
        outcome_detail,
        transcript,
        seed,
    };
    Ok(Deliberation { record, belief_updates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{apply_edit, EditMethod, EditSpec};
    use crate::metrics::OutcomeCategory;
    use crate::task::{generate_multi_recipe_task, generate_single_chain_task};

    fn profile(id: &str, conformity: f64, stubborn: bool) -> AgentProfile {
        AgentProfile::new(id, "p", "fam", conformity, stubborn, 1.0).unwrap()
    }

    fn faithful_kb(task: &Task) -> KnowledgeBase {
        KnowledgeBase::from_facts(task.universe().facts)
    }

    fn edited_kb(task: &Task) -> (KnowledgeBase, String) {
        let kb = faithful_kb(task);
        let step = &task.paths()[0].steps[0];
        let wrong = task.universe().confusables[&step.key][0].clone();
        let e = EditSpec::new(step.key.clone(), step.expected.clone(), wrong.clone(), EditMethod::LocalOverride, 0.0).unwrap();
        (apply_edit(&kb, &e, 0).unwrap(), wrong)
    }

    fn trio(task: &Task, conformity: f64) -> Team {
        let (ekb, _) = edited_kb(task);
        Team::new(
            Topology::ReasoningTrio,
            vec![
                Agent::new(profile("a0", conformity, true), ekb),
                Agent::new(profile("a1", conformity, false), faithful_kb(task)),
                Agent::new(profile("a2", conformity, false), faithful_kb(task)),
            ],
            AggregationPolicy::MajorityVote,
        )
        .unwrap()
    }

    fn prop(id: &str, answer: Option<&str>) -> Proposal {
        Proposal {
            agent_id: id.into(),
            round: 1,
            chosen_path: "p0".into(),
            answer: answer.map(String::from),
            atoms_used: BTreeSet::new(),
        }
    }

    #[test]
    fn profile_ranges_checked() {
        assert!(AgentProfile::new("a", "p", "f", 1.2, false, 0.0).is_err());
        assert!(AgentProfile::new("a", "p", "f", 0.5, false, -0.1).is_err());
        assert!(AgentProfile::new("", "p", "f", 0.5, false, 0.5).is_err());
    }

    #[test]
    fn aggregate_rules() {
        let (a, _) = aggregate(&[prop("1", Some("x")), prop("2", Some("x")), prop("3", Some("y"))], AggregationPolicy::MajorityVote).unwrap();
        assert_eq!(a.as_deref(), Some("x"));
        let (a, _) = aggregate(&[prop("1", Some("y")), prop("2", Some("x"))], AggregationPolicy::MajorityVote).unwrap();
        assert_eq!(a.as_deref(), Some("x"));
        let (a, atoms) = aggregate(&[prop("1", None), prop("2", None), prop("3", None)], AggregationPolicy::MajorityVote).unwrap();
        assert_eq!(a, None);
        assert!(atoms.is_empty());
        let (a, _) = aggregate(&[prop("1", None), prop("2", Some("z"))], AggregationPolicy::MajorityVote).unwrap();
        assert_eq!(a.as_deref(), Some("z"));
        assert_eq!(aggregate(&[], AggregationPolicy::MajorityVote), Err(AgentError::NoProposals));
    }

    #[test]
    fn aggregate_returns_earliest_winner_atoms() {
        let mut first = prop("1", Some("x"));
        first.atoms_used.insert(Atom::new("a", "r", "1").unwrap());
        let mut second = prop("2", Some("x"));
        second.atoms_used.insert(Atom::new("a", "r", "2").unwrap());
        let (_, atoms) = aggregate(&[prop("0", Some("y")), first.clone(), second], AggregationPolicy::MajorityVote).unwrap();
        assert_eq!(atoms, first.atoms_used);
    }

    #[test]
    fn faithful_round_one_proposal() {
        let task = generate_single_chain_task(1, 2).unwrap();
        let agent = Agent::new(profile("a", 0.5, false), faithful_kb(&task));
        let p = propose(&agent, &task, &[], 1, &mut rng_from(0));
        assert_eq!(p.answer.as_deref(), Some(task.ground_truth()));
        assert_eq!(p.round, 1);
    }

    #[test]
    fn proposer_routes_around_asserted_conflict() {
        let task = generate_multi_recipe_task(2, 2, 0).unwrap();
        let agent = Agent::new(profile("a", 0.5, false), faithful_kb(&task));
        let p1_step = &task.paths()[0].steps[0];
        let other = Proposal {
            agent_id: "b".into(),
            round: 1,
            chosen_path: "p0".into(),
            answer: Some("w".into()),
            atoms_used: BTreeSet::from([p1_step.key.with_object("wrong").unwrap()]),
        };
        let p = propose(&agent, &task, &[other], 2, &mut rng_from(0));
        assert_eq!(p.chosen_path, "p1");
        assert_eq!(p.answer.as_deref(), Some(task.ground_truth()));
    }

    #[test]
    fn stubborn_edited_agent_repeats_counterfactual() {
        let task = generate_single_chain_task(8, 1).unwrap();
        let (kb, wrong) = edited_kb(&task);
        let agent = Agent::new(profile("e", 0.9, true), kb);
        let mut history = Vec::new();
        let mut rng = rng_from(3);
        for round in 1..=4 {
            let p = propose(&agent, &task, &history, round, &mut rng);
            assert_eq!(p.answer.as_deref(), Some(wrong.as_str()));
            let agent_next = update_beliefs(&agent, std::slice::from_ref(&p), &mut rng);
            assert_eq!(agent_next, agent);
            history.push(p);
        }
    }

    fn asserting(id: &str, key: &FactKey, object: &str) -> Proposal {
        let mut p = prop(id, Some(object));
        p.atoms_used.insert(key.with_object(object).unwrap());
        p
    }

    #[test]
    fn conformity_extremes() {
        let key = FactKey::new("k", "r").unwrap();
        let agent = Agent::new(profile("a", 0.0, false), KnowledgeBase::from_facts([key.with_object("x").unwrap()]));
        let round = [asserting("a", &key, "x"), asserting("b", &key, "y"), asserting("c", &key, "y")];
        let unchanged = update_beliefs(&agent, &round, &mut rng_from(0));
        assert_eq!(unchanged, agent);

        let eager = Agent::new(profile("a", 1.0, false), agent.kb.clone());
        let moved = update_beliefs(&eager, &round, &mut rng_from(0));
        assert_eq!(moved.kb.believed_object(&key), Some("y"));
        assert_eq!(moved.kb.local_overrides().get(&key).map(String::as_str), Some("y"));
    }

    #[test]
    fn unopposed_claims_are_not_revisited() {
        let key = FactKey::new("k", "r").unwrap();
        let agent = Agent::new(profile("a", 1.0, false), KnowledgeBase::from_facts([key.with_object("x").unwrap()]));
        let after = update_beliefs(&agent, &[asserting("b", &key, "y")], &mut rng_from(0));
        assert_eq!(after, agent);
    }

    #[test]
    fn contested_gap_is_filled() {
        let key = FactKey::new("k", "r").unwrap();
        let agent = Agent::new(profile("a", 1.0, false), KnowledgeBase::new());
        let round = [asserting("b", &key, "y"), asserting("c", &key, "y"), asserting("d", &key, "z")];
        let after = update_beliefs(&agent, &round, &mut rng_from(0));
        assert_eq!(after.kb.believed_object(&key), Some("y"));
    }

    #[test]
    fn minority_holder_flips_to_majority() {
        let key = FactKey::new("k", "r").unwrap();
        let holders = ["x", "x", "z"];
        let agents: Vec<Agent> = holders
            .iter()
            .enumerate()
            .map(|(i, o)| Agent::new(profile(&format!("a{i}"), 1.0, false), KnowledgeBase::from_facts([key.with_object(*o).unwrap()])))
            .collect();
        let round: Vec<Proposal> = agents
            .iter()
            .zip(holders)
            .map(|(a, o)| {
                let mut p = prop(a.id(), Some(o));
                p.atoms_used.insert(key.with_object(o).unwrap());
                p
            })
            .collect();
        let mut rng = rng_from(5);
        let after: Vec<_> = agents.iter().map(|a| update_beliefs(a, &round, &mut rng)).collect();
        for a in &after {
            assert_eq!(a.kb.believed_object(&key), Some("x"));
        }
    }

    #[test]
    fn unanimous_faithful_trio_is_correct() {
        let task = generate_single_chain_task(2, 2).unwrap();
        let members = (0..3).map(|i| Agent::new(profile(&format!("a{i}"), 0.5, false), faithful_kb(&task))).collect();
        let team = Team::new(Topology::ReasoningTrio, members, AggregationPolicy::MajorityVote).unwrap();
        let rec = deliberate(&team, &task, 1, 0).unwrap();
        assert_eq!(rec.final_answer.as_deref(), Some(task.ground_truth()));
        assert_eq!(rec.outcome, OutcomeCategory::Correct);
        assert_eq!(rec.transcript.len(), 3);
    }

    #[test]
    fn faithful_pair_outvotes_stubborn_edit() {
        let task = generate_single_chain_task(6, 1).unwrap();
        let rec = deliberate(&trio(&task, 0.0), &task, 1, 0).unwrap();
        assert_eq!(rec.final_answer.as_deref(), Some(task.ground_truth()));
        let rec = deliberate(&trio(&task, 1.0), &task, 2, 0).unwrap();
        assert_eq!(rec.final_answer.as_deref(), Some(task.ground_truth()));
        assert_eq!(rec.transcript.len(), 6);
    }

    #[test]
    fn topology_and_task_must_match() {
        let recipe = generate_multi_recipe_task(1, 2, 0).unwrap();
        let chain = generate_single_chain_task(1, 1).unwrap();
        let team = trio(&chain, 0.5);
        assert!(matches!(deliberate(&team, &recipe, 1, 0), Err(AgentError::TopologyTaskMismatch { .. })));
        assert_eq!(deliberate(&team, &chain, 0, 0), Err(AgentError::ZeroRounds));
    }

    #[test]
    fn team_shape_validated() {
        let a = |id: &str| Agent::new(profile(id, 0.5, false), KnowledgeBase::new());
        assert!(Team::new(Topology::ReasoningTrio, vec![a("x"), a("y")], AggregationPolicy::MajorityVote).is_err());
        assert!(matches!(
            Team::new(Topology::ReasoningTrio, vec![a("x"), a("x"), a("y")], AggregationPolicy::MajorityVote),
            Err(AgentError::DuplicateAgent(_))
        ));
        let t = Team::new(
            Topology::ProgrammingTeam { n_coders: 3 },
            vec![a("m"), a("c1"), a("c2"), a("c3"), a("x")],
            AggregationPolicy::MajorityVote,
        )
        .unwrap();
        assert_eq!(t.role_of("m"), Some(Role::Manager));
        assert_eq!(t.role_of("x"), Some(Role::Executor));
    }
}
