//! Trace events: the append-only system of record for every run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::{BeliefUpdate, Proposal, Role, Team};
use crate::knowledge::{Atom, EditSpec};
use crate::metrics::{KernelTag, OutcomeCategory, RunRecord};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    RunStarted,
    ProposalMade,
    BeliefUpdated,
    Aggregated,
    OutcomeClassified,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub run: usize,
    pub kind: EventKind,
    pub scenario_id: String,
    pub task_id: String,
    pub attempt: usize,
    pub round: Option<usize>,
    pub agent_id: Option<String>,
    pub payload: Value,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub agent_id: String,
    pub role: Role,
    pub family: String,
    pub persona: String,
    pub stubborn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunStarted {
    repetition: usize,
    kernel: KernelTag,
    task: Task,
    edits: Vec<EditSpec>,
    members: Vec<MemberInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProposalMade {
    chosen_path: String,
    answer: Option<String>,
    atoms_used: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeliefUpdated {
    adopted: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Aggregated {
    final_answer: Option<String>,
    atoms_used: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OutcomeClassified {
    completed: bool,
    outcome: OutcomeCategory,
    outcome_detail: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("run {run}: {message}")]
    Inconsistent { run: usize, message: String },
}

/// Everything a run contributes to a trace.
pub struct RunContext<'a> {
    pub run: usize,
    pub repetition: usize,
    pub kernel: KernelTag,
    pub task: &'a Task,
    pub edits: &'a [EditSpec],
    pub team: &'a Team,
    pub record: &'a RunRecord,
    pub belief_updates: &'a [BeliefUpdate],
}

pub fn member_infos(team: &Team) -> Vec<MemberInfo> {
    team.members()
        .iter()
        .map(|m| MemberInfo {
            agent_id: m.id().to_owned(),
            role: team.role_of(m.id()).expect("members have roles"),
            family: m.profile.family().to_owned(),
            persona: m.profile.persona().to_owned(),
            stubborn: m.profile.stubborn(),
        })
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("trace payloads serialize")
}

/// Event sequence for one run, in causal order. Belief updates that
/// adopted nothing are left out.
pub fn run_events(ctx: &RunContext<'_>) -> Vec<TraceEvent> {
    let r = ctx.record;
    let event = |kind, round, agent_id: Option<&str>, payload| TraceEvent {
        run: ctx.run,
        kind,
        scenario_id: r.scenario_id.clone(),
        task_id: r.task_id.clone(),
        attempt: r.attempt_index,
        round,
        agent_id: agent_id.map(str::to_owned),
        payload,
        seed: r.seed,
    };
    let members = member_infos(ctx.team);
    let mut out = vec![event(
        EventKind::RunStarted,
        None,
        None,
        to_value(&RunStarted {
            repetition: ctx.repetition,
            kernel: ctx.kernel,
            task: ctx.task.clone(),
            edits: ctx.edits.to_vec(),
            members,
        }),
    )];
    let mut updates = ctx.belief_updates.iter().peekable();
    let mut current_round = None;
    for p in &r.transcript {
        if current_round.is_some_and(|c| c != p.round) {
            while let Some(u) = updates.next_if(|u| Some(u.round) == current_round) {
                if u.adopted.is_empty() {
                    continue;
                }
                out.push(event(EventKind::BeliefUpdated, Some(u.round), Some(&u.agent_id), to_value(&BeliefUpdated { adopted: u.adopted.clone() })));
            }
        }
        current_round = Some(p.round);
        out.push(event(
            EventKind::ProposalMade,
            Some(p.round),
            Some(&p.agent_id),
            to_value(&ProposalMade {
                chosen_path: p.chosen_path.clone(),
                answer: p.answer.clone(),
                atoms_used: p.atoms_used.iter().cloned().collect(),
            }),
        ));
    }
    for u in updates.filter(|u| !u.adopted.is_empty()) {
        out.push(event(EventKind::BeliefUpdated, Some(u.round), Some(&u.agent_id), to_value(&BeliefUpdated { adopted: u.adopted.clone() })));
    }
    out.push(event(
        EventKind::Aggregated,
        None,
        None,
        to_value(&Aggregated {
            final_answer: r.final_answer.clone(),
            atoms_used: r.atoms_used.iter().cloned().collect(),
        }),
    ));
    out.push(event(
        EventKind::OutcomeClassified,
        None,
        None,
        to_value(&OutcomeClassified {
            completed: r.completed,
            outcome: r.outcome,
            outcome_detail: r.outcome_detail.clone(),
        }),
    ));
    out
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e).expect("events serialize"));
        s.push('\n');
    }
    s
}

pub fn from_jsonl(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// A run rebuilt from its events.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayedRun {
    pub record: RunRecord,
    pub task: Task,
    pub edits: Vec<EditSpec>,
    pub kernel: KernelTag,
    pub members: Vec<MemberInfo>,
}

fn payload<T: for<'de> Deserialize<'de>>(e: &TraceEvent) -> Result<T, TraceError> {
    serde_json::from_value(e.payload.clone()).map_err(|err| TraceError::Inconsistent {
        run: e.run,
        message: format!("{:?} payload: {err}", e.kind),
    })
}

/// Rebuilds every run in `events`, ordered by run ordinal.
pub fn replay(events: &[TraceEvent]) -> Result<Vec<ReplayedRun>, TraceError> {
    let mut by_run: BTreeMap<usize, Vec<&TraceEvent>> = BTreeMap::new();
    for e in events {
        by_run.entry(e.run).or_default().push(e);
    }
    by_run.into_iter().map(|(run, evs)| replay_run(run, &evs)).collect()
}

fn replay_run(run: usize, events: &[&TraceEvent]) -> Result<ReplayedRun, TraceError> {
    let missing = |what: &str| TraceError::Inconsistent {
        run,
        message: format!("missing {what} event"),
    };
    let first = events.first().ok_or_else(|| missing("any"))?;
    let start_ev = events.iter().find(|e| e.kind == EventKind::RunStarted).ok_or_else(|| missing("RunStarted"))?;
    let start: RunStarted = payload(start_ev)?;
    let agg: Aggregated = payload(events.iter().find(|e| e.kind == EventKind::Aggregated).ok_or_else(|| missing("Aggregated"))?)?;
    let out: OutcomeClassified = payload(
        events
            .iter()
            .find(|e| e.kind == EventKind::OutcomeClassified)
            .ok_or_else(|| missing("OutcomeClassified"))?,
    )?;
    let mut transcript = Vec::new();
    for e in events.iter().filter(|e| e.kind == EventKind::ProposalMade) {
        let p: ProposalMade = payload(e)?;
        transcript.push(Proposal {
            agent_id: e.agent_id.clone().ok_or_else(|| missing("agent_id on ProposalMade"))?,
            round: e.round.ok_or_else(|| missing("round on ProposalMade"))?,
            chosen_path: p.chosen_path,
            answer: p.answer,
            atoms_used: p.atoms_used.into_iter().collect(),
        });
    }
    let record = RunRecord {
        scenario_id: first.scenario_id.clone(),
        repetition: start.repetition,
        task_id: first.task_id.clone(),
        attempt_index: first.attempt,
        completed: out.completed,
        final_answer: agg.final_answer,
        atoms_used: agg.atoms_used.into_iter().collect(),
        outcome: out.outcome,
        outcome_detail: out.outcome_detail,
        transcript,
        seed: first.seed,
    };
    Ok(ReplayedRun {
        record,
        task: start.task,
        edits: start.edits,
        kernel: start.kernel,
        members: start.members,
    })
}
