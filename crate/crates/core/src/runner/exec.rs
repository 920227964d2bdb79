//! Seeded execution of scenarios.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::agent::deliberate_logged;
use crate::injection::{KnowledgeSeeds, ScenarioSpec};
use crate::metrics::{EvaluatedRun, KernelTag, MetricsError, RunRecord};
use crate::runner::trace::{member_infos, run_events, ReplayedRun, RunContext, TraceEvent};
use crate::task::Task;
use crate::MetricsReport;

/// Coordinates of one run inside a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunCoords {
    pub repetition: usize,
    pub task_index: usize,
    /// 1-based.
    pub attempt: usize,
}

/// Knobs shared by all scenarios of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSettings {
    pub base_seed: u64,
    pub repetitions: usize,
    pub kernel: KernelTag,
    /// Worker threads; 0 lets the pool decide.
    pub parallelism: usize,
}

/// Seed of the `index`-th task of a source. Independent of the scenario, so
/// scenarios drawing from the same source face the same tasks.
pub fn task_seed(base_seed: u64, spec: &ScenarioSpec, index: usize) -> u64 {
    seed_of!(base_seed, "task", spec.tasks.label().as_str(), index)
}

/// Knowledge seeds of a run. They ignore the scenario id, so two scenarios
/// differing only in, say, edits start from identical agent knowledge.
pub fn knowledge_seeds(base_seed: u64, c: RunCoords) -> KnowledgeSeeds {
    KnowledgeSeeds {
        world: seed_of!(base_seed, "world"),
        draw: seed_of!(base_seed, "draw", c.repetition, c.task_index, c.attempt),
    }
}

/// Seed driving injection and deliberation of one run.
pub fn run_seed(base_seed: u64, scenario_id: &str, c: RunCoords) -> u64 {
    seed_of!(base_seed, scenario_id, c.repetition, c.task_index, c.attempt)
}

/// A finished scenario: its runs in ordinal order and its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRuns {
    pub runs: Vec<ReplayedRun>,
    pub events: Vec<TraceEvent>,
}

impl ScenarioRuns {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().map(|r| &r.record)
    }
}

/// Metrics of a set of runs; the kernel is taken from the runs themselves.
pub fn report_from_runs(runs: &[ReplayedRun]) -> Result<MetricsReport, MetricsError> {
    let kernel = runs.first().map(|r| r.kernel).unwrap_or_default();
    let evaluated: Vec<EvaluatedRun<'_>> = runs
        .iter()
        .map(|r| EvaluatedRun {
            record: &r.record,
            edits: &r.edits,
            task: &r.task,
        })
        .collect();
    MetricsReport::compute(&evaluated, &kernel)
}

/// Distinct tasks of a set of runs.
pub fn tasks_of(runs: &[ReplayedRun]) -> BTreeSet<&str> {
    runs.iter().map(|r| r.task.task_id()).collect()
}

fn run_one(spec: &ScenarioSpec, settings: RunSettings, task: &Task, c: RunCoords, ordinal: usize) -> Result<(ReplayedRun, Vec<TraceEvent>), String> {
    let seed = run_seed(settings.base_seed, &spec.scenario_id, c);
    let (team, edits) = spec
        .prepare(task, knowledge_seeds(settings.base_seed, c), seed)
        .map_err(|e| e.to_string())?;
    let d = deliberate_logged(&team, task, spec.rounds, seed).map_err(|e| e.to_string())?;
    let mut record = d.record;
    record.scenario_id = spec.scenario_id.clone();
    record.repetition = c.repetition;
    record.attempt_index = c.attempt;
    let events = run_events(&RunContext {
        run: ordinal,
        repetition: c.repetition,
        kernel: settings.kernel,
        task,
        edits: &edits,
        team: &team,
        record: &record,
        belief_updates: &d.belief_updates,
    });
    Ok((
        ReplayedRun {
            record,
            task: task.clone(),
            edits,
            kernel: settings.kernel,
            members: member_infos(&team),
        },
        events,
    ))
}

fn pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool builds")
}

/// Runs every repetition × task × attempt of `spec`. Any failing run fails
/// the whole scenario, reporting the failure with the lowest ordinal.
pub fn run_scenario(spec: &ScenarioSpec, settings: RunSettings) -> Result<ScenarioRuns, String> {
    spec.validate().map_err(|e| e.to_string())?;
    pool(settings.parallelism).install(|| {
        let tasks: Vec<Task> = (0..spec.n_tasks)
            .into_par_iter()
            .map(|i| spec.tasks.generate(task_seed(settings.base_seed, spec, i)).map_err(|e| e.to_string()))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_, _>>()?;
        let k = spec.attempts_k;
        let total = settings.repetitions * spec.n_tasks * k;
        let results: Vec<_> = (0..total)
            .into_par_iter()
            .map(|ordinal| {
                let c = RunCoords {
                    repetition: ordinal / (spec.n_tasks * k),
                    task_index: (ordinal / k) % spec.n_tasks,
                    attempt: ordinal % k + 1,
                };
                run_one(spec, settings, &tasks[c.task_index], c, ordinal)
            })
            .collect();
        let mut runs = Vec::with_capacity(total);
        let mut events = Vec::new();
        for r in results {
            let (run, evs) = r?;
            runs.push(run);
            events.extend(evs);
        }
        Ok(ScenarioRuns { runs, events })
    })
}
