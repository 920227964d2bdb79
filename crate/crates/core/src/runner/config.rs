//! TOML experiment configuration.
//!
//! ```toml
//! base_seed = 7
//! repetitions = 5
//!
//! [[scenario]]
//! id = "recipe-local"
//! topology = "programming_team"
//! n_tasks = 100
//!
//! [[scenario.edit]]
//! n_edits = 1
//! method = "local"
//! policy = "random_path_atom"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::agent::{Topology, DEFAULT_CODERS};
use crate::injection::{
    AgentParams, EditCommand, Heterogeneity, MetricName, ScenarioError, ScenarioSpec, TargetPolicy, TaskSource, DEFAULT_ROUNDS,
};
use crate::knowledge::{EditMethod, DEFAULT_SIDE_EFFECT_RATE};
use crate::metrics::KernelTag;
use crate::runner::exec::RunSettings;
use crate::task::{RecipeShape, DEFAULT_RECIPE_STEPS};

pub const DEFAULT_REPETITIONS: usize = 5;
pub const DEFAULT_TASKS: usize = 100;
pub const DEFAULT_ATTEMPTS: usize = 5;
pub const DEFAULT_HOPS: usize = 2;
pub const DEFAULT_PATHS: usize = 3;
pub const DEFAULT_FAMILY: &str = "llama";

/// A parsed, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub base_seed: u64,
    pub repetitions: usize,
    pub output_dir: PathBuf,
    pub similarity_kernel: KernelTag,
    /// Worker threads; 0 lets the pool decide.
    pub parallelism: usize,
}

impl ExperimentConfig {
    pub fn settings(&self) -> RunSettings {
        RunSettings {
            base_seed: self.base_seed,
            repetitions: self.repetitions,
            kernel: self.similarity_kernel,
            parallelism: self.parallelism,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {field}: {message}")]
    Invalid { line: usize, field: String, message: String },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line, .. } | ConfigError::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    base_seed: Option<Spanned<i64>>,
    repetitions: Option<Spanned<i64>>,
    output_dir: Option<Spanned<String>>,
    similarity_kernel: Option<Spanned<String>>,
    parallelism: Option<Spanned<i64>>,
    #[serde(default)]
    scenario: Vec<Spanned<RawScenario>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: Spanned<String>,
    topology: Option<Spanned<String>>,
    n_coders: Option<Spanned<i64>>,
    family: Option<Spanned<String>>,
    mix: Option<Spanned<Vec<String>>>,
    n_replace: Option<Spanned<i64>>,
    rounds: Option<Spanned<i64>>,
    attempts_k: Option<Spanned<i64>>,
    n_tasks: Option<Spanned<i64>>,
    task: Option<Spanned<String>>,
    hops: Option<Spanned<i64>>,
    n_paths: Option<Spanned<i64>>,
    shared_keys: Option<Spanned<i64>>,
    steps_per_path: Option<Spanned<i64>>,
    conformity: Option<Spanned<f64>>,
    switch_propensity: Option<Spanned<f64>>,
    coverage: Option<Spanned<f64>>,
    recall: Option<Spanned<f64>>,
    metrics: Option<Spanned<Vec<String>>>,
    #[serde(default)]
    edit: Vec<Spanned<RawEdit>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdit {
    n_edits: Option<Spanned<i64>>,
    method: Option<Spanned<String>>,
    policy: Option<Spanned<String>>,
    agent: Option<Spanned<i64>>,
    side_effect_rate: Option<Spanned<f64>>,
    stubborn: Option<Spanned<bool>>,
}

/// Maps byte offsets to 1-based line numbers.
struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn of(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.0.len());
        self.0.as_bytes()[..end].iter().filter(|b| **b == b'\n').count() + 1
    }
}

struct Checker<'a> {
    lines: Lines<'a>,
    /// Where each scenario field was written, for mapping validation errors.
    spans: BTreeMap<&'static str, Range<usize>>,
    fallback: Range<usize>,
}

impl Checker<'_> {
    fn err(&self, span: &Range<usize>, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: self.lines.of(span),
            field: field.to_owned(),
            message: message.into(),
        }
    }

    fn count<const MIN: i64>(&mut self, field: &'static str, v: &Option<Spanned<i64>>, default: usize) -> Result<usize, ConfigError> {
        let Some(v) = v else { return Ok(default) };
        self.spans.insert(field, v.span());
        let n = *v.get_ref();
        if n < MIN {
            return Err(self.err(&v.span(), field, format!("{n} is below the minimum {MIN}")));
        }
        usize::try_from(n).map_err(|_| self.err(&v.span(), field, format!("{n} is too large")))
    }

    fn unit(&mut self, field: &'static str, v: &Option<Spanned<f64>>, default: f64) -> Result<f64, ConfigError> {
        let Some(v) = v else { return Ok(default) };
        self.spans.insert(field, v.span());
        let x = *v.get_ref();
        if !(0.0..=1.0).contains(&x) {
            return Err(self.err(&v.span(), field, format!("{x} is outside [0, 1]")));
        }
        Ok(x)
    }

    fn tag<T>(&mut self, field: &'static str, v: &Option<Spanned<String>>, parse: impl Fn(&str) -> Option<T>, allowed: &str) -> Result<Option<T>, ConfigError> {
        let Some(v) = v else { return Ok(None) };
        self.spans.insert(field, v.span());
        parse(v.get_ref())
            .map(Some)
            .ok_or_else(|| self.err(&v.span(), field, format!("unknown value {:?}; expected one of {allowed}", v.get_ref())))
    }

    fn from_scenario_error(&self, e: ScenarioError) -> ConfigError {
        let ScenarioError::Invalid { field, message } = e;
        let span = self.spans.get(field).unwrap_or(&self.fallback);
        self.err(span, field, message)
    }
}

fn topology_from_tag(tag: &str) -> Option<Topology> {
    match tag {
        "solo" => Some(Topology::Solo),
        "reasoning_trio" => Some(Topology::ReasoningTrio),
        "programming_team" => Some(Topology::ProgrammingTeam { n_coders: DEFAULT_CODERS }),
        _ => None,
    }
}

fn metric_from_tag(tag: &str) -> Option<MetricName> {
    serde_json::from_value(serde_json::Value::String(tag.to_owned())).ok()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !id.starts_with('.')
}

fn scenario(raw: &Spanned<RawScenario>, text: &str) -> Result<ScenarioSpec, ConfigError> {
    let r = raw.get_ref();
    let mut c = Checker {
        lines: Lines(text),
        spans: BTreeMap::new(),
        fallback: r.id.span(),
    };
    let id = r.id.get_ref().clone();
    if !valid_id(&id) {
        return Err(c.err(&r.id.span(), "id", format!("{id:?} must be non-empty and use only letters, digits, '-', '_' or '.'")));
    }

    let mut topology = c
        .tag("topology", &r.topology, topology_from_tag, "solo, reasoning_trio, programming_team")?
        .unwrap_or(Topology::ReasoningTrio);
    if let Some(n) = &r.n_coders {
        if !matches!(topology, Topology::ProgrammingTeam { .. }) {
            return Err(c.err(&n.span(), "n_coders", "only applies to programming_team"));
        }
        topology = Topology::ProgrammingTeam {
            n_coders: c.count::<1>("n_coders", &r.n_coders, DEFAULT_CODERS)?,
        };
    }

    let family = r.family.as_ref().map_or(DEFAULT_FAMILY.to_owned(), |f| f.get_ref().clone());
    if let Some(f) = &r.family {
        c.spans.insert("family", f.span());
    }
    let heterogeneity = match &r.mix {
        None => {
            if let Some(n) = &r.n_replace {
                return Err(c.err(&n.span(), "n_replace", "needs a `mix` list of families"));
            }
            Heterogeneity::Homogeneous { family }
        }
        Some(mix) => {
            c.spans.insert("families", mix.span());
            let others = mix.get_ref().iter().filter(|f| **f != family).collect::<BTreeSet<_>>().len();
            Heterogeneity::Mixed {
                base_family: family,
                families: mix.get_ref().clone(),
                n_replace: c.count::<1>("n_replace", &r.n_replace, others)?,
            }
        }
    };

    let default_task = if matches!(topology, Topology::ProgrammingTeam { .. }) { "recipe" } else { "single_chain" };
    let task_tag = r.task.as_ref().map_or(default_task, |t| t.get_ref().as_str());
    if let Some(t) = &r.task {
        c.spans.insert("tasks", t.span());
    }
    let chain_only = [("hops", &r.hops)];
    let recipe_only = [("n_paths", &r.n_paths), ("shared_keys", &r.shared_keys), ("steps_per_path", &r.steps_per_path)];
    let tasks = match task_tag {
        "single_chain" => {
            if let Some((field, v)) = recipe_only.iter().find_map(|(f, v)| v.as_ref().map(|v| (f, v))) {
                return Err(c.err(&v.span(), field, "only applies to recipe tasks"));
            }
            TaskSource::SingleChain {
                hops: c.count::<1>("hops", &r.hops, DEFAULT_HOPS)?,
            }
        }
        "recipe" => {
            if let Some((field, v)) = chain_only.iter().find_map(|(f, v)| v.as_ref().map(|v| (f, v))) {
                return Err(c.err(&v.span(), field, "only applies to single_chain tasks"));
            }
            TaskSource::Recipe(RecipeShape {
                n_paths: c.count::<1>("n_paths", &r.n_paths, DEFAULT_PATHS)?,
                shared_keys: c.count::<0>("shared_keys", &r.shared_keys, 0)?,
                steps_per_path: c.count::<1>("steps_per_path", &r.steps_per_path, DEFAULT_RECIPE_STEPS)?,
            })
        }
        other => {
            let span = r.task.as_ref().map(|t| t.span()).unwrap_or(c.fallback.clone());
            return Err(c.err(&span, "task", format!("unknown value {other:?}; expected single_chain or recipe")));
        }
    };

    let defaults = AgentParams::default();
    let agents = AgentParams {
        conformity: c.unit("conformity", &r.conformity, defaults.conformity)?,
        switch_propensity: c.unit("switch_propensity", &r.switch_propensity, defaults.switch_propensity)?,
        coverage: c.unit("coverage", &r.coverage, defaults.coverage)?,
        recall: c.unit("recall", &r.recall, defaults.recall)?,
    };

    let metrics = match &r.metrics {
        None => MetricName::ALL.into_iter().collect(),
        Some(m) => {
            c.spans.insert("metrics", m.span());
            m.get_ref()
                .iter()
                .map(|t| metric_from_tag(t).ok_or_else(|| c.err(&m.span(), "metrics", format!("unknown metric {t:?}; expected cr, tsr, cwr or cdr"))))
                .collect::<Result<BTreeSet<_>, _>>()?
        }
    };

    let default_policy = match tasks {
        TaskSource::SingleChain { .. } => TargetPolicy::AnswerHop,
        TaskSource::Recipe(_) => TargetPolicy::RandomPathAtom,
    };
    let mut edits = Vec::with_capacity(r.edit.len());
    for e in &r.edit {
        let e = e.get_ref();
        let method = c
            .tag("method", &e.method, EditMethod::from_tag, "overlay, local, global")?
            .unwrap_or(EditMethod::LocalOverride);
        let policy = c
            .tag("policy", &e.policy, TargetPolicy::from_tag, "random_path_atom, shared_atom_first, answer_hop, intermediate_hop")?
            .unwrap_or(default_policy);
        let mut cmd = EditCommand::new(c.count::<0>("n_edits", &e.n_edits, 1)?, method, policy);
        if let Some(a) = &e.agent {
            cmd.edited_agent_index = Some(c.count::<0>("edited_agent_index", &e.agent, 0)?);
            c.spans.insert("edited_agent_index", a.span());
        }
        cmd.side_effect_rate = c.unit("side_effect_rate", &e.side_effect_rate, DEFAULT_SIDE_EFFECT_RATE)?;
        cmd.stubborn = e.stubborn.as_ref().is_none_or(|s| *s.get_ref());
        edits.push(cmd);
    }

    let spec = ScenarioSpec {
        scenario_id: id,
        topology,
        heterogeneity,
        edits,
        rounds: c.count::<1>("rounds", &r.rounds, DEFAULT_ROUNDS)?,
        attempts_k: c.count::<1>("attempts_k", &r.attempts_k, DEFAULT_ATTEMPTS)?,
        n_tasks: c.count::<1>("n_tasks", &r.n_tasks, DEFAULT_TASKS)?,
        tasks,
        agents,
        metrics,
    };
    spec.validate().map_err(|e| c.from_scenario_error(e))?;
    Ok(spec)
}

/// Parses and validates a configuration document, filling defaults.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let lines = Lines(text);
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map_or(1, |s| lines.of(&s)),
        message: e.message().to_owned(),
    })?;
    let top = Checker {
        lines: Lines(text),
        spans: BTreeMap::new(),
        fallback: 0..0,
    };
    let nonneg = |field: &str, v: &Spanned<i64>| {
        u64::try_from(*v.get_ref()).map_err(|_| top.err(&v.span(), field, format!("{} is negative", v.get_ref())))
    };
    let base_seed = raw.base_seed.as_ref().map(|v| nonneg("base_seed", v)).transpose()?.unwrap_or(0);
    let repetitions = match &raw.repetitions {
        Some(v) if *v.get_ref() < 1 => return Err(top.err(&v.span(), "repetitions", format!("{} is below the minimum 1", v.get_ref()))),
        Some(v) => nonneg("repetitions", v)? as usize,
        None => DEFAULT_REPETITIONS,
    };
    let parallelism = raw.parallelism.as_ref().map(|v| nonneg("parallelism", v)).transpose()?.unwrap_or(0) as usize;
    let similarity_kernel = match &raw.similarity_kernel {
        None => KernelTag::default(),
        Some(k) => KernelTag::from_tag(k.get_ref())
            .ok_or_else(|| top.err(&k.span(), "similarity_kernel", format!("unknown kernel {:?}; expected jaccard or exact", k.get_ref())))?,
    };
    let output_dir = raw.output_dir.as_ref().map_or_else(|| PathBuf::from("out"), |d| PathBuf::from(d.get_ref()));

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut scenarios = Vec::with_capacity(raw.scenario.len());
    for s in &raw.scenario {
        let id = &s.get_ref().id;
        let line = lines.of(&id.span());
        if let Some(first) = seen.insert(id.get_ref().clone(), line) {
            return Err(ConfigError::Invalid {
                line,
                field: "id".into(),
                message: format!("duplicate scenario id {:?} (first defined on line {first})", id.get_ref()),
            });
        }
        scenarios.push(scenario(s, text)?);
    }
    if scenarios.is_empty() {
        return Err(ConfigError::Invalid {
            line: 1,
            field: "scenario".into(),
            message: "at least one [[scenario]] is required".into(),
        });
    }
    Ok(ExperimentConfig {
        scenarios,
        base_seed,
        repetitions,
        output_dir,
        similarity_kernel,
        parallelism,
    })
}

/// Source of the built-in preset covering every sweep of the study.
pub const PAPER_SUITE: &str = include_str!("paper_suite.toml");

pub fn paper_suite() -> ExperimentConfig {
    load_config(PAPER_SUITE).expect("the built-in preset is valid")
}
