//! Running whole experiments, persisting traces and rendering reports.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::metrics::KernelTag;
use crate::runner::config::ExperimentConfig;
use crate::runner::exec::{report_from_runs, run_scenario};
use crate::runner::trace::{from_jsonl, replay, to_jsonl, TraceError};
use crate::MetricsReport;

pub const SCALE_NOTE: &str = "synthetic tasks at desk scale (at most 200 per scenario)";

/// Outcome of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScenarioReport {
    Ok { report: MetricsReport },
    Failed { error: String },
}

impl ScenarioReport {
    pub fn metrics(&self) -> Option<&MetricsReport> {
        match self {
            ScenarioReport::Ok { report } => Some(report),
            ScenarioReport::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub repetitions: usize,
    pub similarity_kernel: KernelTag,
    pub scale: String,
}

/// Scenario reports in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub scenarios: Vec<(String, ScenarioReport)>,
}

impl ExperimentReport {
    pub fn get(&self, scenario_id: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|(id, _)| id == scenario_id).map(|(_, r)| r)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.scenarios.iter().filter_map(|(id, r)| match r {
            ScenarioReport::Failed { error } => Some((id.as_str(), error.as_str())),
            ScenarioReport::Ok { .. } => None,
        })
    }

    /// JSON document `{metadata, scenarios: {id: report}}`, scenarios in order.
    pub fn to_json(&self) -> String {
        let scenarios: Map<String, Value> = self
            .scenarios
            .iter()
            .map(|(id, r)| (id.clone(), serde_json::to_value(r).expect("reports serialize")))
            .collect();
        let doc = serde_json::json!({ "metadata": self.metadata, "scenarios": scenarios });
        let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Doc {
            metadata: ReportMetadata,
            scenarios: Map<String, Value>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let scenarios = doc
            .scenarios
            .into_iter()
            .map(|(id, v)| serde_json::from_value(v).map(|r| (id, r)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            metadata: doc.metadata,
            scenarios,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

impl ReportFormat {
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "table" => Some(ReportFormat::Table),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("{path}: {message}")]
    Replay { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn traces_dir(out: &Path) -> PathBuf {
    out.join("traces")
}

/// Runs every scenario of `config`, writing `traces/<id>.jsonl`,
/// `report.json` and `report.txt` under `out`. A failing scenario is
/// reported as failed and leaves no trace file; the others still run.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, RunError> {
    let traces = traces_dir(out);
    fs::create_dir_all(&traces).map_err(io_err(&traces))?;
    let settings = config.settings();
    let mut scenarios = Vec::with_capacity(config.scenarios.len());
    for spec in &config.scenarios {
        let path = traces.join(format!("{}.jsonl", spec.scenario_id));
        if path.exists() {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
        let outcome = run_scenario(spec, settings).and_then(|runs| {
            let report = report_from_runs(&runs.runs).map_err(|e| e.to_string())?;
            Ok((runs, report))
        });
        let entry = match outcome {
            Ok((runs, report)) => {
                fs::write(&path, to_jsonl(&runs.events)).map_err(io_err(&path))?;
                ScenarioReport::Ok { report }
            }
            Err(error) => ScenarioReport::Failed { error },
        };
        scenarios.push((spec.scenario_id.clone(), entry));
    }
    let report = ExperimentReport {
        metadata: ReportMetadata {
            repetitions: config.repetitions,
            similarity_kernel: config.similarity_kernel,
            scale: SCALE_NOTE.to_owned(),
        },
        scenarios,
    };
    for (name, format) in [("report.json", ReportFormat::Json), ("report.txt", ReportFormat::Table)] {
        let path = out.join(name);
        fs::write(&path, render_report(&report, format)).map_err(io_err(&path))?;
    }
    Ok(report)
}

/// Rebuilds the report of every trace file in `dir`, in file-name order.
pub fn report_from_traces(dir: &Path) -> Result<ExperimentReport, RunError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err(dir))?;
    files.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    files.sort();
    let mut scenarios = Vec::with_capacity(files.len());
    let mut repetitions = 0;
    let mut kernel = KernelTag::default();
    for path in files {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let events = from_jsonl(&text).map_err(|source| RunError::Trace { path: path.clone(), source })?;
        let runs = replay(&events).map_err(|source| RunError::Trace { path: path.clone(), source })?;
        let Some(first) = runs.first() else { continue };
        kernel = first.kernel;
        repetitions = repetitions.max(runs.iter().map(|r| r.record.repetition + 1).max().unwrap_or(0));
        let report = report_from_runs(&runs).map_err(|e| RunError::Replay {
            path: path.clone(),
            message: e.to_string(),
        })?;
        scenarios.push((first.record.scenario_id.clone(), ScenarioReport::Ok { report }));
    }
    Ok(ExperimentReport {
        metadata: ReportMetadata {
            repetitions,
            similarity_kernel: kernel,
            scale: SCALE_NOTE.to_owned(),
        },
        scenarios,
    })
}

const COLUMNS: [(&str, bool); 6] = [("CR", true), ("TSR", true), ("CWR", true), ("CDR", true), ("Adopt", false), ("Repair", true)];

fn column(r: &MetricsReport, i: usize) -> Option<f64> {
    [r.cr, r.tsr, r.cwr, r.cdr, r.adoption_prob, r.self_repair_rate][i]
}

/// Renders `report` as an aligned table or as JSON. In the table, rates
/// are percentages, undefined rates print as "-", and the best value of
/// each column is starred (lowest for adoption, highest elsewhere).
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Table => render_table(report),
    }
}

fn render_table(report: &ExperimentReport) -> String {
    let best: Vec<Option<f64>> = COLUMNS
        .iter()
        .enumerate()
        .map(|(i, (_, higher))| {
            report
                .scenarios
                .iter()
                .filter_map(|(_, s)| s.metrics().and_then(|m| column(m, i)))
                .reduce(|a, b| if (b > a) == *higher { b } else { a })
        })
        .collect();

    let mut header = vec!["Scenario".to_owned(), "N".to_owned(), "k".to_owned()];
    header.extend(COLUMNS.iter().map(|(h, _)| (*h).to_owned()));
    let mut rows = vec![header];
    let mut notes = Vec::new();
    for (id, s) in &report.scenarios {
        match s {
            ScenarioReport::Ok { report: m } => {
                let mut row = vec![id.clone(), m.n_tasks.to_string(), m.attempts_k.to_string()];
                for (i, b) in best.iter().enumerate() {
                    row.push(match column(m, i) {
                        None => "-".to_owned(),
                        Some(v) => format!("{:.2}{}", v * 100.0, if Some(v) == *b { "*" } else { "" }),
                    });
                }
                rows.push(row);
            }
            ScenarioReport::Failed { error } => {
                let mut row = vec![id.clone(), "failed".to_owned()];
                row.resize(3 + COLUMNS.len(), String::new());
                rows.push(row);
                notes.push(format!("{id}: {error}"));
            }
        }
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if n == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    for note in notes {
        out.push_str(&format!("failed {note}\n"));
    }
    out.push_str(&format!(
        "\nrepetitions: {}, kernel: {}, {}\n",
        report.metadata.repetitions,
        report.metadata.similarity_kernel.tag(),
        report.metadata.scale
    ));
    out
}
