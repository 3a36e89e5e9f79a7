use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SweepKnob;
use super::scenario::{Category, ScenarioSpec};
use crate::denoiser::ConditionId;
use crate::error::Result;
use crate::guidance::GuidanceMode;
use crate::metrics::projected_attributes;
use crate::sampler::Trajectory;

/// Frozen column order of `report.csv`.
pub const REPORT_COLUMNS: [&str; 8] = [
    "scenario",
    "category",
    "mode",
    "seed",
    "wholistic",
    "framewise",
    "static_pair_count",
    "error",
];

const AGGREGATE_COLUMNS: [&str; 10] = [
    "group",
    "mode",
    "n",
    "errors",
    "wholistic_mean",
    "wholistic_std",
    "framewise_mean",
    "framewise_std",
    "last_frame_abs_mean",
    "last_frame_var",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub category: Category,
    pub mode: GuidanceMode,
    pub seed: u64,
    pub wholistic: Option<f64>,
    pub framewise: Option<f64>,
    pub static_pair_count: Option<usize>,
    /// Projected attribute of the last clean frame.
    pub last_frame_attribute: Option<f64>,
    pub error: Option<String>,
    pub config_hash: String,
}

/// Mean and sample statistics over the rows of one (group, mode) pair.
/// Missing values (failed metrics) are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub mode: GuidanceMode,
    pub n: usize,
    pub errors: usize,
    pub wholistic_mean: Option<f64>,
    pub wholistic_std: Option<f64>,
    pub framewise_mean: Option<f64>,
    pub framewise_std: Option<f64>,
    pub last_frame_abs_mean: Option<f64>,
    pub last_frame_var: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_var(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

impl Aggregate {
    pub fn from_rows(group: &str, mode: GuidanceMode, rows: &[&CellResult]) -> Self {
        let collect = |f: fn(&CellResult) -> Option<f64>| rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
        let w = collect(|r| r.wholistic);
        let f = collect(|r| r.framewise);
        let a = collect(|r| r.last_frame_attribute);
        let abs: Vec<f64> = a.iter().map(|v| v.abs()).collect();
        Self {
            group: group.to_string(),
            mode,
            n: rows.len(),
            errors: rows.iter().filter(|r| r.error.is_some()).count(),
            wholistic_mean: mean(&w),
            wholistic_std: sample_var(&w).map(f64::sqrt),
            framewise_mean: mean(&f),
            framewise_std: sample_var(&f).map(f64::sqrt),
            last_frame_abs_mean: mean(&abs),
            last_frame_var: sample_var(&a),
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.group.clone(),
            self.mode.to_string(),
            self.n.to_string(),
            self.errors.to_string(),
            fmt_opt(self.wholistic_mean),
            fmt_opt(self.wholistic_std),
            fmt_opt(self.framewise_mean),
            fmt_opt(self.framewise_std),
            fmt_opt(self.last_frame_abs_mean),
            fmt_opt(self.last_frame_var),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub rows: Vec<CellResult>,
    pub by_scenario: Vec<Aggregate>,
    pub by_category: Vec<Aggregate>,
}

impl BenchReport {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn aggregate(&self, scenario: &str, mode: GuidanceMode) -> Option<&Aggregate> {
        self.by_scenario.iter().find(|a| a.group == scenario && a.mode == mode)
    }

    /// The report CSV body: frozen header followed by one row per cell.
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.category.to_string(),
                r.mode.to_string(),
                r.seed.to_string(),
                fmt_opt(r.wholistic),
                fmt_opt(r.framewise),
                r.static_pair_count.map(|c| c.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        finish(w)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(AGGREGATE_COLUMNS)?;
        for a in self.by_scenario.iter().chain(&self.by_category) {
            w.write_record(a.record())?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn comment_line(config_hash: &str, timestamp: Option<u64>) -> String {
    match timestamp {
        Some(ts) => format!("# generated_at={ts} config_hash={config_hash}\n"),
        None => format!("# config_hash={config_hash}\n"),
    }
}

/// Writes `report.csv`, `aggregates.csv` and `report.json` into `dir`.
/// Only the first comment line of each CSV depends on `timestamp`.
pub fn write_report(report: &BenchReport, dir: &Path, timestamp: Option<u64>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let header = comment_line(&report.config_hash, timestamp);
    let files = [
        (dir.join("report.csv"), format!("{header}{}", report.rows_csv()?)),
        (dir.join("aggregates.csv"), format!("{header}{}", report.aggregates_csv()?)),
        (dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n"),
    ];
    let mut paths = Vec::new();
    for (p, body) in files {
        std::fs::write(&p, body)?;
        paths.push(p);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub knob: SweepKnob,
    pub value: f64,
    pub config_hash: String,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellResult>,
}

impl SweepReport {
    pub fn has_errors(&self) -> bool {
        self.cells.iter().any(|r| r.error.is_some())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["knob", "value", "config_hash"];
        header.extend(AGGREGATE_COLUMNS);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.knob.as_str().to_string(), r.value.to_string(), r.config_hash.clone()];
            rec.extend(r.aggregate.record());
            w.write_record(&rec)?;
        }
        finish(w)
    }
}

pub fn write_sweep(report: &SweepReport, dir: &Path, timestamp: Option<u64>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let header = match timestamp {
        Some(ts) => format!("# generated_at={ts}\n"),
        None => "# sweep\n".to_string(),
    };
    let csv_path = dir.join("sweep.csv");
    std::fs::write(&csv_path, format!("{header}{}", report.to_csv()?))?;
    let json_path = dir.join("sweep.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(vec![csv_path, json_path])
}

/// Per-frame table of the clean sample: `frame, dim_0..dim_{D-1}, attribute`.
pub fn trajectory_csv_string(traj: &Trajectory, scenario: &ScenarioSpec) -> Result<String> {
    let z0 = traj.final_sample();
    let emb = scenario.embedder()?;
    let attrs = projected_attributes(z0, &ConditionId::Initial, &ConditionId::Final, &emb)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["frame".to_string()];
    header.extend((0..z0.dim()).map(|i| format!("dim_{i}")));
    header.push("attribute".into());
    w.write_record(&header)?;
    for (j, a) in attrs.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(z0.frame(j).iter().map(|v| v.to_string()));
        rec.push(a.to_string());
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn emit_trajectory_csv(traj: &Trajectory, scenario: &ScenarioSpec, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, trajectory_csv_string(traj, scenario)?)?;
    Ok(())
}
