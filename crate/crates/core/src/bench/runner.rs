use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{RunConfig, SweepKnob};
use super::report::{Aggregate, BenchReport, CellResult, SweepReport, SweepRow};
use super::scenario::ScenarioSpec;
use crate::denoiser::{AnalyticDenoiser, ConditionId, ConditionSet};
use crate::diffusion::{mix_seed, NoiseRng, NoiseSchedule};
use crate::error::Result;
use crate::guidance::{GuidanceMode, GuidanceSpec};
use crate::metrics::{framewise_score, projected_attributes, wholistic_score, ToyLinearEmbedder};
use crate::sampler::{sample_video, SamplerKind, Trajectory};

/// Per-cell noise seed. Independent of the mode, so every mode of a
/// (scenario, seed) pair starts from the same initial noise.
pub fn cell_seed(master_seed: u64, scenario_id: &str, seed: u64) -> u64 {
    let digest = Sha256::digest(scenario_id.as_bytes());
    let id_key = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    mix_seed(mix_seed(master_seed, id_key), seed)
}

/// A scenario with its denoiser and embedder built for one schedule.
#[derive(Debug, Clone)]
pub struct ScenarioRuntime {
    pub spec: ScenarioSpec,
    pub denoiser: AnalyticDenoiser,
    pub embedder: ToyLinearEmbedder,
    pub conditions: ConditionSet,
}

impl ScenarioRuntime {
    pub fn new(spec: &ScenarioSpec, sched: &NoiseSchedule) -> Result<Self> {
        Ok(Self {
            denoiser: spec.denoiser(sched)?,
            embedder: spec.embedder()?,
            conditions: spec.condition_set(),
            spec: spec.clone(),
        })
    }
}

/// Samples one (scenario, mode, seed) trajectory.
pub fn run_scenario_mode(
    guidance: &GuidanceSpec,
    sampler: SamplerKind,
    master_seed: u64,
    rt: &ScenarioRuntime,
    mode: GuidanceMode,
    seed: u64,
) -> Result<Trajectory> {
    rt.spec.check_mode(mode)?;
    let spec = GuidanceSpec {
        mode,
        ..guidance.clone()
    };
    let mut rng = NoiseRng::new(cell_seed(master_seed, &rt.spec.id, seed));
    let mut traj = sample_video(
        &spec,
        sampler,
        &rt.conditions,
        rt.spec.frames,
        rt.spec.dim,
        &rt.denoiser,
        rt.denoiser.schedule(),
        &mut rng,
    )?;
    traj.seed = seed;
    Ok(traj)
}

/// Samples and scores one cell. Failures are recorded on the row.
pub fn run_cell(cfg: &RunConfig, rt: &ScenarioRuntime, mode: GuidanceMode, seed: u64, config_hash: &str) -> CellResult {
    let mut row = CellResult {
        scenario: rt.spec.id.clone(),
        category: rt.spec.category,
        mode,
        seed,
        wholistic: None,
        framewise: None,
        static_pair_count: None,
        last_frame_attribute: None,
        error: None,
        config_hash: config_hash.to_string(),
    };
    let traj = match run_scenario_mode(&cfg.guidance, cfg.sampler, cfg.master_seed, rt, mode, seed) {
        Ok(t) => t,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let z0 = traj.final_sample();
    let (ci, cf) = (&ConditionId::Initial, &ConditionId::Final);
    let mut errors = Vec::new();
    match wholistic_score(z0, ci, cf, &rt.embedder) {
        Ok(w) => row.wholistic = Some(w),
        Err(e) => errors.push(format!("wholistic: {e}")),
    }
    match framewise_score(z0, ci, cf, &rt.embedder) {
        Ok(f) => {
            row.framewise = Some(f.mean);
            row.static_pair_count = Some(f.static_pairs);
        }
        Err(e) => errors.push(format!("framewise: {e}")),
    }
    match projected_attributes(z0, ci, cf, &rt.embedder) {
        Ok(a) => row.last_frame_attribute = a.last().copied(),
        Err(e) => errors.push(format!("attribute: {e}")),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Runs every (scenario, mode, seed) cell. Rows come back in scenario, mode,
/// seed order whether or not `parallel` is set.
pub fn run_benchmark(cfg: &RunConfig, scenarios: &[ScenarioSpec], parallel: bool) -> Result<BenchReport> {
    cfg.validate()?;
    let sched = cfg.schedule.params().build()?;
    let runtimes = scenarios
        .iter()
        .map(|s| ScenarioRuntime::new(s, &sched))
        .collect::<Result<Vec<_>>>()?;
    let hash = cfg.config_hash();

    let cells: Vec<(&ScenarioRuntime, GuidanceMode, u64)> = runtimes
        .iter()
        .flat_map(|rt| {
            cfg.modes
                .iter()
                .flat_map(move |&m| cfg.seeds.iter().map(move |&s| (rt, m, s)))
        })
        .collect();
    let run = |&(rt, mode, seed): &(&ScenarioRuntime, GuidanceMode, u64)| run_cell(cfg, rt, mode, seed, &hash);
    let rows: Vec<CellResult> = if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };

    let mut by_scenario = Vec::new();
    for s in scenarios {
        for &m in &cfg.modes {
            let group: Vec<&CellResult> = rows.iter().filter(|r| r.scenario == s.id && r.mode == m).collect();
            by_scenario.push(Aggregate::from_rows(&s.id, m, &group));
        }
    }
    let mut categories: Vec<_> = scenarios.iter().map(|s| s.category).collect();
    categories.sort();
    categories.dedup();
    let mut by_category = Vec::new();
    for c in categories {
        for &m in &cfg.modes {
            let group: Vec<&CellResult> = rows.iter().filter(|r| r.category == c && r.mode == m).collect();
            by_category.push(Aggregate::from_rows(c.as_str(), m, &group));
        }
    }

    Ok(BenchReport {
        config_hash: hash,
        rows,
        by_scenario,
        by_category,
    })
}

/// Reruns the benchmark once per knob value.
pub fn run_sweep(
    cfg: &RunConfig,
    scenarios: &[ScenarioSpec],
    knob: SweepKnob,
    values: &[f64],
    parallel: bool,
) -> Result<SweepReport> {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &v in values {
        let c = knob.apply(cfg, v)?;
        let report = run_benchmark(&c, scenarios, parallel)?;
        for aggregate in report.by_scenario {
            rows.push(SweepRow {
                knob,
                value: v,
                config_hash: report.config_hash.clone(),
                aggregate,
            });
        }
        cells.extend(report.rows);
    }
    Ok(SweepReport { rows, cells })
}
