use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use frameguide::bench::{
    emit_trajectory_csv, load_scenarios, run_benchmark, run_scenario_mode, run_sweep, write_report,
    write_sweep, RunConfig, ScenarioRuntime, ScenarioSpec, SweepKnob,
};
use frameguide::denoiser::ConditionId;
use frameguide::guidance::GuidanceMode;
use frameguide::metrics::{framewise_score, wholistic_score};
use frameguide::{Error, Result};

#[derive(Parser)]
#[command(name = "frameguide", version, about = "Frame-wise attribute-transition guidance harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check scenario files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Sample one scenario with one mode and write its per-frame trajectory CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Scenario id; defaults to the first scenario in the file.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value = "ours_anchored")]
        mode: GuidanceMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full scenario x mode x seed matrix.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Run cells on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Rerun the benchmark for each value of one knob.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        knob: SweepKnob,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        serial: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Scenario file; overrides the config's `scenarios`.
    #[arg(long, short)]
    scenarios: Option<PathBuf>,
    /// Output directory (or file, for `generate`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<GuidanceMode>>,
    /// Master seed that per-cell seeds are derived from.
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Omit the generation timestamp from CSV headers.
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, Vec<ScenarioSpec>)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenarios {
            cfg.scenarios = Some(s.clone());
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(m) = &self.modes {
            cfg.modes = m.clone();
        }
        if let Some(m) = self.master_seed {
            cfg.master_seed = m;
        }
        if let Some(w) = self.omega {
            cfg.guidance.omega = w;
        }
        if let Some(t) = self.tau {
            cfg.guidance.tau = t;
        }
        if let Some(a) = self.alpha_max {
            cfg.guidance.alpha_max = a;
        }
        cfg.validate()?;
        let path = cfg
            .scenarios
            .clone()
            .ok_or_else(|| Error::Config("no scenario file given (--scenarios or `scenarios` in config)".into()))?;
        let scenarios = load_scenarios(&path)?;
        Ok((cfg, scenarios))
    }

    fn timestamp(&self) -> Option<u64> {
        (!self.no_timestamp).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { files } => {
            for f in &files {
                let specs = load_scenarios(f)?;
                println!("{}: {} scenario(s) ok", f.display(), specs.len());
                for s in specs {
                    println!("  {} [{}] {}x{}", s.id, s.category, s.frames, s.dim);
                }
            }
            Ok(true)
        }
        Command::Generate {
            common,
            scenario,
            mode,
            seed,
        } => {
            let (cfg, scenarios) = common.resolve()?;
            let spec = match &scenario {
                Some(id) => scenarios
                    .iter()
                    .find(|s| &s.id == id)
                    .ok_or_else(|| Error::Config(format!("scenario `{id}` not found")))?,
                None => scenarios
                    .first()
                    .ok_or_else(|| Error::Config("scenario file is empty".into()))?,
            };
            let sched = cfg.schedule.params().build()?;
            let rt = ScenarioRuntime::new(spec, &sched)?;
            let traj = run_scenario_mode(&cfg.guidance, cfg.sampler, cfg.master_seed, &rt, mode, seed)?;
            let out = if common.out.is_some() {
                cfg.output.clone()
            } else {
                Path::new("out").join(format!("{}_{}_{}.csv", spec.id, mode, seed))
            };
            emit_trajectory_csv(&traj, spec, &out)?;
            let z0 = traj.final_sample();
            let (ci, cf) = (&ConditionId::Initial, &ConditionId::Final);
            match wholistic_score(z0, ci, cf, &rt.embedder) {
                Ok(w) => println!("wholistic  {w:.6}"),
                Err(e) => println!("wholistic  n/a ({e})"),
            }
            let fw = framewise_score(z0, ci, cf, &rt.embedder)?;
            println!("framewise  {:.6} ({} static pairs)", fw.mean, fw.static_pairs);
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Bench { common, serial } => {
            let (cfg, scenarios) = common.resolve()?;
            let report = run_benchmark(&cfg, &scenarios, !serial)?;
            for a in &report.by_scenario {
                println!(
                    "{:<24} {:<22} n={:<4} err={:<3} wholistic={} framewise={}",
                    a.group,
                    a.mode,
                    a.n,
                    a.errors,
                    a.wholistic_mean.map_or("-".into(), |v| format!("{v:.4}")),
                    a.framewise_mean.map_or("-".into(), |v| format!("{v:.4}")),
                );
            }
            print_paths(&write_report(&report, &cfg.output, common.timestamp())?);
            Ok(!report.has_errors())
        }
        Command::Sweep {
            common,
            knob,
            values,
            serial,
        } => {
            let (cfg, scenarios) = common.resolve()?;
            let report = run_sweep(&cfg, &scenarios, knob, &values, !serial)?;
            for r in &report.rows {
                println!(
                    "{}={:<6} {:<24} {:<22} |last|={} var(last)={}",
                    knob.as_str(),
                    r.value,
                    r.aggregate.group,
                    r.aggregate.mode,
                    r.aggregate.last_frame_abs_mean.map_or("-".into(), |v| format!("{v:.4}")),
                    r.aggregate.last_frame_var.map_or("-".into(), |v| format!("{v:.3e}")),
                );
            }
            print_paths(&write_sweep(&report, &cfg.output, common.timestamp())?);
            Ok(!report.has_errors())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more cells failed; see the error column");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
