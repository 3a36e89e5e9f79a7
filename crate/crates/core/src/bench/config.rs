use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::toml_error;
use crate::diffusion::{BetaKind, ScheduleParams};
use crate::error::{Error, Result};
use crate::guidance::{GuidanceMode, GuidanceSpec};
use crate::sampler::SamplerKind;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Schedule section; betas default to the step-rescaled DDPM range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub kind: BetaKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            beta_start: None,
            beta_end: None,
            kind: BetaKind::Linear,
        }
    }
}

impl ScheduleConfig {
    pub fn params(&self) -> ScheduleParams {
        let base = ScheduleParams::for_steps(self.steps);
        ScheduleParams {
            steps: self.steps,
            beta_start: self.beta_start.unwrap_or(base.beta_start),
            beta_end: self.beta_end.unwrap_or(base.beta_end),
            kind: self.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Scenario file, relative to the config file when loaded from disk.
    #[serde(default)]
    pub scenarios: Option<PathBuf>,
    #[serde(default)]
    pub guidance: GuidanceSpec,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<GuidanceMode>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_modes() -> Vec<GuidanceMode> {
    vec![
        GuidanceMode::OursAnchored,
        GuidanceMode::PromptInterpolation,
        GuidanceMode::SinglePrompt,
    ]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenarios: None,
            guidance: GuidanceSpec::default(),
            sampler: SamplerKind::default(),
            schedule: ScheduleConfig::default(),
            seeds: default_seeds(),
            master_seed: 0,
            modes: default_modes(),
            output: default_output(),
        }
    }
}

#[derive(Serialize)]
struct HashedFields<'a> {
    guidance: &'a GuidanceSpec,
    sampler: &'a SamplerKind,
    schedule: ScheduleParams,
    seeds: &'a [u64],
    master_seed: u64,
    modes: &'a [GuidanceMode],
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| toml_error(text, origin, e))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 0,
                column: 0,
                message: format!(
                    "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                    cfg.schema_version
                ),
            });
        }
        Ok(cfg)
    }

    /// Loads a config; a relative `scenarios` path is resolved against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        if let (Some(s), Some(dir)) = (&cfg.scenarios, path.parent()) {
            if s.is_relative() {
                cfg.scenarios = Some(dir.join(s));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        self.sampler.validate()?;
        let params = self.schedule.params();
        params.build()?;
        if self.guidance.tau > params.steps {
            return Err(Error::Config(format!("tau {} exceeds T = {}", self.guidance.tau, params.steps)));
        }
        Ok(())
    }

    /// Short hash of everything that affects results; paths are excluded.
    pub fn config_hash(&self) -> String {
        let fields = HashedFields {
            guidance: &self.guidance,
            sampler: &self.sampler,
            schedule: self.schedule.params(),
            seeds: &self.seeds,
            master_seed: self.master_seed,
            modes: &self.modes,
        };
        let bytes = serde_json::to_vec(&fields).expect("config fields serialize");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

/// Knob varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKnob {
    AlphaMax,
    Omega,
    Tau,
}

impl SweepKnob {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AlphaMax => "alpha_max",
            Self::Omega => "omega",
            Self::Tau => "tau",
        }
    }

    pub fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut out = cfg.clone();
        match self {
            Self::AlphaMax => out.guidance.alpha_max = value,
            Self::Omega => out.guidance.omega = value,
            Self::Tau => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("tau must be a non-negative integer, got {value}")));
                }
                out.guidance.tau = value as usize;
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for SweepKnob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha_max" | "alpha" => Ok(Self::AlphaMax),
            "omega" => Ok(Self::Omega),
            "tau" => Ok(Self::Tau),
            other => Err(Error::Config(format!("unknown sweep knob `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let cfg = RunConfig::parse("schema_version = 1\n", "c").unwrap();
        assert_eq!(cfg.schedule.steps, 50);
        assert_eq!(cfg.guidance.tau, 5);
        assert_eq!(cfg.guidance.omega, 12.0);
        assert_eq!(cfg.guidance.alpha_max, 1.0);
        assert_eq!(cfg.sampler, SamplerKind::Ddim { eta: 0.0 });
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_sections() {
        let text = r#"
schema_version = 1
scenarios = "s.toml"
seeds = [1, 2]
modes = ["ours_anchored", "naive_additive"]
[guidance]
omega = 3.0
tau = 2
[sampler]
kind = "ddpm_ancestral"
[schedule]
steps = 20
kind = "scaled_linear"
"#;
        let cfg = RunConfig::parse(text, "c").unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.sampler, SamplerKind::DdpmAncestral);
        assert_eq!(cfg.schedule.params().steps, 20);
        assert_eq!(cfg.guidance.omega, 3.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_ignores_paths_but_not_knobs() {
        let a = RunConfig::default();
        let b = RunConfig {
            output: "elsewhere".into(),
            scenarios: Some("x.toml".into()),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        let c = SweepKnob::Omega.apply(&a, 3.0).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn invalid_configs() {
        assert!(RunConfig::parse("schema_version = 1\nbogus = 3\n", "c").is_err());
        let cfg = RunConfig { seeds: vec![], ..Default::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.guidance.tau = 60;
        assert!(cfg.validate().is_err());
        assert!(SweepKnob::Tau.apply(&RunConfig::default(), 1.5).is_err());
    }
}
