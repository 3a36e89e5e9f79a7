use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoiser::{AnalyticDenoiser, ConditionId, ConditionSet, GaussianCondition};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::guidance::GuidanceMode;
use crate::metrics::ToyLinearEmbedder;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Age,
    Beard,
    Makeup,
    Hair,
    Color,
    Material,
    Light,
    Weather,
    Custom,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Age => "age",
            Self::Beard => "beard",
            Self::Makeup => "makeup",
            Self::Hair => "hair",
            Self::Color => "color",
            Self::Material => "material",
            Self::Light => "light",
            Self::Weather => "weather",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scalar broadcast over every coordinate, or one value per coordinate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Values {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Values {
    fn expand(&self, dim: usize) -> Option<Vec<f64>> {
        match self {
            Values::Scalar(v) => Some(vec![*v; dim]),
            Values::Vector(v) if v.len() == dim => Some(v.clone()),
            Values::Vector(_) => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    mean: Values,
    var: Values,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: String,
    category: Category,
    frames: usize,
    dim: usize,
    #[serde(default)]
    notes: String,
    initial: RawCondition,
    #[serde(rename = "final")]
    final_: RawCondition,
    neutral: Option<RawCondition>,
    #[serde(default)]
    custom: BTreeMap<String, RawCondition>,
    single: Option<String>,
    null_weights: Option<BTreeMap<String, f64>>,
    projection: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    #[serde(default)]
    scenario: Vec<RawScenario>,
}

/// One validated benchmark scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub category: Category,
    pub frames: usize,
    pub dim: usize,
    pub notes: String,
    pub conditions: BTreeMap<ConditionId, GaussianCondition>,
    pub single: ConditionId,
    pub null_weights: Option<Vec<(f64, ConditionId)>>,
    pub projection: Option<Vec<Vec<f64>>>,
}

impl ScenarioSpec {
    pub fn condition_set(&self) -> ConditionSet {
        ConditionSet {
            single: self.single.clone(),
            ..ConditionSet::default()
        }
    }

    /// Conditions a mode consults, beyond the always-present initial and final.
    pub fn check_mode(&self, mode: GuidanceMode) -> Result<()> {
        let needed = match mode {
            GuidanceMode::OursAnchored | GuidanceMode::NaiveAdditive => Some(ConditionId::Neutral),
            GuidanceMode::SinglePrompt => Some(self.single.clone()),
            GuidanceMode::PromptInterpolation => None,
        };
        match needed {
            Some(id) if !self.conditions.contains_key(&id) => Err(Error::Config(format!(
                "mode {mode} needs condition `{id}`, which scenario `{}` does not define",
                self.id
            ))),
            _ => Ok(()),
        }
    }

    pub fn denoiser(&self, sched: &NoiseSchedule) -> Result<AnalyticDenoiser> {
        let mut den = AnalyticDenoiser::new(sched.clone(), self.dim);
        for (id, c) in &self.conditions {
            den.register(id.clone(), c.clone())?;
        }
        if let Some(w) = &self.null_weights {
            den.set_null_weights(w.clone())?;
        }
        Ok(den)
    }

    pub fn embedder(&self) -> Result<ToyLinearEmbedder> {
        let mut emb = match &self.projection {
            Some(p) => ToyLinearEmbedder::new(p.clone())?,
            None => ToyLinearEmbedder::identity(self.dim),
        };
        for (id, c) in &self.conditions {
            emb.register_condition(id.clone(), c.mean())?;
        }
        Ok(emb)
    }
}

fn byte_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

pub(crate) fn toml_error(text: &str, path: &str, err: toml::de::Error) -> Error {
    let (line, column) = err.span().map_or((0, 0), |s| byte_to_line_col(text, s.start));
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: err.message().to_string(),
    }
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scenarios(&text, &path.display().to_string())
}

/// Parses and validates a scenario file; `origin` labels parse errors.
pub fn parse_scenarios(text: &str, origin: &str) -> Result<Vec<ScenarioSpec>> {
    let raw: RawFile = toml::from_str(text).map_err(|e| toml_error(text, origin, e))?;
    if raw.schema_version != SCENARIO_SCHEMA_VERSION {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 0,
            column: 0,
            message: format!(
                "unsupported schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                raw.schema_version
            ),
        });
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.scenario.len());
    for s in raw.scenario {
        if !seen.insert(s.id.clone()) {
            return Err(Error::Validation {
                scenario: s.id,
                message: "duplicate scenario id".into(),
            });
        }
        out.push(validate(s)?);
    }
    Ok(out)
}

fn validate(raw: RawScenario) -> Result<ScenarioSpec> {
    let id = raw.id.clone();
    let invalid = |message: String| Error::Validation {
        scenario: id.clone(),
        message,
    };
    if id.is_empty() {
        return Err(invalid("id must not be empty".into()));
    }
    if raw.frames < 2 {
        return Err(invalid(format!("frames must be >= 2, got {}", raw.frames)));
    }
    if raw.dim == 0 {
        return Err(invalid("dim must be >= 1".into()));
    }

    let build = |name: &str, c: &RawCondition| -> Result<GaussianCondition> {
        let mean = c
            .mean
            .expand(raw.dim)
            .ok_or_else(|| invalid(format!("condition `{name}`: mean length must equal dim {}", raw.dim)))?;
        let var = c
            .var
            .expand(raw.dim)
            .ok_or_else(|| invalid(format!("condition `{name}`: var length must equal dim {}", raw.dim)))?;
        GaussianCondition::new(mean, var).map_err(|e| invalid(format!("condition `{name}`: {e}")))
    };

    let mut conditions = BTreeMap::new();
    conditions.insert(ConditionId::Initial, build("initial", &raw.initial)?);
    conditions.insert(ConditionId::Final, build("final", &raw.final_)?);
    if let Some(n) = &raw.neutral {
        conditions.insert(ConditionId::Neutral, build("neutral", n)?);
    }
    for (name, c) in &raw.custom {
        let cid = ConditionId::parse(name);
        if !matches!(cid, ConditionId::Custom(_)) {
            return Err(invalid(format!("custom condition may not be named `{name}`")));
        }
        conditions.insert(cid, build(name, c)?);
    }
    if conditions[&ConditionId::Initial] == conditions[&ConditionId::Final] {
        return Err(invalid("initial and final conditions are identical".into()));
    }

    let single = raw.single.as_deref().map_or(ConditionId::Neutral, ConditionId::parse);
    if raw.single.is_some() && !conditions.contains_key(&single) {
        return Err(invalid(format!("single-prompt condition `{single}` is not defined")));
    }

    let null_weights = match &raw.null_weights {
        None => None,
        Some(ws) => {
            let mut list = Vec::with_capacity(ws.len());
            for (name, &w) in ws {
                let cid = ConditionId::parse(name);
                if !conditions.contains_key(&cid) {
                    return Err(invalid(format!("null_weights names unknown condition `{name}`")));
                }
                list.push((w, cid));
            }
            let sum: f64 = list.iter().map(|(w, _)| w).sum();
            if list.is_empty()
                || list.iter().any(|(w, _)| !(*w > 0.0))
                || (sum - 1.0).abs() > crate::denoiser::WEIGHT_SUM_TOL
            {
                return Err(invalid(format!("null_weights must be positive and sum to 1 (sum {sum})")));
            }
            Some(list)
        }
    };

    if let Some(p) = &raw.projection {
        if p.iter().any(|r| r.len() != raw.dim) {
            return Err(invalid(format!("projection rows must have length dim {}", raw.dim)));
        }
        ToyLinearEmbedder::new(p.clone()).map_err(|e| invalid(e.to_string()))?;
    }

    Ok(ScenarioSpec {
        id: raw.id,
        category: raw.category,
        frames: raw.frames,
        dim: raw.dim,
        notes: raw.notes,
        conditions,
        single,
        null_weights,
        projection: raw.projection,
    })
}
