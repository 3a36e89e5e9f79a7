//! The denoiser contract and an exact analytic implementation.
//!
//! For Gaussian per-frame data `z0 ~ N(mu, diag(s2))` the noisy marginal at
//! step `t` is `N(sqrt(ab) * mu, ab * s2 + (1 - ab))`, so the ideal noise
//! prediction `-sigma_t * grad log p(z_t)` has a closed form. Mixtures of such
//! conditions are handled with a log-sum-exp over components.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diffusion::{LatentVideo, NoiseSchedule};
use crate::error::{Error, Result};

/// Tolerance on `sum(weights) == 1` for mixtures.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    Initial,
    Final,
    Neutral,
    Null,
    Custom(String),
}

impl ConditionId {
    /// Parses `initial`, `final`, `neutral`, `null`; anything else is custom.
    pub fn parse(name: &str) -> Self {
        match name {
            "initial" => Self::Initial,
            "final" => Self::Final,
            "neutral" => Self::Neutral,
            "null" => Self::Null,
            other => Self::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Initial => f.write_str("initial"),
            Self::Final => f.write_str("final"),
            Self::Neutral => f.write_str("neutral"),
            Self::Null => f.write_str("null"),
            Self::Custom(name) => f.write_str(name),
        }
    }
}

/// The conditions one guided run refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSet {
    pub initial: ConditionId,
    pub final_: ConditionId,
    pub neutral: ConditionId,
    /// Condition used by the single-prompt baseline.
    pub single: ConditionId,
}

impl Default for ConditionSet {
    fn default() -> Self {
        Self {
            initial: ConditionId::Initial,
            final_: ConditionId::Final,
            neutral: ConditionId::Neutral,
            single: ConditionId::Neutral,
        }
    }
}

/// Diagonal Gaussian over one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCondition {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianCondition {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::DimMismatch {
                latent: mean.len(),
                condition: var.len(),
            });
        }
        if let Some((index, &value)) = var.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveVariance { index, value });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("condition mean must be finite".into()));
        }
        Ok(Self { mean, var })
    }

    /// Same mean and variance in every coordinate.
    pub fn isotropic(dim: usize, mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean; dim], vec![var; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Log density of one noisy frame under this condition at step `t`.
    pub fn noisy_log_density(&self, frame: &[f64], t: usize, sched: &NoiseSchedule) -> f64 {
        let ab = sched.alpha_bar(t);
        let sab = ab.sqrt();
        frame
            .iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(&z, (&m, &s2))| {
                let v = ab * s2 + (1.0 - ab);
                let d = z - sab * m;
                -0.5 * (d * d / v + (2.0 * std::f64::consts::PI * v).ln())
            })
            .sum()
    }
}

/// Anything that predicts noise for a noisy video under a condition.
pub trait Denoiser: Send + Sync {
    fn evaluate(&self, zt: &LatentVideo, t: usize, c: &ConditionId) -> Result<LatentVideo>;
}

fn check_step(t: usize, sched: &NoiseSchedule) -> Result<()> {
    if t == 0 || t > sched.steps() {
        return Err(Error::StepOutOfRange { t, steps: sched.steps() });
    }
    Ok(())
}

fn check_dim(zt: &LatentVideo, c: &GaussianCondition) -> Result<()> {
    if zt.dim() != c.dim() {
        return Err(Error::DimMismatch {
            latent: zt.dim(),
            condition: c.dim(),
        });
    }
    Ok(())
}

/// Exact `eps = sigma_t * (z - sqrt(ab) mu) / (ab s2 + 1 - ab)` for every frame.
pub fn analytic_epsilon(
    zt: &LatentVideo,
    t: usize,
    c: &GaussianCondition,
    sched: &NoiseSchedule,
) -> Result<LatentVideo> {
    check_step(t, sched)?;
    check_dim(zt, c)?;
    let ab = sched.alpha_bar(t);
    let sab = ab.sqrt();
    let sigma = sched.sigma(t);
    let mut out = zt.clone();
    for j in 0..zt.frames() {
        for (i, e) in out.frame_mut(j).iter_mut().enumerate() {
            let v = ab * c.var[i] + (1.0 - ab);
            *e = sigma * (*e - sab * c.mean[i]) / v;
        }
    }
    Ok(out)
}

/// Exact noise prediction for a weighted mixture of Gaussian conditions.
/// Responsibilities are computed per frame over the whole frame vector.
pub fn null_condition_epsilon(
    zt: &LatentVideo,
    t: usize,
    mixture: &[(f64, GaussianCondition)],
    sched: &NoiseSchedule,
) -> Result<LatentVideo> {
    check_step(t, sched)?;
    if mixture.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let sum: f64 = mixture.iter().map(|(w, _)| w).sum();
    if mixture.iter().any(|(w, _)| !(*w > 0.0)) || (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightsNotNormalized { sum });
    }
    for (_, c) in mixture {
        check_dim(zt, c)?;
    }
    if let [(_, only)] = mixture {
        return analytic_epsilon(zt, t, only, sched);
    }

    let ab = sched.alpha_bar(t);
    let sab = ab.sqrt();
    let sigma = sched.sigma(t);
    let mut out = zt.clone();
    let mut logits = vec![0.0; mixture.len()];
    for j in 0..zt.frames() {
        let frame = zt.frame(j);
        for (k, (w, c)) in mixture.iter().enumerate() {
            logits[k] = w.ln() + c.noisy_log_density(frame, t, sched);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let row = out.frame_mut(j);
        for (i, e) in row.iter_mut().enumerate() {
            let z = frame[i];
            // grad log p = sum_k r_k * (-(z - sqrt(ab) mu_k) / v_k)
            let grad: f64 = mixture
                .iter()
                .zip(&logits)
                .map(|((_, c), l)| {
                    let r = (l - max).exp() / norm;
                    let v = ab * c.var[i] + (1.0 - ab);
                    -r * (z - sab * c.mean[i]) / v
                })
                .sum();
            *e = -sigma * grad;
        }
    }
    Ok(out)
}

/// Registry of Gaussian conditions plus the mixture used for the null prompt.
#[derive(Debug, Clone)]
pub struct AnalyticDenoiser {
    schedule: NoiseSchedule,
    dim: usize,
    conditions: BTreeMap<ConditionId, GaussianCondition>,
    null_weights: Option<Vec<(f64, ConditionId)>>,
}

impl AnalyticDenoiser {
    pub fn new(schedule: NoiseSchedule, dim: usize) -> Self {
        Self {
            schedule,
            dim,
            conditions: BTreeMap::new(),
            null_weights: None,
        }
    }

    pub fn register(&mut self, id: ConditionId, c: GaussianCondition) -> Result<&mut Self> {
        if id == ConditionId::Null {
            return Err(Error::Config("`null` is reserved for the unconditional mixture".into()));
        }
        if c.dim() != self.dim {
            return Err(Error::DimMismatch {
                latent: self.dim,
                condition: c.dim(),
            });
        }
        self.conditions.insert(id, c);
        Ok(self)
    }

    pub fn with_condition(mut self, id: ConditionId, c: GaussianCondition) -> Result<Self> {
        self.register(id, c)?;
        Ok(self)
    }

    /// Overrides the null prompt with an explicit weighting of registered
    /// conditions. Without an override the null prompt is the equal-weight
    /// mixture of everything registered.
    pub fn set_null_weights(&mut self, weights: Vec<(f64, ConditionId)>) -> Result<()> {
        for (_, id) in &weights {
            self.condition(id)?;
        }
        self.null_weights = Some(weights);
        Ok(())
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn condition(&self, id: &ConditionId) -> Result<&GaussianCondition> {
        self.conditions
            .get(id)
            .ok_or_else(|| Error::Config(format!("condition `{id}` is not registered")))
    }

    pub fn has_condition(&self, id: &ConditionId) -> bool {
        *id == ConditionId::Null || self.conditions.contains_key(id)
    }

    pub fn null_mixture(&self) -> Result<Vec<(f64, GaussianCondition)>> {
        match &self.null_weights {
            Some(ws) => ws
                .iter()
                .map(|(w, id)| Ok((*w, self.condition(id)?.clone())))
                .collect(),
            None => {
                let n = self.conditions.len() as f64;
                Ok(self.conditions.values().map(|c| (1.0 / n, c.clone())).collect())
            }
        }
    }
}

impl Denoiser for AnalyticDenoiser {
    fn evaluate(&self, zt: &LatentVideo, t: usize, c: &ConditionId) -> Result<LatentVideo> {
        let out = match c {
            ConditionId::Null => null_condition_epsilon(zt, t, &self.null_mixture()?, &self.schedule)?,
            id => analytic_epsilon(zt, t, self.condition(id)?, &self.schedule)?,
        };
        if !out.is_finite() {
            return Err(Error::NonFinite("analytic denoiser"));
        }
        Ok(out)
    }
}
