use serde::{Deserialize, Serialize};

use super::LatentVideo;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    Linear,
    ScaledLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub kind: BetaKind,
}

impl ScheduleParams {
    /// The 1000-step DDPM range `[1e-4, 2e-2]` rescaled to `steps` steps, so
    /// short chains still end close to pure noise. Betas are capped at 0.999.
    pub fn for_steps(steps: usize) -> Self {
        let scale = 1000.0 / steps.max(1) as f64;
        Self {
            steps,
            beta_start: (1e-4 * scale).min(0.999),
            beta_end: (2e-2 * scale).min(0.999),
            kind: BetaKind::Linear,
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        build_schedule(self.steps, self.beta_start, self.beta_end, self.kind)
    }
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self::for_steps(50)
    }
}

/// Per-step diffusion coefficients. Internally index 0 holds the clean state
/// (`alpha_bar = 1`, `sigma = 0`) and indices `1..=T` the noisy steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

pub fn build_schedule(
    steps: usize,
    beta_start: f64,
    beta_end: f64,
    kind: BetaKind,
) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidScheduleParams(format!("T must be >= 2, got {steps}")));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidScheduleParams(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let ramp = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (steps - 1) as f64;
    let betas: Vec<f64> = (0..steps)
        .map(|i| match kind {
            BetaKind::Linear => ramp(beta_start, beta_end, i),
            BetaKind::ScaledLinear => ramp(beta_start.sqrt(), beta_end.sqrt(), i).powi(2),
        })
        .collect();
    NoiseSchedule::from_betas(&betas)
}

impl NoiseSchedule {
    /// Builds a schedule from explicit `beta[1..=T]`.
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidScheduleParams("need at least 2 betas".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidScheduleParams(format!("beta {b} outside (0, 1)")));
        }
        let mut beta = Vec::with_capacity(betas.len() + 1);
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        beta.push(0.0);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for &b in betas {
            acc *= 1.0 - b;
            beta.push(b);
            alpha_bar.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidScheduleParams("alpha_bar underflowed to 0".into()));
        }
        Ok(Self { beta, alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    fn check(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::StepOutOfRange { t, steps: self.steps() });
        }
        Ok(())
    }

    /// `beta[t]`; 0 at `t = 0`. Panics if `t > T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Noise level `sqrt(1 - alpha_bar[t])`.
    pub fn sigma(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]).sqrt()
    }

    /// `alpha_bar[1..=T]`.
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar[1..]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta[1..]
    }
}

/// Forward corruption `sqrt(alpha_bar[t]) * z0 + sqrt(1 - alpha_bar[t]) * eps`.
/// `t = 0` returns `z0` unchanged.
pub fn q_sample(
    z0: &LatentVideo,
    t: usize,
    eps: &LatentVideo,
    sched: &NoiseSchedule,
) -> Result<LatentVideo> {
    sched.check(t)?;
    let a = sched.alpha_bar(t).sqrt();
    let s = sched.sigma(t);
    z0.zip_map(eps, |x, e| a * x + s * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_params() {
        for (t, lo, hi) in [(1, 0.1, 0.2), (10, 0.0, 0.2), (10, 0.3, 0.2), (10, 0.1, 1.0)] {
            assert!(matches!(
                build_schedule(t, lo, hi, BetaKind::Linear),
                Err(Error::InvalidScheduleParams(_))
            ));
        }
    }

    #[test]
    fn two_step_constant_beta() {
        let s = build_schedule(2, 0.5, 0.5, BetaKind::Linear).unwrap();
        assert_eq!(s.alpha_bars(), &[0.5, 0.25]);
    }

    #[test]
    fn default_fifty_step_schedule_is_monotone() {
        let s = ScheduleParams::default().build().unwrap();
        assert_eq!(s.steps(), 50);
        assert!(s.alpha_bar(50) < s.alpha_bar(1));
        assert!(s.alpha_bar(50) < 1e-3);
        for t in 1..=50 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.sigma(t) > s.sigma(t - 1));
            assert!((s.alpha_bar(t) - s.alpha_bar(t - 1) * s.alpha(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_linear_endpoints() {
        let s = build_schedule(10, 1e-3, 1e-2, BetaKind::ScaledLinear).unwrap();
        assert!((s.beta(1) - 1e-3).abs() < 1e-15);
        assert!((s.beta(10) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn q_sample_quarter_alpha_bar() {
        let s = NoiseSchedule::from_betas(&[0.75, 0.5]).unwrap();
        assert_eq!(s.alpha_bar(1), 0.25);
        let z0 = LatentVideo::filled(3, 2, 2.0).unwrap();
        let eps = LatentVideo::zeros(3, 2).unwrap();
        let out = q_sample(&z0, 1, &eps, &s).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn q_sample_clean_limit_and_errors() {
        let s = ScheduleParams::default().build().unwrap();
        let z0 = LatentVideo::from_vec(1, 3, vec![0.3, -1.5, 2.0]).unwrap();
        let eps = LatentVideo::filled(1, 3, 9.0).unwrap();
        assert_eq!(q_sample(&z0, 0, &eps, &s).unwrap(), z0);
        assert!(matches!(q_sample(&z0, 51, &eps, &s), Err(Error::StepOutOfRange { .. })));
        let bad = LatentVideo::zeros(2, 3).unwrap();
        assert!(matches!(q_sample(&z0, 3, &bad, &s), Err(Error::ShapeMismatch { .. })));
    }
}
