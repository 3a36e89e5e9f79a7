//! Reverse-diffusion loop.
//!
//! Transition-guided modes run `tau` warmup steps of neutral-prompt CFG from
//! `t = T` downward, then switch to the refined score built from the
//! transitional direction, still combined with CFG against the null prompt.
//! Baseline modes use their own score from the first step.
//!
//! Cost per guided step in anchored mode is four denoiser calls (initial,
//! final, neutral, null); two of them are skipped when the direction is frozen.

use serde::{Deserialize, Serialize};

use crate::denoiser::{ConditionId, ConditionSet, Denoiser};
use crate::diffusion::{LatentVideo, NoiseRng, NoiseSchedule};
use crate::error::{Error, Result};
use crate::guidance::{
    cfg_epsilon, interpolate_scores, refined_epsilon_anchored, refined_epsilon_naive,
    transitional_direction_with, GuidanceMode, GuidanceSpec, TransitionalDirection,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerKind {
    /// DDIM; `eta = 0` is deterministic after the initial draw.
    Ddim { eta: f64 },
    DdpmAncestral,
}

impl Default for SamplerKind {
    fn default() -> Self {
        SamplerKind::Ddim { eta: 0.0 }
    }
}

impl SamplerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplerKind::Ddim { eta } if !(0.0..=1.0).contains(&eta) => {
                Err(Error::Config(format!("ddim eta must lie in [0, 1], got {eta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Every latent along one reverse chain; `zs[t]` is the state at step `t`,
/// so `zs[0]` is the clean sample and `zs[T]` the initial noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub zs: Vec<LatentVideo>,
    pub mode: GuidanceMode,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_sample(&self) -> &LatentVideo {
        &self.zs[0]
    }

    pub fn steps(&self) -> usize {
        self.zs.len() - 1
    }

    /// Values of one frame at every state, ordered `t = T..=0`.
    pub fn frame_path(&self, frame: usize) -> Vec<Vec<f64>> {
        self.zs.iter().rev().map(|z| z.frame(frame).to_vec()).collect()
    }
}

/// One reverse update from `t` to `t - 1` given the guided noise estimate.
pub fn step(
    zt: &LatentVideo,
    t: usize,
    eps_hat: &LatentVideo,
    sched: &NoiseSchedule,
    kind: SamplerKind,
    rng: &mut NoiseRng,
) -> Result<LatentVideo> {
    if t == 0 || t > sched.steps() {
        return Err(Error::StepOutOfRange { t, steps: sched.steps() });
    }
    zt.ensure_same_shape(eps_hat)?;
    let ab = sched.alpha_bar(t);
    let ab_prev = sched.alpha_bar(t - 1);
    let sigma = sched.sigma(t);
    let sab = ab.sqrt();
    let sab_prev = ab_prev.sqrt();

    let next = match kind {
        SamplerKind::Ddim { eta } => {
            let noise_std = eta * ((1.0 - ab_prev) / (1.0 - ab)).sqrt() * (1.0 - ab / ab_prev).sqrt();
            let dir_coef = (1.0 - ab_prev - noise_std * noise_std).max(0.0).sqrt();
            let mut z = zt.zip_map(eps_hat, |z, e| {
                let x0 = (z - sigma * e) / sab;
                sab_prev * x0 + dir_coef * e
            })?;
            if noise_std > 0.0 {
                for v in z.data_mut() {
                    *v += noise_std * rng.standard_normal();
                }
            }
            z
        }
        SamplerKind::DdpmAncestral => {
            let beta = sched.beta(t);
            let c0 = sab_prev * beta / (1.0 - ab);
            let ct = sched.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
            let var = beta * (1.0 - ab_prev) / (1.0 - ab);
            let mut z = zt.zip_map(eps_hat, |z, e| {
                let x0 = (z - sigma * e) / sab;
                c0 * x0 + ct * z
            })?;
            if t > 1 {
                let sd = var.sqrt();
                for v in z.data_mut() {
                    *v += sd * rng.standard_normal();
                }
            }
            z
        }
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("sampler step"));
    }
    Ok(next)
}

/// Guided noise estimate at step `t`. `frozen` caches the direction across
/// steps when `spec.freeze_direction` is set.
pub fn guided_epsilon(
    zt: &LatentVideo,
    t: usize,
    step_index: usize,
    spec: &GuidanceSpec,
    conds: &ConditionSet,
    den: &dyn Denoiser,
    frozen: &mut Option<TransitionalDirection>,
) -> Result<LatentVideo> {
    let eps_hat = if spec.mode.is_transition_guided() && step_index < spec.tau {
        den.evaluate(zt, t, &conds.neutral)?
    } else {
        match spec.mode {
            GuidanceMode::OursAnchored | GuidanceMode::NaiveAdditive => {
                let dir = match frozen {
                    Some(d) if spec.freeze_direction => d.clone(),
                    _ => {
                        let d = transitional_direction_with(
                            zt,
                            t,
                            &conds.initial,
                            &conds.final_,
                            den,
                            spec.normalization,
                        )?;
                        if spec.freeze_direction {
                            *frozen = Some(d.clone());
                        }
                        d
                    }
                };
                if spec.mode == GuidanceMode::OursAnchored {
                    let eps_n = den.evaluate(zt, t, &conds.neutral)?;
                    refined_epsilon_anchored(&eps_n, &dir, spec)?
                } else {
                    let eps_i = den.evaluate(zt, t, &conds.initial)?;
                    refined_epsilon_naive(&eps_i, &dir, spec)?
                }
            }
            GuidanceMode::SinglePrompt => den.evaluate(zt, t, &conds.single)?,
            GuidanceMode::PromptInterpolation => {
                let eps_i = den.evaluate(zt, t, &conds.initial)?;
                let eps_f = den.evaluate(zt, t, &conds.final_)?;
                interpolate_scores(&eps_i, &eps_f)?
            }
        }
    };
    let eps_null = den.evaluate(zt, t, &ConditionId::Null)?;
    cfg_epsilon(&eps_hat, &eps_null, spec.omega)
}

/// Runs the full chain from fresh noise drawn from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn sample_video(
    spec: &GuidanceSpec,
    kind: SamplerKind,
    conds: &ConditionSet,
    frames: usize,
    dim: usize,
    den: &dyn Denoiser,
    sched: &NoiseSchedule,
    rng: &mut NoiseRng,
) -> Result<Trajectory> {
    let z_init = rng.normal_video(frames, dim)?;
    sample_from(spec, kind, conds, z_init, den, sched, rng)
}

/// Runs the full chain from a given initial latent.
pub fn sample_from(
    spec: &GuidanceSpec,
    kind: SamplerKind,
    conds: &ConditionSet,
    z_init: LatentVideo,
    den: &dyn Denoiser,
    sched: &NoiseSchedule,
    rng: &mut NoiseRng,
) -> Result<Trajectory> {
    let steps = sched.steps();
    spec.validate(z_init.frames(), steps)?;
    kind.validate()?;
    if spec.mode != GuidanceMode::SinglePrompt && conds.initial == conds.final_ {
        return Err(Error::Config("initial and final conditions must differ".into()));
    }

    let mut zs = vec![z_init];
    let mut frozen = None;
    for (step_index, t) in (1..=steps).rev().enumerate() {
        let zt = zs.last().expect("trajectory starts non-empty");
        let eps = guided_epsilon(zt, t, step_index, spec, conds, den, &mut frozen)?;
        let next = step(zt, t, &eps, sched, kind, rng)?;
        zs.push(next);
    }
    zs.reverse();
    Ok(Trajectory {
        zs,
        mode: spec.mode,
        seed: rng.seed(),
    })
}
