//! Score arithmetic in noise-prediction space: classifier-free guidance, the
//! unit transitional direction between two conditions, the per-frame scale
//! ramp, and the two frame-wise refinements (additive from the initial
//! condition, and anchored on the neutral condition at the middle frame).

use serde::{Deserialize, Serialize};

use crate::denoiser::{ConditionId, Denoiser};
use crate::diffusion::LatentVideo;
use crate::error::{Error, Result};

/// Directions with a smaller pre-normalization norm are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    /// Neutral-anchored frame-wise transition guidance.
    OursAnchored,
    /// Ramp added to the initial condition's score, no anchor.
    NaiveAdditive,
    /// Plain classifier-free guidance on one condition.
    SinglePrompt,
    /// Per-frame convex blend of the initial and final scores.
    PromptInterpolation,
}

impl GuidanceMode {
    pub const ALL: [GuidanceMode; 4] = [
        GuidanceMode::OursAnchored,
        GuidanceMode::NaiveAdditive,
        GuidanceMode::SinglePrompt,
        GuidanceMode::PromptInterpolation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OursAnchored => "ours_anchored",
            Self::NaiveAdditive => "naive_additive",
            Self::SinglePrompt => "single_prompt",
            Self::PromptInterpolation => "prompt_interpolation",
        }
    }

    /// Whether the mode runs the neutral warmup and the transitional direction.
    pub fn is_transition_guided(self) -> bool {
        matches!(self, Self::OursAnchored | Self::NaiveAdditive)
    }
}

impl std::fmt::Display for GuidanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GuidanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// How the difference of the two conditional scores is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionNorm {
    /// One L2 norm over the whole video.
    #[default]
    Global,
    /// Each frame scaled to unit norm separately (ablation).
    PerFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceSpec {
    pub omega: f64,
    /// Number of neutral-prompt warmup steps counted down from `t = T`.
    pub tau: usize,
    pub alpha_max: f64,
    /// Anchor frame; `None` means `frames / 2`.
    pub middle_frame: Option<usize>,
    pub mode: GuidanceMode,
    pub normalization: DirectionNorm,
    /// Reuse the direction from the first guided step instead of recomputing.
    pub freeze_direction: bool,
}

impl Default for GuidanceSpec {
    fn default() -> Self {
        Self {
            omega: 12.0,
            tau: 5,
            alpha_max: 1.0,
            middle_frame: None,
            mode: GuidanceMode::OursAnchored,
            normalization: DirectionNorm::Global,
            freeze_direction: false,
        }
    }
}

impl GuidanceSpec {
    pub fn middle(&self, frames: usize) -> usize {
        self.middle_frame.unwrap_or(frames / 2)
    }

    pub fn validate(&self, frames: usize, steps: usize) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega must be finite and >= 0, got {}", self.omega)));
        }
        if !(self.alpha_max >= 0.0 && self.alpha_max.is_finite()) {
            return Err(Error::Config(format!(
                "alpha_max must be finite and >= 0, got {}",
                self.alpha_max
            )));
        }
        if self.tau > steps {
            return Err(Error::Config(format!("tau {} exceeds T = {steps}", self.tau)));
        }
        let m = self.middle(frames);
        if m >= frames {
            return Err(Error::Config(format!("middle frame {m} outside 0..{frames}")));
        }
        Ok(())
    }
}

/// `(1 + omega) * eps_cond - omega * eps_uncond`, elementwise, evaluated as
/// `eps_cond + omega * (eps_cond - eps_uncond)` so that `omega = 0` and
/// `eps_cond == eps_uncond` both return `eps_cond` bit-exactly.
pub fn cfg_epsilon(eps_cond: &LatentVideo, eps_uncond: &LatentVideo, omega: f64) -> Result<LatentVideo> {
    eps_cond.zip_map(eps_uncond, |c, u| c + omega * (c - u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionalDirection {
    data: LatentVideo,
    raw_norm: f64,
}

impl TransitionalDirection {
    pub fn data(&self) -> &LatentVideo {
        &self.data
    }

    /// Global L2 norm of the score difference before normalization.
    pub fn raw_norm(&self) -> f64 {
        self.raw_norm
    }

    pub fn negated(&self) -> Self {
        Self {
            data: self.data.map(|v| -v),
            raw_norm: self.raw_norm,
        }
    }
}

/// Normalizes `eps_final - eps_initial`.
pub fn direction_from_scores(
    eps_initial: &LatentVideo,
    eps_final: &LatentVideo,
    norm: DirectionNorm,
) -> Result<TransitionalDirection> {
    let mut delta = eps_final.zip_map(eps_initial, |f, i| f - i)?;
    let raw_norm = delta.norm();
    if !(raw_norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateDirection { norm: raw_norm });
    }
    match norm {
        DirectionNorm::Global => delta.data_mut().iter_mut().for_each(|v| *v /= raw_norm),
        DirectionNorm::PerFrame => {
            for j in 0..delta.frames() {
                let row = delta.frame_mut(j);
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(n >= DEGENERATE_NORM) {
                    return Err(Error::DegenerateDirection { norm: n });
                }
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
    Ok(TransitionalDirection { data: delta, raw_norm })
}

/// Unit direction in noise space that moves `zt` from `c_initial` towards `c_final`.
pub fn transitional_direction(
    zt: &LatentVideo,
    t: usize,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    den: &dyn Denoiser,
) -> Result<TransitionalDirection> {
    transitional_direction_with(zt, t, c_initial, c_final, den, DirectionNorm::Global)
}

pub fn transitional_direction_with(
    zt: &LatentVideo,
    t: usize,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    den: &dyn Denoiser,
    norm: DirectionNorm,
) -> Result<TransitionalDirection> {
    if c_initial == c_final {
        return Err(Error::Config("initial and final conditions must differ".into()));
    }
    let eps_i = den.evaluate(zt, t, c_initial)?;
    let eps_f = den.evaluate(zt, t, c_final)?;
    direction_from_scores(&eps_i, &eps_f, norm)
}

/// Which side of the anchor frame a frame lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSide {
    Before,
    After,
}

/// Transition scale at `offset` frames from the anchor. Each side ramps
/// linearly from 0 at the anchor to `alpha_max` at its end frame, so with
/// an even frame count both end frames still reach the full scale.
pub fn alpha_at(offset: usize, side: FrameSide, spec: &GuidanceSpec, frames: usize) -> f64 {
    let m = spec.middle(frames);
    let span = match side {
        FrameSide::Before => m,
        FrameSide::After => frames.saturating_sub(m + 1),
    };
    if span == 0 || offset == 0 {
        return 0.0;
    }
    spec.alpha_max * offset.min(span) as f64 / span as f64
}

/// Signed per-frame multipliers of the direction in anchored mode:
/// `-alpha` before the anchor, 0 at it, `+alpha` after.
pub fn anchored_coefficients(spec: &GuidanceSpec, frames: usize) -> Vec<f64> {
    let m = spec.middle(frames);
    (0..frames)
        .map(|j| match j.cmp(&m) {
            std::cmp::Ordering::Less => -alpha_at(m - j, FrameSide::Before, spec, frames),
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => alpha_at(j - m, FrameSide::After, spec, frames),
        })
        .collect()
}

/// Per-frame multipliers in naive mode: `alpha_max * j / (F - 1)`.
pub fn naive_coefficients(alpha_max: f64, frames: usize) -> Vec<f64> {
    if frames < 2 {
        return vec![0.0; frames];
    }
    (0..frames)
        .map(|j| alpha_max * j as f64 / (frames - 1) as f64)
        .collect()
}

/// `base[j] + scales[j] * dir[j]` per frame. Frames with a zero scale are
/// copied untouched.
pub fn apply_frame_scales(base: &LatentVideo, dir: &LatentVideo, scales: &[f64]) -> Result<LatentVideo> {
    base.ensure_same_shape(dir)?;
    if scales.len() != base.frames() {
        return Err(Error::ShapeMismatch {
            expected: base.shape(),
            got: (scales.len(), base.dim()),
        });
    }
    let mut out = base.clone();
    for (j, &s) in scales.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (o, d) in out.frame_mut(j).iter_mut().zip(dir.frame(j)) {
            *o += s * d;
        }
    }
    Ok(out)
}

pub fn refined_epsilon_naive(
    eps_initial: &LatentVideo,
    dir: &TransitionalDirection,
    spec: &GuidanceSpec,
) -> Result<LatentVideo> {
    let scales = naive_coefficients(spec.alpha_max, eps_initial.frames());
    apply_frame_scales(eps_initial, &dir.data, &scales)
}

pub fn refined_epsilon_anchored(
    eps_neutral: &LatentVideo,
    dir: &TransitionalDirection,
    spec: &GuidanceSpec,
) -> Result<LatentVideo> {
    let frames = eps_neutral.frames();
    if spec.middle(frames) >= frames {
        return Err(Error::Config(format!(
            "middle frame {} outside 0..{frames}",
            spec.middle(frames)
        )));
    }
    let scales = anchored_coefficients(spec, frames);
    apply_frame_scales(eps_neutral, &dir.data, &scales)
}

/// `(1 - l_j) * eps_initial + l_j * eps_final` with `l_j = j / (F - 1)`.
pub fn interpolate_scores(eps_initial: &LatentVideo, eps_final: &LatentVideo) -> Result<LatentVideo> {
    eps_initial.ensure_same_shape(eps_final)?;
    let frames = eps_initial.frames();
    if frames < 2 {
        return Err(Error::InvalidLatent("prompt interpolation needs at least 2 frames".into()));
    }
    let mut out = eps_initial.clone();
    for j in 0..frames {
        let l = j as f64 / (frames - 1) as f64;
        for (o, f) in out.frame_mut(j).iter_mut().zip(eps_final.frame(j)) {
            *o = (1.0 - l) * *o + l * f;
        }
    }
    Ok(out)
}

pub fn interpolated_condition_epsilon(
    zt: &LatentVideo,
    t: usize,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    den: &dyn Denoiser,
) -> Result<LatentVideo> {
    let eps_i = den.evaluate(zt, t, c_initial)?;
    let eps_f = den.evaluate(zt, t, c_final)?;
    interpolate_scores(&eps_i, &eps_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(rows: &[&[f64]]) -> LatentVideo {
        LatentVideo::from_frames(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cfg_cases() {
        let c = video(&[&[0.1], &[0.1]]);
        let u = video(&[&[0.05], &[0.05]]);
        assert_eq!(cfg_epsilon(&c, &u, 0.0).unwrap(), c);
        assert_eq!(cfg_epsilon(&c, &c, 7.5).unwrap(), c);
        let g = cfg_epsilon(&c, &u, 12.0).unwrap();
        for v in g.as_slice() {
            assert!((v - 0.70).abs() < 1e-12);
        }
        let bad = video(&[&[0.1]]);
        assert!(cfg_epsilon(&c, &bad, 1.0).is_err());
    }

    #[test]
    fn alpha_ramp_endpoints() {
        let spec = GuidanceSpec::default();
        assert_eq!(alpha_at(0, FrameSide::After, &spec, 32), 0.0);
        assert_eq!(alpha_at(15, FrameSide::After, &spec, 32), 1.0);
        assert_eq!(alpha_at(16, FrameSide::Before, &spec, 32), 1.0);
        let spec2 = GuidanceSpec { alpha_max: 2.0, ..spec.clone() };
        assert_eq!(alpha_at(15, FrameSide::After, &spec2, 32), 2.0);
        let c = anchored_coefficients(&spec, 32);
        assert_eq!(c[0], -1.0);
        assert_eq!(c[16], 0.0);
        assert_eq!(c[31], 1.0);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn alpha_ramp_degenerate_spans() {
        let spec = GuidanceSpec { middle_frame: Some(0), ..Default::default() };
        assert_eq!(anchored_coefficients(&spec, 1), vec![0.0]);
        assert_eq!(anchored_coefficients(&spec, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(naive_coefficients(1.0, 1), vec![0.0]);
        assert_eq!(naive_coefficients(3.0, 4), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn anchored_three_frames() {
        let eps_n = video(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let raw = video(&[&[0.1, 0.2], &[0.3, 0.4], &[0.5, 0.6]]);
        let dir = direction_from_scores(&LatentVideo::zeros(3, 2).unwrap(), &raw, DirectionNorm::Global).unwrap();
        let u = dir.data().clone();
        let spec = GuidanceSpec { middle_frame: Some(1), ..Default::default() };
        let out = refined_epsilon_anchored(&eps_n, &dir, &spec).unwrap();
        for i in 0..2 {
            assert_eq!(out.frame(0)[i], eps_n.frame(0)[i] - u.frame(0)[i]);
            assert_eq!(out.frame(1)[i], eps_n.frame(1)[i]);
            assert_eq!(out.frame(2)[i], eps_n.frame(2)[i] + u.frame(2)[i]);
        }
        let off = GuidanceSpec { alpha_max: 0.0, ..spec };
        assert_eq!(refined_epsilon_anchored(&eps_n, &dir, &off).unwrap(), eps_n);
    }

    #[test]
    fn naive_recovers_final_score_in_one_frame() {
        let eps_i = video(&[&[0.3, -1.2, 0.8]]);
        let eps_f = video(&[&[-0.4, 0.9, 1.7]]);
        let dir = direction_from_scores(&eps_i, &eps_f, DirectionNorm::Global).unwrap();
        let out = apply_frame_scales(&eps_i, dir.data(), &[dir.raw_norm()]).unwrap();
        for (a, b) in out.as_slice().iter().zip(eps_f.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn naive_base_frame_and_zero_scale() {
        let eps_i = video(&[&[0.3], &[0.1], &[-0.2]]);
        let eps_f = video(&[&[0.5], &[0.6], &[0.7]]);
        let dir = direction_from_scores(&eps_i, &eps_f, DirectionNorm::Global).unwrap();
        let spec = GuidanceSpec::default();
        let out = refined_epsilon_naive(&eps_i, &dir, &spec).unwrap();
        assert_eq!(out.frame(0), eps_i.frame(0));
        assert_ne!(out.frame(2), eps_i.frame(2));
        let off = GuidanceSpec { alpha_max: 0.0, ..spec };
        assert_eq!(refined_epsilon_naive(&eps_i, &dir, &off).unwrap(), eps_i);
    }

    #[test]
    fn direction_unit_norm_and_antisymmetry() {
        let a = video(&[&[0.3, 1.0], &[-0.1, 0.2]]);
        let b = video(&[&[0.0, -0.5], &[2.0, 0.2]]);
        let d = direction_from_scores(&a, &b, DirectionNorm::Global).unwrap();
        assert!((d.data().norm() - 1.0).abs() < 1e-12);
        let r = direction_from_scores(&b, &a, DirectionNorm::Global).unwrap();
        for (x, y) in d.data().as_slice().iter().zip(r.data().as_slice()) {
            assert_eq!(*x, -*y);
        }
        let p = direction_from_scores(&a, &b, DirectionNorm::PerFrame).unwrap();
        for j in 0..2 {
            let n: f64 = p.data().frame(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_direction_is_error() {
        let a = video(&[&[0.3], &[0.2]]);
        assert!(matches!(
            direction_from_scores(&a, &a, DirectionNorm::Global),
            Err(Error::DegenerateDirection { .. })
        ));
        let b = video(&[&[0.3], &[0.9]]);
        assert!(direction_from_scores(&a, &b, DirectionNorm::Global).is_ok());
        assert!(matches!(
            direction_from_scores(&a, &b, DirectionNorm::PerFrame),
            Err(Error::DegenerateDirection { .. })
        ));
    }

    #[test]
    fn interpolation_cases() {
        let i = video(&[&[0.2], &[0.2], &[0.2]]);
        let f = video(&[&[0.6], &[0.6], &[0.6]]);
        let out = interpolate_scores(&i, &f).unwrap();
        assert_eq!(out.frame(0), i.frame(0));
        assert_eq!(out.frame(2), f.frame(2));
        assert!((out.frame(1)[0] - 0.4).abs() < 1e-15);
        assert_eq!(interpolate_scores(&i, &i).unwrap(), i);
        assert!(interpolate_scores(&video(&[&[0.1]]), &video(&[&[0.2]])).is_err());
    }

    #[test]
    fn frame_locality() {
        let base = video(&[&[1.0], &[2.0], &[3.0]]);
        let d1 = video(&[&[0.1], &[0.2], &[0.3]]);
        let d2 = video(&[&[0.1], &[-5.0], &[0.3]]);
        let s = [0.5, 0.7, 0.9];
        let a = apply_frame_scales(&base, &d1, &s).unwrap();
        let b = apply_frame_scales(&base, &d2, &s).unwrap();
        assert_eq!(a.frame(0), b.frame(0));
        assert_eq!(a.frame(2), b.frame(2));
        assert_ne!(a.frame(1), b.frame(1));
    }

    #[test]
    fn spec_validation() {
        let s = GuidanceSpec::default();
        assert!(s.validate(32, 50).is_ok());
        assert!(GuidanceSpec { tau: 51, ..s.clone() }.validate(32, 50).is_err());
        assert!(GuidanceSpec { middle_frame: Some(32), ..s.clone() }.validate(32, 50).is_err());
        assert!(GuidanceSpec { omega: -1.0, ..s }.validate(32, 50).is_err());
        assert_eq!("ours_anchored".parse::<GuidanceMode>().unwrap(), GuidanceMode::OursAnchored);
        assert!("bogus".parse::<GuidanceMode>().is_err());
    }
}
