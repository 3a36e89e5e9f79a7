//! Transition metrics: directional similarity between frame-embedding
//! differences and the prompt-embedding difference, over the whole clip
//! (first to last frame) and per consecutive frame pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::denoiser::{AnalyticDenoiser, ConditionId};
use crate::diffusion::LatentVideo;
use crate::error::{Error, Result};

/// Vectors with a smaller norm count as zero.
pub const ZERO_NORM: f64 = 1e-12;

pub trait Embedder: Send + Sync {
    fn embed_frame(&self, frame: &[f64]) -> Result<Vec<f64>>;
    fn embed_condition(&self, c: &ConditionId) -> Result<Vec<f64>>;
    fn output_dim(&self) -> usize;
}

/// Linear stand-in for an image/text encoder pair: frames are projected by
/// an `E x D` matrix and conditions embed as the projection of their mean.
#[derive(Debug, Clone)]
pub struct ToyLinearEmbedder {
    projection: Vec<Vec<f64>>,
    conditions: BTreeMap<ConditionId, Vec<f64>>,
}

impl ToyLinearEmbedder {
    pub fn new(projection: Vec<Vec<f64>>) -> Result<Self> {
        let rows = projection.len();
        let cols = projection.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || projection.iter().any(|r| r.len() != cols) {
            return Err(Error::Embedder("projection must be a non-empty rectangular matrix".into()));
        }
        if rank(&projection) < rows {
            return Err(Error::Embedder(format!("projection ({rows}x{cols}) is not full row rank")));
        }
        Ok(Self {
            projection,
            conditions: BTreeMap::new(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let projection = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            projection,
            conditions: BTreeMap::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.projection[0].len()
    }

    pub fn register_condition(&mut self, id: ConditionId, mean: &[f64]) -> Result<()> {
        let e = self.project(mean)?;
        self.conditions.insert(id, e);
        Ok(())
    }

    /// Registers every condition of an analytic denoiser by its mean.
    pub fn with_denoiser_conditions(mut self, den: &AnalyticDenoiser, ids: &[ConditionId]) -> Result<Self> {
        for id in ids {
            let mean = den.condition(id)?.mean().to_vec();
            self.register_condition(id.clone(), &mean)?;
        }
        Ok(self)
    }

    fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                latent: v.len(),
                condition: self.input_dim(),
            });
        }
        Ok(self
            .projection
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl Embedder for ToyLinearEmbedder {
    fn embed_frame(&self, frame: &[f64]) -> Result<Vec<f64>> {
        self.project(frame)
    }

    fn embed_condition(&self, c: &ConditionId) -> Result<Vec<f64>> {
        self.conditions
            .get(c)
            .cloned()
            .ok_or_else(|| Error::Embedder(format!("no embedding for condition `{c}`")))
    }

    fn output_dim(&self) -> usize {
        self.projection.len()
    }
}

/// Row rank by Gaussian elimination with partial pivoting.
fn rank(m: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let rows = a.len();
    let cols = a[0].len();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let tol = 1e-10 * scale;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = (r..rows)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c].abs() <= tol {
            continue;
        }
        a.swap(r, p);
        for i in r + 1..rows {
            let f = a[i][c] / a[r][c];
            let (upper, lower) = a.split_at_mut(i);
            for (x, y) in lower[0][c..].iter_mut().zip(&upper[r][c..]) {
                *x -= f * y;
            }
        }
        r += 1;
    }
    r
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Cosine of the angle between the two vectors, clamped to `[-1, 1]`.
pub fn directional_similarity(v_img: &[f64], v_txt: &[f64]) -> Result<f64> {
    if v_img.len() != v_txt.len() {
        return Err(Error::DimMismatch {
            latent: v_img.len(),
            condition: v_txt.len(),
        });
    }
    let (ni, nt) = (norm(v_img), norm(v_txt));
    if !(ni >= ZERO_NORM && nt >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = v_img.iter().zip(v_txt).map(|(a, b)| a * b).sum();
    Ok((dot / (ni * nt)).clamp(-1.0, 1.0))
}

fn text_direction(c_initial: &ConditionId, c_final: &ConditionId, emb: &dyn Embedder) -> Result<Vec<f64>> {
    Ok(sub(&emb.embed_condition(c_final)?, &emb.embed_condition(c_initial)?))
}

fn require_frames(video: &LatentVideo) -> Result<()> {
    if video.frames() < 2 {
        return Err(Error::InvalidLatent("transition metrics need at least 2 frames".into()));
    }
    Ok(())
}

/// Similarity of (last frame - first frame) with (final prompt - initial prompt).
pub fn wholistic_score(
    video: &LatentVideo,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    emb: &dyn Embedder,
) -> Result<f64> {
    require_frames(video)?;
    let first = emb.embed_frame(video.frame(0))?;
    let last = emb.embed_frame(video.frame(video.frames() - 1))?;
    directional_similarity(&sub(&last, &first), &text_direction(c_initial, c_final, emb)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramewiseScore {
    pub mean: f64,
    pub per_step: Vec<f64>,
    /// Consecutive pairs with no embedding change; they contribute 0.
    pub static_pairs: usize,
}

/// Mean similarity of every consecutive frame difference with the prompt direction.
pub fn framewise_score(
    video: &LatentVideo,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    emb: &dyn Embedder,
) -> Result<FramewiseScore> {
    require_frames(video)?;
    let text = text_direction(c_initial, c_final, emb)?;
    if !(norm(&text) >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    let embedded = (0..video.frames())
        .map(|j| emb.embed_frame(video.frame(j)))
        .collect::<Result<Vec<_>>>()?;
    let mut static_pairs = 0;
    let per_step = embedded
        .windows(2)
        .map(|w| match directional_similarity(&sub(&w[1], &w[0]), &text) {
            Err(Error::ZeroVector) => {
                static_pairs += 1;
                Ok(0.0)
            }
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_step.iter().sum::<f64>() / per_step.len() as f64;
    Ok(FramewiseScore {
        mean,
        per_step,
        static_pairs,
    })
}

/// Signed position of each frame along the prompt direction, measured from
/// the midpoint of the two prompt embeddings.
pub fn projected_attributes(
    video: &LatentVideo,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    emb: &dyn Embedder,
) -> Result<Vec<f64>> {
    let ei = emb.embed_condition(c_initial)?;
    let ef = emb.embed_condition(c_final)?;
    let dir = sub(&ef, &ei);
    let n = norm(&dir);
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    let mid: Vec<f64> = ei.iter().zip(&ef).map(|(a, b)| 0.5 * (a + b)).collect();
    (0..video.frames())
        .map(|j| {
            let e = emb.embed_frame(video.frame(j))?;
            Ok(sub(&e, &mid).iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub scenario: String,
    pub seed: u64,
    pub wholistic: f64,
    pub framewise: f64,
    pub per_step_cosines: Vec<f64>,
    pub static_pair_count: usize,
}

pub fn transition_report(
    video: &LatentVideo,
    c_initial: &ConditionId,
    c_final: &ConditionId,
    emb: &dyn Embedder,
    scenario: &str,
    seed: u64,
) -> Result<TransitionReport> {
    let wholistic = wholistic_score(video, c_initial, c_final, emb)?;
    let fw = framewise_score(video, c_initial, c_final, emb)?;
    Ok(TransitionReport {
        scenario: scenario.to_string(),
        seed,
        wholistic,
        framewise: fw.mean,
        per_step_cosines: fw.per_step,
        static_pair_count: fw.static_pairs,
    })
}
