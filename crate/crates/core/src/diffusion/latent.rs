use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `frames x dim` block of latent values stored row-major (one row per frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVideo {
    frames: usize,
    dim: usize,
    data: Vec<f64>,
}

impl LatentVideo {
    pub fn zeros(frames: usize, dim: usize) -> Result<Self> {
        Self::filled(frames, dim, 0.0)
    }

    pub fn filled(frames: usize, dim: usize, value: f64) -> Result<Self> {
        Self::from_vec(frames, dim, vec![value; frames * dim])
    }

    pub fn from_vec(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::InvalidLatent(format!(
                "frames and dim must be >= 1 (got {frames}x{dim})"
            )));
        }
        if data.len() != frames * dim {
            return Err(Error::InvalidLatent(format!(
                "expected {} values for {frames}x{dim}, got {}",
                frames * dim,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidLatent(format!("non-finite value at index {i}")));
        }
        Ok(Self { frames, dim, data })
    }

    /// Builds a video from per-frame rows.
    pub fn from_frames(rows: &[Vec<f64>]) -> Result<Self> {
        let frames = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidLatent("ragged frame rows".into()));
        }
        Self::from_vec(frames, dim, rows.concat())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn frame_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn ensure_same_shape(&self, other: &LatentVideo) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }

    /// Global L2 norm over every entry.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `f(a, b)` over two videos of equal shape.
    pub fn zip_map(&self, other: &LatentVideo, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            frames: self.frames,
            dim: self.dim,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            frames: self.frames,
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy with frame order reversed.
    pub fn reversed_frames(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in (0..self.frames).rev() {
            data.extend_from_slice(self.frame(j));
        }
        Self {
            frames: self.frames,
            dim: self.dim,
            data,
        }
    }

    /// Little-endian bytes of every value, for bit-exact comparisons.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}
