//! Dynamic time warping distance and the exponential DTW kernel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::motion::FeatureSequence;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtwKernelParams {
    /// Length scale γ of `exp(-d / γ)`.
    pub length_scale: f64,
    /// Sakoe-Chiba band half-width in frames.
    #[serde(default)]
    pub band: Option<usize>,
}

impl DtwKernelParams {
    pub fn new(length_scale: f64, band: Option<usize>) -> Result<Self> {
        let p = Self { length_scale, band };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) || !self.length_scale.is_finite() {
            return invalid(format!("kernel length scale must be positive, got {}", self.length_scale));
        }
        Ok(())
    }
}

/// DTW between two flat frame-major sequences of `dim`-wide frames, with
/// squared Euclidean local cost and steps (1,0), (0,1), (1,1).
pub fn dtw_flat(x: &[f64], y: &[f64], dim: usize, band: Option<usize>) -> Result<f64> {
    if dim == 0 || x.len() % dim != 0 || y.len() % dim != 0 {
        return invalid("sequence length is not a multiple of the frame width");
    }
    let (n, m) = (x.len() / dim, y.len() / dim);
    if n == 0 || m == 0 {
        return invalid("DTW needs non-empty sequences");
    }
    // widen the band so that a path to the corner always exists
    let w = band.map(|b| b.max(n.abs_diff(m)));
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let (lo, hi) = match w {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        let xi = &x[(i - 1) * dim..i * dim];
        for j in lo..=hi {
            let yj = &y[(j - 1) * dim..j * dim];
            let cost: f64 = xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
            cur[j] = cost + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

pub fn dtw_distance(x: &FeatureSequence, y: &FeatureSequence) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), actual: y.dim() });
    }
    dtw_flat(x.data(), y.data(), x.dim(), None)
}

pub fn dtw_distance_banded(x: &FeatureSequence, y: &FeatureSequence, band: Option<usize>) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), actual: y.dim() });
    }
    dtw_flat(x.data(), y.data(), x.dim(), band)
}

/// `exp(-dtw(x, y) / γ)`.
pub fn dtw_kernel(x: &FeatureSequence, y: &FeatureSequence, params: &DtwKernelParams) -> Result<f64> {
    params.validate()?;
    Ok((-dtw_distance_banded(x, y, params.band)? / params.length_scale).exp())
}
