//! Sparse pseudo-input Gaussian process regression over feature windows.
//!
//! The model uses the projected-process (DTC) approximation: with `M`
//! pseudo-inputs drawn from the training windows, `Q = K_nm K_mm⁻¹ K_mn`
//! replaces the full Gram matrix. Everything is stored in the eigenbasis of
//! `L⁻¹ K_mn K_nm L⁻ᵀ` so that a query costs one kernel row plus `O(M)` work
//! per output channel, for any effective noise level.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_flat, DtwKernelParams};
use crate::error::{invalid, Error, Result};
use crate::rng::{rng_for, stream};

/// Diagonal jitter added to every pseudo-input Gram matrix.
pub const GRAM_JITTER: f64 = 1e-6;

const MIN_SIGNAL_VARIANCE: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Hyperparameters given explicitly instead of fitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedHyperparameters {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpTrainParams {
    /// Number of pseudo-inputs.
    pub m: usize,
    #[serde(default)]
    pub band: Option<usize>,
    /// Candidate length scales as multiples of the median DTW distance.
    #[serde(default = "default_gamma_factors")]
    pub gamma_factors: Vec<f64>,
    /// Candidate noise-to-signal variance ratios.
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default)]
    pub fixed: Option<FixedHyperparameters>,
}

fn default_gamma_factors() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
}

fn default_rho_grid() -> Vec<f64> {
    vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
}

impl Default for GpTrainParams {
    fn default() -> Self {
        Self { m: 100, band: None, gamma_factors: default_gamma_factors(), rho_grid: default_rho_grid(), fixed: None }
    }
}

/// Input noise level and the joint speed bound used to inflate the output
/// noise of a prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisyInputParams {
    /// Input noise standard deviation (m).
    pub sigma: f64,
    /// Joint velocity limit ‖v‖ (m/s).
    pub velocity_limit: f64,
}

impl NoisyInputParams {
    pub fn new(sigma: f64, velocity_limit: f64) -> Result<Self> {
        if !(sigma >= 0.0 && velocity_limit >= 0.0) || !sigma.is_finite() || !velocity_limit.is_finite() {
            return invalid("noise and velocity limit must be finite and non-negative");
        }
        Ok(Self { sigma, velocity_limit })
    }

    /// Extra output noise variance `σ²(1 + ‖v‖²)`.
    pub fn extra_variance(&self) -> f64 {
        self.sigma * self.sigma * (1.0 + self.velocity_limit * self.velocity_limit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpChannel {
    pub mean: f64,
    pub signal_variance: f64,
    /// Noise variance over signal variance.
    pub rho: f64,
    /// Centered targets projected onto the eigenbasis.
    pub b: Vec<f64>,
}

impl GpChannel {
    pub fn noise_sd(&self) -> f64 {
        (self.rho * self.signal_variance).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseGpModel {
    pub kernel: DtwKernelParams,
    pub feature_dim: usize,
    /// Flattened length of one input window.
    pub input_len: usize,
    /// `M × input_len`, row-major.
    pub pseudo_inputs: Vec<f64>,
    /// Training indices the pseudo-inputs were taken from.
    pub pseudo_index: Vec<usize>,
    /// `W = Vᵀ L⁻¹`, `M × M` row-major.
    pub w: Vec<f64>,
    /// Eigenvalues of `L⁻¹ K_mn K_nm L⁻ᵀ`.
    pub d: Vec<f64>,
    pub channels: Vec<GpChannel>,
    pub n_train: usize,
    /// Set when fewer training windows than requested pseudo-inputs existed.
    pub clamped: bool,
    pub log_likelihood: f64,
}

/// Per-channel Gaussian posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Some(*m)
}

struct Basis {
    gamma: f64,
    w: DMatrix<f64>,
    d: Vec<f64>,
    /// `Vᵀ B`, `M × N`.
    proj: DMatrix<f64>,
}

fn build_basis(dist_mn: &DMatrix<f64>, pseudo_index: &[usize], gamma: f64) -> Option<Basis> {
    let m = dist_mn.nrows();
    let kmn = dist_mn.map(|x| (-x / gamma).exp());
    let mut kmm = DMatrix::from_fn(m, m, |i, j| kmn[(i, pseudo_index[j])]);
    kmm = (&kmm + kmm.transpose()) * 0.5;
    for i in 0..m {
        kmm[(i, i)] += GRAM_JITTER;
    }
    let chol = kmm.cholesky()?;
    let l = chol.l();
    let b = l.solve_lower_triangular(&kmn)?;
    let linv = l.solve_lower_triangular(&DMatrix::identity(m, m))?;
    let eig = SymmetricEigen::new(&b * b.transpose());
    let vt = eig.eigenvectors.transpose();
    Some(Basis {
        gamma,
        w: &vt * linv,
        d: eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect(),
        proj: vt * b,
    })
}

/// Profiled log marginal likelihood of one centered channel: the signal
/// variance is set to its maximizer `quad / N`.
fn profiled_ll(yy: f64, b: &[f64], d: &[f64], rho: f64, n: usize) -> (f64, f64) {
    let m = d.len();
    let explained: f64 = b.iter().zip(d).map(|(bi, di)| bi * bi / (rho + di)).sum();
    let quad = ((yy - explained) / rho).max(0.0);
    let s2 = (quad / n as f64).max(MIN_SIGNAL_VARIANCE);
    let logdet: f64 = d.iter().map(|di| (rho + di).ln()).sum::<f64>() + (n - m) as f64 * rho.ln();
    let nf = n as f64;
    let ll = -0.5 * (quad / s2 + nf * s2.ln() + logdet + nf * LN_2PI);
    (ll, s2)
}

fn fixed_ll(yy: f64, b: &[f64], d: &[f64], rho: f64, s2: f64, n: usize) -> f64 {
    let m = d.len();
    let explained: f64 = b.iter().zip(d).map(|(bi, di)| bi * bi / (rho + di)).sum();
    let quad = (yy - explained) / rho;
    let logdet: f64 = d.iter().map(|di| (rho + di).ln()).sum::<f64>() + (n - m) as f64 * rho.ln();
    -0.5 * (quad / s2 + n as f64 * s2.ln() + logdet + n as f64 * LN_2PI)
}

/// Fits one sparse GP per output channel on a group of windows.
///
/// `inputs[i]` is a flattened feature window of `feature_dim`-wide frames,
/// `outputs[i]` the matching target vector (one entry per channel).
pub fn spgp_train(
    inputs: &[&[f64]],
    outputs: &[&[f64]],
    feature_dim: usize,
    params: &GpTrainParams,
    seed: u64,
) -> Result<SparseGpModel> {
    let n = inputs.len();
    if n == 0 {
        return invalid("sparse GP needs at least one training window");
    }
    if outputs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: outputs.len() });
    }
    let input_len = inputs[0].len();
    let channels = outputs[0].len();
    if inputs.iter().any(|x| x.len() != input_len) || outputs.iter().any(|y| y.len() != channels) {
        return invalid("training windows must share input and output sizes");
    }
    if params.m == 0 {
        return invalid("number of pseudo-inputs must be at least 1");
    }
    let clamped = params.m > n;
    if clamped {
        warn!("requested {} pseudo-inputs but only {n} training windows; using {n}", params.m);
    }
    let m = params.m.min(n);
    let mut pseudo_index = if m == n {
        (0..n).collect::<Vec<_>>()
    } else {
        index::sample(&mut rng_for(seed, stream::TRAIN, 0), n, m).into_vec()
    };
    pseudo_index.sort_unstable();

    let rows: Vec<Vec<f64>> = pseudo_index
        .par_iter()
        .map(|&a| inputs.iter().map(|x| dtw_flat(inputs[a], x, feature_dim, params.band)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let dist_mn = DMatrix::from_fn(m, n, |i, j| rows[i][j]);

    let gammas: Vec<f64> = match params.fixed {
        Some(f) => vec![f.length_scale],
        None => {
            let positive: Vec<f64> = dist_mn.iter().copied().filter(|&x| x > 0.0).collect();
            let med = median(positive).unwrap_or(1.0);
            params.gamma_factors.iter().map(|f| f * med).collect()
        }
    };
    if gammas.iter().any(|g| !(*g > 0.0)) {
        return invalid("kernel length scales must be positive");
    }

    let means: Vec<f64> = (0..channels).map(|c| outputs.iter().map(|y| y[c]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, channels, |i, c| outputs[i][c] - means[c]);
    let yy: Vec<f64> = (0..channels).map(|c| centered.column(c).norm_squared()).collect();

    let fit = |basis: Basis| {
        let bmat = &basis.proj * &centered; // M × channels
        let mut total = 0.0;
        let mut fitted = Vec::with_capacity(channels);
        for c in 0..channels {
            let b: Vec<f64> = bmat.column(c).iter().copied().collect();
            let (ll, s2, rho) = match params.fixed {
                Some(f) => {
                    let s2 = f.signal_variance;
                    let rho = f.noise_sd * f.noise_sd / s2;
                    (fixed_ll(yy[c], &b, &basis.d, rho, s2, n), s2, rho)
                }
                None => params
                    .rho_grid
                    .iter()
                    .map(|&rho| {
                        let (ll, s2) = profiled_ll(yy[c], &b, &basis.d, rho, n);
                        (ll, s2, rho)
                    })
                    .fold((f64::NEG_INFINITY, 1.0, 1.0), |acc, x| if x.0 > acc.0 { x } else { acc }),
            };
            total += ll;
            fitted.push(GpChannel { mean: means[c], signal_variance: s2, rho, b });
        }
        (total, basis, fitted)
    };

    let mut best: Option<(f64, Basis, Vec<GpChannel>)> = None;
    for &gamma in &gammas {
        let Some(basis) = build_basis(&dist_mn, &pseudo_index, gamma) else {
            warn!("jittered DTW Gram matrix is not positive definite at length scale {gamma}; skipped");
            continue;
        };
        let candidate = fit(basis);
        if best.as_ref().is_none_or(|(ll, _, _)| candidate.0 > *ll) {
            best = Some(candidate);
        }
    }
    if best.is_none() && params.fixed.is_none() {
        // shrink the length scale until the Gram matrix factors; as γ → 0
        // the kernel tends to the identity
        let mut gamma = gammas.iter().copied().fold(f64::INFINITY, f64::min);
        for _ in 0..60 {
            gamma *= 0.5;
            if let Some(basis) = build_basis(&dist_mn, &pseudo_index, gamma) {
                warn!("no grid length scale factored; using {gamma}");
                best = Some(fit(basis));
                break;
            }
        }
    }
    let Some((log_likelihood, basis, channels)) = best else {
        return Err(Error::NotPositiveDefinite("no candidate length scale gave a positive definite Gram matrix".into()));
    };
    let pseudo_inputs = pseudo_index.iter().flat_map(|&i| inputs[i].iter().copied()).collect();
    let w = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| basis.w[(i, j)]).collect();
    Ok(SparseGpModel {
        kernel: DtwKernelParams { length_scale: basis.gamma, band: params.band },
        feature_dim,
        input_len,
        pseudo_inputs,
        pseudo_index,
        w,
        d: basis.d,
        channels,
        n_train: n,
        clamped,
        log_likelihood,
    })
}

impl SparseGpModel {
    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn pseudo_input(&self, i: usize) -> &[f64] {
        &self.pseudo_inputs[i * self.input_len..(i + 1) * self.input_len]
    }

    /// DTW distances from a query window to every pseudo-input.
    pub fn distances(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.input_len {
            return Err(Error::DimensionMismatch { expected: self.input_len, actual: query.len() });
        }
        (0..self.m()).map(|i| dtw_flat(query, self.pseudo_input(i), self.feature_dim, self.kernel.band)).collect()
    }

    /// Eigenbasis coordinates `z = W k(query)` from precomputed distances.
    pub fn project(&self, distances: &[f64]) -> Vec<f64> {
        let m = self.m();
        let k: Vec<f64> = distances.iter().map(|d| (-d / self.kernel.length_scale).exp()).collect();
        (0..m).map(|i| self.w[i * m..(i + 1) * m].iter().zip(&k).map(|(a, b)| a * b).sum()).collect()
    }

    /// Posterior per channel given projected coordinates, with
    /// `extra_variance` added to each channel's noise variance.
    pub fn predict_projected(&self, z: &[f64], extra_variance: f64) -> GpPrediction {
        let mut mean = Vec::with_capacity(self.channels.len());
        let mut variance = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let rho = ch.rho + extra_variance / ch.signal_variance;
            let mut mu = ch.mean;
            let mut explained = 0.0;
            for ((zi, bi), di) in z.iter().zip(&ch.b).zip(&self.d) {
                let inv = 1.0 / (rho + di);
                mu += zi * bi * inv;
                explained += zi * zi * di * inv;
            }
            mean.push(mu);
            variance.push(ch.signal_variance * (1.0 - explained).max(1e-10));
        }
        GpPrediction { mean, variance }
    }

    /// Prior variance of every channel, reached far from the training data.
    pub fn prior_variance(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.signal_variance).collect()
    }

    /// Structural checks run after loading from an archive.
    pub fn verify(&self) -> Result<()> {
        let m = self.m();
        let bad = |msg: &str| Err(Error::Archive(msg.to_string()));
        if m == 0 || m > self.n_train {
            return bad("pseudo-input count out of range");
        }
        if self.pseudo_inputs.len() != m * self.input_len || self.w.len() != m * m || self.pseudo_index.len() != m {
            return bad("sparse GP array sizes disagree");
        }
        if self.feature_dim == 0 || self.input_len % self.feature_dim != 0 {
            return bad("feature width does not divide the input length");
        }
        self.kernel.validate().map_err(|e| Error::Archive(e.to_string()))?;
        if self.d.iter().any(|d| !(*d >= 0.0)) {
            return bad("negative eigenvalue");
        }
        for ch in &self.channels {
            if ch.b.len() != m || !(ch.signal_variance > 0.0) || !(ch.rho > 0.0) {
                return bad("invalid channel parameters");
            }
        }
        if self.w.iter().chain(&self.pseudo_inputs).any(|x| !x.is_finite()) {
            return bad("non-finite model values");
        }
        // the pseudo-input Gram matrix must still factor after jitter
        let gram = DMatrix::from_fn(m, m, |i, j| {
            let d = dtw_flat(self.pseudo_input(i), self.pseudo_input(j), self.feature_dim, self.kernel.band).unwrap_or(f64::INFINITY);
            (-d / self.kernel.length_scale).exp() + if i == j { GRAM_JITTER } else { 0.0 }
        });
        if gram.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("archived pseudo-input Gram matrix".into()));
        }
        Ok(())
    }
}

pub fn spgp_predict(model: &SparseGpModel, query: &[f64]) -> Result<GpPrediction> {
    Ok(model.predict_projected(&model.project(&model.distances(query)?), 0.0))
}

/// Prediction with the effective noise raised by `σ²(1 + ‖v‖²)`.
pub fn spgp_predict_noisy(model: &SparseGpModel, query: &[f64], noisy: &NoisyInputParams) -> Result<GpPrediction> {
    Ok(model.predict_projected(&model.project(&model.distances(query)?), noisy.extra_variance()))
}

/// Eigenvalues of the jittered DTW Gram matrix of a batch of windows.
pub fn gram_eigenvalues(inputs: &[&[f64]], feature_dim: usize, length_scale: f64, band: Option<usize>) -> Result<Vec<f64>> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (-dtw_flat(inputs[i], inputs[j], feature_dim, band)? / length_scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += GRAM_JITTER;
    }
    Ok(SymmetricEigen::new(k).eigenvalues.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar-frame windows of length 3 along a 1-D input line.
    fn data(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| {
            let t = i as f64 / n as f64 * 4.0;
            vec![t, t + 0.1, t + 0.2]
        }).collect();
        let ys = xs.iter().map(|x| vec![x[0].sin(), 0.5 * x[0]]).collect();
        (xs, ys)
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn interpolates_with_all_points_and_tiny_noise() {
        let (xs, ys) = data(12);
        let params = GpTrainParams {
            m: 12,
            fixed: Some(FixedHyperparameters { length_scale: 0.2, signal_variance: 1.0, noise_sd: 1e-8 }),
            ..Default::default()
        };
        let model = spgp_train(&refs(&xs), &refs(&ys), 1, &params, 0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let p = spgp_predict(&model, x).unwrap();
            for c in 0..2 {
                assert!((p.mean[c] - y[c]).abs() < 1e-5, "{} vs {}", p.mean[c], y[c]);
            }
        }
    }

    #[test]
    fn zero_targets_give_zero_mean_and_prior_far_away() {
        let (xs, _) = data(20);
        let zeros = vec![vec![0.0; 2]; 20];
        let model = spgp_train(&refs(&xs), &refs(&zeros), 1, &GpTrainParams { m: 8, ..Default::default() }, 1).unwrap();
        let near = spgp_predict(&model, &xs[3]).unwrap();
        assert!(near.mean.iter().all(|m| m.abs() < 1e-12));
        let far = spgp_predict(&model, &[100.0, 100.0, 100.0]).unwrap();
        for (v, prior) in far.variance.iter().zip(model.prior_variance()) {
            assert!((v - prior).abs() <= 1e-12 * prior.max(1e-300));
        }
    }

    #[test]
    fn clamps_pseudo_inputs_to_group_size() {
        let (xs, ys) = data(5);
        let model = spgp_train(&refs(&xs), &refs(&ys), 1, &GpTrainParams { m: 50, ..Default::default() }, 0).unwrap();
        assert!(model.clamped);
        assert_eq!(model.m(), 5);
        model.verify().unwrap();
    }

    #[test]
    fn zero_input_noise_matches_standard_prediction() {
        let (xs, ys) = data(30);
        let model = spgp_train(&refs(&xs), &refs(&ys), 1, &GpTrainParams { m: 10, ..Default::default() }, 2).unwrap();
        let q = [1.3, 1.4, 1.5];
        let a = spgp_predict(&model, &q).unwrap();
        let b = spgp_predict_noisy(&model, &q, &NoisyInputParams::new(0.0, 2.0).unwrap()).unwrap();
        assert_eq!(a, b);
        let mut last = b.variance.clone();
        for v in [0.5, 1.0, 2.0] {
            let p = spgp_predict_noisy(&model, &q, &NoisyInputParams::new(0.05, v).unwrap()).unwrap();
            for (x, y) in p.variance.iter().zip(&last) {
                assert!(x >= y);
            }
            last = p.variance;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(spgp_train(&[], &[], 1, &GpTrainParams::default(), 0).is_err());
        assert!(NoisyInputParams::new(-1.0, 0.0).is_err());
        let (xs, ys) = data(4);
        let model = spgp_train(&refs(&xs), &refs(&ys), 1, &GpTrainParams { m: 2, ..Default::default() }, 0).unwrap();
        assert!(spgp_predict(&model, &[0.0]).is_err());
    }
}
