//! Probabilistic overlap bounds between a fixed sphere and a sphere whose
//! center is Gaussian.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::chain::Sphere;
use crate::error::{invalid, Error, Result};
use crate::motion::Point3;
use crate::rng::{rng_for, stream};

pub type Cov3 = [[f64; 3]; 3];

/// Minimum eigenvalue enforced on covariances before inversion.
pub const COV_JITTER: f64 = 1e-12;
/// Target residual of the boundary bisection.
pub const BISECTION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSphere {
    pub mean: Point3,
    pub cov: Cov3,
    pub radius: f64,
}

/// Which ball-volume factor multiplies the peak density.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Use `(4/3)π R²` instead of the ball volume `(4/3)π R³`.
    #[serde(default)]
    pub paper_literal_bound: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundResult {
    /// Clamped to `[0, 1]`.
    pub bound: f64,
    /// Natural log of the unclamped bound.
    pub log_bound: f64,
    pub x_max: Point3,
    pub density: f64,
    /// Tikhonov multiplier; 0 when the mean lies inside the ball.
    pub lambda: f64,
    pub interior: bool,
    /// Distance from the mean to the ball center minus the combined radius.
    pub separation: f64,
}

/// Eigen-decomposed covariance with jitter applied.
#[derive(Clone, Copy, Debug)]
pub struct Factored {
    pub vectors: Matrix3<f64>,
    pub values: Vector3<f64>,
    pub log_det: f64,
}

pub fn factor_cov(cov: &Cov3) -> Result<Factored> {
    let m = Matrix3::from_fn(|i, j| cov[i][j]);
    if !m.iter().all(|v| v.is_finite()) {
        return invalid("covariance has non-finite entries");
    }
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > 1e-9 * scale {
        return invalid("covariance is not symmetric");
    }
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let min = eig.eigenvalues.min();
    if min < -1e-9 * scale {
        return Err(Error::NotPositiveDefinite(format!("covariance eigenvalue {min:e}")));
    }
    let values = eig.eigenvalues.map(|v| v.max(COV_JITTER));
    Ok(Factored { vectors: eig.eigenvectors, values, log_det: values.iter().map(|v| v.ln()).sum() })
}

impl Factored {
    /// Log density of `N(0, Σ)` at a point given in the eigenbasis.
    fn log_density_rotated(&self, z: &Vector3<f64>) -> f64 {
        let maha: f64 = (0..3).map(|i| z[i] * z[i] / self.values[i]).sum();
        -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + self.log_det + maha)
    }

    pub fn log_density(&self, mean: Point3, x: Point3) -> f64 {
        let d = Vector3::new(x[0] - mean[0], x[1] - mean[1], x[2] - mean[2]);
        self.log_density_rotated(&(self.vectors.transpose() * d))
    }
}

fn ball_log_volume(r: f64, opts: BoundOptions) -> f64 {
    let exponent = if opts.paper_literal_bound { 2.0 } else { 3.0 };
    (4.0 / 3.0 * std::f64::consts::PI).ln() + exponent * r.ln()
}

/// Upper bound on the probability that the two spheres overlap: ball volume
/// times the maximum center density over the ball of radius `r1 + r2`
/// around the fixed center.
pub fn collision_bound(robot: &Sphere, human: &GaussianSphere) -> Result<BoundResult> {
    collision_bound_with(robot, human, BoundOptions::default())
}

pub fn collision_bound_with(robot: &Sphere, human: &GaussianSphere, opts: BoundOptions) -> Result<BoundResult> {
    if !(robot.radius > 0.0) || !(human.radius > 0.0) {
        return invalid("sphere radii must be positive");
    }
    let f = factor_cov(&human.cov)?;
    Ok(bound_factored(robot.center, robot.radius + human.radius, human.mean, &f, opts))
}

/// Core of [`collision_bound`] for a pre-factored covariance.
pub fn bound_factored(b: Point3, r: f64, mean: Point3, f: &Factored, opts: BoundOptions) -> BoundResult {
    let d = Vector3::new(mean[0] - b[0], mean[1] - b[1], mean[2] - b[2]);
    let dist = d.norm();
    let dt = f.vectors.transpose() * d;
    let (z, lambda, interior) = if dist <= r {
        (Vector3::zeros(), 0.0, true)
    } else {
        // x(λ) - b = U diag(1 / (1 + λ s_i)) Uᵀ (μ - b), shrinking from μ to b.
        let off = |lam: f64| -> Vector3<f64> { Vector3::from_fn(|i, _| dt[i] / (1.0 + lam * f.values[i])) };
        let s_min = f.values.min();
        let mut lo = 0.0;
        let mut hi = (dist / r - 1.0) / s_min;
        let mut lam = 0.0;
        let mut x = dt;
        // Newton on 1/|x(λ)| - 1/r inside the bisection bracket
        for _ in 0..400 {
            let n = x.norm();
            let res = n - r;
            if res.abs() < BISECTION_TOL * 0.01 || hi - lo <= f64::EPSILON * hi {
                break;
            }
            if res > 0.0 {
                lo = lam;
            } else {
                hi = lam;
            }
            let dn: f64 = (0..3).map(|i| -x[i] * x[i] * f.values[i] / (1.0 + lam * f.values[i])).sum::<f64>() / n;
            let h = 1.0 / n - 1.0 / r;
            let dh = -dn / (n * n);
            let newton = lam - h / dh;
            lam = if dh > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            x = off(lam);
        }
        // z = x_max - μ in the eigenbasis
        (x - dt, lam, false)
    };
    let log_density = f.log_density_rotated(&z);
    let log_bound = ball_log_volume(r, opts) + log_density;
    let x_world = f.vectors * z;
    BoundResult {
        bound: log_bound.exp().clamp(0.0, 1.0),
        log_bound,
        x_max: [mean[0] + x_world[0], mean[1] + x_world[1], mean[2] + x_world[2]],
        density: log_density.exp(),
        lambda,
        interior,
        separation: dist - r,
    }
}

/// Monte-Carlo estimate of the overlap probability.
pub fn mc_collision_oracle(robot: &Sphere, human: &GaussianSphere, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return invalid("oracle needs at least one sample");
    }
    let f = factor_cov(&human.cov)?;
    let sd = f.values.map(f64::sqrt);
    let r2 = (robot.radius + human.radius).powi(2);
    let mut rng = rng_for(seed, stream::NOISE, 0x6d63);
    let mut hits = 0usize;
    for _ in 0..samples {
        let e = Vector3::from_fn(|i, _| sd[i] * rng.sample::<f64, _>(StandardNormal));
        let c = f.vectors * e;
        let dx = human.mean[0] + c[0] - robot.center[0];
        let dy = human.mean[1] + c[1] - robot.center[1];
        let dz = human.mean[2] + c[2] - robot.center[2];
        if dx * dx + dy * dy + dz * dz <= r2 {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// True when the bound is strictly below `1 - δ`.
pub fn check_confidence(bound: f64, delta: f64) -> Result<bool> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("confidence level {delta} must lie in (0, 1)"));
    }
    Ok(bound < 1.0 - delta)
}

/// Gaussian spheres interpolated along limbs: for each `(a, b, radius)` and
/// each `u`, mean `(1-u)μa + uμb` and covariance `(1-u)²Σa + u²Σb`.
pub fn human_spheres(
    joints: &[(Point3, Cov3)],
    limbs: &[(usize, usize, f64)],
    u_samples: &[f64],
) -> Result<Vec<GaussianSphere>> {
    if let Some(u) = u_samples.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return invalid(format!("limb sample {u} outside [0, 1]"));
    }
    let mut out = Vec::with_capacity(limbs.len() * u_samples.len());
    for &(a, b, radius) in limbs {
        if a >= joints.len() || b >= joints.len() {
            return invalid(format!("limb ({a}, {b}) references a missing joint"));
        }
        if !(radius > 0.0) {
            return invalid("limb radius must be positive");
        }
        let ((ma, ca), (mb, cb)) = (&joints[a], &joints[b]);
        for &u in u_samples {
            let v = 1.0 - u;
            let mut cov = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] = v * v * ca[i][j] + u * u * cb[i][j];
                }
            }
            out.push(GaussianSphere {
                mean: [v * ma[0] + u * mb[0], v * ma[1] + u * mb[1], v * ma[2] + u * mb[2]],
                cov,
                radius,
            });
        }
    }
    Ok(out)
}

/// Deterministic spheres along limbs for a known pose.
pub fn pose_spheres(pose: &[Point3], limbs: &[(usize, usize, f64)], u_samples: &[f64]) -> Result<Vec<Sphere>> {
    let zero = [[0.0; 3]; 3];
    let joints: Vec<(Point3, Cov3)> = pose.iter().map(|p| (*p, zero)).collect();
    Ok(human_spheres(&joints, limbs, u_samples)?
        .into_iter()
        .map(|g| Sphere { center: g.mean, radius: g.radius })
        .collect())
}

pub fn isotropic(sigma: f64) -> Cov3 {
    let v = sigma * sigma;
    [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]]
}
