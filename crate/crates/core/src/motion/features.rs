use rand_distr::{Distribution, Normal};

use super::{FeatureSequence, MotionSequence};
use crate::error::{invalid, Result};
use crate::rng::{rng_for, stream};

/// Positions, velocities and accelerations per frame.
///
/// Derivatives use central differences on interior frames (valid for
/// non-uniform spacing) and one-sided differences at both ends.
pub fn compute_features(motion: &MotionSequence) -> Result<FeatureSequence> {
    let n = motion.len();
    if n < 3 {
        return invalid(format!("feature extraction needs at least 3 frames, got {n}"));
    }
    let d = motion.frame_dim();
    let t = motion.frame_times();
    let mut data = vec![0.0; n * 3 * d];

    for i in 0..n {
        let row = &mut data[i * 3 * d..(i + 1) * 3 * d];
        row[..d].copy_from_slice(motion.frame(i));

        let (a, b) = match i {
            0 => (0, 1),
            _ if i == n - 1 => (n - 2, n - 1),
            _ => (i - 1, i + 1),
        };
        let (fa, fb) = (motion.frame(a), motion.frame(b));
        let dt = t[b] - t[a];
        for k in 0..d {
            row[d + k] = (fb[k] - fa[k]) / dt;
        }

        // second difference centred on an interior frame
        let c = i.clamp(1, n - 2);
        let (x0, x1, x2) = (motion.frame(c - 1), motion.frame(c), motion.frame(c + 1));
        let h1 = t[c] - t[c - 1];
        let h2 = t[c + 1] - t[c];
        for k in 0..d {
            row[2 * d + k] = 2.0 * ((x2[k] - x1[k]) / h2 - (x1[k] - x0[k]) / h1) / (h1 + h2);
        }
    }
    FeatureSequence::new(3 * d, data)
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation `sigma` to
/// every coordinate.
pub fn inject_noise(motion: &MotionSequence, sigma: f64, seed: u64) -> Result<MotionSequence> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid(format!("noise sigma must be non-negative, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(motion.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = rng_for(seed, stream::NOISE, 0);
    let coords = motion.coords().iter().map(|c| c + normal.sample(&mut rng)).collect();
    MotionSequence::new(motion.frame_times().to_vec(), motion.joint_count(), coords)
}

/// Replays a motion `factor` times faster: frame times are divided by the
/// factor, positions are untouched.
pub fn time_scale(motion: &MotionSequence, factor: f64) -> Result<MotionSequence> {
    if !(factor > 0.0) || !factor.is_finite() {
        return invalid(format!("time scale factor must be positive, got {factor}"));
    }
    let times = motion.frame_times().iter().map(|t| t / factor).collect();
    MotionSequence::new(times, motion.joint_count(), motion.coords().to_vec())
}
