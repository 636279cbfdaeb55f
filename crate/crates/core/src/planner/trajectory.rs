//! Time-stamped joint-space waypoint sequences.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub waypoints: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, waypoints: Vec<Vec<f64>>) -> Result<Self> {
        let t = Trajectory { times, waypoints };
        t.validate()?;
        Ok(t)
    }

    /// `segments + 1` waypoints linearly interpolated from `start` to `goal`
    /// at spacing `dt` from `t0`.
    pub fn straight_line(start: &[f64], goal: &[f64], segments: usize, t0: f64, dt: f64) -> Result<Self> {
        if start.len() != goal.len() {
            return Err(Error::DimensionMismatch { expected: start.len(), actual: goal.len() });
        }
        if segments == 0 || !(dt > 0.0) {
            return invalid("straight line needs at least one segment and dt > 0");
        }
        let waypoints = (0..=segments)
            .map(|i| {
                let u = i as f64 / segments as f64;
                start.iter().zip(goal).map(|(a, b)| a + u * (b - a)).collect()
            })
            .collect();
        Trajectory::new((0..=segments).map(|i| t0 + i as f64 * dt).collect(), waypoints)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() || self.times.len() != self.waypoints.len() {
            return invalid("trajectory needs one time per waypoint and at least one waypoint");
        }
        let dof = self.waypoints[0].len();
        if let Some(w) = self.waypoints.iter().find(|w| w.len() != dof) {
            return Err(Error::DimensionMismatch { expected: dof, actual: w.len() });
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("trajectory times must be strictly increasing");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.waypoints.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> &[f64] {
        self.waypoints.last().expect("non-empty trajectory")
    }

    /// Largest absolute joint difference to another trajectory of equal shape.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.waypoints
            .iter()
            .zip(&other.waypoints)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Second derivative at interior waypoint `i` on a possibly non-uniform grid.
pub fn acceleration_at(times: &[f64], waypoints: &[Vec<f64>], i: usize, out: &mut [f64]) {
    let h1 = times[i] - times[i - 1];
    let h2 = times[i + 1] - times[i];
    let (a, b, c) = (&waypoints[i - 1], &waypoints[i], &waypoints[i + 1]);
    for k in 0..out.len() {
        out[k] = 2.0 * ((c[k] - b[k]) / h2 - (b[k] - a[k]) / h1) / (h1 + h2);
    }
}

/// `Σ_k q̈_k²` at every interior waypoint together with that waypoint's time.
pub fn squared_accelerations(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    traj.validate()?;
    if traj.len() < 3 {
        return invalid("acceleration metrics need at least three waypoints");
    }
    let mut acc = vec![0.0; traj.dof()];
    Ok((1..traj.len() - 1)
        .map(|i| {
            acceleration_at(&traj.times, &traj.waypoints, i, &mut acc);
            (traj.times[i], acc.iter().map(|a| a * a).sum())
        })
        .collect())
}

/// Trapezoid integral of `Σ q̈²` over interior waypoints, divided by the
/// integration span. A single interior waypoint returns its value.
pub fn smoothness(traj: &Trajectory) -> Result<f64> {
    let sq = squared_accelerations(traj)?;
    if sq.len() == 1 {
        return Ok(sq[0].1);
    }
    let span = sq.last().expect("non-empty").0 - sq[0].0;
    let integral: f64 = sq.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Ok(integral / span)
}

/// Largest `Σ q̈²` over interior waypoints.
pub fn jerkiness(traj: &Trajectory) -> Result<f64> {
    Ok(squared_accelerations(traj)?.into_iter().map(|(_, v)| v).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola(a: f64, n: usize, dt: f64) -> Trajectory {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let waypoints = times.iter().map(|t| vec![0.5 * a * t * t, 1.0]).collect();
        Trajectory::new(times, waypoints).unwrap()
    }

    #[test]
    fn uniform_velocity_is_flat() {
        let t = Trajectory::straight_line(&[0.0, 1.0], &[2.0, -1.0], 10, 0.0, 0.3).unwrap();
        assert!(smoothness(&t).unwrap() < 1e-20);
        assert!(jerkiness(&t).unwrap() < 1e-20);
    }

    #[test]
    fn constant_acceleration_closed_form() {
        let t = parabola(1.7, 12, 0.2);
        assert!((smoothness(&t).unwrap() - 1.7f64.powi(2)).abs() < 1e-9);
        assert!((jerkiness(&t).unwrap() - 1.7f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn time_compression_scales_by_sixteen() {
        let mut t = Trajectory::straight_line(&[0.0], &[1.0], 8, 0.0, 0.25).unwrap();
        for (i, w) in t.waypoints.iter_mut().enumerate() {
            w[0] += (i as f64 * 0.7).sin();
        }
        let base = smoothness(&t).unwrap();
        let fast = Trajectory::new(t.times.iter().map(|x| x / 2.0).collect(), t.waypoints.clone()).unwrap();
        assert!((smoothness(&fast).unwrap() / base - 16.0).abs() < 1e-6 * 16.0);
    }

    #[test]
    fn rejects_short_or_unordered() {
        let t = Trajectory::straight_line(&[0.0], &[1.0], 1, 0.0, 1.0).unwrap();
        assert!(smoothness(&t).is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
    }
}
