//! Preconditioned numerical-gradient descent over free waypoints and its
//! multi-start wrapper.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{dynamic_center_gradient, smooth_term, speed_term, static_term, total_cost, trajectory_cost, CostBreakdown, PlanContext};
use super::trajectory::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::geometry::{check_confidence, robot_spheres, Sphere};
use crate::rng::{rng_for, stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimBudget {
    pub iterations: usize,
    /// Central-difference step (rad).
    pub fd_step: f64,
    /// Largest joint change per accepted step (rad).
    pub max_step: f64,
    /// Stop once an iteration improves the cost by less than this fraction.
    pub rel_tol: f64,
}

impl Default for OptimBudget {
    fn default() -> Self {
        OptimBudget { iterations: 60, fd_step: 1e-5, max_step: 0.4, rel_tol: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimOutcome {
    pub trajectory: Trajectory,
    pub cost: CostBreakdown,
    pub status: OptimStatus,
    pub iterations: usize,
    /// Every windowed frame passes the confidence check and no static
    /// obstacle is penetrated.
    pub feasible: bool,
}

/// Feasibility of a trajectory in its context.
pub fn is_feasible(traj: &Trajectory, cost: &CostBreakdown, ctx: &PlanContext) -> Result<bool> {
    for &(_, p) in &cost.frame_probabilities {
        if !check_confidence(p, ctx.delta)? {
            return Ok(false);
        }
    }
    for q in &traj.waypoints {
        let spheres = robot_spheres(&ctx.chain, q)?;
        if spheres.iter().any(|a| ctx.statics.iter().any(|o| a.surface_distance(o) < 0.0)) {
            return Ok(false);
        }
    }
    Ok(max_joint_speed(traj) <= ctx.max_joint_speed * (1.0 + SPEED_TOLERANCE))
}

/// Relative overshoot of the joint speed limit tolerated by the
/// feasibility check; the penalty leaves a small residual.
const SPEED_TOLERANCE: f64 = 0.05;

/// Largest joint speed over all segments (rad/s).
pub fn max_joint_speed(traj: &Trajectory) -> f64 {
    traj.times
        .windows(2)
        .zip(traj.waypoints.windows(2))
        .flat_map(|(t, w)| w[0].iter().zip(&w[1]).map(move |(a, b)| (b - a).abs() / (t[1] - t[0])))
        .fold(0.0, f64::max)
}

struct Problem<'a> {
    ctx: &'a PlanContext,
    first: usize,
    last: usize,
    window: std::ops::RangeInclusive<usize>,
}

impl Problem<'_> {
    /// Cost terms other than the dynamic one that depend on waypoint `i`,
    /// with `q` substituted for it, and the robot spheres at `q`.
    fn local(&self, traj: &mut Trajectory, i: usize, q: &[f64]) -> Result<(f64, Vec<Sphere>)> {
        let saved = std::mem::replace(&mut traj.waypoints[i], q.to_vec());
        let n = traj.len();
        let mut buf = vec![0.0; traj.dof()];
        let mut smooth = 0.0;
        for j in i.saturating_sub(1)..=(i + 1) {
            if j >= 1 && j + 1 < n {
                smooth += smooth_term(&traj.times, &traj.waypoints, j, &mut buf);
            }
        }
        let mut speed = 0.0;
        for j in i.saturating_sub(1)..=i {
            if j + 1 < n {
                speed += speed_term(self.ctx, &traj.times, &traj.waypoints, j);
            }
        }
        traj.waypoints[i] = saved;
        let spheres = robot_spheres(&self.ctx.chain, q)?;
        let w = self.ctx.weights;
        let c = w.smoothness * smooth + w.speed * speed + w.static_collision * static_term(self.ctx, &spheres);
        Ok((c, spheres))
    }

    /// The dynamic term is a maximum over sphere pairs, so away from ties
    /// its gradient flows through the center of the attaining robot sphere
    /// alone.
    fn gradient(&self, traj: &Trajectory, h: f64) -> Result<Vec<Vec<f64>>> {
        let mut work = traj.clone();
        let w_dyn = self.ctx.weights.dynamic_collision;
        (self.first..=self.last)
            .map(|i| {
                let mut q = traj.waypoints[i].clone();
                let active = if self.window.contains(&i) {
                    let spheres = robot_spheres(&self.ctx.chain, &q)?;
                    dynamic_center_gradient(self.ctx, i, &spheres, h)
                } else {
                    None
                };
                (0..q.len())
                    .map(|k| {
                        let x = q[k];
                        q[k] = x + h;
                        let (up, s_up) = self.local(&mut work, i, &q)?;
                        q[k] = x - h;
                        let (down, s_down) = self.local(&mut work, i, &q)?;
                        q[k] = x;
                        let mut g = (up - down) / (2.0 * h);
                        if let Some((bi, cg)) = active {
                            let (a, b) = (s_up[bi].center, s_down[bi].center);
                            g += w_dyn * (0..3).map(|d| cg[d] * (a[d] - b[d]) / (2.0 * h)).sum::<f64>();
                        }
                        Ok(g)
                    })
                    .collect()
            })
            .collect()
    }

    /// Hessian of the smoothness term over the free waypoints (shared by
    /// every joint).
    fn preconditioner(&self, traj: &Trajectory) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let f = self.last - self.first + 1;
        let mut h = DMatrix::<f64>::zeros(f, f);
        let t = &traj.times;
        for i in 1..traj.len() - 1 {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            let c = [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))];
            let w = 0.5 * (t[i + 1] - t[i - 1]) * self.ctx.weights.smoothness;
            for (a, ca) in c.iter().enumerate() {
                for (b, cb) in c.iter().enumerate() {
                    let (ia, ib) = (i - 1 + a, i - 1 + b);
                    if (self.first..=self.last).contains(&ia) && (self.first..=self.last).contains(&ib) {
                        h[(ia - self.first, ib - self.first)] += 2.0 * w * ca * cb;
                    }
                }
            }
        }
        let scale = (0..f).map(|k| h[(k, k)]).fold(0.0, f64::max).max(1e-12);
        for k in 0..f {
            h[(k, k)] += 1e-9 * scale;
        }
        h.cholesky().ok_or_else(|| Error::NotPositiveDefinite("smoothness preconditioner".into()))
    }
}

/// Descends on the free waypoints `[ctx.frozen, len - 2]` of `initial`.
/// Accepted steps never increase the total cost.
pub fn optimize_trajectory(initial: &Trajectory, ctx: &PlanContext, budget: &OptimBudget) -> Result<OptimOutcome> {
    if budget.iterations == 0 || !(budget.fd_step > 0.0) {
        return invalid("optimization budget must allow at least one iteration with a positive step");
    }
    initial.validate()?;
    let mut traj = initial.clone();
    for w in traj.waypoints.iter_mut().skip(ctx.frozen).take(initial.len().saturating_sub(ctx.frozen + 1)) {
        ctx.chain.clamp(w);
    }
    let n = traj.len();
    let first = ctx.frozen.max(1);
    if n < 3 || first > n - 2 {
        let cost = trajectory_cost(&traj, ctx)?;
        let feasible = is_feasible(&traj, &cost, ctx)?;
        return Ok(OptimOutcome { trajectory: traj, cost, status: OptimStatus::Converged, iterations: 0, feasible });
    }
    let prob = Problem { ctx, first, last: n - 2, window: ctx.window(n)? };
    let chol = prob.preconditioner(&traj)?;
    let mut total = total_cost(&traj, ctx)?;
    let mut status = OptimStatus::BudgetExhausted;
    let mut iterations = 0;
    for _ in 0..budget.iterations {
        iterations += 1;
        let g = prob.gradient(&traj, budget.fd_step)?;
        let dof = traj.dof();
        // d = -H⁻¹ g, joint by joint
        let mut d = vec![vec![0.0; dof]; g.len()];
        for k in 0..dof {
            let col = DVector::from_iterator(g.len(), g.iter().map(|r| r[k]));
            let sol = chol.solve(&col);
            for (r, v) in d.iter_mut().zip(sol.iter()) {
                r[k] = -v;
            }
        }
        let largest = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if largest > budget.max_step {
            let s = budget.max_step / largest;
            d.iter_mut().flatten().for_each(|v| *v *= s);
        }
        let slope: f64 = g.iter().flatten().zip(d.iter().flatten()).map(|(a, b)| a * b).sum();
        if !(slope < -1e-14) {
            status = OptimStatus::Converged;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut cand = traj.clone();
            for (row, step) in cand.waypoints[first..=n - 2].iter_mut().zip(&d) {
                for (v, s) in row.iter_mut().zip(step) {
                    *v += alpha * s;
                }
                ctx.chain.clamp(row);
            }
            let c = total_cost(&cand, ctx)?;
            if c <= total + 1e-4 * alpha * slope {
                accepted = Some((cand, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, c)) = accepted else {
            status = OptimStatus::Converged;
            break;
        };
        let gain = total - c;
        traj = cand;
        total = c;
        if gain <= budget.rel_tol * total.max(1e-12) {
            status = OptimStatus::Converged;
            break;
        }
    }
    let cost = trajectory_cost(&traj, ctx)?;
    let feasible = is_feasible(&traj, &cost, ctx)?;
    Ok(OptimOutcome { trajectory: traj, cost, status, iterations, feasible })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: usize,
    pub cost: f64,
    pub feasible: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartResult {
    pub best: OptimOutcome,
    pub starts: Vec<StartOutcome>,
    /// True when at least one start produced a feasible trajectory.
    pub feasible: bool,
}

/// Start `k > 0`: `base` plus a joint-wise Gaussian offset of standard
/// deviation `scale` shaped by a half sine over the free waypoints.
pub fn perturbed_start(base: &Trajectory, ctx: &PlanContext, scale: f64, seed: u64, k: usize) -> Trajectory {
    let mut t = base.clone();
    if k == 0 {
        return t;
    }
    let n = t.len();
    let first = ctx.frozen.max(1);
    if n < 3 || first > n - 2 {
        return t;
    }
    let mut rng = rng_for(seed, stream::PLANNER, k as u64);
    let offset: Vec<f64> = (0..t.dof()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let span = (n - 1 - (first - 1)) as f64;
    for i in first..=n - 2 {
        let u = (i - (first - 1)) as f64 / span;
        let shape = (std::f64::consts::PI * u).sin();
        for (v, o) in t.waypoints[i].iter_mut().zip(&offset) {
            *v += shape * o;
        }
        ctx.chain.clamp(&mut t.waypoints[i]);
    }
    t
}

/// Runs `n_starts` independent optimizations and keeps the cheapest
/// feasible one (or the cheapest overall when none is feasible).
pub fn multi_start_plan(
    base: &Trajectory,
    ctx: &PlanContext,
    budget: &OptimBudget,
    n_starts: usize,
    perturbation: f64,
    seed: u64,
) -> Result<MultiStartResult> {
    if n_starts == 0 {
        return invalid("multi-start planning needs at least one start");
    }
    let outcomes: Vec<OptimOutcome> = (0..n_starts)
        .into_par_iter()
        .map(|k| optimize_trajectory(&perturbed_start(base, ctx, perturbation, seed, k), ctx, budget))
        .collect::<Result<_>>()?;
    let starts = outcomes
        .iter()
        .enumerate()
        .map(|(start, o)| StartOutcome { start, cost: o.cost.total, feasible: o.feasible, iterations: o.iterations })
        .collect();
    let feasible = outcomes.iter().any(|o| o.feasible);
    let best = outcomes
        .into_iter()
        .filter(|o| o.feasible || !feasible)
        .min_by(|a, b| a.cost.total.total_cmp(&b.cost.total))
        .expect("at least one start");
    Ok(MultiStartResult { best, starts, feasible })
}
