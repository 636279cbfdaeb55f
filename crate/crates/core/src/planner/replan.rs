//! Receding-horizon execution: run the segment planned last cycle while the
//! next window is optimized against a fresh prediction.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::cost::{trajectory_cost, PlanContext};
use super::optimize::{multi_start_plan, OptimBudget};
use super::trajectory::Trajectory;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanParams {
    pub n_starts: usize,
    /// Standard deviation of start perturbations (rad).
    pub perturbation: f64,
    pub budget: OptimBudget,
    pub seed: u64,
}

impl Default for ReplanParams {
    fn default() -> Self {
        ReplanParams { n_starts: 4, perturbation: 0.3, budget: OptimBudget::default(), seed: 0 }
    }
}

/// Copies waypoint `at` `count` times right after itself, spaced `dt`
/// apart, and delays everything that follows by `count · dt`.
pub fn insert_wait(traj: &Trajectory, at: usize, count: usize, dt: f64) -> Result<Trajectory> {
    if at >= traj.len() {
        return invalid(format!("wait index {at} outside trajectory of {} waypoints", traj.len()));
    }
    if !(dt > 0.0) {
        return invalid("wait spacing must be positive");
    }
    let shift = count as f64 * dt;
    let mut times = traj.times[..=at].to_vec();
    let mut waypoints = traj.waypoints[..=at].to_vec();
    for k in 1..=count {
        times.push(traj.times[at] + k as f64 * dt);
        waypoints.push(traj.waypoints[at].clone());
    }
    times.extend(traj.times[at + 1..].iter().map(|t| t + shift));
    waypoints.extend_from_slice(&traj.waypoints[at + 1..]);
    Trajectory::new(times, waypoints)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub sim_time: f64,
    /// Waypoint indices and configurations executed during this step.
    pub executed: Vec<(f64, Vec<f64>)>,
    /// Collision bounds of the windowed frames in the committed plan.
    pub frame_bounds: Vec<(f64, f64)>,
    pub wait_inserted: bool,
    pub per_start_costs: Vec<f64>,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub plan: Trajectory,
    pub s: usize,
    pub m: usize,
    pub dt: f64,
    pub started: bool,
    pub waits: usize,
    pub steps: usize,
}

impl PlannerState {
    /// Straight-line plan of `segments` steps of `dt` from `start` to `goal`.
    pub fn new(start: &[f64], goal: &[f64], segments: usize, t0: f64, dt: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("replanning step must be at least one waypoint");
        }
        Ok(PlannerState {
            plan: Trajectory::straight_line(start, goal, segments, t0, dt)?,
            s: 0,
            m,
            dt,
            started: false,
            waits: 0,
            steps: 0,
        })
    }

    pub fn done(&self) -> bool {
        self.started && self.s + 1 >= self.plan.len()
    }

    pub fn current_time(&self) -> f64 {
        self.plan.times[self.s]
    }

    pub fn current_config(&self) -> &[f64] {
        &self.plan.waypoints[self.s]
    }

    /// Total hold time inserted so far.
    pub fn delay(&self) -> f64 {
        self.waits as f64 * self.m as f64 * self.dt
    }

    /// Waypoints whose predicted human frames the next step evaluates.
    pub fn pending_window(&self) -> Option<RangeInclusive<usize>> {
        let last = self.plan.len() - 1;
        let (a, b) = if self.started { (self.s + self.m, self.s + 2 * self.m) } else { (0, 2 * self.m) };
        (a <= last && !self.done()).then(|| a..=b.min(last))
    }

    pub fn time_of(&self, i: usize) -> f64 {
        self.plan.times[i]
    }
}

/// One replanning cycle. `ctx` must carry human frames for
/// [`PlannerState::pending_window`]; its `s`, `frozen` and window fields are
/// overwritten.
pub fn replan_step(state: &mut PlannerState, ctx: &mut PlanContext, params: &ReplanParams) -> Result<StepRecord> {
    if state.done() {
        return invalid("plan already finished");
    }
    let m = state.m;
    ctx.m = m;
    let hold_at = if state.started { state.s + m } else { 0 };
    let window = state.pending_window();
    if state.started {
        ctx.s = state.s;
        ctx.frozen = state.s + m + 1;
        ctx.window_override = None;
    } else {
        ctx.s = 0;
        ctx.frozen = 1;
        ctx.window_override = window.clone();
    }
    let sim_time = state.current_time();
    let mut per_start_costs = Vec::new();
    let mut wait_inserted = false;
    let mut feasible = true;
    let free = state.plan.len() >= 3 && ctx.frozen <= state.plan.len() - 2;
    if let (Some(_), true) = (&window, free) {
        let seed = derive_seed(params.seed, stream::PLANNER, state.steps as u64);
        let res = multi_start_plan(&state.plan, ctx, &params.budget, params.n_starts, params.perturbation, seed)?;
        per_start_costs = res.starts.iter().map(|s| s.cost).collect();
        feasible = res.feasible;
        if res.feasible {
            state.plan = res.best.trajectory;
        } else {
            state.plan = insert_wait(&state.plan, hold_at, m, state.dt)?;
            state.waits += 1;
            wait_inserted = true;
        }
    }
    let frame_bounds = match &window {
        Some(_) => trajectory_cost(&state.plan, ctx)?
            .frame_probabilities
            .into_iter()
            .map(|(i, p)| (state.plan.times[i], p))
            .collect(),
        None => Vec::new(),
    };
    let last = state.plan.len() - 1;
    let from = state.s;
    let to = (state.s + m).min(last);
    let executed = (from..=to).map(|i| (state.plan.times[i], state.plan.waypoints[i].clone())).collect();
    state.s = to;
    state.started = true;
    state.steps += 1;
    Ok(StepRecord {
        step: state.steps - 1,
        sim_time,
        executed,
        frame_bounds,
        wait_inserted,
        per_start_costs,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::planar_two_link;

    #[test]
    fn wait_insertion_shapes() {
        let t = Trajectory::straight_line(&[0.0, 0.0], &[1.0, 1.0], 6, 0.0, 0.5).unwrap();
        let w = insert_wait(&t, 2, 1, 0.5).unwrap();
        assert_eq!(w.len(), t.len() + 1);
        assert_eq!(w.waypoints[3], t.waypoints[2]);
        assert_eq!(w.last(), t.last());
        assert!((w.duration() - t.duration() - 0.5).abs() < 1e-12);
        let mut k = t.clone();
        for _ in 0..3 {
            k = insert_wait(&k, 0, 2, 0.25).unwrap();
        }
        assert!((k.duration() - t.duration() - 3.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_replanning_matches_one_shot() {
        let chain = planar_two_link();
        let mut ctx = PlanContext::new(chain, 0.95, 2).unwrap();
        let mut state = PlannerState::new(&[0.0, 0.0], &[1.0, -1.0], 10, 0.0, 0.25, 2).unwrap();
        let one_shot = state.plan.clone();
        let params = ReplanParams::default();
        let mut executed: Vec<(f64, Vec<f64>)> = Vec::new();
        while !state.done() {
            let rec = replan_step(&mut state, &mut ctx, &params).unwrap();
            assert!(rec.feasible && !rec.wait_inserted);
            let skip = usize::from(!executed.is_empty());
            executed.extend(rec.executed.into_iter().skip(skip));
        }
        assert_eq!(executed.len(), one_shot.len());
        for ((t, q), (t0, q0)) in executed.iter().zip(one_shot.times.iter().zip(&one_shot.waypoints)) {
            assert_eq!(t, t0);
            for (a, b) in q.iter().zip(q0) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
