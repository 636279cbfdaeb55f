//! Trajectory cost: smoothness, static penetration and windowed dynamic
//! collision probability.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::trajectory::{acceleration_at, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    bound_factored, factor_cov, robot_spheres, BoundOptions, Factored, GaussianSphere, KinematicChain, Sphere,
};
use crate::motion::Point3;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const NEGLIGIBLE: f64 = 37.0;
pub const DEFAULT_MAX_JOINT_SPEED: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub smoothness: f64,
    pub static_collision: f64,
    pub dynamic_collision: f64,
    #[serde(default = "default_speed_weight")]
    pub speed: f64,
}

fn default_speed_weight() -> f64 {
    1e3
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { smoothness: 1.0, static_collision: 1e3, dynamic_collision: 1e2, speed: default_speed_weight() }
    }
}

/// Predicted human spheres at one instant: a weighted mixture of sphere
/// sets with identical layout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanFrame {
    pub components: Vec<(f64, Vec<GaussianSphere>)>,
}

impl HumanFrame {
    pub fn single(spheres: Vec<GaussianSphere>) -> Self {
        HumanFrame { components: vec![(1.0, spheres)] }
    }
}

#[derive(Clone, Debug)]
struct PreparedSphere {
    mean: Point3,
    radius: f64,
    f: Factored,
    var_max: f64,
    var_mean: f64,
}

#[derive(Clone, Debug)]
struct PreparedComponent {
    weight: f64,
    ln_weight: f64,
    spheres: Vec<PreparedSphere>,
    hull: Hull,
}

/// Ball enclosing every sphere of a component, with the extreme
/// covariance statistics, for pruning whole components at once.
#[derive(Clone, Debug)]
struct Hull {
    center: Point3,
    reach: f64,
    max_radius: f64,
    min_log_det: f64,
    var_max: f64,
    var_mean_min: f64,
}

impl Hull {
    fn new(spheres: &[PreparedSphere]) -> Self {
        let n = spheres.len().max(1) as f64;
        let mut center = [0.0; 3];
        for s in spheres {
            for k in 0..3 {
                center[k] += s.mean[k] / n;
            }
        }
        let fold = |f: &dyn Fn(&PreparedSphere) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
            spheres.iter().map(f).fold(init, pick)
        };
        Hull {
            center,
            reach: fold(&|s| dist(s.mean, center) + s.radius, 0.0, f64::max),
            max_radius: fold(&|s| s.radius, 0.0, f64::max),
            min_log_det: fold(&|s| s.f.log_det, f64::INFINITY, f64::min),
            var_max: fold(&|s| s.var_max, 0.0, f64::max),
            var_mean_min: fold(&|s| s.var_mean, f64::INFINITY, f64::min),
        }
    }

    /// Upper bound on `log_upper` over every sphere of the component.
    fn log_upper(&self, b: &Sphere, opts: BoundOptions) -> f64 {
        let r = self.max_radius + b.radius;
        let d = dist(self.center, b.center);
        let gap = (d - self.reach - b.radius).max(0.0);
        let depth = (r + self.reach - d).clamp(0.0, r);
        log_volume(r, opts) - 0.5 * (3.0 * LN_2PI + self.min_log_det) - 0.5 * gap * gap / self.var_max
            + 0.5 * depth * depth / self.var_mean_min
    }
}

/// Frame with factored covariances, ready for repeated evaluation.
#[derive(Clone, Debug, Default)]
pub struct PreparedFrame {
    components: Vec<PreparedComponent>,
    layout: usize,
}

impl PreparedFrame {
    pub fn new(frame: &HumanFrame) -> Result<Self> {
        let layout = frame.components.first().map_or(0, |c| c.1.len());
        let mut components = Vec::with_capacity(frame.components.len());
        for (w, spheres) in &frame.components {
            if !(*w >= 0.0 && w.is_finite()) {
                return invalid(format!("mixture weight {w} must be non-negative"));
            }
            if spheres.len() != layout {
                return Err(Error::DimensionMismatch { expected: layout, actual: spheres.len() });
            }
            if *w == 0.0 {
                continue;
            }
            let spheres = spheres
                .iter()
                .map(|g| {
                    if !(g.radius > 0.0) {
                        return invalid("human sphere radius must be positive");
                    }
                    let f = factor_cov(&g.cov)?;
                    Ok(PreparedSphere {
                        mean: g.mean,
                        radius: g.radius,
                        var_max: f.values.max(),
                        var_mean: f.values.sum() / 3.0,
                        f,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let hull = Hull::new(&spheres);
            components.push(PreparedComponent { weight: *w, ln_weight: w.ln(), spheres, hull });
        }
        Ok(PreparedFrame { components, layout })
    }

    pub fn is_empty(&self) -> bool {
        self.layout == 0 || self.components.is_empty()
    }

    /// Upper bound on the extended log bound of one pair.
    fn log_upper(s: &PreparedSphere, b: &Sphere, opts: BoundOptions) -> f64 {
        let r = s.radius + b.radius;
        let d = dist(s.mean, b.center);
        let gap = (d - r).max(0.0);
        let depth = (r - d).max(0.0);
        log_volume(r, opts) - 0.5 * (3.0 * LN_2PI + s.f.log_det) - 0.5 * gap * gap / s.var_max
            + 0.5 * depth * depth / s.var_mean
    }

    /// Exact log bound, continued inside the ball by a quadratic in the
    /// penetration so that deeper overlap keeps increasing the value.
    fn log_extended(s: &PreparedSphere, b: &Sphere, opts: BoundOptions) -> f64 {
        let r = s.radius + b.radius;
        let res = bound_factored(b.center, r, s.mean, &s.f, opts);
        if res.interior {
            res.log_bound + 0.5 * res.separation * res.separation / s.var_mean
        } else {
            res.log_bound
        }
    }

    /// Max over pairs of the mixture bound, clamped to `[0, 1]`.
    pub fn probability(&self, robot: &[Sphere], opts: BoundOptions) -> f64 {
        let mut best: f64 = 0.0;
        for b in robot {
            let hull: f64 = self.components.iter().map(|c| c.weight * c.hull.log_upper(b, opts).exp().min(1.0)).sum();
            if hull <= best {
                continue;
            }
            for l in 0..self.layout {
                let ub: f64 =
                    self.components.iter().map(|c| c.weight * Self::log_upper(&c.spheres[l], b, opts).exp().min(1.0)).sum();
                if ub <= best {
                    continue;
                }
                let exact: f64 = self
                    .components
                    .iter()
                    .map(|c| {
                        let s = &c.spheres[l];
                        c.weight * bound_factored(b.center, s.radius + b.radius, s.mean, &s.f, opts).bound
                    })
                    .sum();
                best = best.max(exact);
            }
        }
        best.min(1.0)
    }

    /// `max(0, L - ln_target)` where `L` is the largest log-mixture of
    /// extended pair bounds.
    pub fn log_excess(&self, robot: &[Sphere], ln_target: f64, opts: BoundOptions) -> f64 {
        let (best, _) = self.active_pair(robot, ln_target, opts);
        best - ln_target
    }

    /// `max(ln_target, L)` and the `(robot sphere, limb sphere)` pair
    /// attaining `L` when it exceeds `ln_target`.
    pub(crate) fn active_pair(&self, robot: &[Sphere], ln_target: f64, opts: BoundOptions) -> (f64, Option<(usize, usize)>) {
        let mut terms = Vec::with_capacity(self.components.len());
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, b) in robot.iter().enumerate() {
            terms.clear();
            terms.extend(self.components.iter().map(|c| c.ln_weight + c.hull.log_upper(b, opts)));
            if log_sum_exp(&terms) <= ln_target {
                continue;
            }
            for l in 0..self.layout {
                terms.clear();
                terms.extend(self.components.iter().map(|c| c.ln_weight + Self::log_upper(&c.spheres[l], b, opts)));
                let ub = log_sum_exp(&terms);
                if ub > ln_target {
                    candidates.push((ub, bi, l));
                }
            }
        }
        // most promising pairs first so that the running maximum prunes the rest
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best = ln_target;
        let mut arg = None;
        for &(ub, bi, l) in &candidates {
            if ub <= best {
                break;
            }
            let v = self.pair_log_mixture(l, &robot[bi], opts);
            if v > best {
                best = v;
                arg = Some((bi, l));
            }
        }
        (best, arg)
    }

    /// Log-mixture of extended bounds of robot sphere `b` against limb
    /// sphere `l`.
    pub(crate) fn pair_log_mixture(&self, l: usize, b: &Sphere, opts: BoundOptions) -> f64 {
        let mut uppers: Vec<(f64, usize)> = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| (c.ln_weight + Self::log_upper(&c.spheres[l], b, opts), k))
            .collect();
        uppers.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut terms = Vec::with_capacity(uppers.len());
        let mut acc = f64::NEG_INFINITY;
        for &(u, k) in &uppers {
            // later terms cannot move the sum in double precision
            if u < acc - NEGLIGIBLE {
                break;
            }
            let c = &self.components[k];
            terms.push(c.ln_weight + Self::log_extended(&c.spheres[l], b, opts));
            acc = log_sum_exp(&terms);
        }
        acc
    }
}

fn log_volume(r: f64, opts: BoundOptions) -> f64 {
    let e = if opts.paper_literal_bound { 2.0 } else { 3.0 };
    (4.0 / 3.0 * std::f64::consts::PI).ln() + e * r.ln()
}

fn dist(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Collision probability bound of one configuration against one frame.
pub fn frame_collision_probability(
    q: &[f64],
    frame: &HumanFrame,
    chain: &KinematicChain,
    opts: BoundOptions,
) -> Result<f64> {
    let prepared = PreparedFrame::new(frame)?;
    Ok(prepared.probability(&robot_spheres(chain, q)?, opts))
}

/// Everything the optimizer needs besides the trajectory itself.
#[derive(Clone, Debug)]
pub struct PlanContext {
    pub chain: KinematicChain,
    pub statics: Vec<Sphere>,
    /// Clearance below which static obstacles are penalized (m).
    pub static_margin: f64,
    pub delta: f64,
    /// The dynamic hinge activates above `hinge_margin · (1 - δ)`.
    pub hinge_margin: f64,
    pub weights: CostWeights,
    pub bound: BoundOptions,
    /// Replanning step in waypoints.
    pub m: usize,
    /// Current execution index.
    pub s: usize,
    /// Leading waypoints that the optimizer may not move.
    pub frozen: usize,
    /// Override of the dynamic window; defaults to `[s + m, s + 2m]`.
    pub window_override: Option<RangeInclusive<usize>>,
    /// Joint speed limit (rad/s).
    pub max_joint_speed: f64,
    human: BTreeMap<usize, PreparedFrame>,
}

impl PlanContext {
    pub fn new(chain: KinematicChain, delta: f64, m: usize) -> Result<Self> {
        chain.validate()?;
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("confidence level {delta} must lie in (0, 1)"));
        }
        if m == 0 {
            return invalid("replanning step must be at least one waypoint");
        }
        Ok(PlanContext {
            chain,
            statics: Vec::new(),
            static_margin: 0.02,
            delta,
            hinge_margin: 0.5,
            weights: CostWeights::default(),
            bound: BoundOptions::default(),
            m,
            s: 0,
            frozen: 1,
            window_override: None,
            max_joint_speed: DEFAULT_MAX_JOINT_SPEED,
            human: BTreeMap::new(),
        })
    }

    /// Attach the predicted human frame for waypoint `index`.
    pub fn set_human(&mut self, index: usize, frame: &HumanFrame) -> Result<()> {
        self.human.insert(index, PreparedFrame::new(frame)?);
        Ok(())
    }

    pub fn clear_human(&mut self) {
        self.human.clear();
    }

    pub fn human_frame(&self, index: usize) -> Option<&PreparedFrame> {
        self.human.get(&index)
    }

    /// Dynamic window clipped to the trajectory; rejected when it starts past
    /// the last waypoint.
    pub fn window(&self, len: usize) -> Result<RangeInclusive<usize>> {
        let (a, b) = match &self.window_override {
            Some(w) => (*w.start(), *w.end()),
            None => (self.s + self.m, self.s + 2 * self.m),
        };
        if len == 0 || a > len - 1 || a > b {
            return Err(Error::OutOfRange(format!("dynamic window [{a}, {b}] outside trajectory of {len} waypoints")));
        }
        Ok(a..=b.min(len - 1))
    }

    pub fn ln_target(&self) -> f64 {
        (self.hinge_margin * (1.0 - self.delta)).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub smoothness: f64,
    pub static_collision: f64,
    /// Squared excess of segment joint speeds over the limit.
    pub speed: f64,
    /// Sum of windowed frame probabilities.
    pub dynamic_collision: f64,
    /// Hinge penalty that enters the total.
    pub dynamic_penalty: f64,
    pub frame_probabilities: Vec<(usize, f64)>,
    pub total: f64,
}

/// Squared acceleration of interior waypoint `i` times its trapezoid weight.
pub(crate) fn smooth_term(times: &[f64], wps: &[Vec<f64>], i: usize, buf: &mut [f64]) -> f64 {
    acceleration_at(times, wps, i, buf);
    let w = 0.5 * (times[i + 1] - times[i - 1]);
    w * buf.iter().map(|a| a * a).sum::<f64>()
}

/// Squared joint-speed excess of the segment `i → i + 1`.
pub(crate) fn speed_term(ctx: &PlanContext, times: &[f64], wps: &[Vec<f64>], i: usize) -> f64 {
    let dt = times[i + 1] - times[i];
    wps[i]
        .iter()
        .zip(&wps[i + 1])
        .map(|(a, b)| ((b - a).abs() / dt - ctx.max_joint_speed).max(0.0).powi(2))
        .sum()
}

pub(crate) fn static_term(ctx: &PlanContext, spheres: &[Sphere]) -> f64 {
    let mut total = 0.0;
    for a in spheres {
        for o in &ctx.statics {
            let gap = ctx.static_margin - a.surface_distance(o);
            if gap > 0.0 {
                total += gap * gap;
            }
        }
    }
    total
}

pub(crate) fn dynamic_term(ctx: &PlanContext, i: usize, spheres: &[Sphere]) -> f64 {
    match ctx.human.get(&i) {
        Some(f) if !f.is_empty() => {
            let e = f.log_excess(spheres, ctx.ln_target(), ctx.bound);
            e * e
        }
        _ => 0.0,
    }
}

/// Gradient of `dynamic_term` with respect to the center of the one robot
/// sphere that attains the largest pair bound, by central differences of
/// step `h` (m). `None` when the hinge is inactive.
pub(crate) fn dynamic_center_gradient(ctx: &PlanContext, i: usize, spheres: &[Sphere], h: f64) -> Option<(usize, Point3)> {
    let frame = ctx.human.get(&i).filter(|f| !f.is_empty())?;
    let ln_target = ctx.ln_target();
    let (best, arg) = frame.active_pair(spheres, ln_target, ctx.bound);
    let (bi, l) = arg?;
    let excess = best - ln_target;
    let mut grad = [0.0; 3];
    for (a, g) in grad.iter_mut().enumerate() {
        let mut s = spheres[bi];
        s.center[a] += h;
        let up = frame.pair_log_mixture(l, &s, ctx.bound);
        s.center[a] -= 2.0 * h;
        let down = frame.pair_log_mixture(l, &s, ctx.bound);
        *g = 2.0 * excess * (up - down) / (2.0 * h);
    }
    Some((bi, grad))
}

/// Full cost breakdown of a trajectory.
pub fn trajectory_cost(traj: &Trajectory, ctx: &PlanContext) -> Result<CostBreakdown> {
    evaluate(traj, ctx, true)
}

/// Weighted total only; skips the reported frame probabilities.
pub(crate) fn total_cost(traj: &Trajectory, ctx: &PlanContext) -> Result<f64> {
    Ok(evaluate(traj, ctx, false)?.total)
}

fn evaluate(traj: &Trajectory, ctx: &PlanContext, report: bool) -> Result<CostBreakdown> {
    traj.validate()?;
    if traj.dof() != ctx.chain.dof() {
        return Err(Error::DimensionMismatch { expected: ctx.chain.dof(), actual: traj.dof() });
    }
    let window = ctx.window(traj.len())?;
    let mut buf = vec![0.0; traj.dof()];
    let n = traj.len();
    let smoothness: f64 = (1..n.saturating_sub(1)).map(|i| smooth_term(&traj.times, &traj.waypoints, i, &mut buf)).sum();
    let speed: f64 = (0..n.saturating_sub(1)).map(|i| speed_term(ctx, &traj.times, &traj.waypoints, i)).sum();
    let mut static_collision = 0.0;
    let mut dynamic_penalty = 0.0;
    let mut frame_probabilities = Vec::new();
    for (i, q) in traj.waypoints.iter().enumerate() {
        let spheres = robot_spheres(&ctx.chain, q)?;
        static_collision += static_term(ctx, &spheres);
        if window.contains(&i) {
            if report {
                let p = ctx.human.get(&i).map_or(0.0, |f| f.probability(&spheres, ctx.bound));
                frame_probabilities.push((i, p));
            }
            dynamic_penalty += dynamic_term(ctx, i, &spheres);
        }
    }
    let w = ctx.weights;
    let total = w.smoothness * smoothness
        + w.speed * speed
        + w.static_collision * static_collision
        + w.dynamic_collision * dynamic_penalty;
    Ok(CostBreakdown {
        smoothness,
        static_collision,
        speed,
        dynamic_collision: frame_probabilities.iter().map(|p| p.1).sum(),
        dynamic_penalty,
        frame_probabilities,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{collision_bound, isotropic, planar_two_link};

    fn ctx() -> PlanContext {
        PlanContext::new(planar_two_link(), 0.95, 2).unwrap()
    }

    #[test]
    fn empty_frame_has_zero_probability() {
        let c = planar_two_link();
        assert_eq!(frame_collision_probability(&[0.0, 0.0], &HumanFrame::default(), &c, BoundOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn pruned_max_matches_brute_force() {
        use rand::Rng;
        let chain = planar_two_link();
        let mut rng = crate::rng::rng_for(3, crate::rng::stream::DATA, 0);
        for _ in 0..50 {
            let q = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let robot = robot_spheres(&chain, &q).unwrap();
            let k = rng.random_range(1..4);
            let comps: Vec<(f64, Vec<GaussianSphere>)> = (0..k)
                .map(|_| {
                    let spheres = (0..3)
                        .map(|_| GaussianSphere {
                            mean: [rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5), rng.random_range(-0.5..0.5)],
                            cov: isotropic(rng.random_range(0.05..0.5)),
                            radius: rng.random_range(0.05..0.3),
                        })
                        .collect();
                    (1.0 / k as f64, spheres)
                })
                .collect();
            let frame = HumanFrame { components: comps };
            let got = frame_collision_probability(&q, &frame, &chain, BoundOptions::default()).unwrap();
            let mut brute: f64 = 0.0;
            for b in &robot {
                for l in 0..3 {
                    let mix: f64 = frame.components.iter().map(|(w, s)| w * collision_bound(b, &s[l]).unwrap().bound).sum();
                    brute = brute.max(mix);
                }
            }
            assert!((got - brute.min(1.0)).abs() < 1e-12, "{got} vs {brute}");
        }
    }

    #[test]
    fn pruned_log_excess_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(4, crate::rng::stream::DATA, 0);
        let opts = BoundOptions::default();
        for _ in 0..100 {
            let robot: Vec<Sphere> = (0..4)
                .map(|_| Sphere {
                    center: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0],
                    radius: rng.random_range(0.05..0.3),
                })
                .collect();
            let k = rng.random_range(1..4);
            let comps: Vec<(f64, Vec<GaussianSphere>)> = (0..k)
                .map(|_| {
                    let spheres = (0..3)
                        .map(|_| GaussianSphere {
                            mean: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.2..0.2)],
                            cov: isotropic(rng.random_range(0.02..0.3)),
                            radius: rng.random_range(0.05..0.3),
                        })
                        .collect();
                    (rng.random_range(0.1..1.0), spheres)
                })
                .collect();
            let frame = PreparedFrame::new(&HumanFrame { components: comps }).unwrap();
            let ln_target = rng.random_range(-8.0..0.0);
            let mut brute = f64::NEG_INFINITY;
            for b in &robot {
                for l in 0..3 {
                    let terms: Vec<f64> = frame
                        .components
                        .iter()
                        .map(|c| c.ln_weight + PreparedFrame::log_extended(&c.spheres[l], b, opts))
                        .collect();
                    brute = brute.max(log_sum_exp(&terms));
                }
            }
            let got = frame.log_excess(&robot, ln_target, opts);
            assert!((got - (brute - ln_target).max(0.0)).abs() < 1e-12, "{got} vs {brute}");
        }
    }

    #[test]
    fn uniform_motion_in_empty_scene_costs_nothing() {
        let t = Trajectory::straight_line(&[0.0, 0.0], &[1.0, -0.5], 10, 0.0, 0.25).unwrap();
        let c = trajectory_cost(&t, &ctx()).unwrap();
        assert!(c.total.abs() < 1e-20);
    }

    #[test]
    fn dynamic_term_counts_only_windowed_frames() {
        let t = Trajectory::straight_line(&[0.0, 0.0], &[1.0, -0.5], 10, 0.0, 0.25).unwrap();
        let mut c = ctx();
        c.s = 1;
        let chain = c.chain.clone();
        let hit = |q: &[f64]| {
            let ee = chain.end_effector(q).unwrap();
            HumanFrame::single(vec![GaussianSphere { mean: ee, cov: isotropic(0.05), radius: 0.1 }])
        };
        for i in [0, 1, 2, 6, 7, 10] {
            c.set_human(i, &hit(&t.waypoints[i])).unwrap();
        }
        let cost = trajectory_cost(&t, &c).unwrap();
        assert_eq!(cost.dynamic_collision, 0.0);
        assert_eq!(cost.dynamic_penalty, 0.0);
        c.set_human(3, &hit(&t.waypoints[3])).unwrap();
        let cost = trajectory_cost(&t, &c).unwrap();
        let p = frame_collision_probability(&t.waypoints[3], &hit(&t.waypoints[3]), &c.chain, c.bound).unwrap();
        assert!(p > 0.0);
        assert_eq!(cost.dynamic_collision, p);
        c.s = 20;
        assert!(trajectory_cost(&t, &c).is_err());
    }

    #[test]
    fn extended_bound_grows_with_penetration() {
        let frame = PreparedFrame::new(&HumanFrame::single(vec![GaussianSphere {
            mean: [0.0; 3],
            cov: isotropic(0.05),
            radius: 0.1,
        }]))
        .unwrap();
        let opts = BoundOptions::default();
        let at = |x: f64| frame.log_excess(&[Sphere { center: [x, 0.0, 0.0], radius: 0.1 }], -30.0, opts);
        let xs = [0.6, 0.4, 0.25, 0.15, 0.05, 0.0];
        for w in xs.windows(2) {
            assert!(at(w[1]) > at(w[0]), "{} {}", w[0], w[1]);
        }
    }
}
