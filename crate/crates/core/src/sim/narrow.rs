//! A planar narrow-passage problem for checking multi-start feasibility.

use rand::Rng;

use crate::error::Result;
use crate::geometry::{planar_two_link, Sphere};
use crate::planner::{multi_start_plan, OptimBudget, PlanContext, Trajectory};
use crate::rng::{rng_for, stream};

/// Straight-arm sweep across a post that sits just inside the reach of the
/// unfolded arm. Only a strongly folded elbow passes. The post position is
/// jittered per seed.
pub fn narrow_passage_context(seed: u64) -> Result<(PlanContext, Trajectory)> {
    let mut rng = rng_for(seed, stream::DATA, 0x6e70);
    let mut ctx = PlanContext::new(planar_two_link(), 0.95, 2)?;
    let angle: f64 = rng.random_range(-0.15..0.15);
    let reach: f64 = rng.random_range(1.55..1.75);
    ctx.statics = vec![Sphere { center: [reach * angle.cos(), reach * angle.sin(), 0.0], radius: 0.15 }];
    ctx.weights.static_collision = 1e4;
    let base = Trajectory::straight_line(&[-1.2, 0.0], &[1.2, 0.0], 24, 0.0, 0.25)?;
    Ok((ctx, base))
}

/// Whether the best of `n_starts` optimized starts is collision-free.
pub fn narrow_passage_feasible(n_starts: usize, seed: u64) -> Result<bool> {
    let (ctx, base) = narrow_passage_context(seed)?;
    let budget = OptimBudget { iterations: 80, ..OptimBudget::default() };
    Ok(multi_start_plan(&base, &ctx, &budget, n_starts, 0.8, seed)?.feasible)
}
