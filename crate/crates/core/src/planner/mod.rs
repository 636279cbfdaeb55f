//! Receding-horizon trajectory optimization under predicted human motion.

mod cost;
mod optimize;
mod replan;
mod trajectory;

pub use cost::{frame_collision_probability, DEFAULT_MAX_JOINT_SPEED, trajectory_cost, CostBreakdown, CostWeights, HumanFrame, PlanContext, PreparedFrame};
pub use optimize::{
    is_feasible, max_joint_speed, multi_start_plan, optimize_trajectory, perturbed_start, MultiStartResult, OptimBudget, OptimOutcome,
    OptimStatus, StartOutcome,
};
pub use replan::{insert_wait, replan_step, PlannerState, ReplanParams, StepRecord};
pub use trajectory::{acceleration_at, jerkiness, smoothness, squared_accelerations, Trajectory};
