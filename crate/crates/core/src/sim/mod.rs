//! Deterministic scenario simulation and the evaluation metrics.

mod metrics;
mod narrow;
mod playback;
mod run;
mod scenario;
mod task_mdp;

pub use metrics::{eval_prediction, eval_predictions, mhd, EvalItem, Metrics, PredictionEval};
pub use narrow::{narrow_passage_context, narrow_passage_feasible};
pub use playback::HumanPlayback;
pub use run::{
    human_script, metrics_report, noisy_params, run_scenario, scenario_dataset, train_scenario_model, ModelKind, PredictionSummary, RunOptions, RunTrace,
    StepTrace, TaskDecision,
};
pub use scenario::{
    arm_config, default_arm, HumanSpec, MetricsSpec, PlannerSpec, PredictionSpec, RobotSpec, Scenario, TaskSpec,
    ARM_IK_SEED,
};
pub use task_mdp::{sample_sequences, sequence_histograms, train_task_policy, TaskMdp};
