//! Task-level reasoning: progress states, next-action histograms, the
//! preparation/delay reward and tabular Q-learning over progress states.

mod histogram;
mod order;
mod progress;
mod qlearning;
mod reward;

pub use histogram::{
    build_histograms, build_histograms_from_db, next_action_dist, next_action_marginal, ActionDistribution,
    HistogramTable,
};
pub use order::TaskOrder;
pub use progress::{ProgressLayout, ProgressState};
pub use qlearning::{best_action, q_update, train_q, EpsilonSchedule, Mdp, QTable, TrainingStats, Transition};
pub use reward::{reward_prep, reward_prep_with, total_reward, RewardSpec};
