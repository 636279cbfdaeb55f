//! Task-level episodes for learning which robot subtask to do next.

use rand::Rng;

use crate::error::Result;
use crate::motion::ActionLabel;
use crate::rng::{rng_for, stream, StreamRng};
use crate::task::{
    build_histograms, reward_prep, total_reward, train_q, EpsilonSchedule, HistogramTable, Mdp, ProgressLayout,
    ProgressState, QTable, RewardSpec, TaskOrder, Transition,
};

/// The person completes one admissible action per robot subtask; rewards
/// come from the expected helpfulness of the chosen subtask.
pub struct TaskMdp {
    pub order: TaskOrder,
    pub table: HistogramTable,
    pub reward: RewardSpec,
    pub layout: ProgressLayout,
}

impl TaskMdp {
    pub fn new(order: TaskOrder, table: HistogramTable, reward: RewardSpec) -> Self {
        let layout = ProgressLayout { human: reward.human_actions(), robot: reward.robot_actions(), counting: false };
        TaskMdp { order, table, reward, layout }
    }
}

impl Mdp for TaskMdp {
    fn reset(&mut self, _rng: &mut StreamRng) -> ProgressState {
        ProgressState::empty(self.layout)
    }

    fn available(&self, state: &ProgressState) -> Vec<usize> {
        (0..self.layout.robot).filter(|&r| !state.is_completed(self.layout.human + r)).collect()
    }

    fn step(&mut self, state: &ProgressState, action: usize, rng: &mut StreamRng) -> Result<Transition> {
        let prep = reward_prep(state, action, &self.reward, &self.table)?;
        let reward = total_reward(prep, 0.0, &self.reward)?;
        let mut next = state.completed(self.layout.human + action, false);
        let open = self.order.allowed_next(&next.truncated(self.layout.human));
        if !open.is_empty() {
            next.complete(open[rng.random_range(0..open.len())], false);
        }
        let terminal = self.available(&next).is_empty();
        Ok(Transition { reward, next, terminal })
    }
}

/// Histogram of `sequences` of human actions, one frame per action.
pub fn sequence_histograms(sequences: &[Vec<usize>], human: usize) -> HistogramTable {
    let labels: Vec<Vec<ActionLabel>> =
        sequences.iter().map(|s| s.iter().map(|&a| ActionLabel(a)).collect()).collect();
    build_histograms(&labels, ProgressLayout::human_only(human))
}

/// Human action sequences sampled from `order`.
pub fn sample_sequences(order: &TaskOrder, count: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..count).map(|i| order.sample(&mut rng_for(seed, stream::TASK, 100 + i as u64))).collect()
}

/// Trains a Q-table on the task MDP.
pub fn train_task_policy(
    order: &TaskOrder,
    reward: &RewardSpec,
    sequences: &[Vec<usize>],
    episodes: usize,
    alpha: f64,
    gamma: f64,
    seed: u64,
) -> Result<QTable> {
    let table = sequence_histograms(sequences, reward.human_actions());
    let mut mdp = TaskMdp::new(order.clone(), table, reward.clone());
    let mut q = QTable::new(reward.robot_actions(), alpha, gamma)?;
    let max_steps = reward.robot_actions() + 1;
    train_q(&mut mdp, &mut q, episodes, max_steps, EpsilonSchedule::default(), seed)?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::best_action;

    #[test]
    fn policy_prepares_for_the_first_group() {
        // 4 human actions in two unordered pairs; robot subtask r helps human action r
        let order = TaskOrder::parse("(0,1)->(2,3)", 4).unwrap();
        let h = (0..4).map(|a| (0..4).map(|r| if a == r { 1.0 } else { 0.0 }).collect()).collect();
        let reward = RewardSpec::new(h).unwrap();
        let seqs = sample_sequences(&order, 40, 3);
        let q = train_task_policy(&order, &reward, &seqs, 3000, 0.1, 0.9, 3).unwrap();
        let start = ProgressState::empty(ProgressLayout { human: 4, robot: 4, counting: false });
        let first = best_action(&q, &start, &[0, 1, 2, 3]).unwrap();
        assert!(first < 2, "robot should prepare for the first group, chose {first}");
    }
}
