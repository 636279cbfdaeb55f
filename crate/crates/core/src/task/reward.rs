use serde::{Deserialize, Serialize};

use super::histogram::next_action_marginal;
use super::{HistogramTable, ProgressState};
use crate::error::{invalid, Result};

/// Helpfulness matrix `H` (human actions × robot actions) and reward weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub h: Vec<Vec<f64>>,
    #[serde(default = "unit")]
    pub w_prep: f64,
    #[serde(default = "unit")]
    pub w_delay: f64,
}

fn unit() -> f64 {
    1.0
}

impl RewardSpec {
    pub fn new(h: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self { h, w_prep: 1.0, w_delay: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let cols = self.robot_actions();
        if self.h.iter().any(|row| row.len() != cols) {
            return invalid("H rows must all have one entry per robot action");
        }
        if self.h.iter().flatten().chain([&self.w_prep, &self.w_delay]).any(|v| !v.is_finite()) {
            return invalid("reward values must be finite");
        }
        Ok(())
    }

    pub fn human_actions(&self) -> usize {
        self.h.len()
    }

    pub fn robot_actions(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }
}

/// Expected helpfulness of robot action `a_r` under a next-action
/// distribution.
pub fn reward_prep_with(probs: &[f64], a_r: usize, spec: &RewardSpec) -> f64 {
    probs.iter().zip(&spec.h).map(|(p, row)| p * row.get(a_r).copied().unwrap_or(0.0)).sum()
}

/// Preparation reward at progress `p`; the next human action is predicted
/// from the histogram counts of `p`'s human part.
pub fn reward_prep(p: &ProgressState, a_r: usize, spec: &RewardSpec, table: &HistogramTable) -> Result<f64> {
    if a_r >= spec.robot_actions() {
        return invalid(format!("robot action {a_r} out of range"));
    }
    let human = spec.human_actions();
    let dist = next_action_marginal(table, &p.truncated(human), human);
    Ok(reward_prep_with(&dist.probs, a_r, spec))
}

/// `w_prep · prep − w_delay · delay`.
pub fn total_reward(prep: f64, delay: f64, spec: &RewardSpec) -> Result<f64> {
    if !(delay >= 0.0) {
        return invalid(format!("delay must be non-negative, got {delay}"));
    }
    Ok(spec.w_prep * prep + spec.w_delay * (-delay))
}
