use std::fmt;

use serde::{Deserialize, Serialize};

use crate::motion::ActionLabel;

/// Shape of a progress vector: human actions first, then robot actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressLayout {
    pub human: usize,
    pub robot: usize,
    /// Count repetitions instead of storing a completed flag.
    #[serde(default)]
    pub counting: bool,
}

impl ProgressLayout {
    pub fn human_only(human: usize) -> Self {
        Self { human, robot: 0, counting: false }
    }

    pub fn len(&self) -> usize {
        self.human + self.robot
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Completion counters over all human and robot actions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProgressState {
    counts: Vec<u32>,
}

impl ProgressState {
    pub fn empty(layout: ProgressLayout) -> Self {
        Self { counts: vec![0; layout.len()] }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    /// State implied by a label prefix: every action segment except the one
    /// still running is completed.
    pub fn from_prefix(labels: &[ActionLabel], layout: ProgressLayout) -> Self {
        let mut state = Self::empty(layout);
        for w in labels.windows(2) {
            if w[0] != w[1] {
                state.complete(w[0].0, layout.counting);
            }
        }
        state
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, index: usize) -> u32 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    pub fn is_completed(&self, index: usize) -> bool {
        self.get(index) > 0
    }

    /// Marks action `index` done, growing the vector if needed.
    pub fn complete(&mut self, index: usize, counting: bool) {
        if index >= self.counts.len() {
            self.counts.resize(index + 1, 0);
        }
        self.counts[index] = if counting { self.counts[index] + 1 } else { 1 };
    }

    pub fn completed(&self, index: usize, counting: bool) -> Self {
        let mut next = self.clone();
        next.complete(index, counting);
        next
    }

    /// The first `n` counters.
    pub fn truncated(&self, n: usize) -> Self {
        Self { counts: (0..n).map(|i| self.get(i)).collect() }
    }

    /// Hamming distance; the shorter vector is padded with zeros.
    pub fn distance(&self, other: &Self) -> usize {
        let n = self.len().max(other.len());
        (0..n).filter(|&i| self.get(i) != other.get(i)).count()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

impl fmt::Display for ProgressState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[usize]) -> Vec<ActionLabel> {
        xs.iter().map(|&x| ActionLabel(x)).collect()
    }

    #[test]
    fn running_segment_is_not_completed() {
        let layout = ProgressLayout::human_only(3);
        assert_eq!(ProgressState::from_prefix(&labels(&[0, 0]), layout).counts(), &[0, 0, 0]);
        assert_eq!(ProgressState::from_prefix(&labels(&[0, 0, 1]), layout).counts(), &[1, 0, 0]);
        assert_eq!(ProgressState::from_prefix(&labels(&[0, 1, 2, 2]), layout).counts(), &[1, 1, 0]);
    }

    #[test]
    fn counting_mode_accumulates_repeats() {
        let layout = ProgressLayout { human: 2, robot: 0, counting: true };
        let s = ProgressState::from_prefix(&labels(&[0, 1, 0, 1]), layout);
        assert_eq!(s.counts(), &[2, 1]);
        let b = ProgressState::from_prefix(&labels(&[0, 1, 0, 1]), ProgressLayout::human_only(2));
        assert_eq!(b.counts(), &[1, 1]);
    }

    #[test]
    fn distance_pads_shorter_state() {
        let a = ProgressState::from_counts(vec![1, 0]);
        let b = ProgressState::from_counts(vec![1, 0, 1]);
        assert_eq!(a.distance(&b), 1);
        assert_eq!(b.distance(&a), 1);
        assert_eq!(a.distance(&a), 0);
        assert_eq!(b.to_string(), "[1,0,1]");
    }
}
