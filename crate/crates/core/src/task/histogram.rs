use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ProgressLayout, ProgressState};
use crate::motion::{ActionLabel, MotionDatabase};

/// Counts of the next differing action, keyed by progress state and the
/// action currently running.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<HistogramEntry>", from = "Vec<HistogramEntry>")]
pub struct HistogramTable {
    counts: BTreeMap<(ProgressState, usize), BTreeMap<usize, u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct HistogramEntry {
    progress: ProgressState,
    current: usize,
    next: Vec<(usize, u64)>,
}

impl From<HistogramTable> for Vec<HistogramEntry> {
    fn from(t: HistogramTable) -> Self {
        t.counts
            .into_iter()
            .map(|((progress, current), next)| HistogramEntry { progress, current, next: next.into_iter().collect() })
            .collect()
    }
}

impl From<Vec<HistogramEntry>> for HistogramTable {
    fn from(entries: Vec<HistogramEntry>) -> Self {
        let counts = entries
            .into_iter()
            .map(|e| ((e.progress, e.current), e.next.into_iter().filter(|&(_, c)| c > 0).collect::<BTreeMap<_, _>>()))
            .filter(|(_, next)| !next.is_empty())
            .collect();
        Self { counts }
    }
}

impl HistogramTable {
    pub fn add(&mut self, progress: ProgressState, current: usize, next: usize, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry((progress, current)).or_default().entry(next).or_insert(0) += count;
    }

    pub fn get(&self, progress: &ProgressState, current: usize) -> Option<&BTreeMap<usize, u64>> {
        self.counts.get(&(progress.clone(), current))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &(ProgressState, usize)> {
        self.counts.keys()
    }

    /// Number of distinct progress states among the keys.
    pub fn distinct_states(&self) -> usize {
        let mut states: Vec<&ProgressState> = self.counts.keys().map(|(p, _)| p).collect();
        states.dedup();
        states.len()
    }

    /// Next-action counts for `progress`, summed over the current action.
    pub fn marginal(&self, progress: &ProgressState) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for ((p, _), next) in self.counts.range((progress.clone(), 0)..) {
            if p != progress {
                break;
            }
            for (&a, &c) in next {
                *out.entry(a).or_insert(0) += c;
            }
        }
        out
    }
}

/// Counts, for every frame `s` that has a successor segment, the next
/// differing action under the key `(p_s, c_s)`.
pub fn build_histograms(sequences: &[Vec<ActionLabel>], layout: ProgressLayout) -> HistogramTable {
    let mut table = HistogramTable::default();
    for labels in sequences {
        let mut progress = ProgressState::empty(layout);
        let mut start = 0;
        while start < labels.len() {
            let current = labels[start];
            let end = labels[start..].iter().position(|&a| a != current).map_or(labels.len(), |k| start + k);
            if end < labels.len() {
                // every frame of this segment shares the key and the successor
                table.add(progress.clone(), current.0, labels[end].0, (end - start) as u64);
            }
            progress.complete(current.0, layout.counting);
            start = end;
        }
    }
    table
}

pub fn build_histograms_from_db(db: &MotionDatabase, layout: ProgressLayout) -> HistogramTable {
    let sequences: Vec<Vec<ActionLabel>> = db.demonstrations.iter().map(|d| d.actions.clone()).collect();
    build_histograms(&sequences, layout)
}

/// A distribution over human actions, flagged when it is a fallback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub fallback: bool,
}

impl ActionDistribution {
    fn from_counts(counts: &BTreeMap<usize, u64>, n: usize) -> Self {
        let total: u64 = counts.values().sum();
        let mut probs = vec![0.0; n];
        for (&a, &c) in counts {
            if a < n {
                probs[a] = c as f64 / total as f64;
            }
        }
        Self { probs, fallback: false }
    }

    /// Uniform over human actions not yet completed, excluding `current`.
    fn fallback(progress: &ProgressState, current: Option<usize>, n: usize) -> Self {
        let mut open: Vec<usize> = (0..n).filter(|&a| !progress.is_completed(a) && Some(a) != current).collect();
        if open.is_empty() {
            open = (0..n).collect();
        }
        let mut probs = vec![0.0; n];
        for &a in &open {
            probs[a] = 1.0 / open.len() as f64;
        }
        Self { probs, fallback: true }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Normalized histogram for `(progress, current)` over `n_human` actions.
pub fn next_action_dist(table: &HistogramTable, progress: &ProgressState, current: usize, n_human: usize) -> ActionDistribution {
    match table.get(progress, current) {
        Some(counts) => ActionDistribution::from_counts(counts, n_human),
        None => ActionDistribution::fallback(progress, Some(current), n_human),
    }
}

/// Next-action distribution given only the progress state.
pub fn next_action_marginal(table: &HistogramTable, progress: &ProgressState, n_human: usize) -> ActionDistribution {
    let counts = table.marginal(progress);
    if counts.is_empty() {
        ActionDistribution::fallback(progress, None, n_human)
    } else {
        ActionDistribution::from_counts(&counts, n_human)
    }
}
