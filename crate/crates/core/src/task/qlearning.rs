use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProgressState;
use crate::error::{invalid, Result};
use crate::rng::{rng_for, stream, StreamRng};

/// Tabular action values over progress states; unseen entries read as 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub n_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(with = "pairs")]
    values: BTreeMap<ProgressState, Vec<f64>>,
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ProgressState;

    pub fn serialize<S: Serializer>(map: &BTreeMap<ProgressState, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<ProgressState, Vec<f64>>, D::Error> {
        Ok(Vec::<(ProgressState, Vec<f64>)>::deserialize(d)?.into_iter().collect())
    }
}

impl QTable {
    pub fn new(n_actions: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if n_actions == 0 {
            return invalid("Q table needs at least one action");
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("learning rate must lie in (0, 1], got {alpha}"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return invalid(format!("discount must lie in [0, 1), got {gamma}"));
        }
        Ok(Self { n_actions, alpha, gamma, values: BTreeMap::new() })
    }

    pub fn get(&self, p: &ProgressState, a: usize) -> f64 {
        self.values.get(p).and_then(|v| v.get(a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, p: &ProgressState, a: usize, value: f64) {
        let n = self.n_actions;
        self.values.entry(p.clone()).or_insert_with(|| vec![0.0; n])[a] = value;
    }

    pub fn states(&self) -> impl Iterator<Item = &ProgressState> {
        self.values.keys()
    }

    /// `max_a Q(p, a)` over `actions`; 0 for an empty set.
    pub fn max_over(&self, p: &ProgressState, actions: &[usize]) -> f64 {
        actions.iter().map(|&a| self.get(p, a)).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))).unwrap_or(0.0)
    }

    /// One update whose bootstrap maximizes over `next_actions` only.
    pub fn update_restricted(&mut self, p: &ProgressState, a: usize, reward: f64, next: &ProgressState, next_actions: &[usize]) {
        let target = reward + self.gamma * self.max_over(next, next_actions);
        let old = self.get(p, a);
        self.set(p, a, (1.0 - self.alpha) * old + self.alpha * target);
    }
}

/// `Q(p,a) ← (1−α)Q(p,a) + α(r + γ max_a' Q(p',a'))`.
pub fn q_update(q: &mut QTable, p: &ProgressState, a: usize, reward: f64, next: &ProgressState) {
    let all: Vec<usize> = (0..q.n_actions).collect();
    q.update_restricted(p, a, reward, next, &all);
}

/// Greedy action among `available`; ties go to the lowest index.
pub fn best_action(q: &QTable, p: &ProgressState, available: &[usize]) -> Result<usize> {
    let mut sorted = available.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let Some(&first) = sorted.first() else {
        return invalid("no available action");
    };
    let mut best = first;
    for &a in &sorted[1..] {
        if q.get(p, a) > q.get(p, best) {
            best = a;
        }
    }
    Ok(best)
}

/// Geometric decay of the exploration rate across training episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 0.3, end: 0.01 }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.start;
        }
        let u = episode as f64 / (episodes - 1) as f64;
        self.start * (self.end / self.start).powf(u)
    }
}

pub struct Transition {
    pub reward: f64,
    pub next: ProgressState,
    pub terminal: bool,
}

/// An episodic environment whose states are progress vectors.
pub trait Mdp {
    fn reset(&mut self, rng: &mut StreamRng) -> ProgressState;
    fn available(&self, state: &ProgressState) -> Vec<usize>;
    fn step(&mut self, state: &ProgressState, action: usize, rng: &mut StreamRng) -> Result<Transition>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub episodes: usize,
    pub steps: usize,
    pub returns: Vec<f64>,
}

/// ε-greedy Q-learning; an episode ends at a terminal state or after
/// `max_steps`.
pub fn train_q<M: Mdp>(
    mdp: &mut M,
    q: &mut QTable,
    episodes: usize,
    max_steps: usize,
    schedule: EpsilonSchedule,
    seed: u64,
) -> Result<TrainingStats> {
    let mut rng = rng_for(seed, stream::TASK, 0);
    let mut stats = TrainingStats::default();
    for ep in 0..episodes {
        let eps = schedule.at(ep, episodes);
        let mut state = mdp.reset(&mut rng);
        let mut ret = 0.0;
        for _ in 0..max_steps {
            let actions = mdp.available(&state);
            if actions.is_empty() {
                break;
            }
            let a = if rng.random::<f64>() < eps {
                actions[rng.random_range(0..actions.len())]
            } else {
                best_action(q, &state, &actions)?
            };
            let tr = mdp.step(&state, a, &mut rng)?;
            let next_actions = if tr.terminal { Vec::new() } else { mdp.available(&tr.next) };
            q.update_restricted(&state, a, tr.reward, &tr.next, &next_actions);
            ret += tr.reward;
            stats.steps += 1;
            state = tr.next;
            if tr.terminal {
                break;
            }
        }
        stats.returns.push(ret);
        stats.episodes += 1;
    }
    Ok(stats)
}
