//! Replays a held-out demonstration on the simulation clock.

use crate::error::{invalid, Result};
use crate::motion::{
    compute_features, inject_noise, synth_task_dataset, ActionLabel, LabeledDemonstration, MotionSequence, Point3,
};
use crate::rng::{derive_seed, stream};
use crate::task::{ProgressLayout, ProgressState};

use super::scenario::Scenario;

/// Ground truth and noisy observations on a uniform frame grid.
#[derive(Clone, Debug)]
pub struct HumanPlayback {
    pub fps: f64,
    /// Simulated time of grid frame 0 (negative: padding before the start).
    pub t0: f64,
    pub truth: MotionSequence,
    pub observed: MotionSequence,
    labels: Vec<ActionLabel>,
    pub layout: ProgressLayout,
    /// Simulated time at which the demonstration ends.
    pub end_time: f64,
    pub demo: LabeledDemonstration,
}

impl HumanPlayback {
    /// Fresh demonstration of `actions`, drawn from the scenario's corpus
    /// generator with a playback-specific seed and shifted, time-scaled and
    /// noise-corrupted per the scenario.
    pub fn new(scn: &Scenario, actions: &[usize], seed: u64, horizon: f64, pad_frames: usize) -> Result<Self> {
        if actions.is_empty() {
            return invalid("playback needs at least one human action");
        }
        let mut cfg = scn.human.dataset.clone();
        if let Some(d) = scn.human.playback_durations {
            cfg.durations = d;
        }
        let db = synth_task_dataset(&cfg, &[actions.to_vec()], derive_seed(seed, stream::PLAYBACK, 0))?;
        let demo = db.demonstrations.into_iter().next().expect("one sequence requested");
        let fps = cfg.fps;
        let h = &scn.human;
        let t0 = -(pad_frames as f64) / fps;
        let frames = ((horizon - t0) * fps).ceil() as usize + 1;
        let dim = demo.motion.frame_dim();
        let mut coords = Vec::with_capacity(frames * dim);
        let mut labels = Vec::with_capacity(frames);
        let mut times = Vec::with_capacity(frames);
        let last = demo.len() - 1;
        for k in 0..frames {
            let t = t0 + k as f64 / fps;
            let tau = ((t - h.start_time) * h.speed).max(0.0);
            let frame = demo.motion.sample(tau);
            coords.extend(frame.chunks(3).flat_map(|p| [p[0] + h.offset[0], p[1] + h.offset[1], p[2] + h.offset[2]]));
            let idx = ((tau * demo.fps).floor() as usize).min(last);
            labels.push(demo.actions[idx]);
            times.push(t);
        }
        let truth = MotionSequence::new(times, demo.motion.joint_count(), coords)?;
        let observed = inject_noise(&truth, h.noise, derive_seed(seed, stream::NOISE, 1))?;
        let end_time = h.start_time + demo.motion.duration() / h.speed;
        let layout = ProgressLayout::human_only(cfg.targets.len());
        Ok(HumanPlayback { fps, t0, truth, observed, labels, layout, end_time, demo })
    }

    /// Latest grid frame at or before `t`.
    pub fn frame_index(&self, t: f64) -> usize {
        let k = ((t - self.t0) * self.fps + 1e-9).floor();
        (k.max(0.0) as usize).min(self.truth.len() - 1)
    }

    pub fn frame_time(&self, k: usize) -> f64 {
        self.truth.frame_times()[k]
    }

    fn pose(seq: &MotionSequence, k: usize) -> Vec<Point3> {
        seq.frame(k).chunks(3).map(|p| [p[0], p[1], p[2]]).collect()
    }

    pub fn truth_pose_at(&self, t: f64) -> Vec<Point3> {
        let t = t.clamp(self.t0, *self.truth.frame_times().last().expect("non-empty"));
        self.truth.sample(t).chunks(3).map(|p| [p[0], p[1], p[2]]).collect()
    }

    pub fn observed_pose(&self, k: usize) -> Vec<Point3> {
        Self::pose(&self.observed, k)
    }

    /// Feature window of the `n_p` observed frames ending at frame `k`,
    /// using only frames up to `k`.
    pub fn window_features(&self, k: usize, n_p: usize) -> Result<Vec<f64>> {
        let len = n_p + 2;
        if k + 1 < len {
            return invalid(format!("frame {k} has fewer than {len} frames of history"));
        }
        let slice = self.observed.slice(k + 1 - len, k + 1)?;
        let feats = compute_features(&slice)?;
        Ok(feats.frames(2, len).to_vec())
    }

    /// Human progress implied by the labels observed up to frame `k`.
    pub fn progress(&self, k: usize) -> ProgressState {
        ProgressState::from_prefix(&self.labels[..=k], self.layout)
    }

    pub fn action(&self, k: usize) -> usize {
        self.labels[k].0
    }

    /// Completion times of every human action segment.
    pub fn segment_ends(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (k, w) in self.labels.windows(2).enumerate() {
            if w[0] != w[1] {
                out.push((w[0].0, self.frame_time(k + 1)));
            }
        }
        out.push((self.labels.last().expect("non-empty").0, self.end_time));
        out
    }
}
