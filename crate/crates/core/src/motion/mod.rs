//! Human motion data: joint trajectories, derived features, labeled
//! demonstrations and the training windows cut from them.

mod features;
mod io;
mod synth;
mod windows;

pub use features::{compute_features, inject_noise, time_scale};
pub use io::{read_jsonl, write_jsonl, DemoRecord, FrameRecord};
pub use synth::{
    synth_reach_dataset, synth_task_dataset, upper_body_joint_names, upper_body_limbs,
    upper_body_pose, PhaseDurations, ReachDatasetConfig, Range, HAND_LEFT, HAND_RIGHT,
};
pub use windows::{extract_windows, extract_windows_with, TrainingWindow, WindowSpec};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Point3 = [f64; 3];

/// Index into a discrete action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionLabel(pub usize);

/// Tracked joint positions over time. Coordinates are stored flat,
/// frame-major, as `[x, y, z]` per joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    frame_times: Vec<f64>,
    joints: usize,
    coords: Vec<f64>,
}

impl MotionSequence {
    pub fn new(frame_times: Vec<f64>, joints: usize, coords: Vec<f64>) -> Result<Self> {
        if joints == 0 {
            return invalid("motion needs at least one joint");
        }
        if coords.len() != frame_times.len() * joints * 3 {
            return Err(Error::DimensionMismatch {
                expected: frame_times.len() * joints * 3,
                actual: coords.len(),
            });
        }
        if frame_times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("frame times must be strictly increasing");
        }
        if frame_times.iter().chain(coords.iter()).any(|v| !v.is_finite()) {
            return invalid("motion contains non-finite values");
        }
        Ok(Self { frame_times, joints, coords })
    }

    pub fn from_frames(frame_times: Vec<f64>, frames: &[Vec<Point3>]) -> Result<Self> {
        let joints = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != joints) {
            return invalid("all frames must carry the same joint count");
        }
        if frames.len() != frame_times.len() {
            return Err(Error::DimensionMismatch { expected: frame_times.len(), actual: frames.len() });
        }
        let coords = frames.iter().flatten().flat_map(|p| p.iter().copied()).collect();
        Self::new(frame_times, joints, coords)
    }

    pub fn len(&self) -> usize {
        self.frame_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_times.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.joints
    }

    /// Width of one frame (3 × joints).
    pub fn frame_dim(&self) -> usize {
        self.joints * 3
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let d = self.frame_dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn joint(&self, frame: usize, joint: usize) -> Point3 {
        let f = self.frame(frame);
        [f[3 * joint], f[3 * joint + 1], f[3 * joint + 2]]
    }

    pub fn duration(&self) -> f64 {
        match (self.frame_times.first(), self.frame_times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::OutOfRange(format!("frames {start}..{end} of {}", self.len())));
        }
        let d = self.frame_dim();
        Self::new(
            self.frame_times[start..end].to_vec(),
            self.joints,
            self.coords[start * d..end * d].to_vec(),
        )
    }

    /// Joint positions at an arbitrary time by linear interpolation, clamped
    /// to the first and last frame.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let times = &self.frame_times;
        if t <= times[0] {
            return self.frame(0).to_vec();
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return self.frame(last).to_vec();
        }
        let hi = times.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let u = (t - times[lo]) / (times[hi] - times[lo]);
        self.frame(lo)
            .iter()
            .zip(self.frame(hi))
            .map(|(a, b)| a + u * (b - a))
            .collect()
    }
}

/// Per-frame feature vectors: joint positions, velocities and accelerations,
/// each `3J` wide, concatenated in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return invalid(format!("feature data of length {} is not a multiple of {dim}", data.len()));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self, start: usize, end: usize) -> &[f64] {
        &self.data[start * self.dim..end * self.dim]
    }
}

/// One labeled recording: motion, its features and a per-frame action label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDemonstration {
    pub id: String,
    pub fps: f64,
    pub motion: MotionSequence,
    pub features: FeatureSequence,
    pub actions: Vec<ActionLabel>,
}

impl LabeledDemonstration {
    pub fn new(id: impl Into<String>, fps: f64, motion: MotionSequence, actions: Vec<ActionLabel>) -> Result<Self> {
        if actions.len() != motion.len() {
            return Err(Error::DimensionMismatch { expected: motion.len(), actual: actions.len() });
        }
        let features = compute_features(&motion)?;
        Ok(Self { id: id.into(), fps, motion, features, actions })
    }

    pub fn len(&self) -> usize {
        self.motion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motion.is_empty()
    }

    /// Action labels in the order their segments occur.
    pub fn action_sequence(&self) -> Vec<ActionLabel> {
        let mut seq: Vec<ActionLabel> = Vec::new();
        for a in &self.actions {
            if seq.last() != Some(a) {
                seq.push(*a);
            }
        }
        seq
    }
}

/// The training corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionDatabase {
    pub demonstrations: Vec<LabeledDemonstration>,
    pub action_names: Vec<String>,
    pub joint_names: Vec<String>,
}

impl MotionDatabase {
    pub fn new(
        demonstrations: Vec<LabeledDemonstration>,
        action_names: Vec<String>,
        joint_names: Vec<String>,
    ) -> Result<Self> {
        let db = Self { demonstrations, action_names, joint_names };
        db.validate()?;
        Ok(db)
    }

    pub fn validate(&self) -> Result<()> {
        let joints = self.joint_names.len();
        for demo in &self.demonstrations {
            if demo.motion.joint_count() != joints {
                return Err(Error::DimensionMismatch { expected: joints, actual: demo.motion.joint_count() });
            }
            if let Some(bad) = demo.actions.iter().find(|a| a.0 >= self.action_names.len()) {
                return invalid(format!("demo {} uses action {} outside the vocabulary", demo.id, bad.0));
            }
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_names.len()
    }

    pub fn len(&self) -> usize {
        self.demonstrations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demonstrations.is_empty()
    }
}
