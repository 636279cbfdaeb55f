//! Synthetic upper-body reaching demonstrations.
//!
//! A seated person faces +x with a table in front of them. Each reach goes
//! idle → reach → hold → retract, with the moving hand following a cubic
//! ease-in/out profile along a slightly arched path and the elbow placed by
//! two-link inverse kinematics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActionLabel, LabeledDemonstration, MotionDatabase, MotionSequence, Point3};
use crate::error::{invalid, Result};
use crate::rng::{rng_for, stream, StreamRng};

pub const HEAD: usize = 0;
pub const NECK: usize = 1;
pub const TORSO: usize = 2;
pub const WAIST: usize = 3;
pub const SHOULDER_LEFT: usize = 4;
pub const ELBOW_LEFT: usize = 5;
pub const HAND_LEFT: usize = 6;
pub const SHOULDER_RIGHT: usize = 7;
pub const ELBOW_RIGHT: usize = 8;
pub const HAND_RIGHT: usize = 9;

const UPPER_ARM: f64 = 0.30;
const FOREARM: f64 = 0.32;
const REST_HAND: Point3 = [0.30, 0.20, 0.80];

pub fn upper_body_joint_names() -> Vec<String> {
    [
        "head", "neck", "torso", "waist", "l_shoulder", "l_elbow", "l_hand", "r_shoulder", "r_elbow",
        "r_hand",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Seated upper-body pose with both hands resting on the table edge.
pub fn upper_body_pose() -> Vec<Point3> {
    let mut pose = vec![[0.0; 3]; 10];
    pose[HEAD] = [0.0, 0.0, 1.38];
    pose[NECK] = [0.0, 0.0, 1.22];
    pose[TORSO] = [0.0, 0.0, 1.02];
    pose[WAIST] = [0.0, 0.0, 0.82];
    pose[SHOULDER_LEFT] = [0.0, 0.19, 1.20];
    pose[SHOULDER_RIGHT] = [0.0, -0.19, 1.20];
    pose[HAND_LEFT] = REST_HAND;
    pose[HAND_RIGHT] = [REST_HAND[0], -REST_HAND[1], REST_HAND[2]];
    pose[ELBOW_LEFT] = elbow(pose[SHOULDER_LEFT], pose[HAND_LEFT], 1.0, 0.0);
    pose[ELBOW_RIGHT] = elbow(pose[SHOULDER_RIGHT], pose[HAND_RIGHT], -1.0, 0.0);
    pose
}

/// Limb segments `(joint, joint, sphere radius)` of the upper body.
pub fn upper_body_limbs() -> Vec<(usize, usize, f64)> {
    vec![
        (HEAD, NECK, 0.10),
        (NECK, TORSO, 0.13),
        (TORSO, WAIST, 0.14),
        (NECK, SHOULDER_LEFT, 0.07),
        (SHOULDER_LEFT, ELBOW_LEFT, 0.06),
        (ELBOW_LEFT, HAND_LEFT, 0.05),
        (NECK, SHOULDER_RIGHT, 0.07),
        (SHOULDER_RIGHT, ELBOW_RIGHT, 0.06),
        (ELBOW_RIGHT, HAND_RIGHT, 0.05),
    ]
}

/// Closed interval sampled uniformly; serialized as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn fixed(v: f64) -> Self {
        Range(v, v)
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.1 > self.0 {
            rng.random_range(self.0..=self.1)
        } else {
            self.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub idle_before: Range,
    pub reach: Range,
    pub hold: Range,
    pub retract: Range,
    pub idle_after: Range,
}

impl Default for PhaseDurations {
    fn default() -> Self {
        Self {
            idle_before: Range(0.6, 1.0),
            reach: Range(1.0, 1.4),
            hold: Range(0.2, 0.4),
            retract: Range(1.0, 1.4),
            idle_after: Range(0.3, 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachDatasetConfig {
    /// Hand target positions on the table (meters).
    pub targets: Vec<Point3>,
    pub repetitions: usize,
    pub fps: f64,
    #[serde(default)]
    pub durations: PhaseDurations,
    /// Resting pose; the generator animates the 10-joint upper body.
    #[serde(default = "upper_body_pose")]
    pub base_pose: Vec<Point3>,
    /// Height of the arch over the straight hand path.
    #[serde(default = "default_arc")]
    pub arc_height: Range,
    /// Elbow swivel about the shoulder-hand axis (radians).
    #[serde(default = "default_swivel")]
    pub swivel: Range,
    /// Uniform per-demonstration offset of the whole body in x/y (meters).
    #[serde(default = "default_jitter")]
    pub pose_jitter: f64,
    #[serde(default)]
    pub action_names: Option<Vec<String>>,
}

fn default_arc() -> Range {
    Range(0.02, 0.08)
}

fn default_swivel() -> Range {
    Range(-0.25, 0.25)
}

fn default_jitter() -> f64 {
    0.01
}

/// The 2 × 4 block layout in front of the person.
pub fn default_targets() -> Vec<Point3> {
    let mut t = Vec::new();
    for x in [0.45, 0.60] {
        for y in [-0.30, -0.10, 0.10, 0.30] {
            t.push([x, y, 0.80]);
        }
    }
    t
}

impl Default for ReachDatasetConfig {
    fn default() -> Self {
        Self {
            targets: default_targets(),
            repetitions: 30,
            fps: 15.0,
            durations: PhaseDurations::default(),
            base_pose: upper_body_pose(),
            arc_height: default_arc(),
            swivel: default_swivel(),
            pose_jitter: default_jitter(),
            action_names: None,
        }
    }
}

impl ReachDatasetConfig {
    fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return invalid("reach dataset needs at least one target");
        }
        if self.base_pose.len() != 10 {
            return invalid(format!("generator animates a 10-joint upper body, got {} joints", self.base_pose.len()));
        }
        if !(self.fps > 0.0) {
            return invalid("fps must be positive");
        }
        if let Some(names) = &self.action_names {
            if names.len() != self.targets.len() {
                return invalid("one action name per target expected");
            }
        }
        for (k, t) in self.targets.iter().enumerate() {
            required_lean(&self.base_pose, *t).map_err(|_| {
                crate::error::Error::InvalidInput(format!("target {k} at {t:?} is out of reach"))
            })?;
        }
        Ok(())
    }

    pub fn action_names(&self) -> Vec<String> {
        self.action_names
            .clone()
            .unwrap_or_else(|| (0..self.targets.len()).map(|k| format!("reach_{k}")).collect())
    }
}

/// Every target reached `repetitions` times; demonstration `k·reps + r` is
/// the r-th reach to target `k`, labeled with action `k` throughout.
pub fn synth_reach_dataset(config: &ReachDatasetConfig, seed: u64) -> Result<MotionDatabase> {
    config.validate()?;
    let mut demos = Vec::with_capacity(config.targets.len() * config.repetitions);
    for k in 0..config.targets.len() {
        for r in 0..config.repetitions {
            let idx = (k * config.repetitions + r) as u64;
            let mut rng = rng_for(seed, stream::DATA, idx);
            demos.push(build_demo(config, &[k], format!("reach-{k:02}-{r:03}"), &mut rng)?);
        }
    }
    MotionDatabase::new(demos, config.action_names(), upper_body_joint_names())
}

/// Demonstrations that chain several reaches, one per entry of each action
/// sequence. Each segment is labeled with its target index.
pub fn synth_task_dataset(
    config: &ReachDatasetConfig,
    sequences: &[Vec<usize>],
    seed: u64,
) -> Result<MotionDatabase> {
    config.validate()?;
    let mut demos = Vec::with_capacity(sequences.len());
    for (i, seq) in sequences.iter().enumerate() {
        if seq.is_empty() || seq.iter().any(|&k| k >= config.targets.len()) {
            return invalid(format!("action sequence {i} is empty or references an unknown target"));
        }
        let mut rng = rng_for(seed, stream::DATA, i as u64);
        demos.push(build_demo(config, seq, format!("task-{i:03}"), &mut rng)?);
    }
    MotionDatabase::new(demos, config.action_names(), upper_body_joint_names())
}

struct Segment {
    target: usize,
    start: f64,
    reach: f64,
    hold: f64,
    retract: f64,
    arc: f64,
    swivel: f64,
    lean: f64,
}

impl Segment {
    fn end(&self) -> f64 {
        self.start + self.reach + self.hold + self.retract
    }

    /// Progress along the reach in [0, 1] at time t.
    fn progress(&self, t: f64) -> f64 {
        let ease = |tau: f64| {
            let tau = tau.clamp(0.0, 1.0);
            tau * tau * (3.0 - 2.0 * tau)
        };
        let local = t - self.start;
        if local <= 0.0 {
            0.0
        } else if local < self.reach {
            ease(local / self.reach)
        } else if local <= self.reach + self.hold {
            1.0
        } else {
            1.0 - ease((local - self.reach - self.hold) / self.retract)
        }
    }
}

fn build_demo(
    config: &ReachDatasetConfig,
    sequence: &[usize],
    id: String,
    rng: &mut StreamRng,
) -> Result<LabeledDemonstration> {
    let d = &config.durations;
    let offset = [
        rng.random_range(-1.0..=1.0) * config.pose_jitter,
        rng.random_range(-1.0..=1.0) * config.pose_jitter,
    ];
    let mut base = config.base_pose.clone();
    for p in base.iter_mut() {
        p[0] += offset[0];
        p[1] += offset[1];
    }
    let mut segments = Vec::with_capacity(sequence.len());
    let mut t = 0.0;
    for &k in sequence {
        let start = t + d.idle_before.sample(rng);
        let seg = Segment {
            target: k,
            start,
            reach: d.reach.sample(rng),
            hold: d.hold.sample(rng),
            retract: d.retract.sample(rng),
            arc: config.arc_height.sample(rng),
            swivel: config.swivel.sample(rng),
            lean: required_lean(&base, config.targets[k])? + rng.random_range(0.0..=0.02),
        };
        t = seg.end();
        segments.push(seg);
    }
    let total = t + d.idle_after.sample(rng);
    let frames = (total * config.fps).floor() as usize + 1;

    let mut times = Vec::with_capacity(frames);
    let mut coords = Vec::with_capacity(frames * 30);
    let mut labels = Vec::with_capacity(frames);
    for i in 0..frames {
        let ti = i as f64 / config.fps;
        // active segment: the last one that has started, else the first
        let idx = segments.iter().rposition(|s| ti >= s.start).unwrap_or(0);
        let seg = &segments[idx];
        let pose = pose_at(&base, config.targets[seg.target], seg, seg.progress(ti));
        times.push(ti);
        coords.extend(pose.iter().flatten());
        labels.push(ActionLabel(seg.target));
    }
    let motion = MotionSequence::new(times, base.len(), coords)?;
    LabeledDemonstration::new(id, config.fps, motion, labels)
}

fn pose_at(base: &[Point3], target: Point3, seg: &Segment, s: f64) -> Vec<Point3> {
    let mut pose = base.to_vec();
    let lean = seg.lean * s;
    for (j, w) in [(HEAD, 1.0), (NECK, 0.9), (TORSO, 0.5), (SHOULDER_LEFT, 0.9), (SHOULDER_RIGHT, 0.9)] {
        pose[j][0] += lean * w;
    }
    let left = target[1] >= 0.0;
    let (moving, idle) = if left {
        ((SHOULDER_LEFT, ELBOW_LEFT, HAND_LEFT, 1.0), (SHOULDER_RIGHT, ELBOW_RIGHT, HAND_RIGHT, -1.0))
    } else {
        ((SHOULDER_RIGHT, ELBOW_RIGHT, HAND_RIGHT, -1.0), (SHOULDER_LEFT, ELBOW_LEFT, HAND_LEFT, 1.0))
    };

    let rest = base[moving.2];
    let arch = seg.arc * (std::f64::consts::PI * s).sin();
    let hand = [
        rest[0] + s * (target[0] - rest[0]),
        rest[1] + s * (target[1] - rest[1]),
        rest[2] + s * (target[2] - rest[2]) + arch,
    ];
    pose[moving.2] = hand;
    pose[moving.1] = elbow(pose[moving.0], hand, moving.3, seg.swivel * s);
    pose[idle.1] = elbow(pose[idle.0], pose[idle.2], idle.3, 0.0);
    pose
}

/// Forward lean (x) needed for the shoulder to reach `target` with some slack.
fn required_lean(base: &[Point3], target: Point3) -> Result<f64> {
    let shoulder = if target[1] >= 0.0 { base[SHOULDER_LEFT] } else { base[SHOULDER_RIGHT] };
    let reach = 0.95 * (UPPER_ARM + FOREARM);
    let dy = target[1] - shoulder[1];
    let dz = target[2] - shoulder[2];
    let rem = reach * reach - dy * dy - dz * dz;
    if rem <= 0.0 {
        return invalid("target out of reach");
    }
    let lean = (target[0] - shoulder[0] - rem.sqrt()).max(0.0);
    if lean > 0.35 {
        return invalid("target out of reach");
    }
    Ok(lean / 0.9)
}

/// Elbow position by two-link IK; `side` picks the outward direction and
/// `swivel` rotates the elbow about the shoulder-hand axis.
fn elbow(shoulder: Point3, hand: Point3, side: f64, swivel: f64) -> Point3 {
    let sub = |a: Point3, b: Point3| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: Point3, b: Point3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let norm = |a: Point3| dot(a, a).sqrt();
    let scale = |a: Point3, s: f64| [a[0] * s, a[1] * s, a[2] * s];
    let cross = |a: Point3, b: Point3| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };

    let v = sub(hand, shoulder);
    let d = norm(v).clamp(1e-6, UPPER_ARM + FOREARM - 1e-9);
    let u = scale(v, 1.0 / norm(v).max(1e-12));
    let along = (UPPER_ARM * UPPER_ARM - FOREARM * FOREARM + d * d) / (2.0 * d);
    let radius = (UPPER_ARM * UPPER_ARM - along * along).max(0.0).sqrt();
    let reference = [0.0, 0.35 * side, -1.0];
    let e1 = sub(reference, scale(u, dot(reference, u)));
    let e1 = scale(e1, 1.0 / norm(e1).max(1e-12));
    let e2 = cross(u, e1);
    let (s, c) = swivel.sin_cos();
    [
        shoulder[0] + along * u[0] + radius * (c * e1[0] + s * e2[0]),
        shoulder[1] + along * u[1] + radius * (c * e1[1] + s * e2[1]),
        shoulder[2] + along * u[2] + radius * (c * e1[2] + s * e2[2]),
    ]
}
