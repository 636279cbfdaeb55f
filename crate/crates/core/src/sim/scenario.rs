//! Scenario configuration and the built-in scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{seven_dof_arm, solve_ik, KinematicChain, Sphere};
use crate::motion::{PhaseDurations, Point3, Range, ReachDatasetConfig};
use crate::planner::{CostWeights, OptimBudget, ReplanParams, DEFAULT_MAX_JOINT_SPEED};
use crate::prediction::PredictorConfig;
use crate::task::{RewardSpec, TaskOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub chain: KinematicChain,
    pub start: Vec<f64>,
    /// Goal of a single-motion scenario; ignored when a task is present.
    pub goal: Vec<f64>,
    #[serde(default)]
    pub statics: Vec<Sphere>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanSpec {
    /// Corpus the predictor is trained on; playback uses fresh draws of it.
    #[serde(default)]
    pub dataset: ReachDatasetConfig,
    /// Phase timing of the played-back person, if different from training.
    #[serde(default)]
    pub playback_durations: Option<PhaseDurations>,
    /// Scripted human action sequence (used when no task order is given).
    #[serde(default)]
    pub actions: Vec<usize>,
    /// Simulated time at which the played-back demonstration starts (s).
    #[serde(default)]
    pub start_time: f64,
    /// Playback speed factor.
    #[serde(default = "one")]
    pub speed: f64,
    /// Standard deviation of observation noise on joint positions (m).
    #[serde(default)]
    pub noise: f64,
    /// Rigid offset of the person in the world (m).
    #[serde(default)]
    pub offset: Point3,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerSpec {
    /// Waypoint segments per motion.
    pub segments: usize,
    /// Waypoint spacing (s).
    pub dt: f64,
    /// Replanning step in waypoints.
    pub m: usize,
    pub delta: f64,
    pub n_starts: usize,
    pub perturbation: f64,
    pub iterations: usize,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default = "half")]
    pub hinge_margin: f64,
    #[serde(default = "static_margin")]
    pub static_margin: f64,
    #[serde(default)]
    pub paper_literal_bound: bool,
    /// Spheres per human limb.
    #[serde(default = "five")]
    pub limb_samples: usize,
    /// Simulated time after which a run is abandoned (s).
    #[serde(default = "max_time")]
    pub max_time: f64,
    /// Joint speed limit (rad/s).
    #[serde(default = "max_joint_speed")]
    pub max_joint_speed: f64,
}

fn max_joint_speed() -> f64 {
    DEFAULT_MAX_JOINT_SPEED
}

fn half() -> f64 {
    0.5
}
fn static_margin() -> f64 {
    0.02
}
fn five() -> usize {
    5
}
fn max_time() -> f64 {
    60.0
}

impl Default for PlannerSpec {
    fn default() -> Self {
        PlannerSpec {
            segments: 20,
            dt: 0.25,
            m: 2,
            delta: 0.95,
            n_starts: 4,
            perturbation: 0.3,
            iterations: 60,
            weights: CostWeights::default(),
            hinge_margin: half(),
            static_margin: static_margin(),
            paper_literal_bound: false,
            limb_samples: five(),
            max_time: max_time(),
            max_joint_speed: max_joint_speed(),
        }
    }
}

impl PlannerSpec {
    pub fn replan_params(&self, seed: u64) -> ReplanParams {
        ReplanParams {
            n_starts: self.n_starts,
            perturbation: self.perturbation,
            budget: OptimBudget { iterations: self.iterations, ..OptimBudget::default() },
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpec {
    pub predictor: PredictorConfig,
    pub train_seed: u64,
    /// Standard deviation assigned to the current observation when no
    /// prediction is used (m).
    #[serde(default = "obs_sigma")]
    pub obs_sigma: f64,
    /// Input noise assumed by the noisy-input model (m); defaults to the
    /// playback noise, floored at `obs_sigma`.
    #[serde(default)]
    pub ni_sigma: Option<f64>,
    #[serde(default = "one")]
    pub velocity_limit: f64,
    /// Number of task sequences in the training corpus of task scenarios.
    #[serde(default = "task_sequences")]
    pub task_sequences: usize,
}

fn obs_sigma() -> f64 {
    0.02
}
fn task_sequences() -> usize {
    40
}

impl Default for PredictionSpec {
    fn default() -> Self {
        PredictionSpec {
            predictor: PredictorConfig::for_fps(15.0),
            train_seed: 1,
            obs_sigma: obs_sigma(),
            ni_sigma: None,
            velocity_limit: 1.0,
            task_sequences: task_sequences(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSpec {
    /// Time the person needs to finish everything alone (s).
    pub human_alone_time: f64,
    /// Distance checks per executed waypoint interval.
    #[serde(default = "four")]
    pub distance_substeps: usize,
}

fn four() -> usize {
    4
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec { human_alone_time: 8.0, distance_substeps: four() }
    }
}

/// Robot subtasks chosen by the learned task policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Human precedence constraints, e.g. `"(0,1)->(2,3)"`.
    pub order: String,
    /// Goal configuration of every robot subtask.
    pub robot_goals: Vec<Vec<f64>>,
    pub reward: RewardSpec,
    #[serde(default = "episodes")]
    pub episodes: usize,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "gamma")]
    pub gamma: f64,
}

fn episodes() -> usize {
    2000
}
fn alpha() -> f64 {
    0.1
}
fn gamma() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub robot: RobotSpec,
    pub human: HumanSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub prediction: PredictionSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub task: Option<TaskSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let chain = &self.robot.chain;
        chain.validate()?;
        let n = chain.dof();
        if self.robot.start.len() != n || !chain.within_limits(&self.robot.start) {
            return invalid("robot start must be a valid configuration");
        }
        if self.task.is_none() && (self.robot.goal.len() != n || !chain.within_limits(&self.robot.goal)) {
            return invalid("robot goal must be a valid configuration");
        }
        let p = &self.planner;
        if p.segments < 2 || !(p.dt > 0.0) || p.m == 0 || p.n_starts == 0 || p.iterations == 0 || p.limb_samples == 0 {
            return invalid("planner needs segments ≥ 2, dt > 0, m ≥ 1, n_starts ≥ 1, iterations ≥ 1, limb_samples ≥ 1");
        }
        if !(p.max_joint_speed > 0.0) || !p.max_joint_speed.is_finite() {
            return invalid("joint speed limit must be positive and finite");
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return invalid(format!("confidence level {} must lie in (0, 1)", p.delta));
        }
        let h = &self.human;
        if !(h.speed > 0.0) || !(h.noise >= 0.0) || !(h.start_time >= 0.0) {
            return invalid("human speed must be positive, noise and start time non-negative");
        }
        let n_targets = h.dataset.targets.len();
        if let Some(a) = h.actions.iter().find(|&&a| a >= n_targets) {
            return invalid(format!("human action {a} has no target"));
        }
        if self.task.is_none() && h.actions.is_empty() {
            return invalid("a scenario without a task needs scripted human actions");
        }
        if !(self.metrics.human_alone_time > 0.0) || self.metrics.distance_substeps == 0 {
            return invalid("human-alone time must be positive and distance substeps at least one");
        }
        if let Some(t) = &self.task {
            TaskOrder::parse(&t.order, n_targets)?;
            t.reward.validate()?;
            if t.reward.human_actions() != n_targets || t.reward.robot_actions() != t.robot_goals.len() {
                return invalid("task reward matrix must be human actions × robot goals");
            }
            if let Some(g) = t.robot_goals.iter().find(|g| g.len() != n || !chain.within_limits(g)) {
                return invalid(format!("robot goal {g:?} is not a valid configuration"));
            }
        }
        Ok(())
    }

    /// Human reaches into the path of a robot sweeping across the table.
    pub fn blocking() -> Self {
        let chain = default_arm();
        let start = arm_config(&chain, [0.62, 0.45, 0.98]);
        let goal = arm_config(&chain, [0.62, -0.45, 0.98]);
        Scenario {
            name: "blocking".into(),
            robot: RobotSpec { chain, start, goal, statics: Vec::new() },
            human: HumanSpec {
                // the person rests on the target long enough to block the arm
                dataset: ReachDatasetConfig {
                    durations: PhaseDurations {
                        hold: Range(1.2, 1.6),
                        idle_after: Range(1.0, 1.4),
                        ..PhaseDurations::default()
                    },
                    ..ReachDatasetConfig::default()
                },
                playback_durations: None,
                actions: vec![6],
                start_time: 0.0,
                speed: 1.0,
                noise: 0.0,
                offset: [0.0; 3],
            },
            planner: PlannerSpec::default(),
            prediction: PredictionSpec::default(),
            metrics: MetricsSpec::default(),
            task: None,
        }
    }

    /// Same motion with the person seated far from the robot and moving slowly.
    pub fn far_human() -> Self {
        let mut s = Self::blocking();
        s.name = "far-human".into();
        s.human.offset = [-1.5, 0.0, 0.0];
        s.human.speed = 0.5;
        s
    }

    /// Robot hands over blocks while the person places them in the order
    /// `(0,1)->(2,3)`.
    pub fn arrangement() -> Self {
        let mut s = Self::blocking();
        s.name = "arrangement".into();
        let chain = &s.robot.chain;
        let goals: Vec<Vec<f64>> = [[0.75, 0.35, 0.95], [0.75, 0.1, 0.95], [0.75, -0.1, 0.95], [0.75, -0.35, 0.95]]
            .iter()
            .map(|p| arm_config(chain, *p))
            .collect();
        s.robot.start = arm_config(chain, [0.85, 0.0, 1.15]);
        // robot subtask k fetches the block the person needs for action k
        let h = (0..8).map(|a| (0..4).map(|r| if a == r { 1.0 } else { 0.0 }).collect()).collect();
        s.task = Some(TaskSpec {
            order: "(0,1)->(2,3)".into(),
            robot_goals: goals,
            reward: RewardSpec { h, w_prep: 1.0, w_delay: 1.0 },
            episodes: episodes(),
            alpha: alpha(),
            gamma: gamma(),
        });
        s.human.actions = Vec::new();
        s.human.playback_durations = None;
        s.human.start_time = 0.0;
        s.metrics.human_alone_time = 24.0;
        s
    }
}

/// Seven-joint arm on the far side of the table, facing the person.
pub fn default_arm() -> KinematicChain {
    seven_dof_arm([1.15, 0.0, 0.75], std::f64::consts::PI)
}

/// Elbow-up inverse kinematics seed for the default arm.
pub const ARM_IK_SEED: [f64; 7] = [0.0, 0.6, 0.0, 1.2, 0.0, 0.6, 0.0];

/// Configuration placing the tool at `point`, from the elbow-up seed.
pub fn arm_config(chain: &KinematicChain, point: Point3) -> Vec<f64> {
    let (q, _) = solve_ik(chain, point, &ARM_IK_SEED, 500).expect("chain dimensions match the seed");
    q.iter().map(|v| (v * 1e9).round() / 1e9).collect()
}
