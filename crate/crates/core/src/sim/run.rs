//! Scenario execution: playback, prediction, replanning and bookkeeping.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{mhd, Metrics};
use super::playback::HumanPlayback;
use super::scenario::Scenario;
use super::task_mdp::{sample_sequences, train_task_policy};
use crate::error::{invalid, Error, Result};
use crate::geometry::{even_fractions, human_spheres, isotropic, pose_spheres, robot_spheres, Cov3, Sphere};
use crate::motion::{synth_reach_dataset, synth_task_dataset, upper_body_limbs, MotionDatabase, Point3, HAND_LEFT, HAND_RIGHT};
use crate::planner::{jerkiness, replan_step, smoothness, HumanFrame, PlanContext, PlannerState, Trajectory};
use crate::prediction::{predict_motion, train_motion_model, MotionModel, MotionPrediction, NoisyInputParams};
use crate::rng::{derive_seed, rng_for, stream};
use crate::task::{best_action, ProgressLayout, ProgressState, TaskOrder};

/// The three planners compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Current observation only, held fixed over the window.
    Itomp,
    /// Predicted motion mixture.
    Iplanner,
    /// Predicted motion mixture with input-noise variance.
    IplannerNi,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Itomp, ModelKind::Iplanner, ModelKind::IplannerNi];

    pub fn id(&self) -> &'static str {
        match self {
            ModelKind::Itomp => "itomp",
            ModelKind::Iplanner => "iplanner",
            ModelKind::IplannerNi => "iplanner-ni",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Itomp => "ITOMP",
            ModelKind::Iplanner => "I-Planner, no NI",
            ModelKind::IplannerNi => "I-Planner, NI",
        }
    }

    pub fn uses_prediction(&self) -> bool {
        !matches!(self, ModelKind::Itomp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}' (expected itomp, iplanner or iplanner-ni)")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Record wall-clock prediction times (makes traces non-reproducible).
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub weights: Vec<f64>,
    pub dominant: usize,
    pub state: ProgressState,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub sim_time: f64,
    pub subtask: usize,
    pub executed: Vec<(f64, Vec<f64>)>,
    pub frame_bounds: Vec<(f64, f64)>,
    pub wait_inserted: bool,
    pub feasible: bool,
    pub per_start_costs: Vec<f64>,
    pub prediction: Option<PredictionSummary>,
    pub prediction_ms: Option<f64>,
    /// Hand-trajectory error of the issued prediction when a hand moved.
    pub mhd: Option<f64>,
    /// Closest robot-to-human surface distance over the executed segment.
    pub min_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDecision {
    pub time: f64,
    pub progress: ProgressState,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub scenario: String,
    pub model: ModelKind,
    pub seed: u64,
    pub human_actions: Vec<usize>,
    pub steps: Vec<StepTrace>,
    pub decisions: Vec<TaskDecision>,
    /// Executed robot waypoints.
    pub robot: Trajectory,
    /// Ground-truth human pose at every executed waypoint.
    pub human_truth: Vec<Vec<Point3>>,
    pub waits: usize,
    pub delay: f64,
    pub robot_completion: f64,
    pub human_completion: f64,
    pub human_alone_time: f64,
    /// Closest surface distance over the run (negative on contact).
    pub min_distance: f64,
    pub collision_events: Vec<f64>,
    pub completed: bool,
}

/// Trains the predictor on the scenario's synthetic corpus.
pub fn train_scenario_model(scn: &Scenario) -> Result<MotionModel> {
    let p = &scn.prediction;
    train_motion_model(&scenario_dataset(scn, p.train_seed)?, &p.predictor, p.train_seed)
}

/// Demonstration corpus of the scenario's person drawn with `seed`: task
/// sequences sampled from the task order, or one reach per target.
pub fn scenario_dataset(scn: &Scenario, seed: u64) -> Result<MotionDatabase> {
    match &scn.task {
        Some(t) => {
            let order = TaskOrder::parse(&t.order, scn.human.dataset.targets.len())?;
            let seqs = sample_sequences(&order, scn.prediction.task_sequences, seed);
            synth_task_dataset(&scn.human.dataset, &seqs, seed)
        }
        None => synth_reach_dataset(&scn.human.dataset, seed),
    }
}

/// Actions the person performs in run `seed`: a sample of the task order,
/// or the scripted list.
pub fn human_script(scn: &Scenario, seed: u64) -> Result<Vec<usize>> {
    match &scn.task {
        Some(t) => {
            let order = TaskOrder::parse(&t.order, scn.human.dataset.targets.len())?;
            Ok(order.sample(&mut rng_for(seed, stream::TASK, 1)))
        }
        None => Ok(scn.human.actions.clone()),
    }
}

/// Noisy-input parameters used by planner `kind` in `scn`.
pub fn noisy_params(scn: &Scenario, kind: ModelKind) -> Result<NoisyInputParams> {
    match kind {
        ModelKind::IplannerNi => {
            let sigma = scn.prediction.ni_sigma.unwrap_or(scn.human.noise.max(scn.prediction.obs_sigma));
            NoisyInputParams::new(sigma, scn.prediction.velocity_limit)
        }
        _ => Ok(NoisyInputParams::default()),
    }
}

/// Joint Gaussians `(mean, covariance)` of one mixture component at a
/// fractional future frame `x` (−1 is the current observation).
fn component_joints(pred: &MotionPrediction, c: usize, x: f64, obs: &[Point3], obs_var: f64) -> Vec<(Point3, Cov3)> {
    let diag = |v: [f64; 3]| -> Cov3 { [[v[0], 0.0, 0.0], [0.0, v[1], 0.0], [0.0, 0.0, v[2]]] };
    let last = pred.n_f - 1;
    (0..pred.joints)
        .map(|j| {
            let (m0, v0, m1, v1, u) = if x < 0.0 {
                let (m, v) = pred.joint_gaussian(c, 0, j);
                (obs[j], [obs_var; 3], m, v, x + 1.0)
            } else {
                let f0 = (x.floor() as usize).min(last);
                let f1 = (f0 + 1).min(last);
                let (a, va) = pred.joint_gaussian(c, f0, j);
                let (b, vb) = pred.joint_gaussian(c, f1, j);
                (a, va, b, vb, (x - f0 as f64).clamp(0.0, 1.0))
            };
            let lerp = |a: f64, b: f64| a + u * (b - a);
            (
                [lerp(m0[0], m1[0]), lerp(m0[1], m1[1]), lerp(m0[2], m1[2])],
                diag([lerp(v0[0], v1[0]), lerp(v0[1], v1[1]), lerp(v0[2], v1[2])]),
            )
        })
        .collect()
}

/// Human frame `ahead` seconds after the last observation.
fn human_frame(
    pred: Option<&MotionPrediction>,
    obs: &[Point3],
    obs_sigma: f64,
    ahead_frames: f64,
    limbs: &[(usize, usize, f64)],
    u: &[f64],
) -> Result<HumanFrame> {
    let x = ahead_frames - 1.0;
    match pred {
        Some(p) if x > -1.0 => {
            let mut components = Vec::with_capacity(p.components.len());
            for (c, comp) in p.components.iter().enumerate() {
                if comp.weight <= 0.0 {
                    continue;
                }
                let joints = component_joints(p, c, x, obs, obs_sigma * obs_sigma);
                components.push((comp.weight, human_spheres(&joints, limbs, u)?));
            }
            Ok(HumanFrame { components })
        }
        _ => {
            let joints: Vec<(Point3, Cov3)> = obs.iter().map(|p| (*p, isotropic(obs_sigma))).collect();
            Ok(HumanFrame::single(human_spheres(&joints, limbs, u)?))
        }
    }
}

fn min_surface(robot: &[Sphere], human: &[Sphere]) -> f64 {
    robot
        .iter()
        .flat_map(|a| human.iter().map(move |b| a.surface_distance(b)))
        .fold(f64::INFINITY, f64::min)
}

fn lerp_q(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
}

struct DistanceProbe<'a> {
    scn: &'a Scenario,
    playback: &'a HumanPlayback,
    limbs: Vec<(usize, usize, f64)>,
    u: Vec<f64>,
}

impl DistanceProbe<'_> {
    fn at(&self, t: f64, q: &[f64]) -> Result<f64> {
        let robot = robot_spheres(&self.scn.robot.chain, q)?;
        let human = pose_spheres(&self.playback.truth_pose_at(t), &self.limbs, &self.u)?;
        Ok(min_surface(&robot, &human))
    }

    /// Minimum over substeps of every interval, and times of contact.
    fn segment(&self, pts: &[(f64, Vec<f64>)], contacts: &mut Vec<f64>) -> Result<f64> {
        let sub = self.scn.metrics.distance_substeps;
        let mut best = f64::INFINITY;
        let mut check = |t: f64, q: &[f64]| -> Result<()> {
            let d = self.at(t, q)?;
            if d < 0.0 {
                contacts.push(t);
            }
            best = best.min(d);
            Ok(())
        };
        if let [(t, q)] = pts {
            check(*t, q)?;
        }
        for w in pts.windows(2) {
            let ((ta, qa), (tb, qb)) = (&w[0], &w[1]);
            for k in 0..sub {
                let u = k as f64 / sub as f64;
                check(ta + u * (tb - ta), &lerp_q(qa, qb, u))?;
            }
        }
        if let Some((t, q)) = pts.last().filter(|_| pts.len() > 1) {
            check(*t, q)?;
        }
        Ok(best)
    }
}

/// Hand error of a prediction against the ground truth over the predicted
/// horizon, if one hand actually moves by more than 5 cm.
fn step_mhd(
    pred: Option<&MotionPrediction>,
    obs: &[Point3],
    playback: &HumanPlayback,
    t_obs: f64,
    n_f: usize,
) -> Result<Option<f64>> {
    let times: Vec<f64> = (0..n_f).map(|f| t_obs + (f + 1) as f64 / playback.fps).collect();
    let truth: Vec<Vec<Point3>> = times.iter().map(|t| playback.truth_pose_at(*t)).collect();
    let travel = |j: usize| truth.windows(2).map(|w| crate::geometry::distance(w[0][j], w[1][j])).sum::<f64>();
    let (hand, moved) = [HAND_LEFT, HAND_RIGHT]
        .into_iter()
        .map(|j| (j, travel(j)))
        .fold((HAND_LEFT, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if moved < 0.05 {
        return Ok(None);
    }
    let gt: Vec<Point3> = truth.iter().map(|p| p[hand]).collect();
    let predicted: Vec<Point3> = match pred {
        Some(p) => {
            let mean = p.mixture_mean();
            (0..p.n_f).map(|f| {
                let o = (f * p.joints + hand) * 3;
                [mean[o], mean[o + 1], mean[o + 2]]
            })
            .collect()
        }
        None => vec![obs[hand]; n_f],
    };
    Ok(Some(mhd(&predicted, &gt)?))
}

/// Runs one scenario with one planner model. Identical inputs give
/// identical traces unless timing is requested.
pub fn run_scenario(
    scn: &Scenario,
    model: Option<&MotionModel>,
    kind: ModelKind,
    seed: u64,
    opts: RunOptions,
) -> Result<RunTrace> {
    scn.validate()?;
    let model = match (kind.uses_prediction(), model) {
        (true, None) => return invalid(format!("model {kind} needs a trained predictor")),
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    let n_p = model.map_or(scn.prediction.predictor.n_p, |m| m.config.n_p);
    let n_f = model.map_or(scn.prediction.predictor.n_f, |m| m.config.n_f);
    let n_targets = scn.human.dataset.targets.len();

    // human script and robot policy
    let human_actions = human_script(scn, seed)?;
    let policy = match &scn.task {
        Some(t) => {
            let order = TaskOrder::parse(&t.order, n_targets)?;
            let seqs = sample_sequences(&order, scn.prediction.task_sequences, scn.prediction.train_seed);
            let q = train_task_policy(&order, &t.reward, &seqs, t.episodes, t.alpha, t.gamma, scn.prediction.train_seed)?;
            Some(q)
        }
        None => None,
    };
    let p = &scn.planner;
    let horizon = p.max_time + 5.0;
    let playback = HumanPlayback::new(scn, &human_actions, seed, horizon, n_p + 2)?;
    let probe = DistanceProbe { scn, playback: &playback, limbs: upper_body_limbs(), u: even_fractions(p.limb_samples) };

    let chain = scn.robot.chain.clone();
    let mut ctx = PlanContext::new(chain.clone(), p.delta, p.m)?;
    ctx.statics = scn.robot.statics.clone();
    ctx.static_margin = p.static_margin;
    ctx.hinge_margin = p.hinge_margin;
    ctx.max_joint_speed = p.max_joint_speed;
    ctx.weights = p.weights;
    ctx.bound.paper_literal_bound = p.paper_literal_bound;

    let noisy = noisy_params(scn, kind)?;

    let robot_layout = ProgressLayout { human: n_targets, robot: scn.task.as_ref().map_or(0, |t| t.robot_goals.len()), counting: false };
    let mut robot_done = vec![false; robot_layout.robot];
    let mut q = scn.robot.start.clone();
    let mut t = 0.0;
    let mut steps = Vec::new();
    let mut decisions = Vec::new();
    let mut executed: Vec<(f64, Vec<f64>)> = vec![(0.0, q.clone())];
    let mut contacts = Vec::new();
    let mut min_distance = probe.at(0.0, &q)?;
    if min_distance < 0.0 {
        contacts.push(0.0);
    }
    let mut waits = 0;
    let mut delay = 0.0;
    let mut completed = true;
    let mut subtask = 0usize;

    'outer: loop {
        let goal = match (&scn.task, &policy) {
            (Some(task), Some(qt)) => {
                let open: Vec<usize> = (0..robot_done.len()).filter(|&r| !robot_done[r]).collect();
                if open.is_empty() {
                    break;
                }
                let human = playback.progress(playback.frame_index(t));
                let mut counts = human.counts().to_vec();
                counts.extend(robot_done.iter().map(|&d| u32::from(d)));
                let state = ProgressState::from_counts(counts);
                let a = best_action(qt, &state, &open)?;
                decisions.push(TaskDecision { time: t, progress: state, action: a });
                robot_done[a] = true;
                task.robot_goals[a].clone()
            }
            _ => {
                if subtask > 0 {
                    break;
                }
                scn.robot.goal.clone()
            }
        };
        let mut state = PlannerState::new(&q, &goal, p.segments, t, p.dt, p.m)?;
        let params = p.replan_params(derive_seed(seed, stream::PLANNER, subtask as u64));
        while !state.done() {
            let t_s = state.current_time();
            if t_s > p.max_time {
                completed = false;
                break 'outer;
            }
            let k = playback.frame_index(t_s);
            let t_obs = playback.frame_time(k);
            let obs = playback.observed_pose(k);
            // nothing left to predict once the scripted actions are over
            let active = model.filter(|_| t_obs < playback.end_time);
            let (prediction, prediction_ms) = match active {
                Some(m) => {
                    let window = playback.window_features(k, n_p)?;
                    let progress = playback.progress(k);
                    let clock = Instant::now();
                    let pred = predict_motion(m, &window, &progress, &noisy)?;
                    let ms = clock.elapsed().as_secs_f64() * 1e3;
                    (Some(pred), opts.timing.then_some(ms))
                }
                None => (None, None),
            };
            ctx.clear_human();
            if let Some(w) = state.pending_window() {
                for i in w {
                    let ahead = (state.time_of(i) - t_obs) * playback.fps;
                    let frame = human_frame(prediction.as_ref(), &obs, scn.prediction.obs_sigma, ahead, &probe.limbs, &probe.u)?;
                    ctx.set_human(i, &frame)?;
                }
            }
            let rec = replan_step(&mut state, &mut ctx, &params)?;
            let seg_min = probe.segment(&rec.executed, &mut contacts)?;
            min_distance = min_distance.min(seg_min);
            executed.extend(rec.executed.iter().skip(1).cloned());
            let mhd = step_mhd(prediction.as_ref(), &obs, &playback, t_obs, n_f)?;
            steps.push(StepTrace {
                step: steps.len(),
                sim_time: rec.sim_time,
                subtask,
                executed: rec.executed,
                frame_bounds: rec.frame_bounds,
                wait_inserted: rec.wait_inserted,
                feasible: rec.feasible,
                per_start_costs: rec.per_start_costs,
                prediction: prediction.as_ref().map(|p| PredictionSummary {
                    weights: p.weights.clone(),
                    dominant: p.dominant().0,
                    state: p.state.clone(),
                    fallback: p.fallback,
                }),
                prediction_ms,
                mhd,
                min_distance: seg_min,
            });
        }
        waits += state.waits;
        delay += state.delay();
        q = state.current_config().to_vec();
        t = state.current_time();
        subtask += 1;
    }

    // the robot rests at its last configuration until the person finishes
    let robot_completion = t;
    let mut tail = robot_completion + 1.0 / playback.fps;
    while tail <= playback.end_time {
        let d = probe.at(tail, &q)?;
        if d < 0.0 {
            contacts.push(tail);
        }
        min_distance = min_distance.min(d);
        tail += 1.0 / playback.fps;
    }
    let robot = Trajectory::new(executed.iter().map(|e| e.0).collect(), executed.iter().map(|e| e.1.clone()).collect())?;
    let human_truth = robot.times.iter().map(|t| playback.truth_pose_at(*t)).collect();
    contacts.dedup();
    Ok(RunTrace {
        scenario: scn.name.clone(),
        model: kind,
        seed,
        human_actions,
        steps,
        decisions,
        robot,
        human_truth,
        waits,
        delay,
        robot_completion,
        human_completion: playback.end_time,
        human_alone_time: scn.metrics.human_alone_time,
        min_distance,
        collision_events: contacts,
        completed,
    })
}

/// Flattens a finished trace into one comparison row.
pub fn metrics_report(trace: &RunTrace) -> Result<Metrics> {
    if !trace.completed {
        return invalid(format!("run of '{}' with seed {} did not finish", trace.scenario, trace.seed));
    }
    let mhds: Vec<f64> = trace.steps.iter().filter_map(|s| s.mhd).collect();
    let times: Vec<f64> = trace.steps.iter().filter_map(|s| s.prediction_ms).collect();
    let (smooth, jerk) = if trace.robot.len() >= 3 {
        (smoothness(&trace.robot)?, jerkiness(&trace.robot)?)
    } else {
        (0.0, 0.0)
    };
    let collaborative = trace.robot_completion.max(trace.human_completion);
    Ok(Metrics {
        scenario: trace.scenario.clone(),
        seed: trace.seed,
        model: trace.model.id().to_string(),
        prediction_ms: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        mhd_m: if mhds.is_empty() { 0.0 } else { mhds.iter().sum::<f64>() / mhds.len() as f64 },
        smoothness: smooth,
        jerkiness: jerk,
        min_distance_m: trace.min_distance.max(0.0),
        efficiency: trace.human_alone_time / collaborative,
    })
}
