//! Per-progress-state classifiers and regressors combined into a Gaussian
//! mixture over the next `n_f` frames of joint positions.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ivm::{ivm_classify, ivm_train_windows, IvmClassifier, IvmParams};
use super::spgp::{spgp_train, GpTrainParams, NoisyInputParams, SparseGpModel};
use crate::error::{invalid, Error, Result};
use crate::motion::{extract_windows_with, MotionDatabase, TrainingWindow, WindowSpec};
use crate::rng::{derive_seed, stream};
use crate::task::{ProgressLayout, ProgressState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub n_p: usize,
    pub n_f: usize,
    /// Keep every `stride`-th training window.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Progress layout; `None` tracks the dataset's human actions only.
    #[serde(default)]
    pub layout: Option<ProgressLayout>,
    #[serde(default)]
    pub gp: GpTrainParams,
    #[serde(default)]
    pub ivm: IvmParams,
}

fn default_stride() -> usize {
    2
}

impl PredictorConfig {
    /// Windows of one second of frames on each side.
    pub fn for_fps(fps: f64) -> Self {
        let n = (fps.round() as usize).max(1);
        Self { n_p: n, n_f: n, stride: default_stride(), layout: None, gp: GpTrainParams::default(), ivm: IvmParams::default() }
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateModel {
    pub progress: ProgressState,
    pub classifier: IvmClassifier,
    /// One regressor per action observed in this state.
    pub regressors: Vec<(usize, SparseGpModel)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub config: PredictorConfig,
    pub layout: ProgressLayout,
    pub n_actions: usize,
    pub joints: usize,
    pub feature_dim: usize,
    pub states: Vec<StateModel>,
}

/// One mixture component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPrediction {
    pub action: usize,
    pub weight: f64,
    /// `n_f × 3J` means, frame-major.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPrediction {
    pub n_f: usize,
    pub joints: usize,
    /// Weight of every human action; sums to 1.
    pub weights: Vec<f64>,
    pub components: Vec<ClassPrediction>,
    /// Progress state whose models were used.
    pub state: ProgressState,
    /// Set when the query state was untrained and a neighbour was used.
    pub fallback: bool,
}

impl MotionPrediction {
    /// Mean and per-axis variance of joint `j` at future frame `f` for one
    /// component.
    pub fn joint_gaussian(&self, component: usize, f: usize, j: usize) -> ([f64; 3], [f64; 3]) {
        let c = &self.components[component];
        let o = f * self.joints * 3 + 3 * j;
        (
            [c.mean[o], c.mean[o + 1], c.mean[o + 2]],
            [c.variance[o], c.variance[o + 1], c.variance[o + 2]],
        )
    }

    /// Weighted mean over components.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let len = self.n_f * self.joints * 3;
        let mut out = vec![0.0; len];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(&c.mean) {
                *o += c.weight * m;
            }
        }
        out
    }

    /// Per-channel variance of the mixture.
    pub fn mixture_variance(&self) -> Vec<f64> {
        let mean = self.mixture_mean();
        let mut second = vec![0.0; mean.len()];
        for c in &self.components {
            for ((s, m), v) in second.iter_mut().zip(&c.mean).zip(&c.variance) {
                *s += c.weight * (v + m * m);
            }
        }
        second.iter().zip(&mean).map(|(s, m)| (s - m * m).max(0.0)).collect()
    }

    pub fn dominant(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (a, &w) in self.weights.iter().enumerate() {
            if w > best.1 {
                best = (a, w);
            }
        }
        best
    }
}

/// Training windows of every demonstration under `spec`.
pub fn collect_windows(db: &MotionDatabase, spec: &WindowSpec) -> Vec<TrainingWindow> {
    db.demonstrations.iter().flat_map(|d| extract_windows_with(d, spec)).collect()
}

pub fn train_motion_model(db: &MotionDatabase, config: &PredictorConfig, seed: u64) -> Result<MotionModel> {
    if db.is_empty() {
        return invalid("cannot train on an empty database");
    }
    if config.n_p == 0 || config.n_f == 0 {
        return invalid("window lengths must be at least one frame");
    }
    let layout = config.layout.unwrap_or(ProgressLayout::human_only(db.action_count()));
    let spec = WindowSpec { n_p: config.n_p, n_f: config.n_f, stride: config.stride.max(1), layout };
    let windows = collect_windows(db, &spec);
    train_from_windows(&windows, config, layout, db.action_count(), db.joint_count(), seed)
}

pub fn train_from_windows(
    windows: &[TrainingWindow],
    config: &PredictorConfig,
    layout: ProgressLayout,
    n_actions: usize,
    joints: usize,
    seed: u64,
) -> Result<MotionModel> {
    let Some(first) = windows.first() else {
        return invalid("no training windows: demonstrations are shorter than n_p + n_f");
    };
    let feature_dim = first.feature_dim;
    let mut groups: BTreeMap<ProgressState, Vec<&TrainingWindow>> = BTreeMap::new();
    for w in windows {
        groups.entry(w.progress.clone()).or_default().push(w);
    }
    let mut states = Vec::with_capacity(groups.len());
    for (gi, (progress, group)) in groups.into_iter().enumerate() {
        let gseed = derive_seed(seed, stream::TRAIN, gi as u64);
        let inputs: Vec<&[f64]> = group.iter().map(|w| w.prev_features.as_slice()).collect();
        let labels: Vec<usize> = group.iter().map(|w| w.current_action.0).collect();
        let classifier = ivm_train_windows(&inputs, &labels, feature_dim, &config.ivm, gseed)?;
        let mut regressors = Vec::new();
        for &action in &classifier.classes {
            let members: Vec<&&TrainingWindow> = group.iter().filter(|w| w.current_action.0 == action).collect();
            let xs: Vec<&[f64]> = members.iter().map(|w| w.prev_features.as_slice()).collect();
            let offsets: Vec<Vec<f64>> = members
                .iter()
                .map(|w| relative_to_anchor(&w.next_motion, anchor_pose(&w.prev_features, feature_dim, joints), -1.0))
                .collect();
            let ys: Vec<&[f64]> = offsets.iter().map(Vec::as_slice).collect();
            let gp = spgp_train(&xs, &ys, feature_dim, &config.gp, derive_seed(gseed, stream::TRAIN, action as u64))?;
            regressors.push((action, gp));
        }
        info!(
            "state {progress}: {} windows, {} classes, {} import points",
            group.len(),
            classifier.classes.len(),
            classifier.n_imports()
        );
        states.push(StateModel { progress, classifier, regressors });
    }
    Ok(MotionModel { config: config.clone(), layout, n_actions, joints, feature_dim, states })
}

impl MotionModel {
    /// Model for `p`, or the nearest trained state by Hamming distance.
    pub fn state_for(&self, p: &ProgressState) -> Result<(&StateModel, bool)> {
        if let Some(s) = self.states.iter().find(|s| &s.progress == p) {
            return Ok((s, false));
        }
        self.states
            .iter()
            .min_by_key(|s| s.progress.distance(p))
            .map(|s| (s, true))
            .ok_or_else(|| Error::InvalidInput("model has no trained states".into()))
    }

    pub fn window_len(&self) -> usize {
        self.config.n_p * self.feature_dim
    }

    pub fn verify(&self) -> Result<()> {
        for s in &self.states {
            s.classifier.verify()?;
            if s.classifier.input_len != self.window_len() {
                return Err(Error::Archive("classifier window length disagrees with config".into()));
            }
            for (a, gp) in &s.regressors {
                if *a >= self.n_actions || !s.classifier.classes.contains(a) {
                    return Err(Error::Archive(format!("regressor for unknown action {a}")));
                }
                if gp.channels.len() != self.config.n_f * self.joints * 3 {
                    return Err(Error::Archive("regressor channel count disagrees with config".into()));
                }
                gp.verify()?;
            }
        }
        Ok(())
    }
}

/// Joint positions of the last frame of a feature window.
fn anchor_pose(prev_features: &[f64], feature_dim: usize, joints: usize) -> &[f64] {
    let start = prev_features.len() - feature_dim;
    &prev_features[start..start + joints * 3]
}

/// Adds `sign ·` the anchor pose to every future frame.
fn relative_to_anchor(frames: &[f64], anchor: &[f64], sign: f64) -> Vec<f64> {
    frames.iter().zip(anchor.iter().cycle()).map(|(x, a)| x + sign * a).collect()
}

/// Mixture prediction: classifier weights times per-class regressors.
/// Regressors model future positions as offsets from the last observed pose.
pub fn predict_motion(
    model: &MotionModel,
    prev_features: &[f64],
    p: &ProgressState,
    noisy: &NoisyInputParams,
) -> Result<MotionPrediction> {
    if prev_features.len() != model.window_len() {
        return Err(Error::DimensionMismatch { expected: model.window_len(), actual: prev_features.len() });
    }
    let (state, fallback) = model.state_for(p)?;
    let weights = ivm_classify(&state.classifier, prev_features, model.n_actions)?;
    let extra = noisy.extra_variance();
    let mut components = Vec::with_capacity(state.regressors.len());
    for (action, gp) in &state.regressors {
        let z = gp.project(&gp.distances(prev_features)?);
        let pred = gp.predict_projected(&z, extra);
        let mean = relative_to_anchor(&pred.mean, anchor_pose(prev_features, model.feature_dim, model.joints), 1.0);
        components.push(ClassPrediction { action: *action, weight: weights[*action], mean, variance: pred.variance });
    }
    Ok(MotionPrediction {
        n_f: model.config.n_f,
        joints: model.joints,
        weights,
        components,
        state: state.progress.clone(),
        fallback,
    })
}

/// Serialized model plus the hash of the configuration it was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format: u32,
    pub config_hash: String,
    pub model: MotionModel,
}

const ARCHIVE_FORMAT: u32 = 2;

pub fn save_model<W: Write>(model: &MotionModel, out: W) -> Result<()> {
    let archive = ModelArchive { format: ARCHIVE_FORMAT, config_hash: model.config.hash(), model: model.clone() };
    serde_json::to_writer(out, &archive)?;
    Ok(())
}

/// Reads an archive and re-checks every stored model.
pub fn load_model<R: Read>(input: R) -> Result<MotionModel> {
    let archive: ModelArchive = serde_json::from_reader(input)?;
    if archive.format != ARCHIVE_FORMAT {
        return Err(Error::Archive(format!("unsupported archive format {}", archive.format)));
    }
    if archive.config_hash != archive.model.config.hash() {
        return Err(Error::Archive("configuration hash mismatch".into()));
    }
    archive.model.verify()?;
    Ok(archive.model)
}
