//! Prediction and execution quality measures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::motion::{extract_windows_with, inject_noise, LabeledDemonstration, MotionDatabase, Point3, WindowSpec};
use crate::prediction::{predict_motion, MotionModel, MotionPrediction, NoisyInputParams};
use crate::rng::derive_seed;

fn dist(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn mean_directed(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / a.len() as f64
}

/// Modified Hausdorff distance: the larger mean nearest-neighbour distance
/// of the two directions.
pub fn mhd(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("modified Hausdorff distance needs two non-empty point sets");
    }
    Ok(mean_directed(a, b).max(mean_directed(b, a)))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionEval {
    pub windows: usize,
    /// Windows whose dominant class weight exceeds one half.
    pub confident: usize,
    pub correct: usize,
    /// `correct / confident`; 1 when nothing was confident.
    pub classification_precision: f64,
    /// Mean over windows of `∫ Σ_j ‖p̂_j − p_j‖² dt`.
    pub regression_precision: f64,
    /// Mean over windows of `∫ Σ_j det K_j dt` of the mixture covariance.
    pub regression_accuracy: f64,
}

/// One evaluated window: prediction, true future (`n_f × 3J`) and true
/// current action.
pub struct EvalItem<'a> {
    pub prediction: &'a MotionPrediction,
    pub truth: &'a [f64],
    pub action: usize,
}

/// Scores predictions at frame spacing `dt`.
pub fn eval_predictions(items: &[EvalItem<'_>], dt: f64) -> Result<PredictionEval> {
    let mut out = PredictionEval { windows: items.len(), ..Default::default() };
    if items.is_empty() {
        out.classification_precision = 1.0;
        return Ok(out);
    }
    for it in items {
        let p = it.prediction;
        let len = p.n_f * p.joints * 3;
        if it.truth.len() != len {
            return Err(crate::error::Error::DimensionMismatch { expected: len, actual: it.truth.len() });
        }
        let (a, w) = p.dominant();
        if w > 0.5 {
            out.confident += 1;
            if a == it.action {
                out.correct += 1;
            }
        }
        let mean = p.mixture_mean();
        let var = p.mixture_variance();
        let mut err = 0.0;
        let mut det = 0.0;
        for f in 0..p.n_f {
            for j in 0..p.joints {
                let o = (f * p.joints + j) * 3;
                err += (0..3).map(|k| (mean[o + k] - it.truth[o + k]).powi(2)).sum::<f64>() * dt;
                det += var[o] * var[o + 1] * var[o + 2] * dt;
            }
        }
        out.regression_precision += err;
        out.regression_accuracy += det;
    }
    out.regression_precision /= items.len() as f64;
    out.regression_accuracy /= items.len() as f64;
    out.classification_precision = if out.confident == 0 { 1.0 } else { out.correct as f64 / out.confident as f64 };
    Ok(out)
}

/// Evaluates `model` on every window of `test`, with Gaussian noise of
/// standard deviation `noise` added to the observed positions. Futures are
/// compared against the clean motion.
pub fn eval_prediction(
    model: &MotionModel,
    test: &MotionDatabase,
    noise: f64,
    noisy: &NoisyInputParams,
    stride: usize,
    seed: u64,
) -> Result<PredictionEval> {
    let spec = WindowSpec { n_p: model.config.n_p, n_f: model.config.n_f, stride: stride.max(1), layout: model.layout };
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut dt = 0.0;
    for (i, demo) in test.demonstrations.iter().enumerate() {
        dt = 1.0 / demo.fps;
        let observed = LabeledDemonstration::new(
            demo.id.clone(),
            demo.fps,
            inject_noise(&demo.motion, noise, derive_seed(seed, 0x6576616c, i as u64))?,
            demo.actions.clone(),
        )?;
        let clean = extract_windows_with(demo, &spec);
        let seen = extract_windows_with(&observed, &spec);
        for (c, o) in clean.into_iter().zip(seen) {
            preds.push(predict_motion(model, &o.prev_features, &o.progress, noisy)?);
            truths.push((c.next_motion, c.current_action.0));
        }
    }
    let items: Vec<EvalItem<'_>> = preds
        .iter()
        .zip(&truths)
        .map(|(p, (t, a))| EvalItem { prediction: p, truth: t, action: *a })
        .collect();
    eval_predictions(&items, dt)
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub model: String,
    /// Mean wall-clock prediction time; absent unless timing was requested.
    pub prediction_ms: Option<f64>,
    pub mhd_m: f64,
    pub smoothness: f64,
    pub jerkiness: f64,
    pub min_distance_m: f64,
    pub efficiency: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::ProgressState;

    #[test]
    fn mhd_basics() {
        let a = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(mhd(&a, &a).unwrap(), 0.0);
        assert!((mhd(&[[0.0; 3]], &[[0.05, 0.0, 0.0]]).unwrap() - 0.05).abs() < 1e-15);
        assert!(mhd(&a, &[]).is_err());
    }

    fn perfect(truth: &[f64], action: usize) -> MotionPrediction {
        MotionPrediction {
            n_f: 2,
            joints: 1,
            weights: if action == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
            components: vec![crate::prediction::ClassPrediction {
                action,
                weight: 1.0,
                mean: truth.to_vec(),
                variance: vec![0.0; truth.len()],
            }],
            state: ProgressState::default(),
            fallback: false,
        }
    }

    #[test]
    fn perfect_predictor_scores() {
        let truth = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let p = perfect(&truth, 1);
        let e = eval_predictions(&[EvalItem { prediction: &p, truth: &truth, action: 1 }], 0.1).unwrap();
        assert_eq!(e.classification_precision, 1.0);
        assert_eq!(e.regression_precision, 0.0);
        assert_eq!(e.regression_accuracy, 0.0);
    }

    #[test]
    fn unconfident_frames_are_not_counted() {
        let truth = vec![0.0; 6];
        let mut p = perfect(&truth, 0);
        p.weights = vec![0.5, 0.5];
        let q = perfect(&truth, 1);
        let items = [
            EvalItem { prediction: &p, truth: &truth, action: 1 },
            EvalItem { prediction: &q, truth: &truth, action: 0 },
        ];
        let e = eval_predictions(&items, 0.1).unwrap();
        assert_eq!((e.windows, e.confident, e.correct), (2, 1, 0));
        assert_eq!(e.classification_precision, 0.0);
    }
}
