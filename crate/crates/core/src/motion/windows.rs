use serde::{Deserialize, Serialize};

use super::{ActionLabel, LabeledDemonstration};
use crate::task::{ProgressLayout, ProgressState};

/// How windows are cut from a demonstration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Frames of past features fed to the predictors.
    pub n_p: usize,
    /// Frames of future motion to regress.
    pub n_f: usize,
    /// Keep every `stride`-th window.
    #[serde(default = "one")]
    pub stride: usize,
    pub layout: ProgressLayout,
}

fn one() -> usize {
    1
}

impl WindowSpec {
    pub fn new(n_p: usize, n_f: usize, layout: ProgressLayout) -> Self {
        Self { n_p, n_f, stride: 1, layout }
    }
}

/// A training example: `n_p` frames of past features, the task progress and
/// current action at the last of them, and the `n_f` frames of motion that
/// follow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    /// Frame index `s` (1-based, the last frame in the past window).
    pub frame: usize,
    pub prev_features: Vec<f64>,
    pub feature_dim: usize,
    pub progress: ProgressState,
    pub current_action: ActionLabel,
    /// `n_f × 3J` future joint coordinates, frame-major.
    pub next_motion: Vec<f64>,
}

/// Windows at every valid `s` with `n_p ≤ s ≤ T − n_f`; progress states
/// are read from the demonstration's own labels.
pub fn extract_windows(demo: &LabeledDemonstration, n_p: usize, n_f: usize) -> Vec<TrainingWindow> {
    let human = demo.actions.iter().map(|a| a.0 + 1).max().unwrap_or(0);
    extract_windows_with(demo, &WindowSpec::new(n_p, n_f, ProgressLayout::human_only(human)))
}

pub fn extract_windows_with(demo: &LabeledDemonstration, spec: &WindowSpec) -> Vec<TrainingWindow> {
    let t = demo.len();
    let (n_p, n_f) = (spec.n_p, spec.n_f);
    if n_p == 0 || n_f == 0 || t < n_p + n_f {
        return Vec::new();
    }
    let stride = spec.stride.max(1);
    let dim = demo.motion.frame_dim();
    let mut out = Vec::with_capacity((t - n_p - n_f) / stride + 1);
    for s in (n_p..=t - n_f).step_by(stride) {
        // 1-based s: past columns s-n_p+1..=s, future columns s+1..=s+n_f
        out.push(TrainingWindow {
            frame: s,
            prev_features: demo.features.frames(s - n_p, s).to_vec(),
            feature_dim: demo.features.dim(),
            progress: ProgressState::from_prefix(&demo.actions[..s], spec.layout),
            current_action: demo.actions[s - 1],
            next_motion: demo.motion.coords()[s * dim..(s + n_f) * dim].to_vec(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MotionSequence;

    fn demo(labels: &[usize]) -> LabeledDemonstration {
        let n = labels.len();
        let times = (0..n).map(|i| i as f64 * 0.1).collect();
        let coords = (0..n).flat_map(|i| [i as f64, 0.0, 0.0]).collect();
        let motion = MotionSequence::new(times, 1, coords).unwrap();
        LabeledDemonstration::new("d", 10.0, motion, labels.iter().map(|&a| ActionLabel(a)).collect()).unwrap()
    }

    #[test]
    fn window_count_matches_bounds() {
        let d = demo(&[0; 10]);
        let w = extract_windows(&d, 3, 2);
        assert_eq!(w.len(), 6);
        assert_eq!(w.first().unwrap().frame, 3);
        assert_eq!(w.last().unwrap().frame, 8);
        assert!(extract_windows(&d, 10, 1).is_empty());
        assert!(extract_windows(&d, 10, 0).is_empty());
    }

    #[test]
    fn window_contents_follow_column_ranges() {
        let d = demo(&[0; 10]);
        let w = &extract_windows(&d, 3, 2)[0];
        // past frames 1..=3 (0-based 0..3), positions at the start of each feature row
        let fd = w.feature_dim;
        let xs: Vec<f64> = (0..3).map(|k| w.prev_features[k * fd]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
        assert_eq!(w.next_motion, vec![3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn progress_follows_label_prefix() {
        let d = demo(&[0, 0, 1, 1, 1, 1]);
        let w = extract_windows(&d, 2, 1);
        assert_eq!(w[0].frame, 2);
        assert_eq!(w[0].current_action, ActionLabel(0));
        assert_eq!(w[0].progress.counts(), &[0, 0]);
        assert_eq!(w[1].current_action, ActionLabel(1));
        assert_eq!(w[1].progress.counts(), &[1, 0]);
    }

    #[test]
    fn stride_thins_windows() {
        let d = demo(&[0; 20]);
        let spec = WindowSpec { stride: 3, ..WindowSpec::new(2, 2, ProgressLayout::human_only(1)) };
        let w = extract_windows_with(&d, &spec);
        assert_eq!(w.iter().map(|w| w.frame).collect::<Vec<_>>(), vec![2, 5, 8, 11, 14, 17]);
    }
}
