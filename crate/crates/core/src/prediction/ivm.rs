//! Import vector machine: kernel multinomial logistic regression whose
//! kernel expansion is restricted to a greedily chosen subset of the
//! training windows.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_flat, DtwKernelParams};
use crate::error::{invalid, Error, Result};
use crate::rng::{rng_for, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IvmParams {
    /// Maximum number of import points; `None` means `min(50, N/4)`.
    #[serde(default)]
    pub budget: Option<usize>,
    /// Selection stops once adding a point improves the objective by less.
    #[serde(default = "default_min_gain")]
    pub min_gain: f64,
    /// Weight of the RKHS penalty `λ/2 Σ_j a_jᵀ K a_j`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Kernel length scale; `None` uses the median pairwise DTW distance.
    #[serde(default)]
    pub length_scale: Option<f64>,
    #[serde(default)]
    pub band: Option<usize>,
    /// Training windows beyond this count are subsampled.
    #[serde(default = "default_max_train")]
    pub max_train: usize,
    #[serde(default = "default_refit_iters")]
    pub refit_iters: usize,
}

fn default_min_gain() -> f64 {
    1e-4
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_max_train() -> usize {
    400
}
fn default_refit_iters() -> usize {
    150
}

impl Default for IvmParams {
    fn default() -> Self {
        Self {
            budget: None,
            min_gain: default_min_gain(),
            lambda: default_lambda(),
            length_scale: None,
            band: None,
            max_train: default_max_train(),
            refit_iters: default_refit_iters(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IvmClassifier {
    /// Action label of each output column.
    pub classes: Vec<usize>,
    pub kernel: DtwKernelParams,
    pub feature_dim: usize,
    pub input_len: usize,
    /// `q × input_len`, row-major.
    pub imports: Vec<f64>,
    /// Index of each import point in the training input list.
    pub import_index: Vec<usize>,
    /// `(q + 1) × C` row-major; the last row holds the class biases.
    pub coef: Vec<f64>,
    pub objective: f64,
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

struct Problem<'a> {
    k: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    lambda: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.k.nrows()
    }

    fn design(&self, set: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, set.len() + 1, |i, j| if j < set.len() { self.k[(i, set[j])] } else { 1.0 })
    }

    /// Import Gram matrix projected onto the positive semidefinite cone
    /// (DTW kernels can be indefinite), padded with a zero bias row.
    fn penalty_matrix(&self, set: &[usize]) -> DMatrix<f64> {
        let q = set.len();
        let mut out = DMatrix::zeros(q + 1, q + 1);
        if q == 0 {
            return out;
        }
        let kss = DMatrix::from_fn(q, q, |a, b| 0.5 * (self.k[(set[a], set[b])] + self.k[(set[b], set[a])]));
        let eig = SymmetricEigen::new(kss);
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        out.view_mut((0, 0), (q, q)).copy_from(&psd);
        out
    }

    fn probs(scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = scores.clone();
        for mut row in p.row_iter_mut() {
            let s: Vec<f64> = row.iter().copied().collect();
            for (x, v) in row.iter_mut().zip(softmax(&s)) {
                *x = v;
            }
        }
        p
    }

    fn nll(&self, scores: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for (srow, yrow) in scores.row_iter().zip(self.y.row_iter()) {
            let max = srow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + srow.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            total += lse - srow.dot(&yrow);
        }
        total / self.n() as f64
    }

    fn objective(&self, phi: &DMatrix<f64>, kh: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
        let pen: f64 = (0..a.ncols()).map(|j| a.column(j).dot(&(kh * a.column(j)))).sum();
        self.nll(&(phi * a)) + 0.5 * self.lambda * pen
    }

    /// Majorize-minimize refit of all coefficients with the bound
    /// `diag(p) − ppᵀ ≤ I/2`; every step lowers the objective.
    fn refit(&self, set: &[usize], mut a: DMatrix<f64>, iters: usize) -> (DMatrix<f64>, f64) {
        let n = self.n() as f64;
        let phi = self.design(set);
        let kh = self.penalty_matrix(set);
        let mut g = phi.transpose() * &phi * (0.5 / n) + &kh * self.lambda;
        for i in 0..g.nrows() {
            g[(i, i)] += 1e-10;
        }
        let Some(chol) = g.cholesky() else {
            return (a.clone(), self.objective(&phi, &kh, &a));
        };
        let mut obj = self.objective(&phi, &kh, &a);
        for _ in 0..iters {
            let p = Self::probs(&(&phi * &a));
            let grad = phi.transpose() * (p - self.y) / n + &kh * &a * self.lambda;
            let next = &a - chol.solve(&grad);
            let next_obj = self.objective(&phi, &kh, &next);
            if !(next_obj <= obj) {
                break;
            }
            let done = obj - next_obj < 1e-12;
            a = next;
            obj = next_obj;
            if done {
                break;
            }
        }
        (a, obj)
    }

    /// Objective after adding candidate `c` with a few per-class Newton
    /// steps on its coefficients, everything else held fixed.
    fn candidate_objective(&self, set: &[usize], a: &DMatrix<f64>, scores: &DMatrix<f64>, base_pen: f64, c: usize) -> f64 {
        let n = self.n();
        let classes = a.ncols();
        let kcc = self.k[(c, c)];
        let cross: Vec<f64> = (0..classes).map(|j| set.iter().enumerate().map(|(s, &i)| self.k[(c, i)] * a[(s, j)]).sum()).collect();
        let mut alpha = vec![0.0; classes];
        let mut s = scores.clone();
        for _ in 0..3 {
            let p = Self::probs(&s);
            for j in 0..classes {
                let mut g = 0.0;
                let mut h = 0.0;
                for i in 0..n {
                    let phi = self.k[(i, c)];
                    g += phi * (p[(i, j)] - self.y[(i, j)]);
                    h += phi * phi * p[(i, j)] * (1.0 - p[(i, j)]);
                }
                g = g / n as f64 + self.lambda * (cross[j] + alpha[j] * kcc);
                h = h / n as f64 + self.lambda * kcc + 1e-12;
                alpha[j] -= g / h;
            }
            for i in 0..n {
                for j in 0..classes {
                    s[(i, j)] = scores[(i, j)] + self.k[(i, c)] * alpha[j];
                }
            }
        }
        let extra: f64 = (0..classes).map(|j| 2.0 * alpha[j] * cross[j] + alpha[j] * alpha[j] * kcc).sum();
        self.nll(&s) + 0.5 * self.lambda * (base_pen + extra)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Trains a classifier on flattened feature windows and their action labels.
pub fn ivm_train_windows(
    inputs: &[&[f64]],
    labels: &[usize],
    feature_dim: usize,
    params: &IvmParams,
    seed: u64,
) -> Result<IvmClassifier> {
    if inputs.is_empty() {
        return invalid("classifier needs at least one training window");
    }
    if labels.len() != inputs.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), actual: labels.len() });
    }
    let input_len = inputs[0].len();
    if inputs.iter().any(|x| x.len() != input_len) {
        return invalid("training windows must share a length");
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let c = classes.len();

    let picked: Vec<usize> = if inputs.len() > params.max_train {
        let mut v = index::sample(&mut rng_for(seed, stream::TRAIN, 1), inputs.len(), params.max_train).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..inputs.len()).collect()
    };
    let n = picked.len();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if j <= i { Ok(0.0) } else { dtw_flat(inputs[picked[i]], inputs[picked[j]], feature_dim, params.band) })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let dist = DMatrix::from_fn(n, n, |i, j| if i < j { rows[i][j] } else { rows[j][i] });
    let gamma = match params.length_scale {
        Some(g) => g,
        None => {
            let off: Vec<f64> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| dist[(i, j)]).collect();
            let m = median(off);
            if m > 0.0 { m } else { 1.0 }
        }
    };
    let kernel = DtwKernelParams::new(gamma, params.band)?;

    if c == 1 {
        return Ok(IvmClassifier {
            classes,
            kernel,
            feature_dim,
            input_len,
            imports: Vec::new(),
            import_index: Vec::new(),
            coef: vec![0.0],
            objective: 0.0,
        });
    }

    let k = dist.map(|d| (-d / gamma).exp());
    let y = DMatrix::from_fn(n, c, |i, j| if classes[j] == labels[picked[i]] { 1.0 } else { 0.0 });
    let problem = Problem { k: &k, y: &y, lambda: params.lambda };
    let budget = params.budget.unwrap_or_else(|| (n / 4).min(50)).clamp(1, n);

    // start from the bias-only fit
    let mut set: Vec<usize> = Vec::new();
    let (mut a, mut obj) = problem.refit(&set, DMatrix::zeros(1, c), params.refit_iters);
    while set.len() < budget {
        let scores = problem.design(&set) * &a;
        let kh = problem.penalty_matrix(&set);
        let base_pen: f64 = (0..c).map(|j| a.column(j).dot(&(&kh * a.column(j)))).sum();
        let candidates: Vec<usize> = (0..n).filter(|i| !set.contains(i)).collect();
        let scored: Vec<f64> = candidates.par_iter().map(|&cand| problem.candidate_objective(&set, &a, &scores, base_pen, cand)).collect();
        let mut best = 0;
        for (i, s) in scored.iter().enumerate() {
            if *s < scored[best] {
                best = i;
            }
        }
        let chosen = candidates[best];
        let mut grown = DMatrix::zeros(set.len() + 2, c);
        grown.view_mut((0, 0), (set.len(), c)).copy_from(&a.rows(0, set.len()));
        grown.row_mut(set.len() + 1).copy_from(&a.row(set.len()));
        set.push(chosen);
        let (next_a, next_obj) = problem.refit(&set, grown, params.refit_iters);
        let gain = obj - next_obj;
        a = next_a;
        obj = next_obj;
        if gain < params.min_gain {
            break;
        }
    }

    let import_index: Vec<usize> = set.iter().map(|&i| picked[i]).collect();
    Ok(IvmClassifier {
        classes,
        kernel,
        feature_dim,
        input_len,
        imports: import_index.iter().flat_map(|&i| inputs[i].iter().copied()).collect(),
        import_index,
        coef: Vec::new(),
        objective: obj,
    }
    .with_row_major(&a))
}

impl IvmClassifier {
    fn with_row_major(mut self, a: &DMatrix<f64>) -> Self {
        self.coef = (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
        self
    }

    pub fn n_imports(&self) -> usize {
        self.import_index.len()
    }

    fn import(&self, s: usize) -> &[f64] {
        &self.imports[s * self.input_len..(s + 1) * self.input_len]
    }

    /// Per-class scores `f_j(x)`.
    pub fn scores(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.input_len {
            return Err(Error::DimensionMismatch { expected: self.input_len, actual: window.len() });
        }
        let c = self.classes.len();
        if c == 1 {
            return Ok(vec![0.0]);
        }
        let q = self.n_imports();
        let mut f: Vec<f64> = self.coef[q * c..(q + 1) * c].to_vec();
        for s in 0..q {
            let k = (-dtw_flat(window, self.import(s), self.feature_dim, self.kernel.band)? / self.kernel.length_scale).exp();
            for j in 0..c {
                f[j] += k * self.coef[s * c + j];
            }
        }
        Ok(f)
    }

    /// Softmax over the trained classes.
    pub fn class_probs(&self, window: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(window)?))
    }

    pub fn verify(&self) -> Result<()> {
        let c = self.classes.len();
        let q = self.n_imports();
        let bad = |m: &str| Err(Error::Archive(m.to_string()));
        if c == 0 || self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("classifier classes must be sorted and distinct");
        }
        let expected = if c == 1 { 1 } else { (q + 1) * c };
        if self.coef.len() != expected || self.imports.len() != q * self.input_len {
            return bad("classifier array sizes disagree");
        }
        if self.coef.iter().chain(&self.imports).any(|x| !x.is_finite()) {
            return bad("non-finite classifier values");
        }
        self.kernel.validate().map_err(|e| Error::Archive(e.to_string()))
    }
}

/// Distribution over `n_actions` actions for a window of past features.
pub fn ivm_classify(classifier: &IvmClassifier, window: &[f64], n_actions: usize) -> Result<Vec<f64>> {
    let probs = classifier.class_probs(window)?;
    let mut out = vec![0.0; n_actions];
    for (&a, p) in classifier.classes.iter().zip(probs) {
        if a >= n_actions {
            return invalid(format!("classifier class {a} outside {n_actions} actions"));
        }
        out[a] = p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn softmax_closed_forms() {
        let p = softmax(&[1.0, 0.0]);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert_eq!(softmax(&[2.0, 2.0, 2.0, 2.0]), vec![0.25; 4]);
        let shifted = softmax(&[1.0 + 7.5, 0.0 + 7.5]);
        assert!((shifted[0] - p[0]).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_certain() {
        let xs = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        let clf = ivm_train_windows(&refs(&xs), &[3, 3], 1, &IvmParams::default(), 0).unwrap();
        assert_eq!(ivm_classify(&clf, &[9.0, 9.0], 5).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(ivm_classify(&clf, &[9.0], 5).is_err());
    }

    #[test]
    fn mirror_classes_split_evenly_at_midpoint() {
        let xs: Vec<Vec<f64>> = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0].iter().map(|&x| vec![x, x]).collect();
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let params = IvmParams { budget: Some(8), min_gain: -1.0, refit_iters: 20_000, lambda: 1e-2, ..Default::default() };
        let clf = ivm_train_windows(&refs(&xs), &labels, 1, &params, 0).unwrap();
        assert_eq!(clf.n_imports(), 8);
        let p = ivm_classify(&clf, &[0.0, 0.0], 2).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn separable_classes_are_learned() {
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for k in 0..3 {
            for i in 0..20 {
                let x = 4.0 * k as f64 + 0.05 * i as f64;
                xs.push(vec![x, x + 0.1, x + 0.2]);
                labels.push(k);
            }
        }
        let clf = ivm_train_windows(&refs(&xs), &labels, 1, &IvmParams::default(), 1).unwrap();
        assert!(clf.n_imports() <= 15);
        let correct = xs
            .iter()
            .zip(&labels)
            .filter(|(x, &l)| {
                let p = ivm_classify(&clf, x, 3).unwrap();
                (p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p[l] > 0.5
            })
            .count();
        assert!(correct as f64 >= 0.95 * xs.len() as f64, "{correct}");
    }
}
