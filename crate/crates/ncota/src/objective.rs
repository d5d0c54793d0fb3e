//! Local objectives, gradients, datasets, and the centralized optimum.
//!
//! The main task is multiclass regularized logistic regression over
//! unit-norm feature vectors. The parameter vector concatenates one weight
//! block per class except class 0, whose score is pinned to zero, so
//! `d = (C-1)·F`. A quadratic toy objective is provided for harness-level
//! sanity checks, and [`solve_optimum`] computes the centralized minimizer
//! used as ground truth by the convergence metrics.

pub mod idx;

use crate::codec::l2_norm;
use crate::rng::Stream;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("dataset for node {node} is empty")]
    EmptyDataset { node: usize },
    #[error("feature vector must have unit norm, got {norm}")]
    NotUnitNorm { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("node count {nodes} is not divisible by class count {classes}")]
    UnbalancedAssignment { nodes: usize, classes: usize },
    #[error("feature dimension {feature_dim} is below the class count {classes}")]
    FeatureDimTooSmall { feature_dim: usize, classes: usize },
    #[error("class {class} has {available} samples, need {needed}")]
    NotEnoughSamples { class: usize, available: usize, needed: usize },
    #[error("{path}: {reason}")]
    BadIdxFile { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A labeled unit-norm feature vector.
#[derive(Debug, Clone)]
pub struct Feature {
    pub vector: Vec<f64>,
    pub label: usize,
}

/// The samples held by one node.
#[derive(Debug, Clone)]
pub struct LocalDataset {
    pub samples: Vec<Feature>,
}

// ---------------------------------------------------------------------------
// Objective models
// ---------------------------------------------------------------------------

/// A decomposable objective `F(w) = (1/N)·Σ f_i(w)` with per-node access.
pub trait ObjectiveModel: Send + Sync {
    fn dim(&self) -> usize;
    fn num_nodes(&self) -> usize;
    /// Strong-convexity parameter μ.
    fn strong_convexity(&self) -> f64;
    /// Smoothness parameter L.
    fn smoothness(&self) -> f64;
    fn local_value(&self, node: usize, w: &[f64]) -> f64;
    fn local_gradient(&self, node: usize, w: &[f64]) -> Vec<f64>;
    /// Classification error on the held-out test set, when one exists.
    fn test_error(&self, w: &[f64]) -> Option<f64>;

    fn global_value(&self, w: &[f64]) -> f64 {
        let n = self.num_nodes();
        (0..n).map(|i| self.local_value(i, w)).sum::<f64>() / n as f64
    }

    fn global_gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.num_nodes();
        let mut acc = vec![0.0; self.dim()];
        for i in 0..n {
            for (a, g) in acc.iter_mut().zip(self.local_gradient(i, w)) {
                *a += g;
            }
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        acc
    }
}

/// Scores of all classes: class 0 is pinned to zero, class `c >= 1` reads
/// block `c - 1` of the parameter vector.
fn class_scores(w: &[f64], feature: &[f64], num_classes: usize) -> Vec<f64> {
    let f_dim = feature.len();
    let mut scores = vec![0.0; num_classes];
    for c in 1..num_classes {
        let block = &w[(c - 1) * f_dim..c * f_dim];
        scores[c] = block.iter().zip(feature).map(|(a, b)| a * b).sum();
    }
    scores
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Regularized cross-entropy loss of one sample:
/// `μ/2·‖w‖² - ln softmax_label(scores)`.
pub fn loss(
    label: usize,
    feature: &[f64],
    w: &[f64],
    mu: f64,
    num_classes: usize,
) -> Result<f64, ObjectiveError> {
    if label >= num_classes {
        return Err(ObjectiveError::LabelOutOfRange { label, classes: num_classes });
    }
    let expected = (num_classes - 1) * feature.len();
    if w.len() != expected {
        return Err(ObjectiveError::DimensionMismatch { expected, actual: w.len() });
    }
    let scores = class_scores(w, feature, num_classes);
    let regularizer = 0.5 * mu * w.iter().map(|x| x * x).sum::<f64>();
    Ok(regularizer - (scores[label] - log_sum_exp(&scores)))
}

/// Multiclass regularized logistic regression with an optional held-out
/// test set.
pub struct LogisticTask {
    datasets: Vec<LocalDataset>,
    test_set: Vec<Feature>,
    num_classes: usize,
    feature_dim: usize,
    mu: f64,
}

impl LogisticTask {
    pub fn new(
        datasets: Vec<LocalDataset>,
        test_set: Vec<Feature>,
        num_classes: usize,
        feature_dim: usize,
        mu: f64,
    ) -> Result<Self, ObjectiveError> {
        for (node, ds) in datasets.iter().enumerate() {
            if ds.samples.is_empty() {
                return Err(ObjectiveError::EmptyDataset { node });
            }
        }
        for sample in datasets.iter().flat_map(|d| &d.samples).chain(&test_set) {
            if sample.vector.len() != feature_dim {
                return Err(ObjectiveError::DimensionMismatch {
                    expected: feature_dim,
                    actual: sample.vector.len(),
                });
            }
            if sample.label >= num_classes {
                return Err(ObjectiveError::LabelOutOfRange {
                    label: sample.label,
                    classes: num_classes,
                });
            }
            let norm = l2_norm(&sample.vector);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(ObjectiveError::NotUnitNorm { norm });
            }
        }
        Ok(LogisticTask { datasets, test_set, num_classes, feature_dim, mu })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Classification error of `w` over an arbitrary sample set, by the
    /// highest-score rule (class 0 scores zero).
    pub fn classification_error(&self, w: &[f64], samples: &[Feature]) -> f64 {
        let wrong = samples
            .iter()
            .filter(|s| {
                let scores = class_scores(w, &s.vector, self.num_classes);
                let predicted = scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(c, _)| c)
                    .unwrap();
                predicted != s.label
            })
            .count();
        wrong as f64 / samples.len() as f64
    }

    /// All training samples pooled across nodes.
    pub fn training_samples(&self) -> impl Iterator<Item = &Feature> {
        self.datasets.iter().flat_map(|d| d.samples.iter())
    }
}

impl ObjectiveModel for LogisticTask {
    fn dim(&self) -> usize {
        (self.num_classes - 1) * self.feature_dim
    }

    fn num_nodes(&self) -> usize {
        self.datasets.len()
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn smoothness(&self) -> f64 {
        self.mu + 2.0
    }

    fn local_value(&self, node: usize, w: &[f64]) -> f64 {
        let samples = &self.datasets[node].samples;
        let regularizer = 0.5 * self.mu * w.iter().map(|x| x * x).sum::<f64>();
        let cross_entropy: f64 = samples
            .iter()
            .map(|s| {
                let scores = class_scores(w, &s.vector, self.num_classes);
                log_sum_exp(&scores) - scores[s.label]
            })
            .sum();
        regularizer + cross_entropy / samples.len() as f64
    }

    fn local_gradient(&self, node: usize, w: &[f64]) -> Vec<f64> {
        let samples = &self.datasets[node].samples;
        let f_dim = self.feature_dim;
        let mut grad: Vec<f64> = w.iter().map(|x| self.mu * x).collect();
        let weight = 1.0 / samples.len() as f64;
        for sample in samples {
            let probs = softmax(&class_scores(w, &sample.vector, self.num_classes));
            for c in 1..self.num_classes {
                let coeff = weight * (probs[c] - if sample.label == c { 1.0 } else { 0.0 });
                let block = &mut grad[(c - 1) * f_dim..c * f_dim];
                for (g, x) in block.iter_mut().zip(&sample.vector) {
                    *g += coeff * x;
                }
            }
        }
        grad
    }

    fn test_error(&self, w: &[f64]) -> Option<f64> {
        if self.test_set.is_empty() {
            None
        } else {
            Some(self.classification_error(w, &self.test_set))
        }
    }
}

/// Quadratic toy objective `f_i(w) = ½‖w - c_i‖²`; the optimum is the mean
/// of the centers.
pub struct QuadraticTask {
    centers: Vec<Vec<f64>>,
}

impl QuadraticTask {
    pub fn new(centers: Vec<Vec<f64>>) -> Self {
        assert!(!centers.is_empty());
        QuadraticTask { centers }
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

impl ObjectiveModel for QuadraticTask {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn num_nodes(&self) -> usize {
        self.centers.len()
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn local_value(&self, node: usize, w: &[f64]) -> f64 {
        0.5 * w
            .iter()
            .zip(&self.centers[node])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn local_gradient(&self, node: usize, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.centers[node]).map(|(a, b)| a - b).collect()
    }

    fn test_error(&self, _w: &[f64]) -> Option<f64> {
        None
    }
}

// ---------------------------------------------------------------------------
// Centralized optimum
// ---------------------------------------------------------------------------

const SOLVER_GRADIENT_TOL: f64 = 1e-9;
const SOLVER_MAX_ITERATIONS: usize = 1_000_000;

/// The centralized minimizer and its diagnostics.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub w: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Full-batch gradient descent from zero with step `2/(μ+L)` until the
/// gradient norm drops below 1e-9 (or the iteration cap is hit, flagged in
/// the result).
pub fn solve_optimum(model: &dyn ObjectiveModel) -> Optimum {
    solve_from(model, vec![0.0; model.dim()])
}

/// Same solver from an explicit starting point.
pub fn solve_from(model: &dyn ObjectiveModel, start: Vec<f64>) -> Optimum {
    let step = 2.0 / (model.strong_convexity() + model.smoothness());
    let mut w = start;
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let grad = model.global_gradient(&w);
        gradient_norm = l2_norm(&grad);
        if gradient_norm <= SOLVER_GRADIENT_TOL || iterations >= SOLVER_MAX_ITERATIONS {
            break;
        }
        for (x, g) in w.iter_mut().zip(&grad) {
            *x -= step * g;
        }
        iterations += 1;
    }
    let value = model.global_value(&w);
    Optimum {
        w,
        value,
        gradient_norm,
        iterations,
        converged: gradient_norm <= SOLVER_GRADIENT_TOL,
    }
}

/// Radius of the ball guaranteed to contain the optimum of a μ-strongly
/// convex objective: `r = ‖∇F(0)‖/μ`.
pub fn enclosing_radius(mu: f64, gradient_at_zero: &[f64]) -> f64 {
    l2_norm(gradient_at_zero) / mu
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

fn synthetic_feature(
    class: usize,
    feature_dim: usize,
    noise: f64,
    stream: &mut Stream,
) -> Feature {
    // Class mean direction is the class basis vector; perturb and renormalize.
    let mut v = stream.normal_vec(feature_dim);
    for x in &mut v {
        *x *= noise;
    }
    v[class] += 1.0;
    let norm = l2_norm(&v);
    for x in &mut v {
        *x /= norm;
    }
    Feature { vector: v, label: class }
}

/// Synthetic classification data: node `i` holds `per_node` unit-norm
/// samples of class `i mod C`, each a noisy copy of the class direction.
pub fn synthetic_datasets(
    num_classes: usize,
    feature_dim: usize,
    per_node: usize,
    num_nodes: usize,
    noise: f64,
    stream: &mut Stream,
) -> Result<Vec<LocalDataset>, ObjectiveError> {
    if num_nodes % num_classes != 0 {
        return Err(ObjectiveError::UnbalancedAssignment {
            nodes: num_nodes,
            classes: num_classes,
        });
    }
    if feature_dim < num_classes {
        return Err(ObjectiveError::FeatureDimTooSmall { feature_dim, classes: num_classes });
    }
    Ok((0..num_nodes)
        .map(|i| LocalDataset {
            samples: (0..per_node)
                .map(|_| synthetic_feature(i % num_classes, feature_dim, noise, stream))
                .collect(),
        })
        .collect())
}

/// Class-balanced synthetic test set drawn from the same distribution.
pub fn synthetic_test_set(
    num_classes: usize,
    feature_dim: usize,
    per_class: usize,
    noise: f64,
    stream: &mut Stream,
) -> Result<Vec<Feature>, ObjectiveError> {
    if feature_dim < num_classes {
        return Err(ObjectiveError::FeatureDimTooSmall { feature_dim, classes: num_classes });
    }
    Ok((0..num_classes)
        .flat_map(|c| {
            (0..per_class)
                .map(|_| synthetic_feature(c, feature_dim, noise, stream))
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Splits a labeled corpus into single-class node datasets: node `i` takes
/// `per_node` distinct samples of class `i mod C`, chosen by a seeded
/// shuffle of each class.
pub fn partition_by_class(
    features: &[Feature],
    num_classes: usize,
    num_nodes: usize,
    per_node: usize,
    stream: &mut Stream,
) -> Result<Vec<LocalDataset>, ObjectiveError> {
    if num_nodes % num_classes != 0 {
        return Err(ObjectiveError::UnbalancedAssignment {
            nodes: num_nodes,
            classes: num_classes,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (idx, f) in features.iter().enumerate() {
        if f.label >= num_classes {
            return Err(ObjectiveError::LabelOutOfRange {
                label: f.label,
                classes: num_classes,
            });
        }
        by_class[f.label].push(idx);
    }
    for indices in &mut by_class {
        stream.shuffle(indices);
    }
    let nodes_per_class = num_nodes / num_classes;
    for (class, indices) in by_class.iter().enumerate() {
        let needed = nodes_per_class * per_node;
        if indices.len() < needed {
            return Err(ObjectiveError::NotEnoughSamples {
                class,
                available: indices.len(),
                needed,
            });
        }
    }
    Ok((0..num_nodes)
        .map(|i| {
            let class = i % num_classes;
            let rank = i / num_classes;
            let slice = &by_class[class][rank * per_node..(rank + 1) * per_node];
            LocalDataset {
                samples: slice.iter().map(|&idx| features[idx].clone()).collect(),
            }
        })
        .collect())
}

/// Class-balanced subset of a labeled corpus, chosen by a seeded shuffle.
pub fn class_balanced_subset(
    features: &[Feature],
    num_classes: usize,
    per_class: usize,
    stream: &mut Stream,
) -> Result<Vec<Feature>, ObjectiveError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (idx, f) in features.iter().enumerate() {
        if f.label >= num_classes {
            return Err(ObjectiveError::LabelOutOfRange {
                label: f.label,
                classes: num_classes,
            });
        }
        by_class[f.label].push(idx);
    }
    let mut subset = Vec::with_capacity(num_classes * per_class);
    for (class, indices) in by_class.iter_mut().enumerate() {
        if indices.len() < per_class {
            return Err(ObjectiveError::NotEnoughSamples {
                class,
                available: indices.len(),
                needed: per_class,
            });
        }
        stream.shuffle(indices);
        subset.extend(indices[..per_class].iter().map(|&idx| features[idx].clone()));
    }
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, StreamKey, StreamLabel};

    fn stream(seed: u64) -> Stream {
        derive_stream(seed, &StreamKey::new(StreamLabel::DataShuffle, 0))
    }

    fn random_task(
        num_classes: usize,
        feature_dim: usize,
        num_nodes: usize,
        per_node: usize,
        mu: f64,
        stream: &mut Stream,
    ) -> LogisticTask {
        let datasets =
            synthetic_datasets(num_classes, feature_dim, per_node, num_nodes, 0.4, stream)
                .unwrap();
        LogisticTask::new(datasets, Vec::new(), num_classes, feature_dim, mu).unwrap()
    }

    #[test]
    fn loss_at_zero_is_log_class_count() {
        let mut s = stream(0);
        let f = synthetic_feature(3, 12, 0.3, &mut s);
        let w = vec![0.0; 9 * 12];
        let value = loss(f.label, &f.vector, &w, 0.123, 10).unwrap();
        assert!((value - (10.0_f64).ln()).abs() < 1e-12);
        assert!(loss(10, &f.vector, &w, 0.1, 10).is_err());
    }

    #[test]
    fn loss_is_bounded_below_by_regularizer_and_decreases_with_alignment() {
        let mut s = stream(1);
        let mu = 0.05;
        for _ in 0..50 {
            let f = synthetic_feature(2, 6, 0.3, &mut s);
            let w: Vec<f64> = s.normal_vec(3 * 6);
            let value = loss(f.label, &f.vector, &w, mu, 4).unwrap();
            let reg = 0.5 * mu * w.iter().map(|x| x * x).sum::<f64>();
            assert!(value >= reg - 1e-12);
        }
        // Scaling up the true-class block pushes the cross-entropy toward 0.
        let f = synthetic_feature(1, 6, 0.0, &mut s);
        let mut previous = f64::INFINITY;
        for scale in [1.0, 4.0, 16.0, 64.0] {
            let mut w = vec![0.0; 3 * 6];
            for (i, x) in f.vector.iter().enumerate() {
                w[i] = scale * x;
            }
            let value = loss(f.label, &f.vector, &w, 0.0, 4).unwrap();
            assert!(value < previous);
            previous = value;
        }
        assert!(previous < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut s = stream(2);
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let task = random_task(4, 6, 4, 3, 0.01, &mut s);
            let d = task.dim();
            let w = s.vector_in_ball(d, 2.0);
            let node = s.index(4);
            let grad = task.local_gradient(node, &w);
            let mut fd = vec![0.0; d];
            for c in 0..d {
                let mut plus = w.clone();
                plus[c] += step;
                let mut minus = w.clone();
                minus[c] -= step;
                fd[c] = (task.local_value(node, &plus) - task.local_value(node, &minus))
                    / (2.0 * step);
            }
            let diff: f64 = grad
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / l2_norm(&grad));
        }
        assert!(worst < 1e-5, "max relative error {worst}");
    }

    #[test]
    fn gradient_at_zero_single_sample() {
        // One sample of class 0 at w = 0: every block is f/C.
        let mut s = stream(3);
        let f = synthetic_feature(0, 5, 0.2, &mut s);
        let task = LogisticTask::new(
            vec![LocalDataset { samples: vec![f.clone()] }],
            Vec::new(),
            10,
            5,
            0.0,
        )
        .unwrap();
        let grad = task.local_gradient(0, &vec![0.0; 45]);
        for c in 0..9 {
            for (g, x) in grad[c * 5..(c + 1) * 5].iter().zip(&f.vector) {
                assert!((g - x / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_labels_cancel_leaving_the_regularizer() {
        // Each feature appears once per label, so the cross-entropy part
        // vanishes at w = 0 and stays small near it.
        let mut s = stream(4);
        let num_classes = 4;
        let feature_dim = 6;
        let mut samples = Vec::new();
        for _ in 0..8 {
            let base = synthetic_feature(0, feature_dim, 0.5, &mut s).vector;
            for label in 0..num_classes {
                samples.push(Feature { vector: base.clone(), label });
            }
        }
        let mu = 2.0;
        let task = LogisticTask::new(
            vec![LocalDataset { samples }],
            Vec::new(),
            num_classes,
            feature_dim,
            mu,
        )
        .unwrap();
        let d = task.dim();
        let w: Vec<f64> = s.vector_in_ball(d, 0.02);
        let grad = task.local_gradient(0, &w);
        let deviation: f64 = grad
            .iter()
            .zip(&w)
            .map(|(g, x)| (g - mu * x) * (g - mu * x))
            .sum::<f64>()
            .sqrt();
        assert!(deviation <= 0.05 * mu * l2_norm(&w), "deviation {deviation}");
    }

    #[test]
    fn global_objective_is_the_average() {
        let mut s = stream(5);
        let task = random_task(3, 5, 6, 2, 0.01, &mut s);
        let w = s.vector_in_ball(task.dim(), 1.0);
        let mean_value: f64 = (0..6).map(|i| task.local_value(i, &w)).sum::<f64>() / 6.0;
        assert!((task.global_value(&w) - mean_value).abs() < 1e-12);
        let mut mean_grad = vec![0.0; task.dim()];
        for i in 0..6 {
            for (a, g) in mean_grad.iter_mut().zip(task.local_gradient(i, &w)) {
                *a += g / 6.0;
            }
        }
        for (a, b) in task.global_gradient(&w).iter().zip(&mean_grad) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_is_strongly_convex_and_smooth() {
        let mut s = stream(6);
        let mu = 0.001;
        let task = random_task(4, 6, 4, 3, mu, &mut s);
        let big_l = task.smoothness();
        for _ in 0..100 {
            let a = s.vector_in_ball(task.dim(), 2.0);
            let b = s.vector_in_ball(task.dim(), 2.0);
            let ga = task.global_gradient(&a);
            let gb = task.global_gradient(&b);
            let mut inner = 0.0;
            let mut dist_sq = 0.0;
            for c in 0..task.dim() {
                inner += (ga[c] - gb[c]) * (a[c] - b[c]);
                dist_sq += (a[c] - b[c]) * (a[c] - b[c]);
            }
            assert!(inner >= mu * dist_sq - 1e-12);
            assert!(inner <= big_l * dist_sq + 1e-12);
        }
    }

    #[test]
    fn solver_finds_the_mean_of_quadratic_centers() {
        let mut s = stream(7);
        let centers: Vec<Vec<f64>> = (0..5).map(|_| s.vector_in_ball(4, 2.0)).collect();
        let mut mean = vec![0.0; 4];
        for c in &centers {
            for (m, x) in mean.iter_mut().zip(c) {
                *m += x / 5.0;
            }
        }
        let task = QuadraticTask::new(centers);
        let optimum = solve_optimum(&task);
        assert!(optimum.converged);
        for (a, b) in optimum.w.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn solver_reaches_stated_gradient_norm_and_unique_optimum() {
        let mut s = stream(8);
        let task = random_task(4, 6, 8, 3, 0.01, &mut s);
        let from_zero = solve_optimum(&task);
        assert!(from_zero.converged);
        assert!(from_zero.gradient_norm <= 1e-9);
        let start = s.vector_in_ball(task.dim(), 3.0);
        let from_elsewhere = solve_from(&task, start);
        let gap: f64 = from_zero
            .w
            .iter()
            .zip(&from_elsewhere.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(gap < 1e-6, "optima differ by {gap}");
    }

    #[test]
    fn enclosing_radius_is_tight_for_centered_quadratic() {
        let center = vec![0.6, -0.8, 0.0];
        let task = QuadraticTask::new(vec![center.clone()]);
        let grad0 = task.global_gradient(&vec![0.0; 3]);
        let r = enclosing_radius(1.0, &grad0);
        assert!((r - 1.0).abs() < 1e-12);
        let optimum = solve_optimum(&task);
        assert!(l2_norm(&optimum.w) <= r + 1e-9);
        // Doubling μ with the same gradient halves the radius.
        assert!((enclosing_radius(2.0, &grad0) - r / 2.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_lies_inside_the_radius_on_a_learning_task() {
        let mut s = stream(9);
        let mu = 0.01;
        let task = random_task(4, 6, 8, 3, mu, &mut s);
        let optimum = solve_optimum(&task);
        let r = enclosing_radius(mu, &task.global_gradient(&vec![0.0; task.dim()]));
        assert!(l2_norm(&optimum.w) <= r);
    }

    #[test]
    fn synthetic_data_shape_and_separability() {
        let mut s = stream(10);
        let datasets = synthetic_datasets(10, 12, 3, 20, 0.2, &mut s).unwrap();
        assert_eq!(datasets.len(), 20);
        for c in 0..10 {
            let holders = (0..20)
                .filter(|i| datasets[*i].samples[0].label == c)
                .count();
            assert_eq!(holders, 2);
        }
        for ds in &datasets {
            for f in &ds.samples {
                assert!((l2_norm(&f.vector) - 1.0).abs() < 1e-12);
            }
        }
        assert!(synthetic_datasets(10, 12, 3, 21, 0.2, &mut s).is_err());
        assert!(synthetic_datasets(10, 8, 3, 20, 0.2, &mut s).is_err());

        // Low-noise classes are separable: the centralized optimum scores
        // under 5% training error.
        let datasets = synthetic_datasets(4, 8, 5, 8, 0.2, &mut s).unwrap();
        let task = LogisticTask::new(datasets, Vec::new(), 4, 8, 0.001).unwrap();
        let optimum = solve_optimum(&task);
        let train: Vec<Feature> = task.training_samples().cloned().collect();
        let error = task.classification_error(&optimum.w, &train);
        assert!(error < 0.05, "train error {error}");
    }

    #[test]
    fn partition_assigns_distinct_single_class_chunks() {
        let mut s = stream(11);
        let mut corpus = Vec::new();
        for label in 0..3 {
            for _ in 0..10 {
                corpus.push(synthetic_feature(label, 4, 0.3, &mut s));
            }
        }
        let datasets = partition_by_class(&corpus, 3, 6, 4, &mut s).unwrap();
        assert_eq!(datasets.len(), 6);
        for (i, ds) in datasets.iter().enumerate() {
            assert_eq!(ds.samples.len(), 4);
            assert!(ds.samples.iter().all(|f| f.label == i % 3));
        }
        // 2 nodes/class × 4 samples = 8 ≤ 10 fits, but 3 nodes/class would not.
        assert!(partition_by_class(&corpus, 3, 9, 4, &mut s).is_err());

        let subset = class_balanced_subset(&corpus, 3, 5, &mut s).unwrap();
        assert_eq!(subset.len(), 15);
        for c in 0..3 {
            assert_eq!(subset.iter().filter(|f| f.label == c).count(), 5);
        }
    }
}
