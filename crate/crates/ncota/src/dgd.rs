//! The decentralized gradient descent iteration engine.
//!
//! Each node updates `w_i ← w_i + γ_k·d̂_i - η_k·∇f_i(w_i)` and is then
//! projected back onto the radius-r ball, keeping every iterate encodable.
//! Step sizes decay as `γ_k = γ₀/(1+kδ)^(3/4)` and `η_k = η₀/(1+kδ)`.

use crate::codec::l2_norm;
use crate::objective::{ObjectiveModel, Optimum};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DgdError {
    #[error("non-finite update for node {node} at iteration {iteration}")]
    NonFinite { node: usize, iteration: u64 },
    #[error("optimum has zero norm; normalized error is undefined")]
    DegenerateOptimum,
    #[error("expected {expected} per-node vectors, got {actual}")]
    NodeCountMismatch { expected: usize, actual: usize },
}

/// Decaying step-size pair for the consensus and gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub gamma0: f64,
    pub eta0: f64,
    pub delta: f64,
}

impl Schedule {
    /// `(γ_k, η_k)` at iteration `k`; both strictly decreasing in `k`.
    pub fn step_sizes(&self, k: u64) -> (f64, f64) {
        let base = 1.0 + k as f64 * self.delta;
        (self.gamma0 / base.powf(0.75), self.eta0 / base)
    }
}

/// All node parameter vectors at one iteration.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub parameters: Vec<Vec<f64>>,
    pub iteration: u64,
    pub radius: f64,
}

impl NetworkState {
    pub fn zeros(num_nodes: usize, dim: usize, radius: f64) -> Self {
        NetworkState {
            parameters: vec![vec![0.0; dim]; num_nodes],
            iteration: 0,
            radius,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.parameters.len()
    }
}

/// Scales `w` back onto the ball of radius `r` when it lies outside,
/// preserving its direction.
pub fn project_onto_ball(w: &mut [f64], radius: f64) {
    let norm = l2_norm(w);
    if norm > radius {
        let scale = radius / norm;
        for x in w.iter_mut() {
            *x *= scale;
        }
    }
}

/// Applies one update to every node and advances the iteration counter.
/// Transmitting nodes pass a zero estimate but still take their gradient
/// step. Rejects non-finite updates, naming the offending node.
pub fn dgd_step(
    state: &mut NetworkState,
    estimates: &[Vec<f64>],
    gradients: &[Vec<f64>],
    gamma: f64,
    eta: f64,
) -> Result<(), DgdError> {
    let n = state.num_nodes();
    if estimates.len() != n || gradients.len() != n {
        return Err(DgdError::NodeCountMismatch {
            expected: n,
            actual: estimates.len().min(gradients.len()),
        });
    }
    for (node, w) in state.parameters.iter_mut().enumerate() {
        let mut finite = true;
        for ((x, d), g) in w.iter_mut().zip(&estimates[node]).zip(&gradients[node]) {
            *x += gamma * d - eta * g;
            finite &= x.is_finite();
        }
        if !finite {
            return Err(DgdError::NonFinite { node, iteration: state.iteration });
        }
        project_onto_ball(w, state.radius);
    }
    state.iteration += 1;
    Ok(())
}

/// One recorded metrics row.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub realization: u64,
    pub iteration: u64,
    pub air_time_s: f64,
    pub normalized_error: f64,
    pub subopt_gap: f64,
    pub test_error: f64,
}

/// Evaluates the current state against the centralized optimum: mean
/// normalized distance of the local models, suboptimality of the averaged
/// model, its test error (zero when the objective has no test set), and the
/// elapsed air time `iteration × frame duration`.
pub fn metrics(
    state: &NetworkState,
    optimum: &Optimum,
    model: &dyn ObjectiveModel,
    frame_duration_s: f64,
    realization: u64,
) -> Result<RunRecord, DgdError> {
    let optimum_norm_sq: f64 = optimum.w.iter().map(|x| x * x).sum();
    if optimum_norm_sq == 0.0 {
        return Err(DgdError::DegenerateOptimum);
    }
    let n = state.num_nodes();
    let dim = optimum.w.len();
    let mut error_acc = 0.0;
    let mut mean = vec![0.0; dim];
    for w in &state.parameters {
        let mut dist_sq = 0.0;
        for c in 0..dim {
            let diff = w[c] - optimum.w[c];
            dist_sq += diff * diff;
            mean[c] += w[c] / n as f64;
        }
        error_acc += dist_sq;
    }
    let normalized_error = error_acc / (n as f64 * optimum_norm_sq);
    let subopt_gap = model.global_value(&mean) - optimum.value;
    let test_error = model.test_error(&mean).unwrap_or(0.0);
    Ok(RunRecord {
        realization,
        iteration: state.iteration,
        air_time_s: state.iteration as f64 * frame_duration_s,
        normalized_error,
        subopt_gap,
        test_error,
    })
}
