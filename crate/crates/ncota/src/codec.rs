//! Energy-based encoding of parameter vectors.
//!
//! A parameter vector `w` confined to the ball of radius `r` in `R^d` is
//! expressed as a convex combination of `M = 2d + 1` codewords: the scaled
//! signed basis vectors `±√d·r·e_m` plus the zero vector. The combination
//! weights form a probability simplex and directly control per-sample
//! transmit energy, so a vector with negative entries can still be conveyed
//! through nonnegative sample energies.
//!
//! Codewords are never materialized as a matrix; indices 0..d map to
//! `+√d·r·e_m`, d..2d to `-√d·r·e_m`, and 2d to the zero vector.

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for the simplex-sum check on externally supplied weights.
const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Norms up to radius * (1 + this) are accepted by `encode`; ball projection
/// can overshoot the radius by rounding.
const NORM_SLACK: f64 = 1e-9;
/// Residual weights at least this negative are floating-point fuzz from an
/// accepted input, clamped to zero before renormalizing.
const RESIDUAL_CLAMP: f64 = -2e-9;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("expected vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector norm {norm} exceeds codebook radius {radius}")]
    NormExceedsRadius { norm: f64, radius: f64 },
    #[error("weights are not on the probability simplex: {reason}")]
    NotOnSimplex { reason: String },
    #[error("energy per sample must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("codebook requires dim >= 1 and radius > 0 (dim {dim}, radius {radius})")]
    BadCodebook { dim: usize, radius: f64 },
}

/// Implicit codebook of `2·dim + 1` signed scaled basis vectors plus zero.
#[derive(Debug, Clone)]
pub struct Codebook {
    dim: usize,
    radius: f64,
}

impl Codebook {
    pub fn new(dim: usize, radius: f64) -> Result<Self, CodecError> {
        if dim == 0 || !(radius > 0.0) {
            return Err(CodecError::BadCodebook { dim, radius });
        }
        Ok(Codebook { dim, radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of codewords, `M = 2·dim + 1`.
    pub fn num_codewords(&self) -> usize {
        2 * self.dim + 1
    }

    /// Magnitude `√d·r` shared by all nonzero codewords.
    pub fn codeword_scale(&self) -> f64 {
        (self.dim as f64).sqrt() * self.radius
    }

    /// Materializes codeword `m` (0-based). Intended for tests and oracles;
    /// hot paths use index arithmetic instead.
    pub fn codeword(&self, m: usize) -> Vec<f64> {
        assert!(m < self.num_codewords());
        let mut z = vec![0.0; self.dim];
        if m < self.dim {
            z[m] = self.codeword_scale();
        } else if m < 2 * self.dim {
            z[m - self.dim] = -self.codeword_scale();
        }
        z
    }
}

/// Nonnegative weights summing to one; the per-sample energy shares of a
/// transmit frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile(Vec<f64>);

impl EnergyProfile {
    /// Validates and adopts externally supplied weights. The sum may be off
    /// by up to 1e-9; it is renormalized so the stored profile sums to one.
    pub fn new(weights: Vec<f64>) -> Result<Self, CodecError> {
        if weights.is_empty() {
            return Err(CodecError::NotOnSimplex { reason: "empty weight vector".into() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(CodecError::NotOnSimplex { reason: format!("negative weight {w}") });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(CodecError::NotOnSimplex { reason: format!("weights sum to {sum}") });
        }
        let mut weights = weights;
        for w in &mut weights {
            *w /= sum;
        }
        Ok(EnergyProfile(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Encodes a parameter vector into its energy profile.
///
/// Weight `m` gets the positive part of entry `m`, weight `d + m` the
/// positive part of `-entry m` (both scaled by `1/(√d·r)`), and the final
/// weight carries the residual `1 - ‖w‖₁/(√d·r)`.
pub fn encode(w: &[f64], cb: &Codebook) -> Result<EnergyProfile, CodecError> {
    let d = cb.dim();
    if w.len() != d {
        return Err(CodecError::DimensionMismatch { expected: d, actual: w.len() });
    }
    let norm = l2_norm(w);
    if norm > cb.radius() * (1.0 + NORM_SLACK) {
        return Err(CodecError::NormExceedsRadius { norm, radius: cb.radius() });
    }
    let scale = 1.0 / cb.codeword_scale();
    let mut weights = vec![0.0; cb.num_codewords()];
    let mut l1 = 0.0;
    for (m, &x) in w.iter().enumerate() {
        weights[m] = x.max(0.0) * scale;
        weights[d + m] = (-x).max(0.0) * scale;
        l1 += x.abs();
    }
    let mut residual = 1.0 - l1 * scale;
    if residual < 0.0 {
        // ‖w‖₁ ≤ √d·‖w‖ ≤ √d·r guarantees a nonnegative residual; anything
        // slightly below zero is rounding from a boundary vector.
        debug_assert!(residual > RESIDUAL_CLAMP, "residual {residual} beyond rounding");
        residual = 0.0;
        weights[2 * d] = residual;
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
    } else {
        weights[2 * d] = residual;
    }
    Ok(EnergyProfile(weights))
}

/// Recovers the parameter vector as the convex combination of codewords.
/// Exact inverse of `encode` up to rounding.
pub fn reconstruct(p: &EnergyProfile, cb: &Codebook) -> Result<Vec<f64>, CodecError> {
    let d = cb.dim();
    if p.len() != cb.num_codewords() {
        return Err(CodecError::DimensionMismatch {
            expected: cb.num_codewords(),
            actual: p.len(),
        });
    }
    let scale = cb.codeword_scale();
    let w = p.weights();
    Ok((0..d).map(|m| (w[m] - w[d + m]) * scale).collect())
}

/// Builds the transmit frame `x = √(E·M)·√p` (element-wise square root),
/// a real nonnegative baseband signal with per-sample energy
/// `‖x‖²/M = E` by construction.
pub fn transmit_signal(
    p: &EnergyProfile,
    energy_per_sample: f64,
) -> Result<Vec<Complex64>, CodecError> {
    if !(energy_per_sample > 0.0) {
        return Err(CodecError::NonPositiveEnergy(energy_per_sample));
    }
    let total = energy_per_sample * p.len() as f64;
    Ok(p.weights()
        .iter()
        .map(|&w| Complex64::new((total * w).sqrt(), 0.0))
        .collect())
}
