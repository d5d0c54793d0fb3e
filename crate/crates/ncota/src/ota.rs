//! Over-the-air disagreement estimation.
//!
//! Each iteration, every node independently draws a transmit/receive role.
//! Transmitters map their parameter vector to an energy profile and send it;
//! receivers estimate the network disagreement signal from the energy of the
//! superposed signal they hear, without any channel state information.
//!
//! Two estimators are provided:
//!
//! * **Baseline**: received sample energies, compensated for the known
//!   thermal noise floor, are combined with the codewords directly. Unbiased
//!   under noise and fading alone; external interference energy accumulates
//!   into a systematic bias.
//! * **Interference-robust**: transmitters first rotate their vectors by a
//!   network-common random orthogonal map with zero mean, and additionally
//!   send a network-common constant-modulus pilot with i.i.d. random phases.
//!   Receivers estimate the rotated weighted parameter sum from raw sample
//!   energies (no noise compensation) and the aggregate incoming channel
//!   gain from the pilot, then combine the two. Averaged over the shared
//!   randomness, any interference with bounded energy contributes zero mean,
//!   so the estimate stays unbiased.
//!
//! [`simulate_round`] runs one full communication round against the channel
//! model and returns every node's estimate; it is the building block the
//! experiment harness iterates.

use crate::channel::{
    sample_channels, superpose, thermal_noise_frame, ChannelError, GainMatrix,
    InterferenceScenario,
};
use crate::codec::{encode, transmit_signal, CodecError, Codebook};
use crate::rng::{derive_stream, Stream, StreamKey, StreamLabel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtaError {
    #[error("transmit probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
    #[error("pilot length must be at least 2, got {0}")]
    PilotTooShort(usize),
    #[error("expected {expected} parameter vectors, got {actual}")]
    NodeCountMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

/// Per-iteration half-duplex roles: each node transmits with probability
/// `p_tx`, independently across nodes and iterations.
#[derive(Debug, Clone)]
pub struct RoleAssignment {
    transmit: Vec<bool>,
    p_tx: f64,
}

impl RoleAssignment {
    pub fn is_transmitter(&self, node: usize) -> bool {
        self.transmit[node]
    }

    pub fn is_receiver(&self, node: usize) -> bool {
        !self.transmit[node]
    }

    pub fn p_tx(&self) -> f64 {
        self.p_tx
    }

    pub fn num_nodes(&self) -> usize {
        self.transmit.len()
    }

    pub fn transmitters(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.transmit.len()).filter(|&i| self.transmit[i])
    }
}

pub fn draw_roles(n: usize, p_tx: f64, stream: &mut Stream) -> Result<RoleAssignment, OtaError> {
    if !(p_tx > 0.0 && p_tx < 1.0) {
        return Err(OtaError::InvalidProbability(p_tx));
    }
    let transmit = (0..n).map(|_| stream.bernoulli(p_tx)).collect();
    Ok(RoleAssignment { transmit, p_tx })
}

// ---------------------------------------------------------------------------
// Baseline estimator
// ---------------------------------------------------------------------------

/// Received sample energies with the thermal noise floor subtracted:
/// `r_m = (|y_m|² - N₀) / ((1-p_tx)·p_tx·E·M)` for receivers, zero for
/// transmitters. Negative values are kept; clamping would bias the mean.
pub fn ncota_energy(
    y: &[Complex64],
    is_receiver: bool,
    noise_psd: f64,
    p_tx: f64,
    energy_per_sample: f64,
) -> Vec<f64> {
    if !is_receiver {
        return vec![0.0; y.len()];
    }
    let denom = (1.0 - p_tx) * p_tx * energy_per_sample * y.len() as f64;
    y.iter().map(|s| (s.norm_sqr() - noise_psd) / denom).collect()
}

/// Disagreement estimate from raw energies: `d̂ = Σ_m r_m (z_m - w)`.
pub fn ncota_estimate(raw_energy: &[f64], w: &[f64], cb: &Codebook) -> Vec<f64> {
    let d = cb.dim();
    assert_eq!(raw_energy.len(), cb.num_codewords());
    assert_eq!(w.len(), d);
    let scale = cb.codeword_scale();
    let total: f64 = raw_energy.iter().sum();
    (0..d)
        .map(|c| scale * (raw_energy[c] - raw_energy[d + c]) - total * w[c])
        .collect()
}

/// Exact expected disagreement at node `i`:
/// `d_i = Σ_{j≠i} Λ_ij (w_j - w_i)`.
pub fn disagreement_oracle(ws: &[Vec<f64>], gains: &GainMatrix, i: usize) -> Vec<f64> {
    let d = ws[i].len();
    let mut out = vec![0.0; d];
    for j in 0..gains.num_nodes() {
        if j == i {
            continue;
        }
        let g = gains.gain(i, j);
        for c in 0..d {
            out[c] += g * (ws[j][c] - ws[i][c]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Coordinated rotation
// ---------------------------------------------------------------------------

/// How the network-common rotation is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Global sign flip `U = s·I`, `s = ±1` equiprobable.
    SignFlip,
    /// Uniform coordinate permutation with i.i.d. `±1` signs. A stricter
    /// scrambler; still orthogonal with zero mean.
    SignedPermutation,
}

/// A random orthogonal map with `UᵀU = I` and `E[U] = 0`, identical at every
/// node within an iteration.
#[derive(Debug, Clone)]
pub enum Rotation {
    SignFlip(f64),
    SignedPermutation { perm: Vec<usize>, signs: Vec<f64> },
}

impl Rotation {
    /// `U·v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Rotation::SignFlip(s) => v.iter().map(|x| s * x).collect(),
            Rotation::SignedPermutation { perm, signs } => {
                (0..v.len()).map(|i| signs[i] * v[perm[i]]).collect()
            }
        }
    }

    /// `Uᵀ·v`; inverts `apply`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Rotation::SignFlip(s) => v.iter().map(|x| s * x).collect(),
            Rotation::SignedPermutation { perm, signs } => {
                let mut out = vec![0.0; v.len()];
                for i in 0..v.len() {
                    out[perm[i]] = signs[i] * v[i];
                }
                out
            }
        }
    }
}

/// Draws the rotation for one iteration from the shared stream.
pub fn draw_rotation(dim: usize, mode: RotationMode, stream: &mut Stream) -> Rotation {
    match mode {
        RotationMode::SignFlip => {
            Rotation::SignFlip(if stream.bernoulli(0.5) { 1.0 } else { -1.0 })
        }
        RotationMode::SignedPermutation => {
            let mut perm: Vec<usize> = (0..dim).collect();
            stream.shuffle(&mut perm);
            let signs = (0..dim)
                .map(|_| if stream.bernoulli(0.5) { 1.0 } else { -1.0 })
                .collect();
            Rotation::SignedPermutation { perm, signs }
        }
    }
}

// ---------------------------------------------------------------------------
// Interference-robust estimator
// ---------------------------------------------------------------------------

/// Raw received sample energies without noise compensation:
/// `r_m = |y_m|² / ((1-p_tx)·p_tx·E·M)`; always nonnegative.
pub fn ir_energy(
    y: &[Complex64],
    is_receiver: bool,
    p_tx: f64,
    energy_per_sample: f64,
) -> Vec<f64> {
    if !is_receiver {
        return vec![0.0; y.len()];
    }
    let denom = (1.0 - p_tx) * p_tx * energy_per_sample * y.len() as f64;
    y.iter().map(|s| s.norm_sqr() / denom).collect()
}

/// Estimate of the gain-weighted parameter sum, rotated back to the common
/// frame: `ŝ = Uᵀ Σ_m r_m z_m`.
pub fn ir_sum_estimate(raw_energy: &[f64], rotation: &Rotation, cb: &Codebook) -> Vec<f64> {
    let d = cb.dim();
    assert_eq!(raw_energy.len(), cb.num_codewords());
    let scale = cb.codeword_scale();
    let weighted: Vec<f64> = (0..d)
        .map(|c| scale * (raw_energy[c] - raw_energy[d + c]))
        .collect();
    rotation.apply_transpose(&weighted)
}

/// Network-common constant-modulus pilot: `[x_P]_m = √E·e^{jφ_m}` with
/// i.i.d. uniform phases, redrawn each iteration.
pub fn pilot_sequence(
    len: usize,
    energy_per_sample: f64,
    stream: &mut Stream,
) -> Result<Vec<Complex64>, OtaError> {
    if len < 2 {
        return Err(OtaError::PilotTooShort(len));
    }
    let amplitude = energy_per_sample.sqrt();
    Ok((0..len).map(|_| Complex64::from_polar(amplitude, stream.phase())).collect())
}

/// Estimate of the aggregate incoming channel gain from the pilot slot:
/// `Λ̂ = [|x_Pᴴ·y_P|²/E - ‖y_P‖²] / ((1-p_tx)·p_tx·E·n_P·(n_P-1))`.
/// May be negative on a single draw; negative values are kept.
pub fn pilot_gain_estimate(
    y_p: &[Complex64],
    x_p: &[Complex64],
    is_receiver: bool,
    p_tx: f64,
    energy_per_sample: f64,
) -> f64 {
    if !is_receiver {
        return 0.0;
    }
    assert_eq!(y_p.len(), x_p.len());
    let n_p = y_p.len() as f64;
    let correlation: Complex64 = x_p.iter().zip(y_p).map(|(x, y)| x.conj() * y).sum();
    let received_energy: f64 = y_p.iter().map(|y| y.norm_sqr()).sum();
    let numerator = correlation.norm_sqr() / energy_per_sample - received_energy;
    numerator / ((1.0 - p_tx) * p_tx * energy_per_sample * n_p * (n_p - 1.0))
}

/// Combines the two estimates: `d̂ = ŝ - Λ̂·w`.
pub fn ir_combine(sum_estimate: &[f64], gain_estimate: f64, w: &[f64]) -> Vec<f64> {
    sum_estimate
        .iter()
        .zip(w)
        .map(|(s, x)| s - gain_estimate * x)
        .collect()
}

// ---------------------------------------------------------------------------
// One communication round
// ---------------------------------------------------------------------------

/// Which estimator a round runs.
#[derive(Debug, Clone, Copy)]
pub enum Scheme {
    Ncota,
    IrNcota { pilot_len: usize, rotation: RotationMode },
}

/// Everything fixed across a round.
pub struct RoundParams<'a> {
    pub codebook: &'a Codebook,
    pub gains: &'a GainMatrix,
    pub interference: &'a InterferenceScenario,
    pub energy_per_sample: f64,
    pub noise_psd: f64,
    pub p_tx: f64,
    pub scheme: Scheme,
}

/// Names the random streams of one round: (master seed, realization,
/// iteration) key every draw, so rounds replay bit-exactly.
#[derive(Debug, Clone, Copy)]
pub struct StreamContext {
    pub master_seed: u64,
    pub realization: u64,
    pub iteration: u64,
}

impl StreamContext {
    pub fn stream(&self, label: StreamLabel) -> Stream {
        derive_stream(
            self.master_seed,
            &StreamKey::new(label, self.realization).at_iteration(self.iteration),
        )
    }

    pub fn node_stream(&self, label: StreamLabel, node: usize) -> Stream {
        derive_stream(
            self.master_seed,
            &StreamKey::new(label, self.realization)
                .at_iteration(self.iteration)
                .for_node(node as u64),
        )
    }
}

/// One node's output for a round. Transmitters carry all-zero fields.
#[derive(Debug, Clone)]
pub struct DisagreementEstimate {
    /// Estimated disagreement vector `d̂` (length d).
    pub vector: Vec<f64>,
    /// Raw per-sample energies `r` this estimate was formed from (length M).
    pub raw_energy: Vec<f64>,
    /// Aggregate incoming-gain estimate `Λ̂` (interference-robust rounds
    /// only; zero otherwise).
    pub gain_estimate: f64,
}

impl DisagreementEstimate {
    fn silent(dim: usize, num_codewords: usize) -> Self {
        DisagreementEstimate {
            vector: vec![0.0; dim],
            raw_energy: vec![0.0; num_codewords],
            gain_estimate: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub roles: RoleAssignment,
    pub estimates: Vec<DisagreementEstimate>,
}

/// Runs one communication round: role draw, encoding (with the shared
/// rotation for interference-robust rounds), fading, superposition with
/// noise and interference, pilot exchange, and per-node estimation.
///
/// Fading is held fixed across the data and pilot slots of a round and
/// redrawn between rounds; the pilot-slot interference is an independent
/// draw from the same configured source.
pub fn simulate_round(
    params: &RoundParams,
    ws: &[Vec<f64>],
    ctx: &StreamContext,
) -> Result<RoundOutput, OtaError> {
    let n = params.gains.num_nodes();
    let d = params.codebook.dim();
    let m = params.codebook.num_codewords();
    if ws.len() != n {
        return Err(OtaError::NodeCountMismatch { expected: n, actual: ws.len() });
    }
    if !(params.p_tx > 0.0 && params.p_tx < 1.0) {
        return Err(OtaError::InvalidProbability(params.p_tx));
    }
    let energy = params.energy_per_sample;

    let roles = draw_roles(n, params.p_tx, &mut ctx.stream(StreamLabel::Roles))?;

    let rotation = match params.scheme {
        Scheme::Ncota => None,
        Scheme::IrNcota { rotation, .. } => {
            Some(draw_rotation(d, rotation, &mut ctx.stream(StreamLabel::SharedRotation)))
        }
    };
    let pilot = match params.scheme {
        Scheme::Ncota => None,
        Scheme::IrNcota { pilot_len, .. } => {
            Some(pilot_sequence(pilot_len, energy, &mut ctx.stream(StreamLabel::SharedPilot))?)
        }
    };

    let mut transmissions: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for j in roles.transmitters() {
        let profile = match &rotation {
            Some(u) => encode(&u.apply(&ws[j]), params.codebook)?,
            None => encode(&ws[j], params.codebook)?,
        };
        transmissions.push((j, transmit_signal(&profile, energy)?));
    }

    let channels = sample_channels(params.gains, &mut ctx.stream(StreamLabel::Channel));

    let mut interference_stream = ctx.stream(StreamLabel::Interference);
    let data_interference = params.interference.sample_frames(m, energy, &mut interference_stream);
    let pilot_interference = pilot
        .as_ref()
        .map(|p| params.interference.sample_frames(p.len(), energy, &mut interference_stream));

    let data_frames: Vec<(usize, &[Complex64])> =
        transmissions.iter().map(|(j, f)| (*j, f.as_slice())).collect();

    let mut estimates = Vec::with_capacity(n);
    for i in 0..n {
        if roles.is_transmitter(i) {
            estimates.push(DisagreementEstimate::silent(d, m));
            continue;
        }
        let mut noise_stream = ctx.node_stream(StreamLabel::Noise, i);
        let mut additive = thermal_noise_frame(m, params.noise_psd, &mut noise_stream);
        for (a, b) in additive.iter_mut().zip(&data_interference[i]) {
            *a += b;
        }
        let y = superpose(&data_frames, i, &channels, &additive)?;

        match params.scheme {
            Scheme::Ncota => {
                let raw = ncota_energy(&y, true, params.noise_psd, params.p_tx, energy);
                let vector = ncota_estimate(&raw, &ws[i], params.codebook);
                estimates.push(DisagreementEstimate { vector, raw_energy: raw, gain_estimate: 0.0 });
            }
            Scheme::IrNcota { .. } => {
                let raw = ir_energy(&y, true, params.p_tx, energy);
                let sum_estimate =
                    ir_sum_estimate(&raw, rotation.as_ref().expect("rotation drawn"), params.codebook);

                let x_p = pilot.as_ref().expect("pilot drawn");
                let mut additive_p =
                    thermal_noise_frame(x_p.len(), params.noise_psd, &mut noise_stream);
                let pilot_int = pilot_interference.as_ref().expect("pilot interference drawn");
                for (a, b) in additive_p.iter_mut().zip(&pilot_int[i]) {
                    *a += b;
                }
                // Every transmitter sends the same pilot over the same
                // fading realization as the data slot.
                let pilot_frames: Vec<(usize, &[Complex64])> =
                    transmissions.iter().map(|(j, _)| (*j, x_p.as_slice())).collect();
                let y_p = superpose(&pilot_frames, i, &channels, &additive_p)?;
                let gain_estimate = pilot_gain_estimate(&y_p, x_p, true, params.p_tx, energy);

                let vector = ir_combine(&sum_estimate, gain_estimate, &ws[i]);
                estimates.push(DisagreementEstimate { vector, raw_energy: raw, gain_estimate });
            }
        }
    }

    Ok(RoundOutput { roles, estimates })
}
