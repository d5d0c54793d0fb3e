//! Node deployment, path loss, fading, interference, and signal superposition.
//!
//! Nodes are dropped uniformly in a disc and linked by Rayleigh flat-fading
//! channels whose average gain follows the free-space path-loss model
//! `Λ = (λ / (4π·d))²`. Fading coefficients are redrawn independently per
//! link direction and per iteration. The received signal at a node is the
//! superposition of all concurrent transmissions scaled by their fading
//! coefficients, plus thermal noise and, optionally, external interference.

use crate::rng::Stream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;

/// Two points closer than this are treated as coincident and resampled
/// during deployment to keep path gains finite.
const MIN_SEPARATION_M: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("deployment needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("frame length mismatch: expected {expected}, got {actual}")]
    FrameLengthMismatch { expected: usize, actual: usize },
    #[error("gain matrix must be square with zero diagonal and symmetric nonnegative entries")]
    MalformedGainMatrix,
    #[error("interferer gain count {gains} does not match node count {nodes}")]
    GainCountMismatch { gains: usize, nodes: usize },
    #[error("radio parameters must be positive (bandwidth {bandwidth_hz} Hz, tx power {tx_power_w} W)")]
    BadRadioParams { bandwidth_hz: f64, tx_power_w: f64 },
}

/// Physical-layer constants shared by every node.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
}

impl RadioParams {
    /// Transmit energy per baseband sample, `E = P_tx / W`.
    pub fn energy_per_sample(&self) -> f64 {
        self.tx_power_w / self.bandwidth_hz
    }
}

/// Node positions in meters plus the radio constants of the network.
#[derive(Debug, Clone)]
pub struct Deployment {
    positions: Vec<[f64; 2]>,
    area_radius_m: f64,
    radio: RadioParams,
}

impl Deployment {
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn area_radius_m(&self) -> f64 {
        self.area_radius_m
    }

    pub fn radio(&self) -> &RadioParams {
        &self.radio
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Drops `n` nodes i.i.d. uniformly in the disc of the given radius.
/// Coincident points are resampled.
pub fn deploy(
    n: usize,
    area_radius_m: f64,
    radio: RadioParams,
    stream: &mut Stream,
) -> Result<Deployment, ChannelError> {
    if n < 2 {
        return Err(ChannelError::TooFewNodes(n));
    }
    if !(radio.bandwidth_hz > 0.0) || !(radio.tx_power_w > 0.0) {
        return Err(ChannelError::BadRadioParams {
            bandwidth_hz: radio.bandwidth_hz,
            tx_power_w: radio.tx_power_w,
        });
    }
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(n);
    while positions.len() < n {
        let candidate = stream.point_in_disc(area_radius_m);
        if positions.iter().all(|&p| distance(p, candidate) >= MIN_SEPARATION_M) {
            positions.push(candidate);
        }
    }
    Ok(Deployment { positions, area_radius_m, radio })
}

/// Free-space path gain `(λ / (4π·d))²` at carrier frequency `f_c`.
pub fn friis_gain(distance_m: f64, carrier_frequency_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let wavelength = SPEED_OF_LIGHT_M_S / carrier_frequency_hz;
    let ratio = wavelength / (4.0 * std::f64::consts::PI * distance_m);
    Ok(ratio * ratio)
}

/// Symmetric matrix of average link gains with zero diagonal.
#[derive(Debug, Clone)]
pub struct GainMatrix {
    n: usize,
    gains: Vec<f64>,
}

impl GainMatrix {
    pub fn from_deployment(deployment: &Deployment) -> Result<Self, ChannelError> {
        let n = deployment.num_nodes();
        let f_c = deployment.radio().carrier_frequency_hz;
        let mut gains = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(deployment.positions()[i], deployment.positions()[j]);
                let g = friis_gain(d, f_c)?;
                gains[i * n + j] = g;
                gains[j * n + i] = g;
            }
        }
        Ok(GainMatrix { n, gains })
    }

    /// Adopts an explicit gain matrix (row-major). Used for fixed test
    /// topologies.
    pub fn from_gains(n: usize, gains: Vec<f64>) -> Result<Self, ChannelError> {
        if gains.len() != n * n {
            return Err(ChannelError::MalformedGainMatrix);
        }
        for i in 0..n {
            if gains[i * n + i] != 0.0 {
                return Err(ChannelError::MalformedGainMatrix);
            }
            for j in 0..n {
                let g = gains[i * n + j];
                if !(g >= 0.0) || g != gains[j * n + i] {
                    return Err(ChannelError::MalformedGainMatrix);
                }
            }
        }
        Ok(GainMatrix { n, gains })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[i * self.n + j]
    }

    /// Sum of gains incoming into node `i`.
    pub fn incoming_sum(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.gain(i, j)).sum()
    }
}

/// One iteration's fading coefficients, `h_ij = √Λ_ij · z_ij` with unit
/// complex Gaussian `z_ij`, drawn independently per link direction.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    n: usize,
    coefficients: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn coefficient(&self, receiver: usize, transmitter: usize) -> Complex64 {
        self.coefficients[receiver * self.n + transmitter]
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }
}

/// Draws fresh fading for every ordered node pair. Draw order is row-major
/// over (receiver, transmitter) with the diagonal skipped.
pub fn sample_channels(gains: &GainMatrix, stream: &mut Stream) -> ChannelRealization {
    let n = gains.num_nodes();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let g = gains.gain(i, j);
            if g > 0.0 {
                coefficients[i * n + j] = g.sqrt() * stream.complex_gaussian();
            }
        }
    }
    ChannelRealization { n, coefficients }
}

/// Thermal noise frame with per-sample energy `noise_psd`.
pub fn thermal_noise_frame(len: usize, noise_psd: f64, stream: &mut Stream) -> Vec<Complex64> {
    let amplitude = noise_psd.sqrt();
    (0..len).map(|_| amplitude * stream.complex_gaussian()).collect()
}

/// Received signal at `receiver`: every transmitted frame scaled by its
/// fading coefficient, plus the additive noise-and-interference frame.
pub fn superpose(
    transmissions: &[(usize, &[Complex64])],
    receiver: usize,
    channels: &ChannelRealization,
    additive: &[Complex64],
) -> Result<Vec<Complex64>, ChannelError> {
    let mut received = additive.to_vec();
    for (transmitter, frame) in transmissions {
        if frame.len() != received.len() {
            return Err(ChannelError::FrameLengthMismatch {
                expected: received.len(),
                actual: frame.len(),
            });
        }
        let h = channels.coefficient(receiver, *transmitter);
        for (y, x) in received.iter_mut().zip(frame.iter()) {
            *y += h * x;
        }
    }
    Ok(received)
}

/// External interference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceKind {
    /// No interferer; receivers see thermal noise only.
    None,
    /// An interferer emitting a white Gaussian signal with the same
    /// per-sample energy as the nodes; one waveform draw is shared by all
    /// receivers within a frame.
    GaussianJammer,
    /// An interferer hitting only the first sample of every frame.
    SingleSample,
}

/// An interference source plus its average gains toward every node.
#[derive(Debug, Clone)]
pub struct InterferenceScenario {
    kind: InterferenceKind,
    gains: Vec<f64>,
}

impl InterferenceScenario {
    pub fn none(num_nodes: usize) -> Self {
        InterferenceScenario { kind: InterferenceKind::None, gains: vec![0.0; num_nodes] }
    }

    /// Places the interferer at `position` and derives its gain toward each
    /// node from the free-space model.
    pub fn at_position(
        kind: InterferenceKind,
        position: [f64; 2],
        deployment: &Deployment,
    ) -> Result<Self, ChannelError> {
        if kind == InterferenceKind::None {
            return Ok(Self::none(deployment.num_nodes()));
        }
        let f_c = deployment.radio().carrier_frequency_hz;
        let gains = deployment
            .positions()
            .iter()
            .map(|&p| friis_gain(distance(p, position).max(MIN_SEPARATION_M), f_c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(InterferenceScenario { kind, gains })
    }

    /// Adopts explicit interferer-to-node gains. Used for fixed test
    /// topologies.
    pub fn from_gains(kind: InterferenceKind, gains: Vec<f64>) -> Self {
        InterferenceScenario { kind, gains }
    }

    pub fn kind(&self) -> InterferenceKind {
        self.kind
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Draws one frame of interference per node. The jammer waveform `v` is
    /// drawn once and received by every node through its own fading
    /// coefficient, so interference is correlated across receivers within a
    /// frame. Fading is redrawn every frame.
    pub fn sample_frames(
        &self,
        len: usize,
        energy_per_sample: f64,
        stream: &mut Stream,
    ) -> Vec<Vec<Complex64>> {
        let n = self.gains.len();
        match self.kind {
            InterferenceKind::None => vec![vec![Complex64::new(0.0, 0.0); len]; n],
            InterferenceKind::GaussianJammer => {
                let amplitude = energy_per_sample.sqrt();
                let waveform: Vec<Complex64> =
                    (0..len).map(|_| amplitude * stream.complex_gaussian()).collect();
                self.gains
                    .iter()
                    .map(|&g| {
                        let fade = g.sqrt() * stream.complex_gaussian();
                        waveform.iter().map(|&v| fade * v).collect()
                    })
                    .collect()
            }
            InterferenceKind::SingleSample => {
                let burst = (energy_per_sample * len as f64).sqrt();
                self.gains
                    .iter()
                    .map(|&g| {
                        let fade = g.sqrt() * stream.complex_gaussian();
                        let mut frame = vec![Complex64::new(0.0, 0.0); len];
                        frame[0] = fade * burst;
                        frame
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, StreamKey, StreamLabel};

    fn radio() -> RadioParams {
        RadioParams {
            carrier_frequency_hz: 3e9,
            bandwidth_hz: 5e6,
            tx_power_w: 0.1,
            noise_psd_w_per_hz: 5.011872336272715e-21,
        }
    }

    fn stream(label: StreamLabel, seed: u64) -> crate::rng::Stream {
        derive_stream(seed, &StreamKey::new(label, 0))
    }

    #[test]
    fn deployment_is_area_uniform() {
        let mut s = stream(StreamLabel::Channel, 0);
        let dep = deploy(10_000, 2000.0, radio(), &mut s).unwrap();
        let inside_half = dep
            .positions()
            .iter()
            .filter(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() <= 1000.0)
            .count() as f64
            / 10_000.0;
        assert!((inside_half - 0.25).abs() < 0.015, "fraction {inside_half}");
        for p in dep.positions() {
            assert!((p[0] * p[0] + p[1] * p[1]).sqrt() <= 2000.0);
        }
    }

    #[test]
    fn deployment_is_deterministic() {
        let a = deploy(50, 2000.0, radio(), &mut stream(StreamLabel::Channel, 9)).unwrap();
        let b = deploy(50, 2000.0, radio(), &mut stream(StreamLabel::Channel, 9)).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert!(deploy(1, 2000.0, radio(), &mut stream(StreamLabel::Channel, 9)).is_err());
    }

    #[test]
    fn friis_matches_direct_evaluation() {
        // λ ≈ 0.09993 m at 3 GHz, 1 km range.
        let g = friis_gain(1000.0, 3e9).unwrap();
        assert!((g - 6.326e-11).abs() / 6.326e-11 < 1e-3, "gain {g}");
    }

    #[test]
    fn friis_inverse_square_law() {
        let g1 = friis_gain(700.0, 3e9).unwrap();
        let g2 = friis_gain(1400.0, 3e9).unwrap();
        assert_eq!(g1 / g2, 4.0);
        let mut last = f64::INFINITY;
        for d in [1.0, 10.0, 100.0, 1e4, 1e8] {
            let g = friis_gain(d, 3e9).unwrap();
            assert!(g < last);
            last = g;
        }
        assert!(friis_gain(0.0, 3e9).is_err());
    }

    #[test]
    fn fading_second_moment_tracks_average_gain() {
        let lambda = 0.37;
        let gains = GainMatrix::from_gains(2, vec![0.0, lambda, lambda, 0.0]).unwrap();
        let mut s = stream(StreamLabel::Channel, 3);
        let n = 100_000;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..n {
            let h = sample_channels(&gains, &mut s).coefficient(0, 1);
            mean += h;
            power += h.norm_sqr();
        }
        mean /= n as f64;
        power /= n as f64;
        assert!((power - lambda).abs() / lambda < 0.01, "E|h|^2 = {power}");
        assert!(mean.norm() < 3.0 * (lambda / n as f64).sqrt(), "|mean| = {}", mean.norm());
    }

    #[test]
    fn zero_gain_links_have_zero_fading() {
        let gains = GainMatrix::from_gains(2, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let h = sample_channels(&gains, &mut stream(StreamLabel::Channel, 1));
        assert_eq!(h.coefficient(0, 1), Complex64::new(0.0, 0.0));
        assert_eq!(h.coefficient(1, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn superposition_identities() {
        // Identity channels for the check.
        let channels = ChannelRealization {
            n: 3,
            coefficients: vec![Complex64::new(1.0, 0.0); 9],
        };
        let x1 = vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let x2 = vec![Complex64::new(0.5, 0.5), Complex64::new(-1.0, 0.0)];
        let zeros = vec![Complex64::new(0.0, 0.0); 2];

        let y = superpose(&[], 0, &channels, &zeros).unwrap();
        assert_eq!(y, zeros);

        let y = superpose(&[(1, &x1)], 0, &channels, &zeros).unwrap();
        assert_eq!(y, x1);

        let y = superpose(&[(1, &x1), (2, &x2)], 0, &channels, &zeros).unwrap();
        for m in 0..2 {
            assert_eq!(y[m], x1[m] + x2[m]);
        }

        let short = vec![Complex64::new(0.0, 0.0); 1];
        assert!(superpose(&[(1, &short)], 0, &channels, &zeros).is_err());
    }

    #[test]
    fn no_interference_is_all_zero() {
        let scenario = InterferenceScenario::none(4);
        let frames = scenario.sample_frames(8, 1.0, &mut stream(StreamLabel::Interference, 0));
        for frame in frames {
            assert!(frame.iter().all(|z| z.norm_sqr() == 0.0));
        }
    }

    #[test]
    fn jammer_sample_energy_matches_product_of_gains() {
        let gamma = 0.6;
        let energy = 1.3;
        let scenario =
            InterferenceScenario::from_gains(InterferenceKind::GaussianJammer, vec![gamma, 0.2]);
        let mut s = stream(StreamLabel::Interference, 7);
        let frames_count = 100_000;
        let len = 4;
        let mut acc = 0.0;
        for _ in 0..frames_count {
            let frames = scenario.sample_frames(len, energy, &mut s);
            acc += frames[0].iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / (frames_count * len) as f64;
        let expected = gamma * energy;
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean}, expected {expected}");
    }

    #[test]
    fn single_sample_interference_hits_only_first_sample() {
        let scenario =
            InterferenceScenario::from_gains(InterferenceKind::SingleSample, vec![0.5, 0.5]);
        let frames = scenario.sample_frames(6, 2.0, &mut stream(StreamLabel::Interference, 1));
        for frame in frames {
            assert!(frame[1..].iter().all(|z| z.norm_sqr() == 0.0));
            assert!(frame[0].norm_sqr() > 0.0);
        }
    }

    #[test]
    fn jammer_interference_is_correlated_across_receivers() {
        // Shared waveform: per-sample energies at two receivers co-vary.
        let scenario =
            InterferenceScenario::from_gains(InterferenceKind::GaussianJammer, vec![0.8, 0.5]);
        let mut s = stream(StreamLabel::Interference, 2);
        let n = 10_000;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let frames = scenario.sample_frames(1, 1.0, &mut s);
            let x = frames[0][0].norm_sqr();
            let y = frames[1][0].norm_sqr();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let vx = sxx / nf - (sx / nf) * (sx / nf);
        let vy = syy / nf - (sy / nf) * (sy / nf);
        let rho = cov / (vx * vy).sqrt();
        assert!(rho > 0.1, "cross-receiver energy correlation {rho}");
    }

    #[test]
    fn fading_uncorrelated_with_interference() {
        // E[h* n] ≈ 0: fading and interference come from separate streams.
        let gains = GainMatrix::from_gains(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let scenario =
            InterferenceScenario::from_gains(InterferenceKind::GaussianJammer, vec![1.0, 1.0]);
        let mut hs = stream(StreamLabel::Channel, 5);
        let mut is = stream(StreamLabel::Interference, 5);
        let n = 100_000;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut var = 0.0;
        for _ in 0..n {
            let h = sample_channels(&gains, &mut hs).coefficient(0, 1);
            let frame = &scenario.sample_frames(1, 1.0, &mut is)[0];
            let prod = h.conj() * frame[0];
            acc += prod;
            var += prod.norm_sqr();
        }
        let mean = acc / n as f64;
        let sigma = (var / n as f64 / n as f64).sqrt();
        assert!(mean.norm() < 3.0 * sigma, "|E[h* n]| = {} vs 3σ = {}", mean.norm(), 3.0 * sigma);
    }
}
