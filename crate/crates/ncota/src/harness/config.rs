//! Experiment configuration: a flat key-value TOML file plus CLI overrides.
//!
//! Every key is optional; the defaults describe a 200-node network in a
//! 2 km disc at 3 GHz carrier, 5 MHz bandwidth, 20 dBm transmit power,
//! -173 dBm/Hz noise floor, transmit probability 0.34, pilot length 10,
//! 20 realizations, and the theory-driven step-size schedule
//! `γ₀ = 1.7e7`, `η₀ = 2/(μ+L)`, `δ = 5/(4μη₀)`.

use crate::channel::{InterferenceKind, RadioParams};
use crate::dgd::Schedule;
use crate::ota::RotationMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key {key} out of range: {reason}")]
    OutOfRange { key: &'static str, reason: String },
    #[error("objective logistic-fmnist requires dataset paths train_images and train_labels")]
    MissingDatasetPaths,
    #[error("test_images and test_labels must be given together")]
    HalfTestSet,
    #[error("logistic-fmnist fixes classes = 10 and feature_dim = 50")]
    FmnistShape,
}

/// Which disagreement estimator drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Baseline over-the-air estimator with noise-floor compensation.
    Ncota,
    /// Interference-robust estimator with rotation and pilot.
    IrNcota,
    /// Exact disagreement at every node; diagnostic upper baseline that
    /// consumes no channel resources.
    Oracle,
}

/// Which objective the network minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Logistic regression on image features loaded from IDX files.
    LogisticFmnist,
    /// Logistic regression on generated class-direction data.
    LogisticSynthetic,
    /// Quadratic consensus toy.
    QuadraticToy,
}

/// Raw file shape: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    n: Option<usize>,
    area_radius_m: Option<f64>,
    f_c_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_psd_dbm_hz: Option<f64>,
    p_tx: Option<f64>,
    estimator: Option<EstimatorKind>,
    interference: Option<InterferenceKind>,
    rotation_mode: Option<RotationMode>,
    n_p: Option<usize>,
    iterations: Option<u64>,
    realizations: Option<u64>,
    objective: Option<ObjectiveKind>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
    mu: Option<f64>,
    gamma0: Option<f64>,
    eta0: Option<f64>,
    delta: Option<f64>,
    metrics_stride: Option<u64>,
    classes: Option<usize>,
    feature_dim: Option<usize>,
    samples_per_node: Option<usize>,
    test_per_class: Option<usize>,
    synthetic_noise: Option<f64>,
    dump_geometry: Option<bool>,
}

/// CLI flags that override their config keys.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorKind>,
    pub interference: Option<InterferenceKind>,
    pub iterations: Option<u64>,
    pub realizations: Option<u64>,
    pub dump_geometry: bool,
}

/// A validated experiment configuration. Serialized field names match the
/// config-file keys so the summary echo reads back as a config.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(rename = "n")]
    pub num_nodes: usize,
    pub area_radius_m: f64,
    #[serde(rename = "f_c_hz")]
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub p_tx: f64,
    pub estimator: EstimatorKind,
    pub interference: InterferenceKind,
    pub rotation_mode: RotationMode,
    #[serde(rename = "n_p")]
    pub pilot_len: usize,
    pub iterations: u64,
    pub realizations: u64,
    pub objective: ObjectiveKind,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub mu: f64,
    pub gamma0: f64,
    /// Consensus-step numerator; defaults to `2/(μ+L)` of the built
    /// objective when absent.
    pub eta0: Option<f64>,
    /// Schedule decay; defaults to `5/(4μη₀)` when absent.
    pub delta: Option<f64>,
    pub metrics_stride: u64,
    pub classes: usize,
    pub feature_dim: usize,
    pub samples_per_node: usize,
    pub test_per_class: usize,
    pub synthetic_noise: f64,
    pub dump_geometry: bool,
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn require(condition: bool, key: &'static str, reason: String) -> Result<(), ConfigError> {
    if condition {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { key, reason })
    }
}

impl ExperimentConfig {
    /// Transmit power in watts.
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise power spectral density in W/Hz.
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz)
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            carrier_frequency_hz: self.carrier_frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            tx_power_w: self.tx_power_w(),
            noise_psd_w_per_hz: self.noise_psd_w_per_hz(),
        }
    }

    /// Samples on the air per iteration frame for a `dim`-dimensional
    /// parameter vector: `M = 2d+1`, plus the pilot for the
    /// interference-robust estimator.
    pub fn samples_per_frame(&self, dim: usize) -> usize {
        let m = 2 * dim + 1;
        match self.estimator {
            EstimatorKind::IrNcota => m + self.pilot_len,
            EstimatorKind::Ncota | EstimatorKind::Oracle => m,
        }
    }

    /// Frame duration in seconds: samples per frame over the bandwidth.
    pub fn frame_duration_s(&self, dim: usize) -> f64 {
        self.samples_per_frame(dim) as f64 / self.bandwidth_hz
    }

    /// Step-size schedule, with absent values derived from the built
    /// objective's strong convexity and smoothness.
    pub fn resolve_schedule(&self, mu: f64, smoothness: f64) -> Schedule {
        let eta0 = self.eta0.unwrap_or(2.0 / (mu + smoothness));
        let delta = self.delta.unwrap_or(5.0 / (4.0 * mu * eta0));
        Schedule { gamma0: self.gamma0, eta0, delta }
    }
}

/// Parses config text, applies CLI overrides, fills defaults, validates.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg = ExperimentConfig {
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        num_nodes: raw.n.unwrap_or(200),
        area_radius_m: raw.area_radius_m.unwrap_or(2000.0),
        carrier_frequency_hz: raw.f_c_hz.unwrap_or(3e9),
        bandwidth_hz: raw.bandwidth_hz.unwrap_or(5e6),
        tx_power_dbm: raw.tx_power_dbm.unwrap_or(20.0),
        noise_psd_dbm_hz: raw.noise_psd_dbm_hz.unwrap_or(-173.0),
        p_tx: raw.p_tx.unwrap_or(0.34),
        estimator: overrides.estimator.or(raw.estimator).unwrap_or(EstimatorKind::Ncota),
        interference: overrides
            .interference
            .or(raw.interference)
            .unwrap_or(InterferenceKind::None),
        rotation_mode: raw.rotation_mode.unwrap_or(RotationMode::SignFlip),
        pilot_len: raw.n_p.unwrap_or(10),
        iterations: overrides.iterations.or(raw.iterations).unwrap_or(1000),
        realizations: overrides.realizations.or(raw.realizations).unwrap_or(20),
        objective: raw.objective.unwrap_or(ObjectiveKind::LogisticSynthetic),
        train_images: raw.train_images,
        train_labels: raw.train_labels,
        test_images: raw.test_images,
        test_labels: raw.test_labels,
        mu: raw.mu.unwrap_or(0.001),
        gamma0: raw.gamma0.unwrap_or(1.7e7),
        eta0: raw.eta0,
        delta: raw.delta,
        metrics_stride: raw.metrics_stride.unwrap_or(10),
        classes: raw.classes.unwrap_or(10),
        feature_dim: raw.feature_dim.unwrap_or(50),
        samples_per_node: raw.samples_per_node.unwrap_or(5),
        test_per_class: raw.test_per_class.unwrap_or(100),
        synthetic_noise: raw.synthetic_noise.unwrap_or(0.25),
        dump_geometry: overrides.dump_geometry || raw.dump_geometry.unwrap_or(false),
    };
    validate(&cfg)?;
    Ok(cfg)
}

/// Reads and parses a config file with CLI overrides applied.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    parse_config(&text, overrides)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    require(cfg.num_nodes >= 2, "n", format!("need at least 2 nodes, got {}", cfg.num_nodes))?;
    require(cfg.area_radius_m > 0.0, "area_radius_m", format!("{}", cfg.area_radius_m))?;
    require(cfg.carrier_frequency_hz > 0.0, "f_c_hz", format!("{}", cfg.carrier_frequency_hz))?;
    require(cfg.bandwidth_hz > 0.0, "bandwidth_hz", format!("{}", cfg.bandwidth_hz))?;
    require(
        cfg.p_tx > 0.0 && cfg.p_tx < 1.0,
        "p_tx",
        format!("probability {} not strictly inside (0, 1)", cfg.p_tx),
    )?;
    require(cfg.pilot_len >= 2, "n_p", format!("pilot needs at least 2 samples, got {}", cfg.pilot_len))?;
    require(cfg.iterations >= 1, "iterations", format!("{}", cfg.iterations))?;
    require(cfg.realizations >= 1, "realizations", format!("{}", cfg.realizations))?;
    require(cfg.metrics_stride >= 1, "metrics_stride", format!("{}", cfg.metrics_stride))?;
    require(cfg.mu > 0.0, "mu", format!("{}", cfg.mu))?;
    require(cfg.gamma0 > 0.0, "gamma0", format!("{}", cfg.gamma0))?;
    if let Some(eta0) = cfg.eta0 {
        require(eta0 > 0.0, "eta0", format!("{eta0}"))?;
    }
    if let Some(delta) = cfg.delta {
        require(delta > 0.0, "delta", format!("{delta}"))?;
    }
    require(cfg.classes >= 2, "classes", format!("{}", cfg.classes))?;
    require(cfg.feature_dim >= 1, "feature_dim", format!("{}", cfg.feature_dim))?;
    require(cfg.samples_per_node >= 1, "samples_per_node", format!("{}", cfg.samples_per_node))?;
    require(cfg.synthetic_noise >= 0.0, "synthetic_noise", format!("{}", cfg.synthetic_noise))?;

    match cfg.objective {
        ObjectiveKind::LogisticFmnist => {
            if cfg.train_images.is_none() || cfg.train_labels.is_none() {
                return Err(ConfigError::MissingDatasetPaths);
            }
            if cfg.test_images.is_some() != cfg.test_labels.is_some() {
                return Err(ConfigError::HalfTestSet);
            }
            if cfg.classes != 10 || cfg.feature_dim != 50 {
                return Err(ConfigError::FmnistShape);
            }
            require(
                cfg.num_nodes % cfg.classes == 0,
                "n",
                format!("{} nodes not divisible by {} classes", cfg.num_nodes, cfg.classes),
            )?;
        }
        ObjectiveKind::LogisticSynthetic => {
            require(
                cfg.num_nodes % cfg.classes == 0,
                "n",
                format!("{} nodes not divisible by {} classes", cfg.num_nodes, cfg.classes),
            )?;
            require(
                cfg.feature_dim >= cfg.classes,
                "feature_dim",
                format!("{} below class count {}", cfg.feature_dim, cfg.classes),
            )?;
        }
        ObjectiveKind::QuadraticToy => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_stated_defaults() {
        let cfg = parse_config("", &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.num_nodes, 200);
        assert_eq!(cfg.area_radius_m, 2000.0);
        assert_eq!(cfg.carrier_frequency_hz, 3e9);
        assert_eq!(cfg.bandwidth_hz, 5e6);
        assert_eq!(cfg.tx_power_dbm, 20.0);
        assert_eq!(cfg.noise_psd_dbm_hz, -173.0);
        assert_eq!(cfg.p_tx, 0.34);
        assert_eq!(cfg.pilot_len, 10);
        assert_eq!(cfg.realizations, 20);
        assert_eq!(cfg.gamma0, 1.7e7);
        assert_eq!(cfg.mu, 0.001);
        assert_eq!(cfg.estimator, EstimatorKind::Ncota);
        assert_eq!(cfg.interference, InterferenceKind::None);
        assert_eq!(cfg.rotation_mode, RotationMode::SignFlip);
    }

    #[test]
    fn derived_schedule_matches_hand_arithmetic() {
        // μ = 0.001, L = 2.001: η₀ = 2/2.002, δ = 5/(4·0.001·η₀).
        let cfg = parse_config("", &Overrides::default()).unwrap();
        let schedule = cfg.resolve_schedule(0.001, 2.001);
        assert!((schedule.eta0 - 0.999000999).abs() < 1e-9);
        assert!((schedule.delta - 1251.25).abs() < 1e-9);
        assert_eq!(schedule.gamma0, 1.7e7);
    }

    #[test]
    fn dbm_conversions() {
        let cfg = parse_config("", &Overrides::default()).unwrap();
        assert!((cfg.tx_power_w() - 0.1).abs() < 1e-15);
        let n0 = cfg.noise_psd_w_per_hz();
        assert!((n0 - 5.011872336272715e-21).abs() / n0 < 1e-12);
    }

    #[test]
    fn frame_durations_from_dimension() {
        let base = parse_config("", &Overrides::default()).unwrap();
        assert_eq!(base.samples_per_frame(450), 901);
        assert_eq!(base.frame_duration_s(450), 1.802e-4);
        let ir = parse_config("estimator = \"ir-ncota\"", &Overrides::default()).unwrap();
        assert_eq!(ir.samples_per_frame(450), 911);
        assert_eq!(ir.frame_duration_s(450), 1.822e-4);
        let oracle = parse_config("estimator = \"oracle\"", &Overrides::default()).unwrap();
        assert_eq!(oracle.frame_duration_s(450), 1.802e-4);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        assert!(matches!(
            parse_config("p_tx = 1.5", &Overrides::default()),
            Err(ConfigError::OutOfRange { key: "p_tx", .. })
        ));
        assert!(matches!(
            parse_config("mystery_key = 3", &Overrides::default()),
            Err(ConfigError::Parse(_))
        ));
        assert!(parse_config("n_p = 1", &Overrides::default()).is_err());
        assert!(parse_config("n = 1", &Overrides::default()).is_err());
        assert!(parse_config("objective = \"logistic-fmnist\"", &Overrides::default()).is_err());
        // Synthetic data needs the node count split evenly across classes.
        assert!(parse_config("n = 21", &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_beat_file_values() {
        let overrides = Overrides {
            seed: Some(9),
            estimator: Some(EstimatorKind::IrNcota),
            interference: Some(InterferenceKind::GaussianJammer),
            iterations: Some(7),
            realizations: Some(2),
            dump_geometry: true,
        };
        let cfg = parse_config("seed = 1\niterations = 100", &overrides).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.iterations, 7);
        assert_eq!(cfg.realizations, 2);
        assert_eq!(cfg.estimator, EstimatorKind::IrNcota);
        assert_eq!(cfg.interference, InterferenceKind::GaussianJammer);
        assert!(cfg.dump_geometry);
    }
}
