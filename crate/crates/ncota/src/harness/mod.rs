//! Experiment orchestration: realization loop, estimator selection,
//! aggregation across realizations, and result emission.
//!
//! Each realization draws a fresh deployment and dataset, solves for the
//! centralized optimum once, and then iterates communication rounds and
//! gradient steps from an all-zero start. Realizations run concurrently;
//! every random stream is keyed by (seed, realization, iteration), so
//! results are independent of scheduling and replay bit-exactly.

pub mod config;

pub use config::{
    load_config, parse_config, ConfigError, EstimatorKind, ExperimentConfig, ObjectiveKind,
    Overrides,
};

use crate::channel::{deploy, ChannelError, GainMatrix, InterferenceKind, InterferenceScenario};
use crate::codec::{Codebook, CodecError};
use crate::dgd::{dgd_step, metrics, DgdError, NetworkState, RunRecord};
use crate::objective::{
    self, class_balanced_subset, enclosing_radius, idx, partition_by_class, solve_optimum,
    synthetic_datasets, synthetic_test_set, LogisticTask, ObjectiveError, ObjectiveModel,
    QuadraticTask,
};
use crate::ota::{
    disagreement_oracle, simulate_round, OtaError, RoundParams, Scheme, StreamContext,
};
use crate::rng::{derive_stream, StreamKey, StreamLabel};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// A module failure, wrapped for context attribution.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Ota(#[from] OtaError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Dgd(#[from] DgdError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset load: {source}")]
    DatasetLoad {
        #[source]
        source: ObjectiveError,
    },
    #[error("realization {realization}: {source}")]
    Setup {
        realization: u64,
        #[source]
        source: SimError,
    },
    #[error("realization {realization}, iteration {iteration}: {source}")]
    Iteration {
        realization: u64,
        iteration: u64,
        #[source]
        source: SimError,
    },
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize summary: {0}")]
    Serialize(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Across-realization aggregate plus the echoed configuration.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub dim: usize,
    pub samples_per_frame: usize,
    pub frame_duration_s: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    pub energy_per_sample_j: f64,
    pub solver_converged: bool,
    /// Recorded iteration indices, shared by every realization.
    pub iterations: Vec<u64>,
    pub air_time_s: Vec<f64>,
    pub mean_normalized_error: Vec<f64>,
    pub mean_subopt_gap: Vec<f64>,
    pub mean_test_error: Vec<f64>,
    pub final_normalized_error: f64,
    pub final_subopt_gap: f64,
    pub final_test_error: f64,
}

/// Everything a run produces before anything is written to disk.
#[derive(Debug)]
pub struct ExperimentResult {
    /// Per-realization records, ordered by realization then iteration.
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    /// Node positions per realization, kept when `dump_geometry` is set.
    pub geometry: Option<Vec<Vec<[f64; 2]>>>,
}

struct RealizationOutput {
    records: Vec<RunRecord>,
    positions: Vec<[f64; 2]>,
    solver_converged: bool,
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

/// Corpora shared by all realizations (loaded once).
struct SharedInputs {
    fmnist_train: Option<Vec<objective::Feature>>,
    fmnist_test: Option<Vec<objective::Feature>>,
}

impl SharedInputs {
    fn load(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        if cfg.objective != ObjectiveKind::LogisticFmnist {
            return Ok(SharedInputs { fmnist_train: None, fmnist_test: None });
        }
        let train = idx::ingest_fashion_mnist(
            cfg.train_images.as_ref().expect("validated"),
            cfg.train_labels.as_ref().expect("validated"),
        )
        .map_err(|source| RunError::DatasetLoad { source })?;
        let test = match (&cfg.test_images, &cfg.test_labels) {
            (Some(images), Some(labels)) => Some(
                idx::ingest_fashion_mnist(images, labels)
                    .map_err(|source| RunError::DatasetLoad { source })?,
            ),
            _ => None,
        };
        Ok(SharedInputs { fmnist_train: Some(train), fmnist_test: test })
    }
}

/// Runs the configured experiment: every realization independently, then
/// the across-realization average of each metric at fixed iteration index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    let shared = SharedInputs::load(cfg)?;
    let outputs: Vec<Result<RealizationOutput, RunError>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|rz| run_realization(cfg, &shared, rz))
        .collect();
    let mut realizations = Vec::with_capacity(outputs.len());
    for output in outputs {
        realizations.push(output?);
    }

    let recorded: Vec<u64> = realizations[0].records.iter().map(|r| r.iteration).collect();
    let points = recorded.len();
    let mut mean_normalized = vec![0.0; points];
    let mut mean_subopt = vec![0.0; points];
    let mut mean_test = vec![0.0; points];
    for output in &realizations {
        debug_assert_eq!(output.records.len(), points);
        for (idx, record) in output.records.iter().enumerate() {
            mean_normalized[idx] += record.normalized_error;
            mean_subopt[idx] += record.subopt_gap;
            mean_test[idx] += record.test_error;
        }
    }
    let scale = 1.0 / cfg.realizations as f64;
    for v in [&mut mean_normalized, &mut mean_subopt, &mut mean_test] {
        for x in v.iter_mut() {
            *x *= scale;
        }
    }

    let dim = model_dim(cfg);
    let frame_duration_s = cfg.frame_duration_s(dim);
    let summary = Summary {
        config: cfg.clone(),
        dim,
        samples_per_frame: cfg.samples_per_frame(dim),
        frame_duration_s,
        tx_power_w: cfg.tx_power_w(),
        noise_psd_w_per_hz: cfg.noise_psd_w_per_hz(),
        energy_per_sample_j: cfg.radio().energy_per_sample(),
        solver_converged: realizations.iter().all(|r| r.solver_converged),
        air_time_s: recorded.iter().map(|&k| k as f64 * frame_duration_s).collect(),
        iterations: recorded,
        final_normalized_error: *mean_normalized.last().expect("at least one record"),
        final_subopt_gap: *mean_subopt.last().expect("at least one record"),
        final_test_error: *mean_test.last().expect("at least one record"),
        mean_normalized_error: mean_normalized,
        mean_subopt_gap: mean_subopt,
        mean_test_error: mean_test,
    };

    let geometry = cfg
        .dump_geometry
        .then(|| realizations.iter().map(|r| r.positions.clone()).collect());
    let records = realizations.into_iter().flat_map(|r| r.records).collect();
    Ok(ExperimentResult { records, summary, geometry })
}

/// Parameter dimension implied by the configured objective.
fn model_dim(cfg: &ExperimentConfig) -> usize {
    match cfg.objective {
        ObjectiveKind::LogisticFmnist | ObjectiveKind::LogisticSynthetic => {
            (cfg.classes - 1) * cfg.feature_dim
        }
        ObjectiveKind::QuadraticToy => cfg.feature_dim,
    }
}

fn build_model(
    cfg: &ExperimentConfig,
    shared: &SharedInputs,
    rz: u64,
) -> Result<Box<dyn ObjectiveModel>, ObjectiveError> {
    let mut data_stream = derive_stream(cfg.seed, &StreamKey::new(StreamLabel::DataShuffle, rz));
    match cfg.objective {
        ObjectiveKind::LogisticSynthetic => {
            let datasets = synthetic_datasets(
                cfg.classes,
                cfg.feature_dim,
                cfg.samples_per_node,
                cfg.num_nodes,
                cfg.synthetic_noise,
                &mut data_stream,
            )?;
            let test_set = synthetic_test_set(
                cfg.classes,
                cfg.feature_dim,
                cfg.test_per_class,
                cfg.synthetic_noise,
                &mut data_stream,
            )?;
            Ok(Box::new(LogisticTask::new(
                datasets,
                test_set,
                cfg.classes,
                cfg.feature_dim,
                cfg.mu,
            )?))
        }
        ObjectiveKind::LogisticFmnist => {
            let train = shared.fmnist_train.as_ref().expect("loaded");
            let datasets = partition_by_class(
                train,
                cfg.classes,
                cfg.num_nodes,
                cfg.samples_per_node,
                &mut data_stream,
            )?;
            let test_set = match &shared.fmnist_test {
                Some(test) => {
                    class_balanced_subset(test, cfg.classes, cfg.test_per_class, &mut data_stream)?
                }
                None => Vec::new(),
            };
            Ok(Box::new(LogisticTask::new(
                datasets,
                test_set,
                cfg.classes,
                cfg.feature_dim,
                cfg.mu,
            )?))
        }
        ObjectiveKind::QuadraticToy => {
            // Centers cluster around a common unit direction so the optimum
            // (their mean) has order-one norm while node heterogeneity stays
            // moderate.
            let mut anchor = data_stream.normal_vec(cfg.feature_dim);
            let norm = crate::codec::l2_norm(&anchor);
            for x in &mut anchor {
                *x /= norm;
            }
            let centers = (0..cfg.num_nodes)
                .map(|_| {
                    let offset = data_stream.vector_in_ball(cfg.feature_dim, 0.1);
                    anchor.iter().zip(offset).map(|(a, b)| a + b).collect()
                })
                .collect();
            Ok(Box::new(QuadraticTask::new(centers)))
        }
    }
}

fn run_realization(
    cfg: &ExperimentConfig,
    shared: &SharedInputs,
    rz: u64,
) -> Result<RealizationOutput, RunError> {
    let setup = |source: SimError| RunError::Setup { realization: rz, source };

    // Iteration index 0 of the channel and data streams is reserved for
    // realization-level setup; rounds use index k+1.
    let mut deploy_stream = derive_stream(cfg.seed, &StreamKey::new(StreamLabel::Channel, rz));
    let deployment = deploy(cfg.num_nodes, cfg.area_radius_m, cfg.radio(), &mut deploy_stream)
        .map_err(|e| setup(e.into()))?;
    let gains = GainMatrix::from_deployment(&deployment).map_err(|e| setup(e.into()))?;
    let scenario = match cfg.interference {
        InterferenceKind::None => InterferenceScenario::none(cfg.num_nodes),
        kind => InterferenceScenario::at_position(kind, [0.0, 0.0], &deployment)
            .map_err(|e| setup(e.into()))?,
    };

    let model = build_model(cfg, shared, rz).map_err(|e| setup(e.into()))?;
    let dim = model.dim();
    let optimum = solve_optimum(model.as_ref());
    let gradient_at_zero = model.global_gradient(&vec![0.0; dim]);
    let radius = enclosing_radius(model.strong_convexity(), &gradient_at_zero);
    let codebook = Codebook::new(dim, radius).map_err(|e| setup(e.into()))?;
    let schedule = cfg.resolve_schedule(model.strong_convexity(), model.smoothness());
    let frame_duration = cfg.frame_duration_s(dim);

    let scheme = match cfg.estimator {
        EstimatorKind::Ncota | EstimatorKind::Oracle => Scheme::Ncota,
        EstimatorKind::IrNcota => {
            Scheme::IrNcota { pilot_len: cfg.pilot_len, rotation: cfg.rotation_mode }
        }
    };
    let round_params = RoundParams {
        codebook: &codebook,
        gains: &gains,
        interference: &scenario,
        energy_per_sample: cfg.radio().energy_per_sample(),
        noise_psd: cfg.noise_psd_w_per_hz(),
        p_tx: cfg.p_tx,
        scheme,
    };

    let mut state = NetworkState::zeros(cfg.num_nodes, dim, radius);
    let mut records = Vec::new();
    let record = |state: &NetworkState, records: &mut Vec<RunRecord>| -> Result<(), SimError> {
        records.push(metrics(state, &optimum, model.as_ref(), frame_duration, rz)?);
        Ok(())
    };
    record(&state, &mut records).map_err(setup)?;

    for k in 0..cfg.iterations {
        let at_iteration =
            |source: SimError| RunError::Iteration { realization: rz, iteration: k, source };

        let estimates: Vec<Vec<f64>> = match cfg.estimator {
            EstimatorKind::Oracle => (0..cfg.num_nodes)
                .map(|i| disagreement_oracle(&state.parameters, &gains, i))
                .collect(),
            EstimatorKind::Ncota | EstimatorKind::IrNcota => {
                let ctx = StreamContext {
                    master_seed: cfg.seed,
                    realization: rz,
                    iteration: k + 1,
                };
                let output = simulate_round(&round_params, &state.parameters, &ctx)
                    .map_err(|e| at_iteration(e.into()))?;
                output.estimates.into_iter().map(|e| e.vector).collect()
            }
        };
        let gradients: Vec<Vec<f64>> = (0..cfg.num_nodes)
            .map(|i| model.local_gradient(i, &state.parameters[i]))
            .collect();
        let (gamma, eta) = schedule.step_sizes(k);
        dgd_step(&mut state, &estimates, &gradients, gamma, eta)
            .map_err(|e| at_iteration(e.into()))?;

        let completed = k + 1;
        if completed % cfg.metrics_stride == 0 || completed == cfg.iterations {
            record(&state, &mut records)
                .map_err(|e| RunError::Iteration { realization: rz, iteration: k, source: e })?;
        }
    }

    Ok(RealizationOutput {
        records,
        positions: deployment.positions().to_vec(),
        solver_converged: optimum.converged,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

pub const RUNS_CSV_HEADER: &str =
    "realization,iteration,air_time_s,normalized_error,subopt_gap,test_error";

fn write_file(path: &Path, contents: &str) -> Result<(), EmitError> {
    let mut file = std::fs::File::create(path)
        .map_err(|source| EmitError::Write { path: path.display().to_string(), source })?;
    file.write_all(contents.as_bytes())
        .map_err(|source| EmitError::Write { path: path.display().to_string(), source })
}

/// Writes `runs.csv`, `summary.json`, and (when geometry was kept)
/// `geometry_rz<k>.csv` into `out_dir`.
pub fn emit_results(result: &ExperimentResult, out_dir: &Path) -> Result<(), EmitError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| EmitError::Write { path: out_dir.display().to_string(), source })?;

    let mut csv = String::with_capacity(result.records.len() * 64);
    csv.push_str(RUNS_CSV_HEADER);
    csv.push('\n');
    for r in &result.records {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.realization, r.iteration, r.air_time_s, r.normalized_error, r.subopt_gap,
            r.test_error
        ));
    }
    write_file(&out_dir.join("runs.csv"), &csv)?;

    let json = serde_json::to_string_pretty(&result.summary)?;
    write_file(&out_dir.join("summary.json"), &format!("{json}\n"))?;

    if let Some(geometry) = &result.geometry {
        for (rz, positions) in geometry.iter().enumerate() {
            let mut geo = String::from("node_index,x_m,y_m\n");
            for (node, p) in positions.iter().enumerate() {
                geo.push_str(&format!("{},{},{}\n", node, p[0], p[1]));
            }
            write_file(&out_dir.join(format!("geometry_rz{rz}.csv")), &geo)?;
        }
    }
    Ok(())
}
