use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{derive_seed, ExperimentConfig};
use super::export::write_fields_csv;
use crate::discovery::{
    assemble_training_set, benchmark_field, benchmark_initial, discover_source, DiscoveryTarget,
    NetworkType,
};
use crate::exec::ExecPolicy;
use crate::grid::{Field, Grid};
use crate::nn::{save_checkpoint, Mlp};
use crate::noise::{inject_noise, NoiseSpec};
use crate::solver::{forward_solve, Problem};
use crate::trainer::{
    evaluate_surrogate, grid_normalizer, predict_set, relative_error, residual_loss, train,
    AlphaPolicy, TrainConfig, TrainReport,
};

const NOISE_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;

/// Pipeline step an experiment failed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Source,
    Noise,
    ForwardSolve,
    Discovery,
    Assembly,
    Init,
    Training,
    Evaluation,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Source => "source sampling",
            Stage::Noise => "noise injection",
            Stage::ForwardSolve => "forward solve",
            Stage::Discovery => "source discovery",
            Stage::Assembly => "training-set assembly",
            Stage::Init => "network initialization",
            Stage::Training => "training",
            Stage::Evaluation => "evaluation",
            Stage::Write => "artifact write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("{stage} failed: {source}")]
pub struct ExperimentError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError> {
        self.map_err(|e| ExperimentError {
            stage,
            source: Box::new(e),
        })
    }
}

/// Grid fields kept for export. `source` is the (possibly noisy) source that
/// generated the data and is the reference for the relative error; `clean`
/// is the noise-free benchmark source.
#[derive(Debug, Clone)]
pub struct RunFields {
    pub clean: Field,
    pub source: Field,
    pub target: Field,
    pub predicted: Field,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Config with epochs and seed resolved.
    pub config: ExperimentConfig,
    pub relative_error: f64,
    pub report: TrainReport,
    pub mlp: Mlp,
    pub fields: RunFields,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunSummary {
    relative_error: f64,
    grid_loss: Option<f64>,
    optimizer_steps: u64,
}

/// Clean benchmark source and the noisy source actually used for the run.
pub fn source_fields(config: &ExperimentConfig) -> Result<(Grid, Field, Field), ExperimentError> {
    config.validate().at(Stage::Config)?;
    let grid = Grid::unit_square(config.grid).at(Stage::Config)?;
    let clean = benchmark_field(config.example, grid).at(Stage::Source)?;
    let spec = NoiseSpec {
        kind: config.noise,
        level: config.noise_level,
        seed: derive_seed(config.resolved_seed(), NOISE_STREAM),
    };
    let noisy = inject_noise(&clean, &spec).at(Stage::Noise)?;
    Ok((grid, clean, noisy))
}

/// Solution data for `source` at order `alpha`, pushed back through the
/// discrete inverse operator.
pub fn discovery_target(
    source: &Field,
    alpha: f64,
    policy: ExecPolicy,
) -> Result<DiscoveryTarget, ExperimentError> {
    let problem = Problem::new(alpha, benchmark_initial, source.clone()).at(Stage::ForwardSolve)?;
    let u = forward_solve(&problem, policy).at(Stage::ForwardSolve)?;
    discover_source(&u, alpha, policy).at(Stage::Discovery)
}

fn training_alphas(config: &ExperimentConfig) -> Vec<f64> {
    match config.network_type {
        NetworkType::Type1 => vec![config.alpha],
        NetworkType::Type2 => config.alpha_sequence.clone(),
    }
}

pub(crate) fn train_config(config: &ExperimentConfig) -> TrainConfig {
    let alpha = match config.network_type {
        NetworkType::Type1 => AlphaPolicy::Fixed(config.alpha),
        NetworkType::Type2 => AlphaPolicy::Sequence(config.alpha_sequence.clone()),
    };
    let seed = derive_seed(config.resolved_seed(), TRAIN_STREAM);
    let mut tc = TrainConfig::new(config.network_type, alpha, config.resolved_epochs(), seed);
    tc.batch_size = config.batch_size;
    tc.learning_rate = config.learning_rate;
    tc
}

pub(crate) fn init_network(config: &ExperimentConfig) -> Result<Mlp, ExperimentError> {
    let widths = Mlp::standard_widths(config.network_type.input_dim(), config.width, config.depth);
    Mlp::new(
        &widths,
        config.init,
        derive_seed(config.resolved_seed(), INIT_STREAM),
    )
    .at(Stage::Init)
}

/// Generate data, recover the source, train the surrogate, and score it.
pub fn run_experiment(
    config: &ExperimentConfig,
    policy: ExecPolicy,
) -> Result<RunArtifacts, ExperimentError> {
    let config = config.resolved();
    let (grid, clean, source) = source_fields(&config)?;

    let alphas = training_alphas(&config);
    let targets = alphas
        .iter()
        .map(|&a| discovery_target(&source, a, policy))
        .collect::<Result<Vec<_>, _>>()?;
    let set =
        assemble_training_set(&targets, config.network_type, &alphas, None).at(Stage::Assembly)?;

    let mlp = init_network(&config)?;
    let (mlp, mut report) = train(&train_config(&config), &set, mlp, policy).at(Stage::Training)?;

    let predicted = evaluate_surrogate(&mlp, &grid, config.network_type, config.alpha, policy)
        .at(Stage::Evaluation)?;
    let error = relative_error(&predicted, &source).at(Stage::Evaluation)?;
    let fitted = predict_set(&mlp, &set, policy).at(Stage::Evaluation)?;
    let normalizer = grid_normalizer(&grid) * alphas.len() as f64;
    report.grid_loss =
        Some(residual_loss(&fitted, set.labels(), normalizer).at(Stage::Evaluation)?);
    report.relative_error = Some(error);

    let target = match targets.iter().find(|t| t.alpha() == config.alpha) {
        Some(t) => t.field().clone(),
        None => discovery_target(&source, config.alpha, policy)?
            .field()
            .clone(),
    };
    Ok(RunArtifacts {
        config,
        relative_error: error,
        report,
        mlp,
        fields: RunFields {
            clean,
            source,
            target,
            predicted,
        },
    })
}

pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.toml";
pub const RESULT_FILE: &str = "result.toml";
pub const FIELDS_FILE: &str = "fields.csv";
pub const MODEL_FILE: &str = "model.ckpt";

fn staging_path(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    dir.with_file_name(format!(".{name}.partial"))
}

/// Writes the run into `dir` by staging everything in a sibling directory
/// and renaming it into place; a failed write leaves nothing behind.
pub fn write_run(artifacts: &RunArtifacts, dir: &Path) -> Result<(), ExperimentError> {
    if let Some(parent) = dir.parent() {
        fs::create_dir_all(parent).at(Stage::Write)?;
    }
    let staging = staging_path(dir);
    let result = (|| -> crate::error::Result<()> {
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        fs::write(staging.join(CONFIG_FILE), artifacts.config.to_toml())?;
        let report = toml::to_string(&artifacts.report)
            .map_err(|e| crate::error::Error::Parse(e.to_string()))?;
        fs::write(staging.join(REPORT_FILE), report)?;
        let summary = RunSummary {
            relative_error: artifacts.relative_error,
            grid_loss: artifacts.report.grid_loss,
            optimizer_steps: artifacts.report.optimizer_steps,
        };
        let summary =
            toml::to_string(&summary).map_err(|e| crate::error::Error::Parse(e.to_string()))?;
        fs::write(staging.join(RESULT_FILE), summary)?;
        let mut csv = Vec::new();
        write_fields_csv(&artifacts.fields, &mut csv)?;
        fs::write(staging.join(FIELDS_FILE), csv)?;
        save_checkpoint(&artifacts.mlp, &staging.join(MODEL_FILE))?;
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result.at(Stage::Write)
}
