use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_experiment, write_run, AtStage, ExperimentError, Stage};
use crate::discovery::{Example, NetworkType};
use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::noise::NoiseKind;
use crate::trainer::{evaluate_surrogate, relative_error};

/// A sweep over noise levels x grids (rows) and orders (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub base: ExperimentConfig,
    pub noise_levels: Vec<f64>,
    pub grids: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Type 1 only: train a separate network for every column instead of
    /// replicating one run across the row.
    pub retrain_per_column: bool,
}

impl TableSpec {
    /// The standard sweep: levels {50%, 20%, 10%, clean},
    /// grids {1/25, 1/50, 1/100}, columns α ∈ {0.1, 0.3, 0.5, 0.7, 1}.
    pub fn standard(base: ExperimentConfig) -> Self {
        Self {
            base,
            noise_levels: vec![0.5, 0.2, 0.1, 0.0],
            grids: vec![25, 50, 100],
            alphas: vec![0.1, 0.3, 0.5, 0.7, 1.0],
            retrain_per_column: false,
        }
    }

    fn row_config(&self, level: f64, grid: usize) -> ExperimentConfig {
        let noise = if level == 0.0 {
            NoiseKind::None
        } else if self.base.noise == NoiseKind::None {
            match self.base.example {
                Example::Ex3 => NoiseKind::Gaussian,
                _ => NoiseKind::Uniform,
            }
        } else {
            self.base.noise
        };
        ExperimentConfig {
            noise,
            noise_level: level,
            grid,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub noise_level: f64,
    pub grid: usize,
    pub seed: u64,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub example: Example,
    pub network_type: NetworkType,
    pub noise: NoiseKind,
    pub epochs: usize,
    pub alphas: Vec<f64>,
    pub rows: Vec<TableRow>,
}

/// Scientific notation with four decimals and a two-digit exponent: `3.1629e-03`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn format_h(grid: usize) -> String {
    format!("1/{grid}")
}

impl ResultTable {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("table is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Comma-separated rendering, one line per (noise level, h) row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise_level,h_x");
        for a in &self.alphas {
            let _ = write!(out, ",alpha={a}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.noise_level, format_h(row.grid));
            for cell in &row.cells {
                match cell.relative_error {
                    Some(e) => {
                        let _ = write!(out, ",{}", format_sci(e));
                    }
                    None => out.push_str(",FAILED"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, noise_level: f64, grid: usize, alpha: f64) -> Option<&TableCell> {
        self.rows
            .iter()
            .find(|r| r.noise_level == noise_level && r.grid == grid)?
            .cells
            .iter()
            .find(|c| c.alpha == alpha)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

struct Job {
    row: usize,
    column: Option<usize>,
    config: ExperimentConfig,
}

fn cell_dir_name(config: &ExperimentConfig, column_alpha: Option<f64>) -> String {
    let mut name = format!("noise{}_n{}", config.noise_level, config.grid);
    if let Some(a) = column_alpha {
        let _ = write!(name, "_a{a}");
    }
    name
}

/// Runs every cell of the sweep. Jobs are independent and run under
/// `policy`; a failing job marks its cells instead of aborting the sweep.
/// With `out_dir`, each job's run artifacts go to `out_dir/cells/...` and
/// the table to `out_dir/table.{csv,toml}`.
pub fn run_table(
    spec: &TableSpec,
    policy: ExecPolicy,
    out_dir: Option<&Path>,
) -> Result<ResultTable, ExperimentError> {
    if spec.noise_levels.is_empty() || spec.grids.is_empty() || spec.alphas.is_empty() {
        return Err(Error::Domain("table needs rows and columns".into())).at(Stage::Config);
    }
    spec.base.validate().at(Stage::Config)?;

    let per_column = spec.retrain_per_column && spec.base.network_type == NetworkType::Type1;
    let mut jobs = Vec::new();
    let mut row_seeds = Vec::new();
    for &level in &spec.noise_levels {
        for &grid in &spec.grids {
            let config = spec.row_config(level, grid);
            config.validate().at(Stage::Config)?;
            let row = row_seeds.len();
            row_seeds.push((level, grid, config.resolved_seed()));
            if per_column {
                for (c, &alpha) in spec.alphas.iter().enumerate() {
                    let config = ExperimentConfig {
                        alpha,
                        ..config.clone()
                    };
                    jobs.push(Job {
                        row,
                        column: Some(c),
                        config,
                    });
                }
            } else {
                jobs.push(Job {
                    row,
                    column: None,
                    config,
                });
            }
        }
    }

    let outcomes = policy.map_indices(jobs.len(), |j| -> Result<Vec<(usize, f64)>, String> {
        let job = &jobs[j];
        let run = run_experiment(&job.config, policy).map_err(|e| e.to_string())?;
        if let Some(dir) = out_dir {
            let name = cell_dir_name(&job.config, job.column.map(|c| spec.alphas[c]));
            write_run(&run, &dir.join("cells").join(name)).map_err(|e| e.to_string())?;
        }
        match (job.column, job.config.network_type) {
            (Some(c), _) => Ok(vec![(c, run.relative_error)]),
            (None, NetworkType::Type1) => Ok((0..spec.alphas.len())
                .map(|c| (c, run.relative_error))
                .collect()),
            (None, NetworkType::Type2) => {
                let grid = *run.fields.source.grid();
                spec.alphas
                    .iter()
                    .enumerate()
                    .map(|(c, &alpha)| {
                        let pred =
                            evaluate_surrogate(&run.mlp, &grid, NetworkType::Type2, alpha, policy)
                                .map_err(|e| format!("{}: {e}", Stage::Evaluation))?;
                        let err = relative_error(&pred, &run.fields.source)
                            .map_err(|e| format!("{}: {e}", Stage::Evaluation))?;
                        Ok((c, err))
                    })
                    .collect()
            }
        }
    });

    let mut rows: Vec<TableRow> = row_seeds
        .iter()
        .map(|&(noise_level, grid, seed)| TableRow {
            noise_level,
            grid,
            seed,
            cells: spec
                .alphas
                .iter()
                .map(|&alpha| TableCell {
                    alpha,
                    relative_error: None,
                    failure: Some("not run".into()),
                })
                .collect(),
        })
        .collect();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let cells = &mut rows[job.row].cells;
        match outcome {
            Ok(values) => {
                for (c, e) in values {
                    cells[c].relative_error = Some(e);
                    cells[c].failure = None;
                }
            }
            Err(msg) => {
                let targets: Vec<usize> = match job.column {
                    Some(c) => vec![c],
                    None => (0..cells.len()).collect(),
                };
                for c in targets {
                    cells[c].failure = Some(msg.clone());
                }
            }
        }
    }

    let table = ResultTable {
        example: spec.base.example,
        network_type: spec.base.network_type,
        noise: jobs
            .iter()
            .map(|j| j.config.noise)
            .find(|k| *k != NoiseKind::None)
            .unwrap_or(NoiseKind::None),
        epochs: spec.base.resolved_epochs(),
        alphas: spec.alphas.clone(),
        rows,
    };
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("table.csv"), table.to_csv().as_bytes()).at(Stage::Write)?;
        write_atomic(&dir.join("table.toml"), table.to_toml().as_bytes()).at(Stage::Write)?;
    }
    Ok(table)
}
