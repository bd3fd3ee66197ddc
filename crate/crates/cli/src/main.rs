use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use subdiff_core::experiment::{
    export_fields, format_sci, run_experiment, run_table, write_run, ExperimentConfig, TableSpec,
};
use subdiff_core::ExecPolicy;

mod selftest;

#[derive(Parser)]
#[command(
    name = "subdiff",
    version,
    about = "Source discovery for time-fractional subdiffusion"
)]
struct Cli {
    /// Run loops sequentially instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for the run.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Sweep noise levels x grids x orders and write a result table.
    Table {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated noise levels (rows).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Comma-separated grid sizes N with h = 1/N (rows).
        #[arg(long, value_delimiter = ',')]
        grids: Option<Vec<usize>>,
        /// Comma-separated orders (columns).
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Type 1: train one network per column.
        #[arg(long)]
        retrain_per_column: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Regenerate fields.csv for a finished run.
    Export {
        /// Run directory containing config.toml and model.ckpt.
        run_dir: PathBuf,
        /// Destination file; defaults to <run_dir>/fields.csv.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check solver, inverse and network invariants.
    Selftest,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; flags and --set override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// ex1, ex2 or ex3.
    #[arg(long)]
    example: Option<String>,
    /// type1 or type2.
    #[arg(long = "type")]
    network_type: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated training orders for type2.
    #[arg(long, value_delimiter = ',')]
    alpha_sequence: Option<Vec<f64>>,
    /// none, uniform or gaussian.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    noise_level: Option<f64>,
    /// Intervals per direction.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// uniform or normal.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let mut overrides = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                overrides.push(format!("{key}={v}"));
            }
        };
        push("example", self.example.clone());
        push("network_type", self.network_type.clone());
        push("alpha", self.alpha.map(toml_float));
        push(
            "alpha_sequence",
            self.alpha_sequence.as_ref().map(|s| {
                let items: Vec<String> = s.iter().copied().map(toml_float).collect();
                format!("[{}]", items.join(", "))
            }),
        );
        push("noise", self.noise.clone());
        push("noise_level", self.noise_level.map(toml_float));
        push("grid", self.grid.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(toml_float));
        push("width", self.width.map(|v| v.to_string()));
        push("depth", self.depth.map(|v| v.to_string()));
        push("init", self.init.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        for assignment in overrides.iter().chain(&self.sets) {
            config
                .apply_override(assignment)
                .with_context(|| format!("applying {assignment}"))?;
        }
        config.validate().context("invalid configuration")?;
        Ok(config)
    }
}

fn toml_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn out_root() -> PathBuf {
    std::env::var_os("SUBDIFF_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_name(config: &ExperimentConfig) -> String {
    let c = config.resolved();
    format!(
        "{:?}_{:?}_a{}_{}{}_n{}",
        c.example, c.network_type, c.alpha, c.noise, c.noise_level, c.grid
    )
    .to_lowercase()
}

fn cmd_run(
    config: ExperimentConfig,
    out: Option<PathBuf>,
    policy: ExecPolicy,
) -> anyhow::Result<()> {
    let dir = out.unwrap_or_else(|| out_root().join(run_name(&config)));
    let artifacts = run_experiment(&config, policy)?;
    write_run(&artifacts, &dir)?;
    println!(
        "relative error {} ({} epochs, seed {})",
        format_sci(artifacts.relative_error),
        artifacts.config.resolved_epochs(),
        artifacts.config.resolved_seed()
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_table(spec: TableSpec, out: Option<PathBuf>, policy: ExecPolicy) -> anyhow::Result<()> {
    let dir = out.unwrap_or_else(|| {
        let b = &spec.base;
        out_root().join(format!("table_{:?}_{:?}", b.example, b.network_type).to_lowercase())
    });
    let table = run_table(&spec, policy, Some(&dir))?;
    print!("{}", table.to_csv());
    let failed = table
        .rows
        .iter()
        .flat_map(|r| &r.cells)
        .filter(|c| c.failure.is_some())
        .count();
    println!("wrote {}", dir.display());
    if failed > 0 {
        bail!(
            "{failed} table cells failed; see {}",
            dir.join("table.toml").display()
        );
    }
    Ok(())
}

fn cmd_export(run_dir: &Path, out: Option<PathBuf>, policy: ExecPolicy) -> anyhow::Result<()> {
    let out = out.unwrap_or_else(|| run_dir.join("fields.csv"));
    export_fields(run_dir, &out, policy)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let policy = if cli.sequential || !cfg!(feature = "parallel") {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    };
    let result = match cli.command {
        Command::Run { config, out } => config.resolve().and_then(|c| cmd_run(c, out, policy)),
        Command::Table {
            config,
            levels,
            grids,
            alphas,
            retrain_per_column,
            out,
        } => config.resolve().and_then(|base| {
            let mut spec = TableSpec::standard(base);
            if let Some(v) = levels {
                spec.noise_levels = v;
            }
            if let Some(v) = grids {
                spec.grids = v;
            }
            if let Some(v) = alphas {
                spec.alphas = v;
            }
            spec.retrain_per_column = retrain_per_column;
            cmd_table(spec, out, policy)
        }),
        Command::Export { run_dir, out } => cmd_export(&run_dir, out, policy),
        Command::Selftest => {
            if selftest::run(policy) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("selftest failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
