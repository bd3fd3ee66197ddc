use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::{
    discovery_target, source_fields, AtStage, ExperimentError, RunFields, Stage, CONFIG_FILE,
    MODEL_FILE,
};
use crate::exec::ExecPolicy;
use crate::nn::load_checkpoint;
use crate::trainer::evaluate_surrogate;

pub const CSV_HEADER: &str = "x,t,f_true,f_target,f_pred";

/// One row per masked node, m-major. `f_true` is the clean benchmark
/// source; values use the shortest exactly round-tripping decimal form.
pub fn write_fields_csv(fields: &RunFields, mut out: impl Write) -> std::io::Result<()> {
    let grid = fields.clean.grid();
    writeln!(out, "{CSV_HEADER}")?;
    for (m, n) in grid.masked_nodes() {
        writeln!(
            out,
            "{},{},{},{},{}",
            grid.x(m),
            grid.t(n),
            fields.clean.get(m, n),
            fields.target.get(m, n),
            fields.predicted.get(m, n)
        )?;
    }
    Ok(())
}

/// Rebuilds the exported fields of a finished run from its saved config and
/// checkpoint. The data side is regenerated deterministically.
pub fn reload_fields(run_dir: &Path, policy: ExecPolicy) -> Result<RunFields, ExperimentError> {
    let config = ExperimentConfig::load(&run_dir.join(CONFIG_FILE)).at(Stage::Config)?;
    let mlp = load_checkpoint(&run_dir.join(MODEL_FILE)).at(Stage::Init)?;
    let (grid, clean, source) = source_fields(&config)?;
    let target = discovery_target(&source, config.alpha, policy)?
        .field()
        .clone();
    let predicted = evaluate_surrogate(&mlp, &grid, config.network_type, config.alpha, policy)
        .at(Stage::Evaluation)?;
    Ok(RunFields {
        clean,
        source,
        target,
        predicted,
    })
}

/// Re-dumps `fields.csv` for a finished run into `out`.
pub fn export_fields(
    run_dir: &Path,
    out: &Path,
    policy: ExecPolicy,
) -> Result<(), ExperimentError> {
    let fields = reload_fields(run_dir, policy)?;
    let mut buf = Vec::new();
    write_fields_csv(&fields, &mut buf).at(Stage::Write)?;
    super::table::write_atomic(out, &buf).at(Stage::Write)
}
