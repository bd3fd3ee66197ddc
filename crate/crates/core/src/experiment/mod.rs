//! End-to-end experiment pipeline: configuration, single runs, table
//! sweeps, and CSV field export.

mod config;
mod export;
mod run;
mod table;

pub use config::{default_alpha_sequence, default_epochs, ExperimentConfig};
pub use export::{export_fields, reload_fields, write_fields_csv, CSV_HEADER};
pub use run::{
    discovery_target, run_experiment, source_fields, write_run, ExperimentError, RunArtifacts,
    RunFields, Stage, CONFIG_FILE, FIELDS_FILE, MODEL_FILE, REPORT_FILE, RESULT_FILE,
};
pub use table::{format_sci, run_table, ResultTable, TableCell, TableRow, TableSpec};
