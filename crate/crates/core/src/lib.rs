//! Data-driven discovery of the source term of the 1-D time-fractional
//! subdiffusion equation
//!
//! ```text
//! D_t^α u - u_xx = f,   u(x, 0) = g(x),   u(0, t) = u(l, t) = 0,
//! ```
//!
//! where `D_t^α` is the Caputo derivative of order `0 < α <= 1`.
//!
//! The pipeline generates solution data with an implicit L1 finite-difference
//! solver ([`solver`]), applies the exact discrete inverse of that scheme to
//! recover the source on the grid ([`discovery`]), optionally perturbs the
//! source with uniform or gaussian noise ([`noise`]), and fits a deep ReLU
//! network to the recovered source ([`nn`], [`trainer`]). [`experiment`]
//! wires these together into reproducible runs and result tables.
//!
//! Loops over nodes, batch rows and table cells go through [`ExecPolicy`];
//! with the default `parallel` feature they run on rayon, and both policies
//! produce bit-identical results.

pub mod discovery;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod grid;
pub mod l1;
pub mod nn;
pub mod noise;
pub mod solver;
pub mod special;
pub mod trainer;

pub use discovery::{
    assemble_training_set, benchmark_field, benchmark_initial, benchmark_source, discover_source,
    DiscoveryTarget, Example, NetworkType, TrainingSet,
};
pub use error::{Error, Result};
pub use exec::ExecPolicy;
pub use grid::{Field, Grid};
pub use l1::{backward_difference_weights, caputo_apply, caputo_weights, l1_weights, L1Weights};
pub use noise::{inject_noise, NoiseKind, NoiseSpec};
pub use solver::{forward_solve, laplacian_stencil, thomas_solve, Problem, TridiagonalSystem};
pub use special::gamma;
pub use trainer::{
    evaluate_surrogate, relative_error, residual_loss, train, AlphaPolicy, TrainConfig, TrainReport,
};
