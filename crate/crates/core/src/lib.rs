//! Pseudospectral simulation of a Keller–Segel aggregation model with
//! fractional (or degenerate) dissipation and strong incompressible
//! advection on the periodic box, with mixing and blow-up diagnostics.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiment;
mod fft;
pub mod flow;
pub mod kernel;
pub mod snapshot;
pub mod spectral;

pub use error::{ConfigError, ConfigIssue, KsError, Result, SnapshotErrorKind};
pub use spectral::{
    apply_multiplier, apply_vector_multiplier, forward_transform, frac_laplacian,
    inverse_transform, lp_norm, project_low_modes, sobolev_norm, Lp, Multiplier, ScalarField,
    SpectralField, TorusGrid, VectorMultiplier,
};
pub use kernel::{attract_field, kernel_l1_norms, laplacian_kernel_conv, KernelNorms, KernelSpec};
pub use flow::{divergence_check, make_flow, Flow, FlowKind, FlowSpec, VelocityField};
pub use snapshot::{read_snapshot, write_snapshot};
pub use config::{parse_config, random_band, InitialCondition, OutputSpec, SimConfig};
pub use dynamics::{
    advection_term, cfl_dt, nonlinear_term, run, run_setup, transport_run, Classification,
    ModelParams, OutcomeReport, RunOutput, RunSetup, StepInfo, Stepper, StepperState,
};
pub use diagnostics::{
    certificate, flagged_time_fraction, gn_ratio, grad_sup_track, mean_decay_residual, mean_phi,
    phi, phi_threshold, rage_average, semigroup_bound_check, slope_bound_check, tail_fraction,
    Certificate, DiagnosticsRecord, RageReport, SemigroupReport, SlopeReport,
};
pub use experiment::{read_series, run_experiment, sweep_amplitude, ExperimentSummary, SweepRow};
