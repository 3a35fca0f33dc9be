use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{ModelParams, Stepper};
use crate::config::SimConfig;
use crate::diagnostics::{tail_fraction, DiagnosticsRecord};
use crate::error::{KsError, Result};
use crate::flow::Flow;
use crate::kernel::KernelSpec;
use crate::spectral::{inverse_transform, ScalarField, SpectralField};

/// `L∞` growth factor that, together with a large tail, signals blow-up.
pub const BLOWUP_GROWTH: f64 = 50.0;
/// Tail-energy fraction above which a state counts as under-resolved.
pub const TAIL_THRESHOLD: f64 = 1e-3;

/// Everything a run needs, already validated.
#[derive(Clone)]
pub struct RunSetup {
    pub params: ModelParams,
    pub flow: Arc<Flow>,
    pub rho0: ScalarField,
    pub horizon: f64,
    pub c_cfl: f64,
    pub dt_max: f64,
    pub output_every: usize,
    pub diag_modes: usize,
    /// Kernel used for `Φ` and the negative Sobolev norm; may differ from
    /// `params.kernel` when the nonlinearity is switched off.
    pub diag_kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    ResolvedHorizon,
    BlowupSuspected,
    UnderResolved,
    NanAbort,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::ResolvedHorizon => "resolved-horizon",
            Classification::BlowupSuspected => "blowup-suspected",
            Classification::UnderResolved => "under-resolved",
            Classification::NanAbort => "nan-abort",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Classification::ResolvedHorizon,
            Classification::BlowupSuspected,
            Classification::UnderResolved,
            Classification::NanAbort,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| KsError::param("classification", format!("unknown value {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeReport {
    pub classification: Classification,
    pub t_final: f64,
    pub peak_linf: f64,
    pub initial_linf: f64,
    /// Tail fraction of the last finite state.
    pub tail_fraction: f64,
    pub max_tail_fraction: f64,
    /// Start time of the step after which the tail first exceeded the
    /// threshold; `None` when it never did.
    pub resolved_until: Option<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: OutcomeReport,
    pub records: Vec<DiagnosticsRecord>,
    /// `(t, max_x ρ)` at every step start and at the final time.
    pub max_trace: Vec<(f64, f64)>,
    /// Initial density after projection onto the dealiased band.
    pub initial_field: ScalarField,
    /// Last finite state.
    pub final_field: ScalarField,
}

pub fn run(config: &SimConfig) -> Result<RunOutput> {
    run_setup(&config.setup()?, |_, _| Ok(()))
}

/// Pure transport of the setup's initial data: dissipation and
/// aggregation are switched off, the flow and amplitude are kept.
pub fn transport_run(setup: &RunSetup) -> Result<RunOutput> {
    let setup = RunSetup {
        params: ModelParams::transport(setup.params.amplitude)?,
        ..setup.clone()
    };
    run_setup(&setup, |_, _| Ok(()))
}

/// Integrates to the horizon or to an early stop. `observer` sees every
/// emitted record together with the spectrum it was computed from.
pub fn run_setup<F>(setup: &RunSetup, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(&DiagnosticsRecord, &SpectralField) -> Result<()>,
{
    if !(setup.horizon > 0.0) {
        return Err(KsError::param("T", format!("must be positive, got {}", setup.horizon)));
    }
    if setup.output_every == 0 {
        return Err(KsError::param("output.every", "must be at least 1"));
    }
    if setup.diag_modes == 0 {
        return Err(KsError::param("diag.N", "must be at least 1"));
    }
    let mut stepper = Stepper::new(setup.params, setup.flow.clone(), &setup.rho0, setup.c_cfl, setup.dt_max)?;
    let kernel = setup.diag_kernel.as_ref();
    let modes = setup.diag_modes;

    let initial_field = stepper.field();
    let initial_linf = initial_field.max_abs();
    let mut records = Vec::new();
    let mut emit = |t: f64, hat: &SpectralField, records: &mut Vec<DiagnosticsRecord>| -> Result<()> {
        let r = DiagnosticsRecord::from_spectrum(t, hat, kernel, modes);
        observer(&r, hat)?;
        records.push(r);
        Ok(())
    };
    emit(0.0, stepper.spectrum(), &mut records)?;

    let mut peak_linf = initial_linf;
    let mut tail = tail_fraction(stepper.spectrum());
    let mut max_tail = tail;
    let mut max_trace = Vec::new();
    let mut classification = None;
    let mut last_emitted = 0u64;
    let mut resolved_until = None;

    while stepper.time() < setup.horizon {
        let info = match stepper.step(Some(setup.horizon)) {
            Ok(info) => info,
            Err(KsError::NonFinite { .. }) => {
                classification = Some(Classification::NanAbort);
                break;
            }
            Err(e) => return Err(e),
        };
        max_trace.push((info.t, info.max_value));
        peak_linf = peak_linf.max(info.linf);

        let hat = stepper.spectrum();
        tail = tail_fraction(hat);
        max_tail = max_tail.max(tail);
        if tail > TAIL_THRESHOLD && resolved_until.is_none() {
            resolved_until = Some(info.t);
        }
        let steps = stepper.state().steps;
        let linf = inverse_transform(hat).max_abs();
        peak_linf = peak_linf.max(linf);

        let blowup = linf >= BLOWUP_GROWTH * initial_linf && tail > TAIL_THRESHOLD;
        let finished = stepper.time() >= setup.horizon;
        if blowup || finished || steps % setup.output_every as u64 == 0 {
            emit(stepper.time(), hat, &mut records)?;
            last_emitted = steps;
        }
        if blowup {
            classification = Some(Classification::BlowupSuspected);
            break;
        }
    }
    let final_field = stepper.field();
    max_trace.push((stepper.time(), final_field.max()));
    let classification = classification.unwrap_or(if max_tail > TAIL_THRESHOLD {
        Classification::UnderResolved
    } else {
        Classification::ResolvedHorizon
    });
    if classification == Classification::NanAbort && last_emitted != stepper.state().steps {
        emit(stepper.time(), stepper.spectrum(), &mut records)?;
    }
    Ok(RunOutput {
        report: OutcomeReport {
            classification,
            t_final: stepper.time(),
            peak_linf,
            initial_linf,
            tail_fraction: tail,
            max_tail_fraction: max_tail,
            resolved_until,
            steps: stepper.state().steps,
        },
        records,
        max_trace,
        initial_field,
        final_field,
    })
}
