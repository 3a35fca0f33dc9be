//! Right-hand side of the advected aggregation equation
//!
//! `∂_t ρ + A u·∇ρ + (-Δ)^{α/2} ρ + ∇·(ρ B(ρ)) = 0`,
//!
//! its time integration, and the run loop that classifies outcomes.

mod run;
mod stepper;

pub use run::{
    run, run_setup, transport_run, Classification, OutcomeReport, RunOutput, RunSetup, BLOWUP_GROWTH,
    TAIL_THRESHOLD,
};
pub use stepper::{StepInfo, Stepper, StepperState};

use num_complex::Complex64;

use crate::error::{KsError, Result};
use crate::kernel::{attract_spectra, KernelSpec};
use crate::spectral::{
    forward_pair, forward_transform, inverse_pair, inverse_transform, Multiplier, ScalarField,
    SpectralField, TorusGrid,
};

pub const DEFAULT_CFL: f64 = 0.4;
/// Added to the CFL denominator so a quiescent state still yields a finite step.
pub const CFL_EPSILON: f64 = 1e-12;

/// Which terms of the equation are active and with what parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    /// Aggregation kernel; `None` disables the nonlinear term.
    pub kernel: Option<KernelSpec>,
    pub amplitude: f64,
    pub dissipation: bool,
}

impl ModelParams {
    pub fn new(alpha: f64, kernel: KernelSpec, amplitude: f64) -> Result<Self> {
        Multiplier::frac_laplacian(alpha)?;
        check_amplitude(amplitude)?;
        Ok(ModelParams {
            alpha,
            kernel: Some(kernel),
            amplitude,
            dissipation: true,
        })
    }

    /// Pure transport `∂_t f + A u·∇f = 0`.
    pub fn transport(amplitude: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(ModelParams {
            alpha: 0.0,
            kernel: None,
            amplitude,
            dissipation: false,
        })
    }

    pub fn without_nonlinearity(self) -> Self {
        ModelParams {
            kernel: None,
            ..self
        }
    }

    pub fn nonlinear(&self) -> bool {
        self.kernel.is_some()
    }

    /// Symbol of the linear operator integrated exactly: `|k|^α`, with
    /// `σ(0) = 1` when `α = 0`; identically zero when dissipation is off.
    pub fn linear_symbol(&self, k2: f64) -> f64 {
        if !self.dissipation {
            0.0
        } else if self.alpha == 0.0 {
            1.0
        } else if k2 == 0.0 {
            0.0
        } else {
            k2.powf(0.5 * self.alpha)
        }
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(KsError::param("A", format!("must be finite and >= 0, got {amplitude}")));
    }
    Ok(())
}

/// `Σ_j ∂_j(ρ B_j)` with 2/3-rule dealiasing before and after the products.
pub fn nonlinear_term(rho: &ScalarField, spec: &KernelSpec) -> Result<ScalarField> {
    let grid = rho.grid();
    if grid.dim() != spec.dim() {
        return Err(KsError::param("dim", "kernel and field dimensions differ"));
    }
    let mut hat = forward_transform(rho)?;
    hat.dealias();
    let b_hat = attract_spectra(&hat, spec);
    let rho_m = inverse_transform(&hat);
    let b: Vec<ScalarField> = b_hat
        .into_iter()
        .map(|c| inverse_transform(&SpectralField::from_raw(grid, c)))
        .collect();
    let fluxes: Vec<ScalarField> = b
        .iter()
        .map(|bj| {
            let v = rho_m.values().iter().zip(bj.values()).map(|(r, b)| r * b).collect();
            ScalarField::from_raw(grid, v)
        })
        .collect();
    Ok(inverse_transform(&divergence_of(&fluxes)?))
}

/// `A Σ_j u_j ∂_j ρ`, dealiased the same way as [`nonlinear_term`].
pub fn advection_term(rho: &ScalarField, u: &[ScalarField], amplitude: f64) -> Result<ScalarField> {
    let grid = rho.grid();
    if u.len() != grid.dim() {
        return Err(KsError::param("u", "velocity must have d components"));
    }
    let mut hat = forward_transform(rho)?;
    hat.dealias();
    let t = grid.tables();
    let mut product = vec![0.0; grid.len()];
    for (j, uj) in u.iter().enumerate() {
        grid.check_same(&uj.grid())?;
        let mut u_hat = forward_transform(uj)?;
        u_hat.dealias();
        let u_m = inverse_transform(&u_hat);
        let d_hat: Vec<Complex64> = hat
            .coeffs()
            .iter()
            .zip(&t.kvec)
            .map(|(c, k)| c * Complex64::new(0.0, k[j] as f64))
            .collect();
        let dj = inverse_transform(&SpectralField::from_raw(grid, d_hat));
        for ((p, a), b) in product.iter_mut().zip(u_m.values()).zip(dj.values()) {
            *p += a * b;
        }
    }
    let mut out = forward_transform(&ScalarField::from_raw(grid, product))?;
    out.dealias();
    Ok(inverse_transform(&out).scaled(amplitude))
}

/// Spectrum of `Σ_j ∂_j F_j`, dealiased.
fn divergence_of(fluxes: &[ScalarField]) -> Result<SpectralField> {
    let grid = fluxes[0].grid();
    let t = grid.tables();
    let mut div = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, f) in fluxes.iter().enumerate() {
        let hat = forward_transform(f)?;
        for (i, c) in hat.coeffs().iter().enumerate() {
            if t.dealias[i] {
                div[i] += c * Complex64::new(0.0, t.kvec[i][j] as f64);
            }
        }
    }
    Ok(SpectralField::from_raw(grid, div))
}

/// `Δt = c · (2π/n) / (A max|u| + max|B| + ε)`, capped at `dt_max`.
pub fn cfl_dt(
    u: &[ScalarField],
    amplitude: f64,
    drift: &[ScalarField],
    grid: TorusGrid,
    c_cfl: f64,
    dt_max: f64,
) -> f64 {
    let umax = u.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
    let bmax = drift.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
    cfl_from_speeds(amplitude * umax, bmax, grid, c_cfl, dt_max)
}

pub(crate) fn cfl_from_speeds(advect: f64, drift: f64, grid: TorusGrid, c_cfl: f64, dt_max: f64) -> f64 {
    (c_cfl * grid.spacing() / (advect + drift + CFL_EPSILON)).min(dt_max)
}

/// Forward transforms of several real fields, two per complex FFT.
pub(crate) fn forward_many(fields: &[&[f64]], grid: TorusGrid) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        match pair {
            [a, b] => {
                let (x, y) = forward_pair(a, b, grid);
                out.push(x);
                out.push(y);
            }
            [a] => {
                let zero = vec![0.0; grid.len()];
                out.push(forward_pair(a, &zero, grid).0);
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Inverse transforms of several Hermitian spectra, two per complex FFT.
pub(crate) fn inverse_many(spectra: &[&[Complex64]], grid: TorusGrid) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(spectra.len());
    for pair in spectra.chunks(2) {
        match pair {
            [a, b] => {
                let (x, y) = inverse_pair(a, b, grid);
                out.push(x);
                out.push(y);
            }
            [a] => {
                let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
                out.push(inverse_pair(a, &zero, grid).0);
            }
            _ => unreachable!(),
        }
    }
    out
}
