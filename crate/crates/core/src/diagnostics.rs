//! Measurements on densities and record streams: the mixing functional Φ,
//! low-mode (RAGE) time averages, projected-semigroup growth, mean decay,
//! the Gagliardo–Nirenberg ratio, a priori certificate constants and the
//! maximum-slope check.
//!
//! Unspecified universal constants are fixed by convention: `C = 1` in
//! Young-type bounds, `C = 2` for the projected-semigroup check.

use std::sync::Arc;

use num_complex::Complex64;

use crate::dynamics::{inverse_many, ModelParams, Stepper};
use crate::error::{KsError, Result};
use crate::flow::Flow;
use crate::kernel::{kernel_l1_norms, KernelSpec};
use crate::spectral::{
    forward_transform, inverse_transform, low_mode_energy, lp_norm, spectral_sobolev_norm, Lp,
    ScalarField, SpectralField, TorusGrid,
};

/// Constant of the projected-semigroup bound used in acceptance checks.
pub const SEMIGROUP_CONSTANT: f64 = 2.0;

/// One time sample of the monitored quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mean: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub min: f64,
    /// `max_x ρ` and where it is attained (first grid point on ties).
    pub max_value: f64,
    pub max_location: [f64; 3],
    /// Physical L² norm of `ρ - ρ̄`.
    pub l2_meanfree: f64,
    /// `‖Λ^{β-d}(ρ - ρ̄)‖₂` in the coefficient convention.
    pub neg_sobolev: f64,
    pub phi: Option<f64>,
    pub low_mode_fraction: Option<f64>,
    pub tail_fraction: f64,
    /// `max_j ‖∂_j ρ‖_∞`.
    pub grad_sup: f64,
}

impl DiagnosticsRecord {
    pub fn from_spectrum(t: f64, hat: &SpectralField, kernel: Option<&KernelSpec>, modes: usize) -> Self {
        let grid = hat.grid();
        let d = grid.dim();
        let tables = grid.tables();
        let grads: Vec<Vec<Complex64>> = (0..d)
            .map(|j| {
                hat.coeffs()
                    .iter()
                    .zip(&tables.kvec)
                    .map(|(c, k)| c * Complex64::new(0.0, k[j] as f64))
                    .collect()
            })
            .collect();
        let mut refs: Vec<&[Complex64]> = vec![hat.coeffs()];
        refs.extend(grads.iter().map(|g| g.as_slice()));
        let mut phys = inverse_many(&refs, grid).into_iter();
        let rho = ScalarField::from_raw(grid, phys.next().unwrap());
        let grad_sup = phys
            .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max);

        let energy = meanfree_energy(hat);
        let neg_sobolev = kernel.map_or(f64::NAN, |k| spectral_sobolev_norm(hat, k.negative_order()));
        let phi = match kernel {
            Some(_) if energy > 0.0 => Some(neg_sobolev * neg_sobolev / energy),
            _ => None,
        };
        let low_mode_fraction = (energy > 0.0).then(|| low_mode_energy(hat, modes) / energy);
        let arg = rho.argmax();
        DiagnosticsRecord {
            t,
            mean: hat.coeffs()[0].re,
            l1: lp_norm(&rho, Lp::L1),
            l2: lp_norm(&rho, Lp::L2),
            linf: lp_norm(&rho, Lp::Inf),
            min: rho.min(),
            max_value: rho.values()[arg],
            max_location: grid.point(arg),
            l2_meanfree: (energy * grid.volume()).sqrt(),
            neg_sobolev,
            phi,
            low_mode_fraction,
            tail_fraction: tail_fraction(hat),
            grad_sup,
        }
    }

    pub fn from_field(t: f64, rho: &ScalarField, kernel: Option<&KernelSpec>, modes: usize) -> Result<Self> {
        Ok(DiagnosticsRecord::from_spectrum(t, &forward_transform(rho)?, kernel, modes))
    }
}

/// `Σ_{k≠0} |ρ̂(k)|²`.
pub fn meanfree_energy(hat: &SpectralField) -> f64 {
    hat.coeffs().iter().skip(1).map(|c| c.norm_sqr()).sum()
}

/// Fraction of mean-free energy in `|k| > n/3`; zero for a constant field.
pub fn tail_fraction(hat: &SpectralField) -> f64 {
    let grid = hat.grid();
    let t = grid.tables();
    let cut2 = (grid.n() as f64 / 3.0).powi(2);
    let mut tail = 0.0;
    let mut total = 0.0;
    for (c, &k2) in hat.coeffs().iter().zip(&t.kmag2).skip(1) {
        let e = c.norm_sqr();
        total += e;
        if k2 > cut2 {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// `Φ = ‖Λ^{β-d}(ρ-ρ̄)‖₂² / ‖ρ-ρ̄‖₂²`; `None` for a constant field.
pub fn phi(rho: &ScalarField, spec: &KernelSpec) -> Result<Option<f64>> {
    let hat = forward_transform(rho)?;
    let energy = meanfree_energy(&hat);
    if energy == 0.0 {
        return Ok(None);
    }
    Ok(Some(spectral_sobolev_norm(&hat, spec.negative_order()).powi(2) / energy))
}

/// `2 λ_N^{β-d}` with `λ_N = N²`.
pub fn phi_threshold(modes: usize, spec: &KernelSpec) -> f64 {
    2.0 * ((modes * modes) as f64).powf(spec.negative_order())
}

/// Time-weighted fraction of the record span during which `Φ >= threshold`.
pub fn flagged_time_fraction(records: &[DiagnosticsRecord], threshold: f64) -> f64 {
    let flagged = |r: &DiagnosticsRecord| r.phi.is_some_and(|p| p >= threshold);
    if records.len() < 2 {
        return records.first().map_or(0.0, |r| flagged(r) as u8 as f64);
    }
    let span = records.last().unwrap().t - records[0].t;
    if span <= 0.0 {
        return 0.0;
    }
    records
        .windows(2)
        .filter(|w| flagged(&w[0]))
        .map(|w| w[1].t - w[0].t)
        .sum::<f64>()
        / span
}

/// Trapezoid-rule time average of Φ over the records that define it.
pub fn mean_phi(records: &[DiagnosticsRecord]) -> Option<f64> {
    let samples: Vec<(f64, f64)> = records.iter().filter_map(|r| r.phi.map(|p| (r.t, p))).collect();
    time_average(&samples)
}

fn time_average(samples: &[(f64, f64)]) -> Option<f64> {
    match samples {
        [] => None,
        [(_, v)] => Some(*v),
        _ => {
            let span = samples.last().unwrap().0 - samples[0].0;
            if span <= 0.0 {
                return Some(samples[0].1);
            }
            let integral: f64 = samples
                .windows(2)
                .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                .sum();
            Some(integral / span)
        }
    }
}

/// Result of [`rage_average`].
#[derive(Debug, Clone, PartialEq)]
pub struct RageReport {
    /// `(1/T) ∫₀^T ‖P_N U^t φ₀‖₂² dt`.
    pub average: f64,
    /// `‖P_N φ₀‖₂²`.
    pub initial_low_energy: f64,
    /// True when the input had to be made mean-free or unit-normed.
    pub normalized_input: bool,
    /// `(t, ‖P_N φ(t)‖₂²)` at every step.
    pub samples: Vec<(f64, f64)>,
}

/// Mean-free part scaled to unit coefficient ℓ² norm; the flag reports
/// whether anything changed.
pub fn normalize_unit(phi0: &ScalarField) -> Result<(SpectralField, bool)> {
    let mut hat = forward_transform(phi0)?;
    let mean = hat.coeffs()[0];
    let energy = meanfree_energy(&hat);
    if energy == 0.0 {
        return Err(KsError::Undefined("a unit-norm mean-free profile"));
    }
    let norm = energy.sqrt();
    let changed = mean.norm() > 1e-12 * norm.max(1.0) || (norm - 1.0).abs() > 1e-12;
    hat.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    if changed {
        for c in hat.coeffs_mut() {
            *c /= norm;
        }
    }
    Ok((hat, changed))
}

/// Transports a unit mean-free profile and time-averages its low-mode energy.
pub fn rage_average(
    flow: Arc<Flow>,
    amplitude: f64,
    phi0: &ScalarField,
    modes: usize,
    horizon: f64,
    c_cfl: f64,
    dt_max: f64,
) -> Result<RageReport> {
    if modes == 0 {
        return Err(KsError::param("N", "projection radius must be >= 1"));
    }
    if !(horizon > 0.0) {
        return Err(KsError::param("T", format!("must be positive, got {horizon}")));
    }
    let (hat, normalized_input) = normalize_unit(phi0)?;
    if normalized_input {
        log::warn!("RAGE input was not mean-free with unit norm; normalized");
    }
    let start = inverse_transform(&hat);
    let mut stepper = Stepper::new(ModelParams::transport(amplitude)?, flow, &start, c_cfl, dt_max)?;
    let initial_low_energy = low_mode_energy(stepper.spectrum(), modes);
    let mut samples = vec![(0.0, initial_low_energy)];
    while stepper.time() < horizon {
        stepper.step(Some(horizon))?;
        samples.push((stepper.time(), low_mode_energy(stepper.spectrum(), modes)));
    }
    Ok(RageReport {
        average: time_average(&samples).unwrap(),
        initial_low_energy,
        normalized_input,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupReport {
    /// `(t, ‖P_N f(t)‖₂ / (e^{N²t} ‖P_N f‖₂))`.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

impl SemigroupReport {
    pub fn within(&self, constant: f64) -> bool {
        self.max_ratio <= constant
    }
}

/// Checks `‖P_N e^{-tAu·∇} f‖₂ <= C e^{N²t} ‖P_N f‖₂` on `t_grid`.
pub fn semigroup_bound_check(
    flow: Arc<Flow>,
    amplitude: f64,
    f: &ScalarField,
    modes: usize,
    t_grid: &[f64],
    c_cfl: f64,
    dt_max: f64,
) -> Result<SemigroupReport> {
    if modes == 0 {
        return Err(KsError::param("N", "projection radius must be >= 1"));
    }
    let mut times = t_grid.to_vec();
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(KsError::param("t_grid", "times must be nonnegative"));
    }
    times.sort_by(f64::total_cmp);
    let mut stepper = Stepper::new(ModelParams::transport(amplitude)?, flow, f, c_cfl, dt_max)?;
    let low = |s: &SpectralField| (low_mode_energy(s, modes) + s.coeffs()[0].norm_sqr()).sqrt();
    let base = low(stepper.spectrum());
    if base == 0.0 {
        return Err(KsError::Undefined("the projected-semigroup ratio (P_N f = 0)"));
    }
    let growth = (modes * modes) as f64;
    let mut ratios = Vec::with_capacity(times.len());
    for t in times {
        stepper.advance_to(t)?;
        ratios.push((t, low(stepper.spectrum()) / ((growth * t).exp() * base)));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SemigroupReport { ratios, max_ratio })
}

/// `max_records |ρ̄(t) - e^{-t} ρ̄₀|` for an `α = 0` damped run.
pub fn mean_decay_residual(records: &[DiagnosticsRecord], alpha: f64) -> Result<f64> {
    if alpha != 0.0 {
        return Err(KsError::param(
            "alpha",
            format!("mean decay law applies only to alpha = 0, got {alpha}"),
        ));
    }
    let Some(first) = records.first() else {
        return Ok(0.0);
    };
    Ok(records
        .iter()
        .map(|r| (r.mean - (-(r.t - first.t)).exp() * first.mean).abs())
        .fold(0.0, f64::max))
}

/// Interpolation exponent `θ = (2d - β) / (3d - 2β)`.
pub fn gn_exponent(spec: &KernelSpec) -> f64 {
    let d = spec.dim() as f64;
    let b = spec.beta();
    (2.0 * d - b) / (3.0 * d - 2.0 * b)
}

/// `‖Λ^{(β-d)/2} f‖_∞ / (‖Λ^{β-d} f‖₂^{1-θ} ‖f‖_∞^θ)` for the mean-free part of `f`.
pub fn gn_ratio(f: &ScalarField, spec: &KernelSpec) -> Result<f64> {
    let mut hat = forward_transform(f)?;
    hat.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    if meanfree_energy(&hat) == 0.0 {
        return Err(KsError::Undefined("the Gagliardo-Nirenberg ratio"));
    }
    let grid = f.grid();
    let t = grid.tables();
    let half = 0.25 * spec.negative_order();
    let lifted: Vec<Complex64> = hat
        .coeffs()
        .iter()
        .zip(&t.kmag2)
        .map(|(c, &k2)| if k2 == 0.0 { *c } else { c * k2.powf(half) })
        .collect();
    let numerator = inverse_transform(&SpectralField::from_raw(grid, lifted)).max_abs();
    let theta = gn_exponent(spec);
    let neg = spectral_sobolev_norm(&hat, spec.negative_order());
    let sup = inverse_transform(&hat).max_abs();
    Ok(numerator / (neg.powf(1.0 - theta) * sup.powf(theta)))
}

/// Constants of the local-in-time a priori estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `‖ΔK‖_{L¹}` (Young constant taken as 1).
    pub c0: f64,
    /// `‖ρ₀‖_∞`.
    pub c_inf: f64,
    /// `‖ρ₀‖₂` in the coefficient convention (mean included).
    pub b0: f64,
    pub mean0: f64,
    /// `min{1/(2 C₀ C_∞), T₀}` with the local existence time `T₀` taken as +∞.
    pub tau0: f64,
    /// `min{τ₀, 2 ln 2 / (C (C_∞ + ρ̄₀))}` with `C = 1`.
    pub tau1: f64,
    pub theta: f64,
}

impl Certificate {
    pub fn from_constants(c0: f64, c_inf: f64, b0: f64, mean0: f64, spec: &KernelSpec) -> Self {
        let tau0 = 1.0 / (2.0 * c0 * c_inf);
        let tau1 = tau0.min(2.0 * std::f64::consts::LN_2 / (c_inf + mean0));
        Certificate {
            c0,
            c_inf,
            b0,
            mean0,
            tau0,
            tau1,
            theta: gn_exponent(spec),
        }
    }
}

pub fn certificate(rho0: &ScalarField, spec: &KernelSpec, grid: TorusGrid) -> Result<Certificate> {
    grid.check_same(&rho0.grid())?;
    if rho0.min() < 0.0 {
        return Err(KsError::param(
            "rho0",
            format!("initial density must be nonnegative (min = {:.3e})", rho0.min()),
        ));
    }
    let c0 = kernel_l1_norms(spec, grid)?.lap_k;
    let hat = forward_transform(rho0)?;
    Ok(Certificate::from_constants(
        c0,
        lp_norm(rho0, Lp::Inf),
        hat.energy().sqrt(),
        hat.coeffs()[0].re,
        spec,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    /// Least-squares slope of `ln ‖Dρ‖_∞` against `t`.
    pub rate: f64,
    pub intercept: f64,
    /// `rate / A`, when `A > 0`.
    pub rate_per_amplitude: Option<f64>,
    /// Largest `ln ‖Dρ(t)‖_∞ - ln ‖Dρ₀‖_∞ - max(rate, 0)·t`; non-positive when
    /// growth stays below the fitted exponential through the initial value.
    pub max_excess: f64,
}

/// Fits exponential growth of `‖Dρ‖_∞` over the records.
pub fn grad_sup_track(records: &[DiagnosticsRecord], amplitude: f64) -> Result<GrowthReport> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.grad_sup > 0.0)
        .map(|r| (r.t, r.grad_sup.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(KsError::param("records", "need two records with nonzero gradients"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - rate * mt;
    let (t0, y0) = pts[0];
    let max_excess = pts
        .iter()
        .map(|(t, y)| y - y0 - rate.max(0.0) * (t - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthReport {
        rate,
        intercept,
        rate_per_amplitude: (amplitude > 0.0).then(|| rate / amplitude),
        max_excess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeReport {
    pub intervals: usize,
    pub violations: usize,
    /// Largest `Δρ̃/Δt - bound - tol`; non-positive when the check passes.
    pub max_excess: f64,
}

impl SlopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares forward differences of `ρ̃(t) = max_x ρ` against
/// `-ρ̃ + C₀ ρ̃² + tol`. The bound is convex in `ρ̃`, so its maximum over an
/// interval is taken at one of the endpoint values.
pub fn slope_bound_check(trace: &[(f64, f64)], c0: f64, tol: f64) -> SlopeReport {
    let bound = |m: f64| -m + c0 * m * m;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut intervals = 0;
    for w in trace.windows(2) {
        let dt = w[1].0 - w[0].0;
        if dt <= 0.0 {
            continue;
        }
        intervals += 1;
        let slope = (w[1].1 - w[0].1) / dt;
        let excess = slope - bound(w[0].1).max(bound(w[1].1)) - tol;
        if excess > 0.0 {
            violations += 1;
        }
        max_excess = max_excess.max(excess);
    }
    SlopeReport {
        intervals,
        violations,
        max_excess,
    }
}
