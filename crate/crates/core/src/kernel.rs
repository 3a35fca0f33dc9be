//! The attractive operator `B(ρ) = ∇K∗ρ` and `ΔK∗ρ`, defined on the torus
//! through their Fourier multipliers:
//!
//! * `B̂(k) = i k |k|^{-(d+2-β)} ρ̂(k)`
//! * `(ΔK∗ρ)^(k) = -|k|^{β-d} ρ̂(k)`
//!
//! both vanishing at `k = 0`.

use num_complex::Complex64;

use crate::error::{KsError, Result};
use crate::spectral::{
    forward_transform, inverse_pair, inverse_transform, lp_norm, Lp, ScalarField, SpectralField,
    TorusGrid,
};

/// Parameters of the attractive kernel, restricted to the weakly singular
/// range `2 <= β < d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    dim: usize,
    beta: f64,
}

impl KernelSpec {
    pub fn new(dim: usize, beta: f64) -> Result<Self> {
        if !(beta >= 2.0 && beta < dim as f64) {
            return Err(KsError::SingularityRegime { beta, dim });
        }
        Ok(KernelSpec { dim, beta })
    }

    /// Admits the strongly singular range `d <= β < d + 1` as well. Only the
    /// operators accept such a spec: configurations and the kernel norm
    /// quadrature still require `β < d`.
    pub fn with_strong_singularity(dim: usize, beta: f64) -> Result<Self> {
        if !(beta >= 2.0 && beta < dim as f64 + 1.0) {
            return Err(KsError::SingularityRegime { beta, dim });
        }
        Ok(KernelSpec { dim, beta })
    }

    pub fn is_weakly_singular(&self) -> bool {
        self.beta < self.dim as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Order of the smoothing inverse power inside `B`: `d + 2 - β`.
    pub fn smoothing_order(&self) -> f64 {
        self.dim as f64 + 2.0 - self.beta
    }

    /// Order `β - d` of the negative Sobolev weight used by the mixing functional.
    pub fn negative_order(&self) -> f64 {
        self.beta - self.dim as f64
    }

    fn check_grid(&self, grid: TorusGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(KsError::param(
                "dim",
                format!("kernel built for d={} applied on a {}-d grid", self.dim, grid.dim()),
            ));
        }
        Ok(())
    }

    /// `|k|^{-(d+2-β)}` per flat index, zero at k = 0.
    pub(crate) fn attract_weights(&self, grid: TorusGrid) -> Vec<f64> {
        let t = grid.tables();
        let half = -0.5 * self.smoothing_order();
        t.kmag2
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else { k2.powf(half) })
            .collect()
    }
}

/// Spectrum of each component of `B(ρ)`.
pub(crate) fn attract_spectra(rho_hat: &SpectralField, spec: &KernelSpec) -> Vec<Vec<Complex64>> {
    let grid = rho_hat.grid();
    let t = grid.tables();
    let w = spec.attract_weights(grid);
    (0..grid.dim())
        .map(|j| {
            rho_hat
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if t.nyquist[i] {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c * Complex64::new(0.0, t.kvec[i][j] as f64 * w[i])
                    }
                })
                .collect()
        })
        .collect()
}

/// `B(ρ) = ∇K∗ρ`, one real field per direction.
pub fn attract_field(rho: &ScalarField, spec: &KernelSpec) -> Result<Vec<ScalarField>> {
    spec.check_grid(rho.grid())?;
    let hat = forward_transform(rho)?;
    let grid = rho.grid();
    let spectra = attract_spectra(&hat, spec);
    let mut out = Vec::with_capacity(grid.dim());
    for pair in spectra.chunks(2) {
        if let [a, b] = pair {
            let (x, y) = inverse_pair(a, b, grid);
            out.push(ScalarField::from_raw(grid, x));
            out.push(ScalarField::from_raw(grid, y));
        } else {
            out.push(inverse_transform(&SpectralField::from_raw(grid, pair[0].clone())));
        }
    }
    Ok(out)
}

/// `ΔK∗ρ`, equal to the divergence of [`attract_field`].
pub fn laplacian_kernel_conv(rho: &ScalarField, spec: &KernelSpec) -> Result<ScalarField> {
    spec.check_grid(rho.grid())?;
    let hat = forward_transform(rho)?;
    let grid = rho.grid();
    let t = grid.tables();
    let half = 0.5 * spec.negative_order();
    let coeffs = hat
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k2 = t.kmag2[i];
            if k2 == 0.0 || t.nyquist[i] {
                Complex64::new(0.0, 0.0)
            } else {
                -c * k2.powf(half)
            }
        })
        .collect();
    Ok(inverse_transform(&SpectralField::from_raw(grid, coeffs)))
}

/// Quadrature values of `‖∇K‖_{L¹}` and `‖ΔK‖_{L¹}` together with the same
/// quantities one refinement level coarser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub grad_k: f64,
    pub lap_k: f64,
    /// Points per direction used for `grad_k`/`lap_k`.
    pub resolution: usize,
    pub grad_k_coarse: f64,
    pub lap_k_coarse: f64,
    pub coarse_resolution: usize,
}

impl KernelNorms {
    /// Relative change of `‖ΔK‖_{L¹}` between the two resolutions.
    pub fn lap_sensitivity(&self) -> f64 {
        (self.lap_k - self.lap_k_coarse).abs() / self.lap_k.abs()
    }

    pub fn grad_sensitivity(&self) -> f64 {
        (self.grad_k - self.grad_k_coarse).abs() / self.grad_k.abs()
    }
}

/// Reconstructs `∇K` and `ΔK` from their multipliers on a grid twice as
/// fine as `grid` and integrates their magnitudes; the value on `grid`
/// itself is reported for comparison.
pub fn kernel_l1_norms(spec: &KernelSpec, grid: TorusGrid) -> Result<KernelNorms> {
    spec.check_grid(grid)?;
    if !spec.is_weakly_singular() {
        return Err(KsError::SingularityRegime {
            beta: spec.beta,
            dim: spec.dim,
        });
    }
    let fine = TorusGrid::new(grid.dim(), 2 * grid.n())?;
    let (grad_k, lap_k) = kernel_norms_at(spec, fine);
    let (grad_k_coarse, lap_k_coarse) = kernel_norms_at(spec, grid);
    Ok(KernelNorms {
        grad_k,
        lap_k,
        resolution: fine.n(),
        grad_k_coarse,
        lap_k_coarse,
        coarse_resolution: grid.n(),
    })
}

fn kernel_norms_at(spec: &KernelSpec, grid: TorusGrid) -> (f64, f64) {
    // A unit impulse in every mode: the multiplied spectrum is the kernel's.
    let mut delta = SpectralField::zeros(grid);
    for c in delta.coeffs_mut() {
        *c = Complex64::new(1.0, 0.0);
    }
    let w = grid.cell_volume();

    let grad = attract_spectra(&delta, spec);
    let mut magnitude2 = vec![0.0; grid.len()];
    for pair in grad.chunks(2) {
        let b = pair.get(1).cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); grid.len()]);
        let (x, y) = inverse_pair(&pair[0], &b, grid);
        for (m, (a, b)) in magnitude2.iter_mut().zip(x.iter().zip(&y)) {
            *m += a * a + b * b;
        }
    }
    let grad_l1 = magnitude2.iter().map(|m| m.sqrt()).sum::<f64>() * w;

    let t = grid.tables();
    let half = 0.5 * spec.negative_order();
    let lap_coeffs = t
        .kmag2
        .iter()
        .enumerate()
        .map(|(i, &k2)| {
            if k2 == 0.0 || t.nyquist[i] {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-k2.powf(half), 0.0)
            }
        })
        .collect();
    let lap = inverse_transform(&SpectralField::from_raw(grid, lap_coeffs));
    // The impulse is a sum of unit coefficients, so the kernel samples need
    // the (2π)^{-d} factor to become a density against dx.
    let density = 1.0 / grid.volume();
    (grad_l1 * density, lp_norm(&lap, Lp::L1) * density)
}
