//! Brute-force reference computations and seeded field generators.

use std::f64::consts::PI;

use ksmix_core::{KernelSpec, ScalarField, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform random values in `[lo, hi)`.
pub fn random_values(grid: TorusGrid, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::new(grid, v).unwrap()
}

/// Signed integer wavenumbers of every flat index, in the same layout as
/// the grid.
pub fn wavevectors(grid: TorusGrid) -> Vec<Vec<i64>> {
    (0..grid.len())
        .map(|idx| {
            let m = grid.multi_index(idx);
            (0..grid.dim())
                .map(|j| {
                    let i = m[j] as i64;
                    let n = grid.n() as i64;
                    if i < n / 2 {
                        i
                    } else {
                        i - n
                    }
                })
                .collect()
        })
        .collect()
}

fn phase(grid: TorusGrid, k: &[i64], x_idx: usize) -> f64 {
    let m = grid.multi_index(x_idx);
    let h = 2.0 * PI / grid.n() as f64;
    (0..grid.dim()).map(|j| k[j] as f64 * m[j] as f64 * h).sum()
}

/// `f̂(k) = n^{-d} Σ_x f(x) e^{-ik·x}` by direct summation.
pub fn direct_dft(f: &ScalarField) -> Vec<Complex64> {
    let grid = f.grid();
    let ks = wavevectors(grid);
    let norm = 1.0 / grid.len() as f64;
    ks.iter()
        .map(|k| {
            f.values()
                .iter()
                .enumerate()
                .map(|(x, &v)| Complex64::from_polar(v, -phase(grid, k, x)))
                .sum::<Complex64>()
                * norm
        })
        .collect()
}

/// `f(x) = Σ_k f̂(k) e^{ik·x}` by direct summation; returns the real part
/// and the largest imaginary part seen.
pub fn direct_idft(grid: TorusGrid, hat: &[Complex64]) -> (Vec<f64>, f64) {
    let ks = wavevectors(grid);
    let mut imag = 0.0f64;
    let re = (0..grid.len())
        .map(|x| {
            let s: Complex64 = ks
                .iter()
                .zip(hat)
                .map(|(k, c)| c * Complex64::from_polar(1.0, phase(grid, k, x)))
                .sum();
            imag = imag.max(s.im.abs());
            s.re
        })
        .collect();
    (re, imag)
}

pub fn is_nyquist(grid: TorusGrid, k: &[i64]) -> bool {
    k.iter().any(|&c| c == -(grid.n() as i64) / 2)
}

pub fn in_dealias_band(grid: TorusGrid, k: &[i64]) -> bool {
    k.iter().all(|&c| 3 * c.unsigned_abs() as usize <= grid.n())
}

/// Multiplier of the `j`-th component of `∇K∗`: `i k_j |k|^{-(d+2-β)}`,
/// zero at `k = 0` and on Nyquist modes.
pub fn drift_symbol(spec: &KernelSpec, grid: TorusGrid, k: &[i64], j: usize) -> Complex64 {
    let k2: f64 = k.iter().map(|&c| (c * c) as f64).sum();
    if k2 == 0.0 || is_nyquist(grid, k) {
        return Complex64::new(0.0, 0.0);
    }
    let order = grid.dim() as f64 + 2.0 - spec.beta();
    Complex64::new(0.0, k[j] as f64 * k2.powf(-0.5 * order))
}

/// Kernel sampled on the grid from a multiplier: `K(x) = Σ_k m(k) e^{ik·x}`.
pub fn kernel_from_symbol(grid: TorusGrid, symbol: impl Fn(&[i64]) -> Complex64) -> Vec<Complex64> {
    let ks = wavevectors(grid);
    (0..grid.len())
        .map(|x| {
            ks.iter()
                .map(|k| symbol(k) * Complex64::from_polar(1.0, phase(grid, k, x)))
                .sum()
        })
        .collect()
}

/// Periodic discrete convolution `(K ⋆ f)(x) = n^{-d} Σ_y K(x - y) f(y)`.
pub fn convolve(grid: TorusGrid, kernel: &[Complex64], f: &[f64]) -> Vec<Complex64> {
    let n = grid.n();
    let d = grid.dim();
    let norm = 1.0 / grid.len() as f64;
    (0..grid.len())
        .map(|x| {
            let mx = grid.multi_index(x);
            let mut acc = Complex64::new(0.0, 0.0);
            for (y, &fy) in f.iter().enumerate() {
                let my = grid.multi_index(y);
                let diff: Vec<usize> = (0..d).map(|j| (mx[j] + n - my[j]) % n).collect();
                acc += kernel[grid.flat_index(&diff)] * fy;
            }
            acc * norm
        })
        .collect()
}

/// `B_j = ∇_j K ⋆ ρ` via direct convolution with the reconstructed kernel.
pub fn oracle_drift(rho: &ScalarField, spec: &KernelSpec) -> Vec<Vec<Complex64>> {
    let grid = rho.grid();
    (0..grid.dim())
        .map(|j| {
            let kernel = kernel_from_symbol(grid, |k| drift_symbol(spec, grid, k, j));
            convolve(grid, &kernel, rho.values())
        })
        .collect()
}

/// 2/3-rule projection through the direct transforms.
pub fn oracle_dealias(f: &[f64], grid: TorusGrid) -> Vec<f64> {
    let field = ScalarField::new(grid, f.to_vec()).unwrap();
    let hat = direct_dft(&field);
    let ks = wavevectors(grid);
    let masked: Vec<Complex64> = hat
        .iter()
        .zip(&ks)
        .map(|(c, k)| {
            if in_dealias_band(grid, k) && !is_nyquist(grid, k) {
                *c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    direct_idft(grid, &masked).0
}

/// `Σ_j ∂_j(ρ_m B_j(ρ_m))` with `ρ_m` the dealiased density: convolution for
/// the drift, pointwise products, then convolution with the band-limited
/// derivative kernels.
pub fn oracle_nonlinear(rho: &ScalarField, spec: &KernelSpec) -> Vec<f64> {
    let grid = rho.grid();
    let rho_m = ScalarField::new(grid, oracle_dealias(rho.values(), grid)).unwrap();
    let drift = oracle_drift(&rho_m, spec);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, b) in drift.iter().enumerate() {
        let flux: Vec<f64> = rho_m.values().iter().zip(b).map(|(r, b)| r * b.re).collect();
        let deriv = kernel_from_symbol(grid, |k| {
            if in_dealias_band(grid, k) && !is_nyquist(grid, k) {
                Complex64::new(0.0, k[j] as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for (o, v) in out.iter_mut().zip(convolve(grid, &deriv, &flux)) {
            *o += v;
        }
    }
    out.into_iter().map(|c| c.re).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `cos(k·x)` on the grid.
pub fn cos_mode(grid: TorusGrid, k: &[i64]) -> ScalarField {
    ScalarField::from_fn(grid, |x| x.iter().zip(k).map(|(xi, ki)| xi * *ki as f64).sum::<f64>().cos())
}

pub fn sin_mode(grid: TorusGrid, k: &[i64]) -> ScalarField {
    ScalarField::from_fn(grid, |x| x.iter().zip(k).map(|(xi, ki)| xi * *ki as f64).sum::<f64>().sin())
}
