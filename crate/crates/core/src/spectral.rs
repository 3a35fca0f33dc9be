//! Uniform grids on the torus [0, 2π)^d, the discrete Fourier transform
//! contract, Fourier multipliers and the norms built on them.
//!
//! Coefficient convention: `f̂(k) = n^{-d} Σ_x f(x) e^{-ik·x}`, so that
//! `f(x) = Σ_k f̂(k) e^{ik·x}` and a constant field `c` has `f̂(0) = c`.
//! Coefficient sums (Sobolev norms) and physical quadrature (Lp norms) differ
//! by `(2π)^{d/2}` in the L² case.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{KsError, Result};
use crate::fft::{self, NdFft};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform grid with `n` points per direction on `[0, 2π)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(KsError::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(KsError::InvalidGrid(format!(
                "points per dimension must be even and >= 8, got {n}"
            )));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Quadrature weight of one grid point, `(2π/n)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Volume of the torus, `(2π)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Per-axis indices of a flat row-major index (axis 0 slowest).
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.n + i % self.n)
    }

    /// Physical coordinates of a flat index; unused trailing entries are 0.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = m[axis] as f64 * h;
        }
        x
    }

    /// Signed wavenumber of FFT index `i`, in `{-n/2, …, n/2-1}`.
    pub fn frequency(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Flat index holding wavevector `k` (components reduced mod n).
    pub fn index_of(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        k[..self.dim]
            .iter()
            .fold(0usize, |acc, &kj| acc * self.n + kj.rem_euclid(n) as usize)
    }

    pub(crate) fn tables(&self) -> Arc<GridTables> {
        static CACHE: OnceLock<Mutex<HashMap<TorusGrid, Arc<GridTables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("grid table cache poisoned");
        guard
            .entry(*self)
            .or_insert_with(|| Arc::new(GridTables::build(*self)))
            .clone()
    }

    pub(crate) fn fft(&self) -> Arc<NdFft> {
        fft::plan(self.dim, self.n)
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(KsError::GridMismatch {
                expected_dim: self.dim,
                expected_n: self.n,
                found_dim: other.dim,
                found_n: other.n,
            });
        }
        Ok(())
    }
}

impl fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.n, self.dim)
    }
}

/// Wavevector tables shared by every field on one grid.
pub(crate) struct GridTables {
    /// Integer wavevector per flat index, trailing components zero.
    pub kvec: Vec<[i64; 3]>,
    /// |k|² per flat index.
    pub kmag2: Vec<f64>,
    /// Flat index of -k.
    pub neg: Vec<usize>,
    /// True where some component sits on the Nyquist frequency -n/2.
    pub nyquist: Vec<bool>,
    /// 2/3-rule mask: true where every |k_j| <= n/3.
    pub dealias: Vec<bool>,
}

impl GridTables {
    fn build(grid: TorusGrid) -> Self {
        let len = grid.len();
        let n = grid.n as i64;
        let mut kvec = Vec::with_capacity(len);
        let mut kmag2 = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        let mut nyquist = Vec::with_capacity(len);
        let mut dealias = Vec::with_capacity(len);
        for idx in 0..len {
            let m = grid.multi_index(idx);
            let mut k = [0i64; 3];
            for axis in 0..grid.dim {
                k[axis] = grid.frequency(m[axis]);
            }
            let neg_k = [-k[0], -k[1], -k[2]];
            kvec.push(k);
            kmag2.push(k.iter().map(|&c| (c * c) as f64).sum());
            neg.push(grid.index_of(&neg_k));
            nyquist.push(k[..grid.dim].iter().any(|&c| c == -n / 2));
            dealias.push(k[..grid.dim].iter().all(|&c| 3 * c.abs() <= n));
        }
        GridTables {
            kvec,
            kmag2,
            neg,
            nyquist,
            dealias,
        }
    }
}

/// Real samples of a density on a [`TorusGrid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KsError::InvalidGrid(format!(
                "expected {} values for grid {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(KsError::NonFinite {
                what: "scalar field",
                index,
            });
        }
        Ok(ScalarField { grid, values })
    }

    /// Builds a field without the finiteness check; used on solver internals
    /// that are checked separately.
    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every grid point. `f` receives `d` coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|idx| f(&grid.point(idx)[..d]))
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat index of the maximum; ties go to the first index in row-major order.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Whether the field passes the mean-free tolerance
    /// `|mean| <= 1e-12 · max(1, max|values|)`.
    pub fn is_mean_free(&self) -> bool {
        self.mean().abs() <= 1e-12 * self.max_abs().max(1.0)
    }

    pub fn mean_free(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }
}

/// Fourier coefficients indexed in FFT order; see the module docs for the
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(KsError::InvalidGrid(format!(
                "expected {} coefficients for grid {grid}, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: TorusGrid, coeffs: Vec<Complex64>) -> Self {
        SpectralField { grid, coeffs }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of integer wavevector `k` (components taken mod n).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.coeffs[self.grid.index_of(k)]
    }

    pub fn set_coeff(&mut self, k: &[i64], value: Complex64) {
        let idx = self.grid.index_of(k);
        self.coeffs[idx] = value;
    }

    /// Integer wavevector stored at flat index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        self.grid.tables().kvec[idx]
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let t = self.grid.tables();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (c - self.coeffs[t.neg[i]].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_k |c(k)|²` including the mean mode.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub(crate) fn zero_nyquist(&mut self) {
        let t = self.grid.tables();
        for (c, &nyq) in self.coeffs.iter_mut().zip(&t.nyquist) {
            if nyq {
                *c = ZERO;
            }
        }
    }

    /// Zeroes every mode with some `|k_j| > n/3`.
    pub fn dealias(&mut self) {
        let t = self.grid.tables();
        for (c, &keep) in self.coeffs.iter_mut().zip(&t.dealias) {
            if !keep {
                *c = ZERO;
            }
        }
    }
}

type SymbolFn = dyn Fn(&[i64]) -> Complex64 + Send + Sync;

#[derive(Clone)]
enum Symbol {
    Function(Arc<SymbolFn>),
    Table {
        grid: TorusGrid,
        values: Arc<Vec<Complex64>>,
    },
}

/// A scalar Fourier multiplier `k ↦ m(k)` with an explicit value at `k = 0`.
#[derive(Clone)]
pub struct Multiplier {
    symbol: Symbol,
    zero_mode: Complex64,
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.symbol {
            Symbol::Function(_) => "function".to_string(),
            Symbol::Table { grid, .. } => format!("table on {grid}"),
        };
        f.debug_struct("Multiplier")
            .field("symbol", &kind)
            .field("zero_mode", &self.zero_mode)
            .finish()
    }
}

impl Multiplier {
    /// `symbol` is only evaluated at `k ≠ 0`; it receives the `d` components of k.
    pub fn from_fn(
        zero_mode: Complex64,
        symbol: impl Fn(&[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Multiplier {
            symbol: Symbol::Function(Arc::new(symbol)),
            zero_mode,
        }
    }

    pub fn identity() -> Self {
        Multiplier::from_fn(Complex64::new(1.0, 0.0), |_| Complex64::new(1.0, 0.0))
    }

    /// `|k|^s` for `k ≠ 0`, zero at `k = 0`.
    pub fn power(s: f64) -> Self {
        Multiplier::from_fn(ZERO, move |k| Complex64::new(norm2(k).powf(0.5 * s), 0.0))
    }

    /// Symbol of `(-Δ)^{α/2}`: `|k|^α`, with the zero mode equal to 1 when
    /// `α = 0` (the operator is then the identity) and 0 otherwise.
    pub fn frac_laplacian(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if alpha == 0.0 {
            return Ok(Multiplier::identity());
        }
        Ok(Multiplier::power(alpha))
    }

    /// Precomputes the symbol on `grid`. Tabulated multipliers refuse other grids.
    pub fn tabulate(&self, grid: TorusGrid) -> Multiplier {
        let t = grid.tables();
        let d = grid.dim;
        let values: Vec<Complex64> = t.kvec.iter().map(|k| self.eval(&k[..d])).collect();
        Multiplier {
            symbol: Symbol::Table {
                grid,
                values: Arc::new(values),
            },
            zero_mode: self.zero_mode,
        }
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.zero_mode
    }

    /// Symbol value at wavevector `k`.
    pub fn eval(&self, k: &[i64]) -> Complex64 {
        if k.iter().all(|&c| c == 0) {
            return self.zero_mode;
        }
        match &self.symbol {
            Symbol::Function(f) => f(k),
            Symbol::Table { grid, values } => values[grid.index_of(k)],
        }
    }
}

/// A vector of scalar multipliers, one per component (gradient-like operators).
#[derive(Clone, Debug)]
pub struct VectorMultiplier {
    components: Vec<Multiplier>,
}

impl VectorMultiplier {
    pub fn new(components: Vec<Multiplier>) -> Self {
        VectorMultiplier { components }
    }

    /// `m_j(k) = i k_j`.
    pub fn gradient(dim: usize) -> Self {
        VectorMultiplier {
            components: (0..dim)
                .map(|j| Multiplier::from_fn(ZERO, move |k| Complex64::new(0.0, k[j] as f64)))
                .collect(),
        }
    }

    pub fn components(&self) -> &[Multiplier] {
        &self.components
    }
}

fn norm2(k: &[i64]) -> f64 {
    k.iter().map(|&c| (c * c) as f64).sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(KsError::param("alpha", format!("must lie in [0, 2], got {alpha}")));
    }
    Ok(())
}

/// Forward DFT with the `n^{-d}` normalization. Rejects non-finite input.
pub fn forward_transform(f: &ScalarField) -> Result<SpectralField> {
    if let Some(index) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(KsError::NonFinite {
            what: "forward transform input",
            index,
        });
    }
    Ok(forward_unchecked(f))
}

pub(crate) fn forward_unchecked(f: &ScalarField) -> SpectralField {
    let grid = f.grid;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft().process(&mut data, false);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    SpectralField::from_raw(grid, data)
}

/// Inverse DFT returning the real part. Input is expected to be Hermitian.
pub fn inverse_transform(f: &SpectralField) -> ScalarField {
    let mut data = f.coeffs.clone();
    f.grid.fft().process(&mut data, true);
    ScalarField::from_raw(f.grid, data.into_iter().map(|c| c.re).collect())
}

/// Transforms two real fields with one complex FFT.
pub(crate) fn forward_pair(a: &[f64], b: &[f64], grid: TorusGrid) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    grid.fft().process(&mut z, false);
    let t = grid.tables();
    let scale = 0.5 / grid.len() as f64;
    let mut ah = vec![ZERO; z.len()];
    let mut bh = vec![ZERO; z.len()];
    for i in 0..z.len() {
        let zk = z[i];
        let zm = z[t.neg[i]].conj();
        ah[i] = (zk + zm) * scale;
        // (zk - zm) / (2i)
        let diff = (zk - zm) * scale;
        bh[i] = Complex64::new(diff.im, -diff.re);
    }
    (ah, bh)
}

/// Inverse of two Hermitian spectra with one complex FFT.
pub(crate) fn inverse_pair(a: &[Complex64], b: &[Complex64], grid: TorusGrid) -> (Vec<f64>, Vec<f64>) {
    let mut z: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x + Complex64::new(-y.im, y.re))
        .collect();
    grid.fft().process(&mut z, true);
    z.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Multiplies each coefficient by `m(k)` (`zero_mode` at k=0) and zeroes
/// the Nyquist modes.
pub fn apply_multiplier(f: &SpectralField, m: &Multiplier) -> Result<SpectralField> {
    let grid = f.grid;
    let coeffs = match &m.symbol {
        Symbol::Table { grid: g, values } => {
            g.check_same(&grid)?;
            f.coeffs.iter().zip(values.iter()).map(|(c, s)| c * s).collect()
        }
        Symbol::Function(_) => {
            let t = grid.tables();
            let d = grid.dim;
            f.coeffs
                .iter()
                .zip(&t.kvec)
                .map(|(c, k)| c * m.eval(&k[..d]))
                .collect()
        }
    };
    let mut out = SpectralField::from_raw(grid, coeffs);
    out.zero_nyquist();
    Ok(out)
}

pub fn apply_vector_multiplier(f: &SpectralField, m: &VectorMultiplier) -> Result<Vec<SpectralField>> {
    m.components.iter().map(|c| apply_multiplier(f, c)).collect()
}

/// `(-Δ)^{α/2} f` for `α ∈ [0, 2]`; `α = 0` returns `f` unchanged.
pub fn frac_laplacian(f: &ScalarField, alpha: f64) -> Result<ScalarField> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(f.clone());
    }
    let hat = forward_transform(f)?;
    Ok(inverse_transform(&apply_multiplier(&hat, &Multiplier::power(alpha))?))
}

/// Homogeneous Sobolev norm `(Σ_{k≠0} |k|^{2s} |f̂(k)|²)^{1/2}` in the
/// coefficient convention. The mean mode never contributes.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> f64 {
    spectral_sobolev_norm(&forward_unchecked(f), s)
}

pub fn spectral_sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let t = f.grid.tables();
    f.coeffs
        .iter()
        .zip(&t.kmag2)
        .skip(1)
        .map(|(c, &k2)| weight(k2, s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn weight(k2: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s == -1.0 {
        1.0 / k2
    } else {
        k2.powf(s)
    }
}

/// Keeps exactly the modes with Euclidean `|k| <= radius`.
pub fn project_low_modes(f: &ScalarField, radius: usize) -> Result<ScalarField> {
    let hat = forward_transform(f)?;
    Ok(inverse_transform(&project_spectral(&hat, radius)?))
}

pub fn project_spectral(f: &SpectralField, radius: usize) -> Result<SpectralField> {
    if radius == 0 {
        return Err(KsError::param("N", "projection radius must be >= 1"));
    }
    if radius >= f.grid.n / 2 {
        log::warn!(
            "projection radius {radius} >= n/2 = {}: projection acts as identity on resolved modes",
            f.grid.n / 2
        );
    }
    let t = f.grid.tables();
    let r2 = (radius * radius) as f64;
    let coeffs = f
        .coeffs
        .iter()
        .zip(&t.kmag2)
        .map(|(&c, &k2)| if k2 <= r2 { c } else { ZERO })
        .collect();
    Ok(SpectralField::from_raw(f.grid, coeffs))
}

/// Sum of `|f̂(k)|²` over `0 < |k| <= radius`.
pub(crate) fn low_mode_energy(f: &SpectralField, radius: usize) -> f64 {
    let t = f.grid.tables();
    let r2 = (radius * radius) as f64;
    f.coeffs
        .iter()
        .zip(&t.kmag2)
        .skip(1)
        .filter(|(_, &k2)| k2 <= r2)
        .map(|(c, _)| c.norm_sqr())
        .sum()
}

/// Exponent of an Lp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    L1,
    L2,
    Inf,
}

/// Uniform-quadrature Lp norm `(Σ_x |f(x)|^p (2π/n)^d)^{1/p}`; `Inf` is `max|f|`.
pub fn lp_norm(f: &ScalarField, p: Lp) -> f64 {
    let w = f.grid.cell_volume();
    match p {
        Lp::L1 => f.values.iter().map(|v| v.abs()).sum::<f64>() * w,
        Lp::L2 => (f.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt(),
        Lp::Inf => f.max_abs(),
    }
}
