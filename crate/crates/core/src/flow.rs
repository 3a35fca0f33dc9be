//! Incompressible velocity fields `u(t, x)` normalized to `max|u| = 1`; the
//! amplitude `A` is carried separately by [`FlowSpec`].

use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KsError, Result};
use crate::snapshot::read_snapshot;
use crate::spectral::{forward_pair, inverse_transform, ScalarField, SpectralField, TorusGrid};

/// Flow families.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowKind {
    Zero,
    /// `u = (sin(m x₂), 0, …)`.
    Shear { wavenumber: u32 },
    /// Constant field along `(1, γ, γ²)`; translation only, never mixes.
    RelaxedLinear { gamma: f64 },
    /// Cycles every `half_period` through shears `e_j · sin(x_{j+1} + φ_p)`
    /// with phases `φ_p` drawn from a seeded stream.
    AlternatingShear { half_period: f64, seed: u64 },
    /// One snapshot file per velocity component.
    FromFile { paths: Vec<PathBuf> },
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Zero => "zero",
            FlowKind::Shear { .. } => "shear",
            FlowKind::RelaxedLinear { .. } => "relaxed-linear",
            FlowKind::AlternatingShear { .. } => "alternating-shear",
            FlowKind::FromFile { .. } => "from-file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// Advection amplitude `A >= 0`.
    pub amplitude: f64,
}

impl FlowSpec {
    pub fn new(kind: FlowKind, amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(KsError::param("A", format!("must be finite and >= 0, got {amplitude}")));
        }
        Ok(FlowSpec { kind, amplitude })
    }
}

/// Velocity components sampled on the grid.
pub type VelocityField = Vec<ScalarField>;

enum Source {
    Stationary(VelocityField),
    Alternating { half_period: f64, seed: u64 },
}

/// Immutable sampler of a normalized velocity field.
pub struct Flow {
    grid: TorusGrid,
    kind: FlowKind,
    source: Source,
}

impl std::fmt::Debug for Flow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Flow")
            .field("grid", &self.grid)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Tolerance on `max|∇·u| / max|u|` for accepted flows.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

pub fn make_flow(spec: &FlowSpec, grid: TorusGrid) -> Result<Flow> {
    let d = grid.dim();
    let source = match &spec.kind {
        FlowKind::Zero => Source::Stationary(vec![ScalarField::zeros(grid); d]),
        FlowKind::Shear { wavenumber } => {
            if *wavenumber == 0 || *wavenumber as usize >= grid.n() / 2 {
                return Err(KsError::param(
                    "flow.m",
                    format!("shear wavenumber must be in [1, n/2), got {wavenumber}"),
                ));
            }
            let m = *wavenumber as f64;
            let mut u = vec![ScalarField::zeros(grid); d];
            u[0] = normalized(ScalarField::from_fn(grid, |x| (m * x[1]).sin()));
            Source::Stationary(u)
        }
        FlowKind::RelaxedLinear { gamma } => {
            if !gamma.is_finite() {
                return Err(KsError::param("flow.gamma", "must be finite"));
            }
            let dir: Vec<f64> = (0..d).map(|j| gamma.powi(j as i32)).collect();
            let scale = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Source::Stationary(
                dir.iter()
                    .map(|v| ScalarField::constant(grid, v / scale))
                    .collect(),
            )
        }
        FlowKind::AlternatingShear { half_period, seed } => {
            if !(*half_period > 0.0) || !half_period.is_finite() {
                return Err(KsError::param(
                    "flow.tau_sw",
                    format!("half period must be positive, got {half_period}"),
                ));
            }
            Source::Alternating {
                half_period: *half_period,
                seed: *seed,
            }
        }
        FlowKind::FromFile { paths } => {
            if paths.len() != d {
                return Err(KsError::param(
                    "flow.files",
                    format!("need {d} component files, got {}", paths.len()),
                ));
            }
            let mut u = Vec::with_capacity(d);
            for p in paths {
                let f = read_snapshot(p)?;
                grid.check_same(&f.grid())?;
                u.push(f);
            }
            let peak = u.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
            if peak > 0.0 {
                u = u.iter().map(|c| c.scaled(1.0 / peak)).collect();
            }
            let div = divergence_check(&u)?;
            if div > DIVERGENCE_TOLERANCE {
                return Err(KsError::param(
                    "flow.files",
                    format!("velocity is not divergence-free: max|div u| = {div:.3e} after normalization"),
                ));
            }
            Source::Stationary(u)
        }
    };
    Ok(Flow {
        grid,
        kind: spec.kind.clone(),
        source,
    })
}

fn normalized(f: ScalarField) -> ScalarField {
    let m = f.max_abs();
    if m > 0.0 {
        f.scaled(1.0 / m)
    } else {
        f
    }
}

impl Flow {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.source, Source::Stationary(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FlowKind::Zero)
    }

    /// Index of the piecewise-constant interval containing `t`; always 0 for
    /// stationary flows.
    pub fn interval(&self, t: f64) -> u64 {
        match self.source {
            Source::Stationary(_) => 0,
            Source::Alternating { half_period, .. } => (t / half_period).floor().max(0.0) as u64,
        }
    }

    /// Start time of the next interval after `t`, if the flow switches.
    pub fn next_switch(&self, t: f64) -> Option<f64> {
        match self.source {
            Source::Stationary(_) => None,
            Source::Alternating { half_period, .. } => {
                Some((self.interval(t) + 1) as f64 * half_period)
            }
        }
    }

    /// Phase offset of interval `p` of an alternating shear.
    fn phase(seed: u64, p: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p);
        rng.gen_range(0.0..std::f64::consts::TAU)
    }

    /// Velocity on interval `p` (see [`Flow::interval`]).
    pub fn velocity_on_interval(&self, p: u64) -> VelocityField {
        match &self.source {
            Source::Stationary(u) => u.clone(),
            Source::Alternating { seed, .. } => {
                let d = self.grid.dim();
                let j = (p % d as u64) as usize;
                let across = (j + 1) % d;
                let phi = Flow::phase(*seed, p);
                let mut u = vec![ScalarField::zeros(self.grid); d];
                u[j] = normalized(ScalarField::from_fn(self.grid, |x| (x[across] + phi).sin()));
                u
            }
        }
    }

    pub fn velocity(&self, t: f64) -> VelocityField {
        self.velocity_on_interval(self.interval(t))
    }
}

/// Maximum pointwise `|∇·u|`, derivatives taken spectrally.
pub fn divergence_check(u: &[ScalarField]) -> Result<f64> {
    let Some(first) = u.first() else {
        return Ok(0.0);
    };
    let grid = first.grid();
    if u.len() != grid.dim() {
        return Err(KsError::param(
            "u",
            format!("expected {} components, got {}", grid.dim(), u.len()),
        ));
    }
    for c in u {
        grid.check_same(&c.grid())?;
        if !c.is_finite() {
            return Err(KsError::NonFinite { what: "velocity", index: 0 });
        }
    }
    let t = grid.tables();
    let mut div = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (pair_idx, pair) in u.chunks(2).enumerate() {
        let zero = ScalarField::zeros(grid);
        let second = pair.get(1).unwrap_or(&zero);
        let (a, b) = forward_pair(pair[0].values(), second.values(), grid);
        let ja = 2 * pair_idx;
        for i in 0..grid.len() {
            if t.nyquist[i] {
                continue;
            }
            let k = t.kvec[i];
            div[i] += a[i] * Complex64::new(0.0, k[ja] as f64);
            if pair.len() == 2 {
                div[i] += b[i] * Complex64::new(0.0, k[ja + 1] as f64);
            }
        }
    }
    Ok(inverse_transform(&SpectralField::from_raw(grid, div)).max_abs())
}
