use std::sync::Arc;

use num_complex::Complex64;

use super::{cfl_from_speeds, forward_many, inverse_many, ModelParams};
use crate::error::{KsError, Result};
use crate::flow::Flow;
use crate::spectral::{forward_transform, inverse_transform, ScalarField, SpectralField, TorusGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Integrator state. The spectrum always lies inside the 2/3-rule band.
#[derive(Debug, Clone)]
pub struct StepperState {
    pub t: f64,
    pub rho_hat: SpectralField,
    /// Size of the last step taken (0 before the first step).
    pub dt: f64,
    pub steps: u64,
}

/// Quantities of the state at the start of a step, measured for free while
/// evaluating the first stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: f64,
    pub dt: f64,
    /// `max_x ρ`.
    pub max_value: f64,
    /// `max_x |ρ|`.
    pub linf: f64,
    /// `max_x |B(ρ)|`.
    pub drift_max: f64,
}

enum Decay {
    Uniform(f64),
    PerMode(Vec<f64>),
}

struct Velocity {
    interval: u64,
    /// `A u_j` samples, `None` for identically zero components.
    scaled: Vec<Option<Vec<f64>>>,
    speed: f64,
}

struct Stage {
    rhs: Vec<Complex64>,
    max_value: f64,
    linf: f64,
    drift_max: f64,
}

/// Integrating-factor RK4: the linear symbol `σ(k)` is integrated exactly
/// through `e^{-σ(k)Δt}` and advection plus aggregation with the classical
/// four-stage rule on the transformed variable.
pub struct Stepper {
    grid: TorusGrid,
    params: ModelParams,
    flow: Arc<Flow>,
    decay: Decay,
    attract: Vec<f64>,
    c_cfl: f64,
    dt_max: f64,
    state: StepperState,
    velocity: Option<Velocity>,
}

impl Stepper {
    /// The initial density is projected onto the dealiased band.
    pub fn new(
        params: ModelParams,
        flow: Arc<Flow>,
        rho0: &ScalarField,
        c_cfl: f64,
        dt_max: f64,
    ) -> Result<Self> {
        let grid = rho0.grid();
        grid.check_same(&flow.grid())?;
        if params.kernel.is_some_and(|k| k.dim() != grid.dim()) {
            return Err(KsError::param("dim", "kernel and grid dimensions differ"));
        }
        if !(c_cfl > 0.0) {
            return Err(KsError::param("c_cfl", format!("must be positive, got {c_cfl}")));
        }
        if !(dt_max > 0.0) {
            return Err(KsError::param("dt_max", format!("must be positive, got {dt_max}")));
        }
        let mut rho_hat = forward_transform(rho0)?;
        rho_hat.dealias();
        let t = grid.tables();
        let sigma: Vec<f64> = t.kmag2.iter().map(|&k2| params.linear_symbol(k2)).collect();
        let decay = if sigma.iter().all(|&s| s == sigma[0]) {
            Decay::Uniform(sigma[0])
        } else {
            Decay::PerMode(sigma)
        };
        Ok(Stepper {
            grid,
            params,
            flow,
            decay,
            attract: params.kernel.map(|k| k.attract_weights(grid)).unwrap_or_default(),
            c_cfl,
            dt_max,
            state: StepperState {
                t: 0.0,
                rho_hat,
                dt: 0.0,
                steps: 0,
            },
            velocity: None,
        })
    }

    pub fn state(&self) -> &StepperState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn spectrum(&self) -> &SpectralField {
        &self.state.rho_hat
    }

    pub fn field(&self) -> ScalarField {
        inverse_transform(&self.state.rho_hat)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn ensure_velocity(&mut self, t: f64) {
        let interval = self.flow.interval(t);
        if self.velocity.as_ref().is_some_and(|v| v.interval == interval) {
            return;
        }
        let a = self.params.amplitude;
        let u = self.flow.velocity_on_interval(interval);
        let mut speed = 0.0f64;
        let scaled = u
            .iter()
            .map(|c| {
                let m = c.max_abs();
                speed = speed.max(m);
                if m == 0.0 || a == 0.0 {
                    None
                } else {
                    Some(c.values().iter().map(|v| a * v).collect())
                }
            })
            .collect();
        self.velocity = Some(Velocity {
            interval,
            scaled,
            speed: a * speed,
        });
    }

    /// Spectrum of `-(A u·∇ρ + ∇·(ρB(ρ)))`, written as the dealiased
    /// divergence of the flux `ρ (B + A u)`.
    fn evaluate(&self, rho_hat: &[Complex64]) -> Stage {
        let grid = self.grid;
        let d = grid.dim();
        let t = grid.tables();
        let velocity = self.velocity.as_ref().expect("velocity prepared");
        let advecting = velocity.scaled.iter().any(Option::is_some);

        let (rho, drift): (Vec<f64>, Vec<Vec<f64>>) = if self.params.nonlinear() {
            let spectra: Vec<Vec<Complex64>> = (0..d)
                .map(|j| {
                    rho_hat
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * Complex64::new(0.0, t.kvec[i][j] as f64 * self.attract[i]))
                        .collect()
                })
                .collect();
            let mut refs: Vec<&[Complex64]> = vec![rho_hat];
            refs.extend(spectra.iter().map(|s| s.as_slice()));
            let mut phys = inverse_many(&refs, grid).into_iter();
            let rho = phys.next().unwrap();
            (rho, phys.collect())
        } else {
            let rho = inverse_many(&[rho_hat], grid).pop().unwrap();
            (rho, Vec::new())
        };

        let mut max_value = f64::NEG_INFINITY;
        let mut linf = 0.0f64;
        for &v in &rho {
            max_value = max_value.max(v);
            linf = linf.max(v.abs());
        }
        let mut drift_max = 0.0f64;
        if !drift.is_empty() {
            for i in 0..grid.len() {
                let m2: f64 = drift.iter().map(|b| b[i] * b[i]).sum();
                drift_max = drift_max.max(m2);
            }
            drift_max = drift_max.sqrt();
        }

        let mut rhs = vec![ZERO; grid.len()];
        if !self.params.nonlinear() && !advecting {
            return Stage { rhs, max_value, linf, drift_max };
        }

        let mut flux_dirs = Vec::with_capacity(d);
        let mut fluxes: Vec<Vec<f64>> = Vec::with_capacity(d);
        for j in 0..d {
            let b = drift.get(j);
            let u = velocity.scaled[j].as_ref();
            let f: Vec<f64> = match (b, u) {
                (Some(b), Some(u)) => (0..grid.len()).map(|i| rho[i] * (b[i] + u[i])).collect(),
                (Some(b), None) => rho.iter().zip(b).map(|(r, b)| r * b).collect(),
                (None, Some(u)) => rho.iter().zip(u).map(|(r, u)| r * u).collect(),
                (None, None) => continue,
            };
            flux_dirs.push(j);
            fluxes.push(f);
        }
        let refs: Vec<&[f64]> = fluxes.iter().map(|f| f.as_slice()).collect();
        let flux_hat = forward_many(&refs, grid);
        for (j, fh) in flux_dirs.iter().zip(&flux_hat) {
            for i in 0..grid.len() {
                if t.dealias[i] {
                    rhs[i] -= fh[i] * Complex64::new(0.0, t.kvec[i][*j] as f64);
                }
            }
        }
        Stage { rhs, max_value, linf, drift_max }
    }

    fn decay_factor(&self, i: usize, h: f64) -> f64 {
        match &self.decay {
            Decay::Uniform(s) => (-s * h).exp(),
            Decay::PerMode(s) => (-s[i] * h).exp(),
        }
    }

    /// One step whose size is chosen by the CFL rule and clamped so that the
    /// step ends no later than `t_limit` and does not cross a flow switch.
    pub fn step(&mut self, t_limit: Option<f64>) -> Result<StepInfo> {
        self.step_inner(None, t_limit)
    }

    /// One step of exactly `dt` (still clamped to flow switches).
    pub fn step_fixed(&mut self, dt: f64) -> Result<StepInfo> {
        if !(dt > 0.0) {
            return Err(KsError::param("dt", format!("must be positive, got {dt}")));
        }
        self.step_inner(Some(dt), None)
    }

    /// Steps until `t_end` is reached exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.state.t < t_end {
            self.step(Some(t_end))?;
        }
        Ok(())
    }

    fn step_inner(&mut self, fixed: Option<f64>, t_limit: Option<f64>) -> Result<StepInfo> {
        let t0 = self.state.t;
        self.ensure_velocity(t0);
        let rho = self.state.rho_hat.coeffs().to_vec();
        let first = self.evaluate(&rho);

        let speed = self.velocity.as_ref().map_or(0.0, |v| v.speed);
        let mut h = fixed.unwrap_or_else(|| {
            cfl_from_speeds(speed, first.drift_max, self.grid, self.c_cfl, self.dt_max)
        });
        if let Some(limit) = t_limit {
            h = h.min(limit - t0);
        }
        if let Some(switch) = self.flow.next_switch(t0) {
            h = h.min(switch - t0);
        }
        if !(h > 0.0) {
            return Err(KsError::param("dt", format!("step size collapsed to {h} at t={t0}")));
        }

        let len = rho.len();
        let (e, e2): (Vec<f64>, Vec<f64>) = match &self.decay {
            Decay::Uniform(_) => {
                let e = self.decay_factor(0, h);
                let e2 = self.decay_factor(0, 0.5 * h);
                (vec![e; 1], vec![e2; 1])
            }
            Decay::PerMode(_) => (0..len)
                .map(|i| (self.decay_factor(i, h), self.decay_factor(i, 0.5 * h)))
                .unzip(),
        };
        let fac = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };

        let k1 = first.rhs;
        let a: Vec<Complex64> = (0..len).map(|i| (rho[i] + k1[i] * (0.5 * h)) * fac(&e2, i)).collect();
        let k2 = self.evaluate(&a).rhs;
        let b: Vec<Complex64> = (0..len).map(|i| rho[i] * fac(&e2, i) + k2[i] * (0.5 * h)).collect();
        let k3 = self.evaluate(&b).rhs;
        let c: Vec<Complex64> = (0..len)
            .map(|i| rho[i] * fac(&e, i) + k3[i] * (h * fac(&e2, i)))
            .collect();
        let k4 = self.evaluate(&c).rhs;
        let next: Vec<Complex64> = (0..len)
            .map(|i| {
                let ei = fac(&e, i);
                let e2i = fac(&e2, i);
                rho[i] * ei + (k1[i] * ei + (k2[i] + k3[i]) * (2.0 * e2i) + k4[i]) * (h / 6.0)
            })
            .collect();

        if let Some(index) = next.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(KsError::NonFinite {
                what: "density state",
                index,
            });
        }
        self.state.rho_hat = SpectralField::from_raw(self.grid, next);
        self.state.t = match t_limit {
            Some(limit) if t0 + h >= limit => limit,
            _ => t0 + h,
        };
        self.state.dt = h;
        self.state.steps += 1;
        Ok(StepInfo {
            t: t0,
            dt: h,
            max_value: first.max_value,
            linf: first.linf,
            drift_max: first.drift_max,
        })
    }
}
