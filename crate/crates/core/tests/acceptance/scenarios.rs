//! Criteria 1 to 9: closed-form checks, oracle comparisons and the
//! desk-scale reference runs.

use std::sync::Arc;
use std::time::{Duration, Instant};

use ksmix_core::config::parse_config;
use ksmix_core::diagnostics::{mean_decay_residual, rage_average, semigroup_bound_check, slope_bound_check};
use ksmix_core::experiment::{run_experiment, sweep_amplitude, ExperimentSummary};
use ksmix_core::{
    attract_field, frac_laplacian, kernel_l1_norms, make_flow, nonlinear_term, project_low_modes, random_band,
    run_setup, Classification, FlowKind, FlowSpec, KernelSpec, ScalarField, SimConfig, Stepper, TorusGrid,
};

use crate::oracle::{cos_mode, max_abs, max_abs_diff, oracle_drift, oracle_nonlinear, random_values, sin_mode};
use crate::{within_budget, Verdict};

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

pub fn spectral_exactness() -> Verdict {
    let start = Instant::now();
    let modes: [[i64; 3]; 6] = [[1, 0, 0], [0, 2, 1], [3, -4, 5], [7, 7, -2], [0, 0, 15], [-11, 5, 9]];
    let (mut frac, mut proj, mut drift) = (0.0f64, 0.0f64, 0.0f64);
    for d in [2usize, 3] {
        let g = TorusGrid::new(d, 32).unwrap();
        for k in modes.iter().map(|k| &k[..d]) {
            let c = cos_mode(g, k);
            let s = sin_mode(g, k);
            let k2: f64 = k.iter().map(|v| (v * v) as f64).sum();
            if k2 == 0.0 {
                continue;
            }
            for alpha in [0.0, 0.5, 1.0, 1.5, 2.0] {
                let lam = k2.powf(0.5 * alpha);
                let out = frac_laplacian(&c, alpha).unwrap();
                let expected: Vec<f64> = c.values().iter().map(|v| lam * v).collect();
                frac = frac.max(max_abs_diff(out.values(), &expected) / lam.max(1.0));
            }
            for radius in [1usize, 2, 4, 8, 15] {
                let out = project_low_modes(&c, radius).unwrap();
                let keep = k2 <= (radius * radius) as f64;
                let expected: Vec<f64> = c.values().iter().map(|v| if keep { *v } else { 0.0 }).collect();
                proj = proj.max(max_abs_diff(out.values(), &expected));
            }
            for beta in [2.0, 2.5, 2.9] {
                let spec = if d == 3 {
                    KernelSpec::new(d, beta).unwrap()
                } else {
                    KernelSpec::with_strong_singularity(d, beta).unwrap()
                };
                let w = k2.powf(-0.5 * (d as f64 + 2.0 - beta));
                let b = attract_field(&c, &spec).unwrap();
                for (j, bj) in b.iter().enumerate() {
                    let expected: Vec<f64> = s.values().iter().map(|v| -(k[j] as f64) * w * v).collect();
                    drift = drift.max(max_abs_diff(bj.values(), &expected));
                }
            }
        }
    }
    let tol = 1e-12;
    let v = Verdict::new(
        frac <= tol && proj <= tol && drift <= tol,
        format!("max errors: frac_laplacian {frac:.2e}, project_low_modes {proj:.2e}, attract_field {drift:.2e} (tol {tol:.0e}; d=2,3; n=32)"),
    );
    within_budget(v, start.elapsed(), Duration::from_secs(5))
}

pub fn mean_decay() -> Verdict {
    let start = Instant::now();
    let doc = "dim = 3\nn = 32\nalpha = 0\nbeta = 2.5\nflow = alternating-shear\nflow.seed = 1\nA = 16\nT = 5\noutput.every = 1\n";
    let cfg = parse_config(doc).unwrap();
    let out = run_setup(&cfg.setup().unwrap(), |_, _| Ok(())).unwrap();
    let residual = mean_decay_residual(&out.records, 0.0).unwrap();
    let v = Verdict::new(
        residual <= 1e-8 && out.report.t_final == 5.0,
        format!(
            "max |mean - e^-t mean0| = {residual:.2e} over {} steps to t={} (tol 1e-8; {})",
            out.report.steps, out.report.t_final, out.report.classification
        ),
    );
    within_budget(v, start.elapsed(), minutes(2))
}

/// Relative deviation from `e^{-t}` decay of the mean-free norm at the
/// horizon, and the largest tail fraction seen.
fn decay_deviation(cfg: &SimConfig) -> (f64, f64) {
    let out = run_setup(&cfg.setup().unwrap(), |_, _| Ok(())).unwrap();
    let first = out.records.first().unwrap();
    let last = out.records.last().unwrap();
    assert_eq!(last.t, cfg.horizon);
    let dev = (last.l2_meanfree / ((-last.t).exp() * first.l2_meanfree) - 1.0).abs();
    (dev, out.report.max_tail_fraction)
}

pub fn linear_damped_transport() -> Verdict {
    let start = Instant::now();
    let doc = "dim = 3\nn = 32\nbeta = 2.5\nflow = alternating-shear\nflow.seed = 2\nA = 2\nT = 1\n\
               disable_nonlinear = true\nic = random-band\nic.seed = 3\nic.k_max = 2\nic.offset = 1\n";
    let cfg = parse_config(doc).unwrap();
    let (default_dev, tail) = decay_deviation(&cfg);
    let fixed = |h: f64| {
        let mut c = cfg.clone();
        c.c_cfl = 1e3;
        c.dt_max = h;
        decay_deviation(&c).0
    };
    let coarse = fixed(0.02);
    let fine = fixed(0.01);
    let order = (coarse / fine).log2();
    let v = Verdict::new(
        default_dev <= 1e-6 && order >= 2.0,
        format!(
            "A=2: relative deviation at t=1: {default_dev:.2e} (tol 1e-6, max tail {tail:.1e}); dt=0.02 -> {coarse:.2e}, dt=0.01 -> {fine:.2e}, observed order {order:.2} (need >= 2)"
        ),
    );
    within_budget(v, start.elapsed(), minutes(1))
}

pub fn kernel_oracle() -> Verdict {
    let start = Instant::now();
    let g = TorusGrid::new(3, 8).unwrap();
    let (mut drift_err, mut nl_err) = (0.0f64, 0.0f64);
    for seed in [11u64, 12] {
        let rho = random_values(g, seed, 0.0, 1.0);
        for beta in [2.0, 2.5, 2.9] {
            let spec = KernelSpec::new(3, beta).unwrap();
            let b = attract_field(&rho, &spec).unwrap();
            for (bj, oj) in b.iter().zip(oracle_drift(&rho, &spec)) {
                let o: Vec<f64> = oj.iter().map(|c| c.re).collect();
                drift_err = drift_err.max(max_abs_diff(bj.values(), &o) / max_abs(&o).max(1.0));
            }
            let nl = nonlinear_term(&rho, &spec).unwrap();
            let o = oracle_nonlinear(&rho, &spec);
            nl_err = nl_err.max(max_abs_diff(nl.values(), &o) / max_abs(&o).max(1.0));
        }
    }
    let v = Verdict::new(
        drift_err <= 1e-9 && nl_err <= 1e-9,
        format!("8^3 grid: attract_field vs convolution {drift_err:.2e}, nonlinear_term vs convolution-then-difference {nl_err:.2e} (tol 1e-9)"),
    );
    within_budget(v, start.elapsed(), Duration::from_secs(10))
}

/// Shared reference scenario: d=3, n=48, β=2.5, α=0, Gaussian bump above
/// `20/C₀`, alternating shear.
pub const REFERENCE: &str = "\
dim = 3
n = 48
alpha = 0
beta = 2.5
A = 0
T = 10
[flow]
kind = alternating-shear
tau_sw = 0.5
seed = 7
[ic]
kind = gaussian-bump
amplitude = 8
width = 0.5
[output]
every = 10
[diag]
N = 4
";

pub const SWEEP_VALUES: [f64; 5] = [0.0, 2.0, 8.0, 32.0, 128.0];

struct Trajectory {
    amplitude: f64,
    summary: ExperimentSummary,
}

#[derive(Default)]
pub struct Reference {
    blowup_run: Option<Trajectory>,
    sweep_runs: Option<Vec<Trajectory>>,
    sweep_error: Option<String>,
    c0: Option<f64>,
}

fn reference_config(dir: &std::path::Path) -> SimConfig {
    let mut cfg = parse_config(REFERENCE).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg
}

impl Reference {
    fn c0(&mut self) -> f64 {
        *self.c0.get_or_insert_with(|| {
            let cfg = parse_config(REFERENCE).unwrap();
            kernel_l1_norms(&cfg.kernel().unwrap(), cfg.grid().unwrap()).unwrap().lap_k
        })
    }

    pub fn blowup(&mut self) -> Verdict {
        let start = Instant::now();
        let c0 = self.c0();
        let tmp = tempfile::tempdir().unwrap();
        let summary = run_experiment(&reference_config(tmp.path())).unwrap();
        let r = &summary.report;
        let large = r.initial_linf >= 20.0 / c0;
        let pass = large && r.classification == Classification::BlowupSuspected && r.peak_linf >= 10.0 * r.initial_linf;
        let v = Verdict::new(
            pass,
            format!(
                "C0={c0:.4}, |rho0|_inf={:.3} (>= 20/C0={:.3}: {large}); {} at t={:.4}, peak {:.2} = {:.1}x initial (need >= 10x)",
                r.initial_linf,
                20.0 / c0,
                r.classification,
                r.t_final,
                r.peak_linf,
                r.peak_linf / r.initial_linf
            ),
        );
        self.blowup_run = Some(Trajectory { amplitude: 0.0, summary });
        within_budget(v, start.elapsed(), minutes(10))
    }

    pub fn sweep(&mut self) -> Verdict {
        let start = Instant::now();
        let tmp = tempfile::tempdir().unwrap();
        let rows = match sweep_amplitude(&reference_config(tmp.path()), &SWEEP_VALUES) {
            Ok(rows) => rows,
            Err(e) => {
                self.sweep_error = Some(e.to_string());
                return Verdict::new(false, format!("sweep failed: {e}"));
            }
        };
        let mut lines = Vec::new();
        let mut resolved_bounded = false;
        let mut phis = Vec::new();
        let mut runs = Vec::new();
        for row in rows {
            match row.outcome {
                Ok(s) => {
                    let r = &s.report;
                    let bounded = r.peak_linf <= 2.0 * r.initial_linf;
                    if r.classification == Classification::ResolvedHorizon && bounded {
                        resolved_bounded = true;
                    }
                    phis.push(s.mean_phi);
                    lines.push(format!(
                        "A={}: {} t={:.3} peak/init={:.2} max_tail={:.1e} mean_phi={}",
                        row.amplitude,
                        r.classification,
                        r.t_final,
                        r.peak_linf / r.initial_linf,
                        r.max_tail_fraction,
                        s.mean_phi.map_or("nan".into(), |p| format!("{p:.4}"))
                    ));
                    runs.push(Trajectory { amplitude: row.amplitude, summary: s });
                }
                Err(e) => {
                    phis.push(None);
                    lines.push(format!("A={}: failed ({e})", row.amplitude));
                }
            }
        }
        let monotone = phis.iter().all(Option::is_some)
            && phis.windows(2).all(|w| w[1].unwrap() <= 1.05 * w[0].unwrap());
        self.sweep_runs = Some(runs);
        let v = Verdict::new(
            resolved_bounded && monotone,
            format!(
                "resolved-horizon with sup|rho| <= 2|rho0|: {resolved_bounded}; mean_phi non-increasing within 5%: {monotone}; [{}]",
                lines.join("; ")
            ),
        );
        within_budget(v, start.elapsed(), minutes(45))
    }

    /// Checks the forward differences of `max_x ρ` on the resolved part of
    /// every reference trajectory. The tolerance is ten times the change of
    /// those differences under a half-step rerun.
    pub fn slope_bound(&mut self) -> Verdict {
        let c0 = self.c0();
        let mut trajectories: Vec<&Trajectory> = self.blowup_run.iter().collect();
        if let Some(runs) = &self.sweep_runs {
            trajectories.extend(runs.iter());
        }
        if trajectories.is_empty() {
            return Verdict::new(false, "no reference trajectories available");
        }
        let mut pass = true;
        let mut checked = 0;
        let mut notes = Vec::new();
        for traj in trajectories {
            let r = &traj.summary.report;
            let end = match (r.classification, r.resolved_until) {
                (_, Some(t)) => t,
                (Classification::ResolvedHorizon, None) => r.t_final,
                (c, None) => {
                    notes.push(format!("A={}: {c} without a resolved segment", traj.amplitude));
                    continue;
                }
            };
            let seg: Vec<(f64, f64)> = traj.summary.max_trace.iter().copied().filter(|p| p.0 <= end).collect();
            if seg.len() < 2 {
                notes.push(format!("A={}: resolved segment too short", traj.amplitude));
                continue;
            }
            let tmp = tempfile::tempdir().unwrap();
            let cfg = reference_config(tmp.path()).with_amplitude(traj.amplitude);
            let setup = cfg.setup().unwrap();
            let mut fine = Stepper::new(setup.params, setup.flow.clone(), &setup.rho0, 0.5 * cfg.c_cfl, 0.5 * cfg.dt_max).unwrap();
            let mut fine_seg = Vec::with_capacity(seg.len());
            for &(t, _) in &seg {
                fine.advance_to(t).unwrap();
                fine_seg.push((t, fine.field().max()));
            }
            let slopes = |s: &[(f64, f64)]| -> Vec<f64> { s.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect() };
            let spread = slopes(&seg)
                .iter()
                .zip(slopes(&fine_seg))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let tol = 10.0 * spread;
            let report = slope_bound_check(&seg, c0, tol);
            checked += 1;
            pass &= report.passed();
            notes.push(format!(
                "A={}: t<={end:.3}, {} intervals, tol={tol:.2e}, max excess {:.3e}, violations {}",
                traj.amplitude, report.intervals, report.max_excess, report.violations
            ));
        }
        if let Some(e) = &self.sweep_error {
            notes.push(format!("sweep unavailable: {e}"));
        }
        Verdict::new(pass && checked > 0, format!("C0={c0:.4}; {}", notes.join("; ")))
    }
}

pub fn rage_contrast() -> Verdict {
    let start = Instant::now();
    let g = TorusGrid::new(3, 32).unwrap();
    let shear = Arc::new(make_flow(&FlowSpec::new(FlowKind::Shear { wavenumber: 1 }, 8.0).unwrap(), g).unwrap());
    let eigen = ScalarField::from_fn(g, |x| 2f64.sqrt() * x[1].cos());
    let flat = rage_average(shear, 8.0, &eigen, 2, 20.0, 0.4, 0.01).unwrap();
    let flat_dev = (flat.average - flat.initial_low_energy).abs();

    let mixing = FlowKind::AlternatingShear { half_period: 0.5, seed: 1 };
    let mixing = Arc::new(make_flow(&FlowSpec::new(mixing, 8.0).unwrap(), g).unwrap());
    let phi0 = random_band(g, 4, 2);
    let mixed = rage_average(mixing, 8.0, &phi0, 2, 20.0, 0.4, 0.01).unwrap();
    let ratio = mixed.average / mixed.initial_low_energy;
    let v = Verdict::new(
        flat_dev <= 1e-6 && ratio <= 0.2,
        format!(
            "shear eigenfunction: |avg - initial| = {flat_dev:.2e} (tol 1e-6); alternating shear A=8 N=2 T=20: avg/initial = {ratio:.4} (need <= 0.2)"
        ),
    );
    within_budget(v, start.elapsed(), minutes(5))
}

pub fn semigroup_bound() -> Verdict {
    let start = Instant::now();
    let g = TorusGrid::new(3, 32).unwrap();
    let f = random_band(g, 5, 6);
    let t_grid: Vec<f64> = (0..=10).map(|i| 0.05 * i as f64).collect();
    let flows = [
        FlowKind::Shear { wavenumber: 1 },
        FlowKind::AlternatingShear { half_period: 0.5, seed: 1 },
        FlowKind::RelaxedLinear { gamma: (5f64.sqrt() - 1.0) / 2.0 },
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for kind in &flows {
        for a in [1.0, 8.0] {
            let flow = Arc::new(make_flow(&FlowSpec::new(kind.clone(), a).unwrap(), g).unwrap());
            for modes in 1..=4 {
                let r = semigroup_bound_check(flow.clone(), a, &f, modes, &t_grid, 0.4, 0.01).unwrap();
                if r.max_ratio > worst.0 {
                    worst = (r.max_ratio, format!("{} A={a} N={modes}", kind.name()));
                }
            }
        }
    }
    let v = Verdict::new(
        worst.0 <= 2.0,
        format!("max ratio {:.4} at {} over t in [0, 0.5] (C=2)", worst.0, worst.1),
    );
    within_budget(v, start.elapsed(), minutes(5))
}
