//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use ksmix_core::{make_flow, FlowKind, FlowSpec, KernelSpec, ModelParams, ScalarField, Stepper, TorusGrid};

/// Smooth positive bump on a 3-d grid of size `n`.
pub fn bump(n: usize, amplitude: f64) -> ScalarField {
    let g = TorusGrid::new(3, n).expect("valid grid");
    ScalarField::from_fn(g, |x| {
        amplitude * x.iter().map(|v| (v - std::f64::consts::PI).cos() - 1.0).map(|s| s / 0.25).sum::<f64>().exp()
    })
}

/// Full aggregation-advection stepper under an alternating shear.
pub fn stepper(n: usize, amplitude: f64) -> Stepper {
    let rho0 = bump(n, 1.0);
    let spec = KernelSpec::new(3, 2.5).expect("valid kernel");
    let flow = FlowSpec::new(FlowKind::AlternatingShear { half_period: 0.5, seed: 1 }, amplitude).expect("flow");
    let flow = Arc::new(make_flow(&flow, rho0.grid()).expect("flow"));
    let params = ModelParams::new(0.0, spec, amplitude).expect("params");
    Stepper::new(params, flow, &rho0, 0.4, 0.01).expect("stepper")
}
