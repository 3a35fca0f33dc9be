//! Multi-dimensional complex FFT on a cubic grid, built from 1-D rustfft plans
//! applied axis by axis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct NdFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

impl NdFft {
    pub(crate) fn new(dim: usize, n: usize) -> Self {
        let mut p = planner().lock().expect("fft planner poisoned");
        NdFft {
            dim,
            n,
            forward: p.plan_fft_forward(n),
            inverse: p.plan_fft_inverse(n),
        }
    }

    /// Unnormalized transform in place: forward uses e^{-ikx}, inverse e^{+ikx}.
    ///
    /// Each pass transforms the contiguous last axis of every line and then
    /// rotates the axes by one, so after `dim` passes the layout is restored.
    pub(crate) fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(self.dim as u32));
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut other = vec![Complex64::new(0.0, 0.0); data.len()];
        let rows = data.len() / n;
        let mut in_data = true;
        for _ in 0..self.dim {
            if in_data {
                plan.process_with_scratch(data, &mut scratch);
                transpose(data, &mut other, rows, n);
            } else {
                plan.process_with_scratch(&mut other, &mut scratch);
                transpose(&other, data, rows, n);
            }
            in_data = !in_data;
        }
        if !in_data {
            data.copy_from_slice(&other);
        }
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, tiled.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                let line = &src[r * cols..];
                for c in c0..c1 {
                    dst[c * rows + r] = line[c];
                }
            }
        }
    }
}

/// Shared per-(d, n) transform plans.
pub(crate) fn plan(dim: usize, n: usize) -> Arc<NdFft> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<NdFft>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft cache poisoned");
    guard
        .entry((dim, n))
        .or_insert_with(|| Arc::new(NdFft::new(dim, n)))
        .clone()
}
