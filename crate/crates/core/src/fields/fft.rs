//! Multidimensional complex FFT on row-major periodic grids.
//!
//! Plans are cached per length and shared between threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Forward transform, normalized so that the zero mode is the mean.
pub(crate) fn forward(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, false);
    let scale = 1.0 / grid.len() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
}

/// Unnormalized inverse transform: sample values from Fourier coefficients.
pub(crate) fn inverse(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, true);
}

fn transform(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let dim = grid.dim();
    debug_assert_eq!(data.len(), grid.len());
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];

    // Last axis is contiguous.
    for line in data.chunks_exact_mut(n) {
        plan.process_with_scratch(line, &mut scratch);
    }

    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            let block = o * n * stride;
            for i in 0..stride {
                let base = block + i;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
