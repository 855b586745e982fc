//! Separable n-dimensional complex FFT on top of `rustfft`.
//!
//! Plans are shared through a mutex-guarded planner; scratch buffers are
//! allocated per call so concurrent transforms never share mutable state.

use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut guard = planner.lock().expect("fft planner poisoned");
    if inverse {
        guard.plan_fft_inverse(len)
    } else {
        guard.plan_fft_forward(len)
    }
}

fn transform(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    assert_eq!(data.len(), grid.len());
    let n = grid.points_per_dim();
    let fft = plan(n, inverse);
    for d in 0..grid.dim() {
        let stride = grid.stride(d);
        if stride == 1 {
            data.par_chunks_mut(n * 64).for_each(|chunk| {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
        } else {
            data.par_chunks_mut(n * stride).for_each(|block| {
                let mut line = vec![Complex64::default(); n];
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                for inner in 0..stride {
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = block[inner + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        block[inner + k * stride] = *v;
                    }
                }
            });
        }
    }
    if inverse {
        let norm = 1.0 / grid.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= norm);
    }
}

/// Unnormalised forward transform of real samples.
pub fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut buf, false);
    buf
}

pub fn forward(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, false);
}

/// Normalised inverse transform (divides by the point count).
pub fn inverse(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, true);
}

/// Inverse transform keeping only the real part.
pub fn inverse_real(grid: &Grid, mut spectral: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut spectral, true);
    spectral.into_iter().map(|c| c.re).collect()
}
