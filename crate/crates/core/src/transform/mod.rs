//! The transform `R_a` and its relatives, evaluated three ways: as Fourier
//! multipliers on the periodic grid, as a direct principal-value lattice sum
//! of the ℝⁿ kernel, and through the exact angular reduction for radial data.

mod direct;
mod radial;

use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm, spectral_l2, ScalarField, VectorField};
use crate::params::Params;
use crate::profile::csv_error;
use crate::special::riesz_constant;

pub use direct::{ra_direct_pv, ra_direct_pv_with, DirectOptions};
pub use radial::{radial_velocity, RadialOperator, RadialQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    RaKernel,
    RieszKernel,
    ConjugatePoisson,
}

/// A vector convolution kernel together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub params: Params,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, params: Params) -> Result<Self> {
        params.validate()?;
        Ok(KernelSpec { kind, params })
    }

    /// Scalar radial factor φ with K(z) = c_n·z·φ(|z|).
    pub fn radial_factor(&self, rho: f64) -> f64 {
        let e = -(self.params.n as f64 + 1.0) / 2.0;
        let a2 = self.params.a * self.params.a;
        match self.kind {
            KernelKind::RaKernel => rho.powf(2.0 * e) - (rho * rho + a2).powf(e),
            KernelKind::RieszKernel => rho.powf(2.0 * e),
            KernelKind::ConjugatePoisson => (rho * rho + a2).powf(e),
        }
    }

    /// Kernel vector K(z), written into `out`.
    pub fn kernel(&self, z: &[f64], out: &mut [f64]) {
        let c = riesz_constant(self.params.n) * self.radial_factor(norm(z));
        for (o, zi) in out.iter_mut().zip(z) {
            *o = c * zi;
        }
    }

    /// Scalar part of the symbol: the multiplier is −i k_j/|k| times this.
    pub fn symbol_magnitude(&self, k: f64) -> f64 {
        let a = self.params.a;
        match self.kind {
            KernelKind::RaKernel => -(-a * k).exp_m1(),
            KernelKind::RieszKernel => 1.0,
            KernelKind::ConjugatePoisson => (-a * k).exp(),
        }
    }

    /// Applies the kernel as a Fourier multiplier; the mean goes to zero.
    pub fn apply(&self, f: &ScalarField) -> VectorField {
        let components = (0..f.grid().dim())
            .map(|j| {
                f.odd_multiplier(j, |k| {
                    let m = norm(k);
                    if m == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -k[j] / m * self.symbol_magnitude(m))
                    }
                })
            })
            .collect();
        VectorField::new(components).expect("components share the grid")
    }
}

/// R_a f with symbol −i k_j/|k|·(1 − e^{−a|k|}).
pub fn ra_spectral(f: &ScalarField, params: &Params) -> VectorField {
    KernelSpec {
        kind: KernelKind::RaKernel,
        params: *params,
    }
    .apply(f)
}

/// Conjugate Poisson transform, symbol −i k_j/|k|·e^{−a|k|}.
pub fn conjugate_poisson(f: &ScalarField, params: &Params) -> VectorField {
    KernelSpec {
        kind: KernelKind::ConjugatePoisson,
        params: *params,
    }
    .apply(f)
}

/// Riesz transform, symbol −i k_j/|k|, zero mode sent to zero by convention.
pub fn riesz(f: &ScalarField) -> VectorField {
    let components = (0..f.grid().dim())
        .map(|j| {
            f.odd_multiplier(j, |k| {
                let m = norm(k);
                if m == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -k[j] / m)
                }
            })
        })
        .collect();
    VectorField::new(components).expect("components share the grid")
}

/// Distances of R_a from its two limits as a function of a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub a_values: Vec<f64>,
    /// ‖(R_a − R)f‖ = ‖e^{−a|k|} f̂‖ over nonzero modes.
    pub riesz_gap: Vec<f64>,
    /// ‖R_a f‖ = ‖(1 − e^{−a|k|}) f̂‖ over nonzero modes.
    pub zero_gap: Vec<f64>,
}

/// Evaluates both gaps for each `a` by Parseval. `a = 0` is accepted as the
/// degenerate end point. The mean of `f` is invisible to every operator here,
/// so both gaps are measured against the mean-free part of `f`.
pub fn limit_report(f: &ScalarField, a_values: &[f64]) -> Result<LimitReport> {
    if a_values.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(
            "a values must be finite and >= 0".into(),
        ));
    }
    if a_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "a values must be sorted ascending".into(),
        ));
    }
    let coefs = f.spectral();
    let grid = f.grid();
    let mut riesz_gap = Vec::with_capacity(a_values.len());
    let mut zero_gap = Vec::with_capacity(a_values.len());
    for &a in a_values {
        riesz_gap.push(spectral_l2(grid, coefs, |k| {
            if k == 0.0 {
                0.0
            } else {
                (-a * k).exp()
            }
        }));
        zero_gap.push(spectral_l2(grid, coefs, |k| {
            if k == 0.0 {
                0.0
            } else {
                -(-a * k).exp_m1()
            }
        }));
    }
    Ok(LimitReport {
        a_values: a_values.to_vec(),
        riesz_gap,
        zero_gap,
    })
}

impl LimitReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["a", "riesz_gap", "zero_gap"])
            .map_err(|e| csv_error(path, e))?;
        for i in 0..self.a_values.len() {
            w.write_record([
                format!("{:.17e}", self.a_values[i]),
                format!("{:.17e}", self.riesz_gap[i]),
                format!("{:.17e}", self.zero_gap[i]),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
