//! Direct principal-value evaluation of `R_a f(x) = P.V.∫ K_a(x−y) f(y) dy`.
//!
//! The lattice sum uses the ℝⁿ kernel (no periodic images), so it is an
//! independent check on the spectral multiplier. Near the target the
//! integrand is regularised by subtracting the local third-order Taylor
//! polynomial T of f, multiplied by a smooth cutoff χ:
//!
//! ```text
//! R_a f(x) ≈ Σ_y K(x−y)[f(y) − χ(|y−x|)T(y)] hⁿ + ∫ K(x−y) χ T dy.
//! ```
//!
//! The constant and quadratic parts of T integrate to zero against the odd
//! kernel; the linear and cubic parts are added back in closed form (the
//! cubic one only through ∇Δf). The remaining summand behaves like |z|^{4−n}
//! at the target, so the lattice sum converges at fourth order in the
//! spacing. The jet of f at an off-lattice target comes from a local tensor
//! Lagrange stencil on the samples, never from the FFT.

use rayon::prelude::*;

use super::{KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::params::Params;
use crate::quadrature::GaussLegendre;
use crate::special::{riesz_constant, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    /// Cutoff radius of χ in grid spacings.
    pub cutoff_cells: f64,
    /// Points per axis of the Lagrange stencil.
    pub stencil: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            cutoff_cells: 12.0,
            stencil: 8,
        }
    }
}

/// C^∞ step: 1 at t ≤ 0, 0 at t ≥ 1.
fn smooth_cutoff(t: f64) -> f64 {
    let psi = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let a = psi(1.0 - t);
    let b = psi(t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Fornberg's finite-difference weights for derivatives 0..=3 at `z`.
fn fornberg(z: f64, x: &[f64]) -> Vec<[f64; 4]> {
    let m = 3usize;
    let n = x.len();
    let mut c = vec![[0.0; 4]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Taylor data of f at the target up to third order.
struct LocalJet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
    third: Vec<Vec<Vec<f64>>>,
}

impl LocalJet {
    /// T(x + z) − f(x), the part of the cubic Taylor polynomial that varies.
    fn increment(&self, z: &[f64]) -> f64 {
        let n = z.len();
        let mut acc = 0.0;
        for a in 0..n {
            let mut quad = 0.0;
            for b in 0..n {
                let cub: f64 = (0..n).map(|c| self.third[a][b][c] * z[c]).sum();
                quad += (0.5 * self.hess[a][b] + cub / 6.0) * z[b];
            }
            acc += (self.grad[a] + quad) * z[a];
        }
        acc
    }

    /// ∂_d Δf.
    fn grad_laplacian(&self, d: usize) -> f64 {
        (0..self.grad.len()).map(|b| self.third[d][b][b]).sum()
    }
}

fn local_jet(f: &ScalarField, x: &[f64], stencil: usize) -> LocalJet {
    let grid = f.grid();
    let n = grid.dim();
    let np = grid.points_per_dim() as i64;
    let h = grid.spacing();
    let half = stencil as i64 / 2;

    let mut axis_idx = Vec::with_capacity(n);
    let mut axis_w = Vec::with_capacity(n);
    for &xd in x {
        let u = (xd + grid.half_width()) / h;
        let base = u.floor() as i64 - (half - 1);
        let nodes: Vec<f64> = (0..stencil as i64).map(|k| (base + k) as f64).collect();
        let mut w = fornberg(u, &nodes);
        for wk in &mut w {
            for (order, c) in wk.iter_mut().enumerate() {
                *c /= h.powi(order as i32);
            }
        }
        axis_idx.push(
            (0..stencil as i64)
                .map(|k| (base + k).rem_euclid(np) as usize)
                .collect::<Vec<_>>(),
        );
        axis_w.push(w);
    }

    // derivative with per-axis orders `alpha`
    let total = stencil.pow(n as u32);
    let derivative = |alpha: &[usize]| -> f64 {
        let mut multi = vec![0usize; n];
        let mut idx = vec![0usize; n];
        let mut acc = 0.0;
        for s in 0..total {
            let mut rem = s;
            let mut w = 1.0;
            for d in (0..n).rev() {
                multi[d] = rem % stencil;
                rem /= stencil;
                idx[d] = axis_idx[d][multi[d]];
                w *= axis_w[d][multi[d]][alpha[d]];
            }
            acc += w * f.values()[grid.ravel(&idx)];
        }
        acc
    };
    let orders = |axes: &[usize]| {
        let mut alpha = vec![0usize; n];
        for &a in axes {
            alpha[a] += 1;
        }
        derivative(&alpha)
    };

    let mut jet = LocalJet {
        value: orders(&[]),
        grad: (0..n).map(|a| orders(&[a])).collect(),
        hess: vec![vec![0.0; n]; n],
        third: vec![vec![vec![0.0; n]; n]; n],
    };
    for a in 0..n {
        for b in a..n {
            let v = orders(&[a, b]);
            jet.hess[a][b] = v;
            jet.hess[b][a] = v;
            for c in b..n {
                let v = orders(&[a, b, c]);
                for (i, j, k) in [
                    (a, b, c),
                    (a, c, b),
                    (b, a, c),
                    (b, c, a),
                    (c, a, b),
                    (c, b, a),
                ] {
                    jet.third[i][j][k] = v;
                }
            }
        }
    }
    jet
}

/// Evaluates `R_a f` at each target by the regularised lattice sum. `f` must
/// be supported well inside the box; the caller vouches for that.
pub fn ra_direct_pv(
    f: &ScalarField,
    params: &Params,
    targets: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    ra_direct_pv_with(f, params, targets, &DirectOptions::default())
}

pub fn ra_direct_pv_with(
    f: &ScalarField,
    params: &Params,
    targets: &[Vec<f64>],
    opts: &DirectOptions,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    f.ensure_finite()?;
    let grid = *f.grid();
    let n = grid.dim();
    if n != params.n {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} but params.n = {}",
            n, params.n
        )));
    }
    if let Some(t) = targets.iter().find(|t| t.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "target {t:?} does not have {n} coordinates"
        )));
    }
    let spec = KernelSpec {
        kind: KernelKind::RaKernel,
        params: *params,
    };
    let h = grid.spacing();
    let cutoff = opts.cutoff_cells * h;
    let cn = riesz_constant(n);

    // ∫₀^cutoff ρ^{n+1+2j} φ(ρ) χ(ρ) dρ for j = 0, 1
    let gl = GaussLegendre::cached(64);
    let radial_moment = |j: i32| -> f64 {
        (0..4)
            .map(|p| {
                let a = cutoff * p as f64 / 4.0;
                let b = cutoff * (p + 1) as f64 / 4.0;
                gl.integrate(a, b, |rho| {
                    rho.powi(n as i32 + 1 + 2 * j)
                        * spec.radial_factor(rho)
                        * smooth_cutoff(rho / cutoff)
                })
            })
            .sum()
    };
    let nf = n as f64;
    let linear_addback = -cn * sphere_area(n) / nf * radial_moment(0);
    let cubic_addback = -cn * sphere_area(n) / (2.0 * nf * (nf + 2.0)) * radial_moment(1);
    let cell = grid.cell_volume();

    let out = targets
        .par_iter()
        .map(|x| {
            let jet = local_jet(f, x, opts.stencil);
            let mut acc = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut z = vec![0.0; n];
            for (i, &fy) in f.values().iter().enumerate() {
                grid.position(i, &mut y);
                let mut r2 = 0.0;
                for d in 0..n {
                    z[d] = y[d] - x[d];
                    r2 += z[d] * z[d];
                }
                let rho = r2.sqrt();
                let chi = if rho < cutoff {
                    smooth_cutoff(rho / cutoff)
                } else {
                    0.0
                };
                let taylor = if chi > 0.0 {
                    jet.value + jet.increment(&z)
                } else {
                    0.0
                };
                let g = fy - chi * taylor;
                if g == 0.0 {
                    continue;
                }
                if rho == 0.0 {
                    log::debug!("target {x:?} sits on a node; its cell is excluded");
                    continue;
                }
                // K(x − y) = −K(z)
                let k = -cn * spec.radial_factor(rho) * g;
                for d in 0..n {
                    acc[d] += k * z[d];
                }
            }
            (0..n)
                .map(|d| {
                    acc[d] * cell
                        + linear_addback * jet.grad[d]
                        + cubic_addback * jet.grad_laplacian(d)
                })
                .collect()
        })
        .collect();
    Ok(out)
}
