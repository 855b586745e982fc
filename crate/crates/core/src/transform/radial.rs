//! Radial component of `R_a f` for radial `f`, from the angular reduction
//!
//! ```text
//! u_r(r) = R_a f(r e₁)·e₁ = −(r/π) ∫₀^∞ f′(ϱ) ϱⁿ D(ϱ, r) dϱ,
//! D(ϱ, r) = J(r²+ϱ², 2rϱ) − J(r²+ϱ²+a², 2rϱ),
//! ```
//!
//! with `J` the closed-form angular integral of [`AngularKernel`]. The
//! auxiliary integral over the screening parameter has been carried out
//! exactly, which is what turns the triple integral into this difference.
//! `D` is positive and has a logarithmic singularity at ϱ = r, so panels are
//! graded geometrically towards r.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::Params;
use crate::profile::RadialFunction;
use crate::quadrature::{graded_panels, GaussLegendre};
use crate::special::AngularKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialQuadrature {
    /// Gauss–Legendre order on panels well separated from r.
    pub order: usize,
    /// Order on panels whose width is comparable to their distance from r.
    pub near_order: usize,
    /// Successive panel doublings stop once they agree to this relative level.
    pub rel_tol: f64,
    /// Zero evaluates the base panels only, with no convergence check.
    pub max_doublings: usize,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        RadialQuadrature {
            order: 4,
            near_order: 8,
            rel_tol: 1e-8,
            max_doublings: 10,
        }
    }
}

const SINGULAR_POWER: i32 = 4;
const GRADING_FLOOR: f64 = 1e-3;

/// Evaluator of u_r for a fixed parameter set.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    params: Params,
    kernel: AngularKernel,
    quad: RadialQuadrature,
}

impl RadialOperator {
    pub fn new(params: Params) -> Self {
        Self::with_quadrature(params, RadialQuadrature::default())
    }

    pub fn with_quadrature(params: Params, quad: RadialQuadrature) -> Self {
        RadialOperator {
            params,
            kernel: AngularKernel::new(params.n),
            quad,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn quadrature(&self) -> &RadialQuadrature {
        &self.quad
    }

    /// D(ϱ, r) ≥ 0.
    pub fn kernel(&self, rho: f64, r: f64) -> f64 {
        let a2 = self.params.a * self.params.a;
        let p = r * r + rho * rho;
        let s = (r - rho) * (r - rho);
        self.kernel.eval(p, s) - self.kernel.eval(p + a2, s + a2)
    }

    /// Panels: breakpoint intervals graded towards r; each level halves every
    /// panel once more.
    fn panels(&self, edges: &[f64], r: f64) -> Vec<(f64, f64)> {
        let floor = GRADING_FLOOR * r;
        let mut panels = Vec::new();
        for w in edges.windows(2) {
            graded_panels(w[0], w[1], r, floor, &mut panels);
        }
        panels
    }

    fn panel_integral(
        &self,
        f: &dyn RadialFunction,
        (a, b): (f64, f64),
        r: f64,
        split: usize,
    ) -> f64 {
        let n = self.params.n as i32;
        let integrand = |rho: f64| {
            let df = f.derivative(rho);
            if df == 0.0 {
                0.0
            } else {
                df * rho.powi(n) * self.kernel(rho, r)
            }
        };
        if a == r || b == r {
            // ϱ = r ± w·t^q turns the endpoint logarithm into a smooth t^{q−1}·log t
            let rule = GaussLegendre::cached(self.quad.near_order);
            let (w, sign) = if a == r { (b - a, 1.0) } else { (b - a, -1.0) };
            let step = 1.0 / split as f64;
            return (0..split)
                .map(|k| {
                    rule.integrate(k as f64 * step, (k + 1) as f64 * step, |t| {
                        let tq = t.powi(SINGULAR_POWER - 1);
                        let rho = r + sign * w * tq * t;
                        integrand(rho) * SINGULAR_POWER as f64 * w * tq
                    })
                })
                .sum();
        }
        let dist = if r < a { a - r } else { r - b };
        let order = if b - a >= 0.5 * dist {
            self.quad.near_order
        } else {
            self.quad.order
        };
        let rule = GaussLegendre::cached(order);
        let step = (b - a) / split as f64;
        (0..split)
            .map(|k| {
                let pa = a + k as f64 * step;
                let pb = if k + 1 == split { b } else { pa + step };
                rule.integrate(pa, pb, integrand)
            })
            .sum()
    }

    /// u_r(r); zero at r = 0, where the velocity of radial data vanishes.
    /// Each panel is halved until two successive values agree to `rel_tol`
    /// of the summed absolute panel values.
    pub fn velocity(&self, f: &dyn RadialFunction, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let edges = f.breakpoints();
        if edges.len() < 2 {
            return 0.0;
        }
        let panels = self.panels(&edges, r);
        let coarse: Vec<f64> = panels
            .iter()
            .map(|&pn| self.panel_integral(f, pn, r, 1))
            .collect();
        let prefactor = -r / std::f64::consts::PI;
        if self.quad.max_doublings == 0 {
            return prefactor * coarse.iter().sum::<f64>();
        }
        let scale = coarse.iter().map(|v| v.abs()).sum::<f64>();
        let tol = self.quad.rel_tol * scale;
        let mut unconverged = false;
        let total: f64 = panels
            .iter()
            .zip(&coarse)
            .map(|(&pn, &first)| {
                let mut prev = first;
                for level in 1..=self.quad.max_doublings {
                    let next = self.panel_integral(f, pn, r, 1 << level);
                    if (next - prev).abs() <= tol {
                        return next;
                    }
                    prev = next;
                }
                unconverged = true;
                prev
            })
            .sum();
        if unconverged {
            log::warn!("radial velocity at r = {r} did not reach the requested tolerance");
        }
        prefactor * total
    }

    pub fn velocities(&self, f: &dyn RadialFunction, radii: &[f64]) -> Vec<f64> {
        radii.par_iter().map(|&r| self.velocity(f, r)).collect()
    }
}

/// u_r(r) = R_a f(r e₁)·e₁ with the default quadrature.
pub fn radial_velocity(f: &dyn RadialFunction, params: &Params, r: f64) -> f64 {
    RadialOperator::new(*params).velocity(f, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Bump;

    #[test]
    fn kernel_is_positive() {
        let op = RadialOperator::new(Params::new(2, 0.5, 1.0).unwrap());
        for &(rho, r) in &[(0.1, 1.0), (0.99, 1.0), (1.01, 1.0), (3.0, 0.2)] {
            assert!(op.kernel(rho, r) > 0.0);
        }
    }

    #[test]
    fn bump_velocity_points_inward() {
        let b = Bump::new(1.0, 1.0, 1.0).unwrap();
        let params = Params::new(2, 1.0, 1.0).unwrap();
        for &r in &[0.05, 0.3, 0.5, 0.9, 1.5, 4.0] {
            assert!(radial_velocity(&b, &params, r) < 0.0);
        }
        assert_eq!(radial_velocity(&b, &params, 0.0), 0.0);
    }
}
