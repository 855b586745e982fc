//! Numerical certificates for the lower bounds on the nonlinear term:
//! the pointwise bound on −R_a f·x/|x|, the weighted bilinear bound with the
//! explicit constant C_{n,δ}, and the elementary Young split used between
//! them.
//!
//! Every certified function is radial, C¹ and nondecreasing. Mirrored bounds
//! for nonincreasing data follow from f ↦ −f, which flips the sign of both
//! sides, so they are not implemented separately.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::profile::{Bump, RadialFunction, RadialProfile};
use crate::quadrature::GaussLegendre;
use crate::special::{beta_half, sphere_area};
use crate::transform::RadialOperator;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (-1, 1), got {delta}"
        )));
    }
    Ok(())
}

/// C_{n,δ} = (√(n+1+δ) − √n)²·B(1/2,(n+1)/2)/(2^{n+2}π).
pub fn constant_cnd(n: usize, delta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    check_delta(delta)?;
    let nf = n as f64;
    let d = (nf + 1.0 + delta).sqrt() - nf.sqrt();
    Ok(d * d * beta_half(n) / (2f64.powi(n as i32 + 2) * PI))
}

/// The Young-split chain constant with α = √(n/(n+1+δ)), in the unsimplified
/// form (2n+1+δ)/(n(n+1+δ)) − 2/√(n(n+1+δ)).
pub fn chain_constant(n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let m = nf + 1.0 + delta;
    (2.0 * nf + 1.0 + delta) / (nf * m) - 2.0 / (nf * m).sqrt()
}

/// Simplified form (√(n+1+δ) − √n)²/(n(n+1+δ)) of [`chain_constant`].
pub fn chain_constant_closed(n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let m = nf + 1.0 + delta;
    let d = m.sqrt() - nf.sqrt();
    d * d / (nf * m)
}

/// w_a(r) = 1 − 2^{n+1}r^{n+1}/(4r²+a²)^{(n+1)/2}, evaluated as 1 − t^{n+1}
/// with t = 2r/√(4r²+a²) and 1 − t factored out to avoid cancellation.
pub fn weight_w(r: f64, params: &Params) -> f64 {
    let a2 = params.a * params.a;
    let s = (4.0 * r * r + a2).sqrt();
    let t = 2.0 * r / s;
    let one_minus_t = a2 / ((s + 2.0 * r) * s);
    let mut geom = 0.0;
    let mut tp = 1.0;
    for _ in 0..=params.n {
        geom += tp;
        tp *= t;
    }
    one_minus_t * geom
}

/// Right-hand side of the pointwise bound,
/// n·B(1/2,(n+1)/2)/(2^{n+1}π)·r^{−n}·w_a(r)·∫₀^r (f(r) − f(ϱ)) ϱ^{n−1} dϱ.
pub fn pointwise_rhs(f: &dyn RadialFunction, params: &Params, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let n = params.n;
    let fr = f.value(r);
    let mut edges: Vec<f64> = f.breakpoints().into_iter().filter(|&b| b < r).collect();
    if edges.is_empty() {
        edges.push(0.0);
    }
    edges.push(r);
    let integral = adaptive_panels(&edges, 1e-13, 1 << 12, |rho| {
        (fr - f.value(rho)) * rho.powi(n as i32 - 1)
    });
    n as f64 * beta_half(n) / (2f64.powi(n as i32 + 1) * PI)
        * r.powi(-(n as i32))
        * weight_w(r, params)
        * integral
}

/// Gauss–Legendre (order 8) on the given panels. Each panel is halved
/// repeatedly until two successive sums agree to `rel_tol` of the coarse
/// total, or until it has been split `max_split` times.
fn adaptive_panels(
    edges: &[f64],
    rel_tol: f64,
    max_split: usize,
    f: impl Fn(f64) -> f64 + Sync,
) -> f64 {
    let gl = GaussLegendre::cached(8);
    let panel = |lo: f64, hi: f64, split: usize| -> f64 {
        let step = (hi - lo) / split as f64;
        (0..split)
            .map(|k| gl.integrate(lo + k as f64 * step, lo + (k + 1) as f64 * step, &f))
            .sum()
    };
    let coarse: Vec<f64> = edges.par_windows(2).map(|w| panel(w[0], w[1], 1)).collect();
    let scale = coarse
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    edges
        .par_windows(2)
        .zip(coarse.par_iter())
        .map(|(w, &first)| {
            let mut prev = first;
            let mut split = 2;
            while split <= max_split {
                let next = panel(w[0], w[1], split);
                if (next - prev).abs() <= rel_tol * scale {
                    return next;
                }
                prev = next;
                split *= 2;
            }
            prev
        })
        .sum()
}

/// Radial, C¹, nondecreasing test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionFamily {
    /// −depth·exp(s(1 − 1/(1 − (r/L)²))) on r < L.
    Bump {
        support: f64,
        depth: f64,
        sharpness: f64,
    },
    /// (depth/2)(tanh((r² − r0²)/(2·r0·width)) − 1).
    SmoothedStep { r0: f64, width: f64, depth: f64 },
    /// Linear ramp from −depth at r0 to 0 at r1 with softplus-rounded corners.
    /// The derivative at the origin is of order e^{−r0/smoothing}, so keep
    /// r0/smoothing ≳ 40 for a C¹ radial function.
    PiecewiseLinearSmoothed {
        r0: f64,
        r1: f64,
        depth: f64,
        smoothing: f64,
    },
    /// Monotone cubic through random nondecreasing knot values on [0, support],
    /// zero slope at both ends.
    RandomMonotoneSpline {
        support: f64,
        knots: usize,
        depth: f64,
        seed: u64,
    },
}

impl TestFunctionFamily {
    pub fn build(&self) -> Result<Box<dyn RadialFunction>> {
        Ok(match *self {
            TestFunctionFamily::Bump {
                support,
                depth,
                sharpness,
            } => Box::new(Bump::new(support, depth, sharpness)?),
            TestFunctionFamily::SmoothedStep { r0, width, depth } => {
                positive(&[r0, width, depth])?;
                Box::new(SmoothedStep { r0, width, depth })
            }
            TestFunctionFamily::PiecewiseLinearSmoothed {
                r0,
                r1,
                depth,
                smoothing,
            } => {
                positive(&[r0, depth, smoothing])?;
                if !(r1 > r0) {
                    return Err(Error::InvalidParameter("ramp needs r1 > r0".into()));
                }
                Box::new(SmoothedRamp {
                    r0,
                    r1,
                    depth,
                    eps: smoothing,
                })
            }
            TestFunctionFamily::RandomMonotoneSpline {
                support,
                knots,
                depth,
                seed,
            } => {
                positive(&[support, depth])?;
                Box::new(random_monotone_spline(support, knots, depth, seed)?)
            }
        })
    }

    /// The shipped families at their default shapes.
    pub fn shipped(seed: u64) -> Vec<TestFunctionFamily> {
        vec![
            TestFunctionFamily::Bump {
                support: 1.0,
                depth: 1.0,
                sharpness: 1.0,
            },
            TestFunctionFamily::SmoothedStep {
                r0: 0.5,
                width: 0.05,
                depth: 1.0,
            },
            TestFunctionFamily::PiecewiseLinearSmoothed {
                r0: 0.2,
                r1: 0.8,
                depth: 1.0,
                smoothing: 0.005,
            },
            TestFunctionFamily::RandomMonotoneSpline {
                support: 1.0,
                knots: 8,
                depth: 1.0,
                seed,
            },
        ]
    }
}

fn positive(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "family parameters must be positive, got {xs:?}"
        )))
    }
}

#[derive(Debug, Clone, Copy)]
struct SmoothedStep {
    r0: f64,
    width: f64,
    depth: f64,
}

impl SmoothedStep {
    fn arg(&self, r: f64) -> f64 {
        (r * r - self.r0 * self.r0) / (2.0 * self.r0 * self.width)
    }
}

impl RadialFunction for SmoothedStep {
    fn value(&self, r: f64) -> f64 {
        0.5 * self.depth * (self.arg(r).tanh() - 1.0)
    }

    fn derivative(&self, r: f64) -> f64 {
        let c = self.arg(r).cosh();
        0.5 * self.depth * r / (self.r0 * self.width * c * c)
    }

    fn breakpoints(&self) -> Vec<f64> {
        // sech² < 1e-34 beyond |arg| = 40
        let lo = self.r0 * self.r0 - 80.0 * self.r0 * self.width;
        let hi = (self.r0 * self.r0 + 80.0 * self.r0 * self.width).sqrt();
        let mut b = vec![0.0];
        if lo > 0.0 {
            b.push(lo.sqrt());
        }
        b.push(self.r0);
        b.push(hi);
        b
    }
}

#[derive(Debug, Clone, Copy)]
struct SmoothedRamp {
    r0: f64,
    r1: f64,
    depth: f64,
    eps: f64,
}

fn softplus(x: f64, eps: f64) -> f64 {
    let t = x / eps;
    eps * if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic(x: f64, eps: f64) -> f64 {
    let t = x / eps;
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl RadialFunction for SmoothedRamp {
    fn value(&self, r: f64) -> f64 {
        let slope = self.depth / (self.r1 - self.r0);
        -self.depth + slope * (softplus(r - self.r0, self.eps) - softplus(r - self.r1, self.eps))
    }

    fn derivative(&self, r: f64) -> f64 {
        let slope = self.depth / (self.r1 - self.r0);
        slope * (logistic(r - self.r0, self.eps) - logistic(r - self.r1, self.eps))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let pad = 40.0 * self.eps;
        let mut b = vec![0.0];
        for x in [
            self.r0 - pad,
            self.r0,
            self.r0 + pad,
            self.r1 - pad,
            self.r1,
            self.r1 + pad,
        ] {
            if x > *b.last().unwrap() {
                b.push(x);
            }
        }
        b
    }
}

fn random_monotone_spline(
    support: f64,
    knots: usize,
    depth: f64,
    seed: u64,
) -> Result<RadialProfile> {
    if knots < 2 {
        return Err(Error::InvalidParameter(
            "spline needs at least 2 knots".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<f64> = (0..knots - 1)
        .map(|_| support * rng.gen_range(0.02..0.98))
        .collect();
    nodes.push(0.0);
    nodes.push(support);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut increments: Vec<f64> = (1..nodes.len())
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    if increments.iter().all(|v| *v == 0.0) {
        increments[0] = 1.0;
    }
    let total: f64 = increments.iter().sum();
    let mut values = Vec::with_capacity(nodes.len());
    let mut v = -depth;
    values.push(v);
    for inc in &increments {
        v += depth * inc / total;
        values.push(v);
    }
    *values.last_mut().unwrap() = 0.0;
    RadialProfile::new(nodes, values)
}

/// Outcome of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub inequality: String,
    pub samples: usize,
    /// Smallest slack (normalised as documented per inequality).
    pub min_slack: f64,
    /// Smallest LHS/RHS over samples with a nonzero right-hand side.
    pub min_ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_case: String,
}

impl CertificateReport {
    fn empty(inequality: &str, tolerance: f64) -> Self {
        CertificateReport {
            inequality: inequality.to_string(),
            samples: 0,
            min_slack: f64::INFINITY,
            min_ratio: f64::INFINITY,
            tolerance,
            pass: true,
            worst_case: String::new(),
        }
    }

    fn record(&mut self, slack: f64, ratio: Option<f64>, case: impl FnOnce() -> String) {
        self.samples += 1;
        if let Some(q) = ratio {
            self.min_ratio = self.min_ratio.min(q);
        }
        if slack < self.min_slack {
            self.min_slack = slack;
            self.worst_case = case();
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.min_slack >= -self.tolerance;
        self
    }

    /// Combines reports for the same inequality.
    pub fn merge(reports: &[CertificateReport]) -> Option<CertificateReport> {
        let first = reports.first()?;
        let mut out = CertificateReport::empty(&first.inequality, first.tolerance);
        for r in reports {
            out.samples += r.samples;
            out.min_ratio = out.min_ratio.min(r.min_ratio);
            if r.min_slack < out.min_slack {
                out.min_slack = r.min_slack;
                out.worst_case = r.worst_case.clone();
            }
        }
        Some(out.finish())
    }
}

pub const POINTWISE_TOL: f64 = 1e-8;
pub const BILINEAR_TOL: f64 = 1e-6;

/// Checks −u_r(r) ≥ pointwise_rhs at every radius. Slack is normalised by
/// 1 + |LHS|.
pub fn verify_pointwise(
    f: &dyn RadialFunction,
    params: &Params,
    radii: &[f64],
) -> CertificateReport {
    let op = RadialOperator::new(*params);
    let rows: Vec<(f64, f64, f64)> = radii
        .par_iter()
        .map(|&r| (r, -op.velocity(f, r), pointwise_rhs(f, params, r)))
        .collect();
    let mut rep = CertificateReport::empty("pointwise_lower_bound", POINTWISE_TOL);
    for (r, lhs, rhs) in rows {
        let slack = (lhs - rhs) / (1.0 + lhs.abs());
        let ratio = (rhs != 0.0).then(|| lhs / rhs);
        rep.record(slack, ratio, || {
            format!(
                "n={} a={} r={r:.6e} lhs={lhs:.6e} rhs={rhs:.6e}",
                params.n, params.a
            )
        });
    }
    rep.finish()
}

/// Both sides of the bilinear bound for one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearSides {
    pub lhs: f64,
    pub rhs: f64,
    /// Part of the right-hand side beyond R_max = max(10a, 10L), included in `rhs`.
    pub rhs_tail: f64,
}

/// LHS = −ω_{n−1}∫ u_r f′ r^{−1−δ} dr and
/// RHS = C_{n,δ}·ω_{n−1}∫ (f − f(0))² w_a(r) r^{−2−δ} dr. The right-hand
/// integral runs to infinity; beyond the last breakpoint it is mapped by
/// t = 1/r onto a finite interval.
pub fn bilinear_sides(
    f: &dyn RadialFunction,
    params: &Params,
    delta: f64,
) -> Result<BilinearSides> {
    check_delta(delta)?;
    let n = params.n;
    let omega = sphere_area(n);
    let op = RadialOperator::new(*params);
    let edges = f.breakpoints();
    let end = *edges.last().unwrap();
    let f0 = f.origin_value();

    let lhs = if edges.len() < 2 || end <= 0.0 {
        0.0
    } else {
        let g = |r: f64| {
            let df = f.derivative(r);
            if df == 0.0 {
                0.0
            } else {
                op.velocity(f, r) * df * r.powf(-1.0 - delta)
            }
        };
        // u_r has logarithmic kinks at the breakpoints; r = a + (b − a)(3t² − 2t³)
        // flattens them.
        let total: f64 = edges
            .windows(2)
            .map(|w| {
                let width = w[1] - w[0];
                adaptive_panels(&[0.0, 0.5, 1.0], 1e-9, 64, |t| {
                    g(w[0] + width * t * t * (3.0 - 2.0 * t)) * width * 6.0 * t * (1.0 - t)
                })
            })
            .sum();
        -omega * total
    };

    let cnd = constant_cnd(n, delta)?;
    let integrand = |r: f64| {
        let d = f.value(r) - f0;
        d * d * weight_w(r, params) * r.powf(-2.0 - delta)
    };
    let r_max = (10.0 * params.a).max(10.0 * end);
    let inner = if end > 0.0 {
        adaptive_panels(&edges, 1e-12, 1 << 12, integrand)
    } else {
        0.0
    };
    // ∫_end^∞ g(r) dr = ∫_0^{1/end} g(1/t) t^{-2} dt
    let mapped = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            integrand(1.0 / t) / (t * t)
        }
    };
    let tail_from = |r0: f64| -> f64 {
        if r0 <= 0.0 {
            return 0.0;
        }
        let hi = 1.0 / r0;
        let pts: Vec<f64> = (0..=16).map(|j| hi * (j as f64 / 16.0).powi(3)).collect();
        adaptive_panels(&pts, 1e-12, 1 << 12, mapped)
    };
    let outer = tail_from(end.max(f64::MIN_POSITIVE));
    let beyond = tail_from(r_max);
    Ok(BilinearSides {
        lhs,
        rhs: cnd * omega * (inner + outer),
        rhs_tail: cnd * omega * beyond,
    })
}

/// Checks LHS ≥ RHS; slack is LHS/RHS − 1 (or LHS when RHS vanishes).
pub fn verify_bilinear(
    f: &dyn RadialFunction,
    params: &Params,
    delta: f64,
) -> Result<CertificateReport> {
    let sides = bilinear_sides(f, params, delta)?;
    let mut rep = CertificateReport::empty("bilinear_lower_bound", BILINEAR_TOL);
    let (slack, ratio) = if sides.rhs > 0.0 {
        let q = sides.lhs / sides.rhs;
        (q - 1.0, Some(q))
    } else {
        (sides.lhs, None)
    };
    rep.record(slack, ratio, || {
        format!(
            "n={} a={} delta={delta} lhs={:.6e} rhs={:.6e} tail={:.3e}",
            params.n, params.a, sides.lhs, sides.rhs, sides.rhs_tail
        )
    });
    Ok(rep.finish())
}

/// (b₁ − b₂)² and (1 − α)b₁² + (1 − 1/α)b₂².
pub fn young_split(b1: f64, b2: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let d = b1 - b2;
    Ok((
        d * d,
        (1.0 - alpha) * b1 * b1 + (1.0 - 1.0 / alpha) * b2 * b2,
    ))
}

/// Counts violations of the Young split over `samples` random triples with
/// b ∈ [−scale, scale] and α ∈ (0, 1). A violation is lhs < rhs beyond
/// rounding of the operands.
pub fn young_sweep(samples: usize, scale: f64, seed: u64) -> CertificateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CertificateReport::empty("young_split", 0.0);
    for _ in 0..samples {
        let b1 = rng.gen_range(-scale..=scale);
        let b2 = rng.gen_range(-scale..=scale);
        let alpha: f64 = rng.gen_range(f64::EPSILON..1.0);
        let (lhs, rhs) = young_split(b1, b2, alpha).expect("alpha in range");
        let size = b1 * b1 + b2 * b2 / alpha;
        let slack = lhs - rhs + 8.0 * f64::EPSILON * size;
        rep.record(slack.min(0.0), (rhs > 0.0).then(|| lhs / rhs), || {
            format!("b1={b1:e} b2={b2:e} alpha={alpha:e}")
        });
    }
    rep.finish()
}
