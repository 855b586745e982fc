//! Blow-up diagnostics: the weighted functional
//! I(t) = ∫_{B_L} (ρ(x,t) − ρ(0,t))/|x|^{n+δ} dx, its Riccati rate, the
//! predicted bound on the blow-up time, and the structural checks the
//! blow-up argument relies on (origin value, support, radial monotonicity).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::inequality::{constant_cnd, weight_w};
use crate::params::Params;
use crate::profile::{csv_error, RadialFunction};
use crate::quadrature::GaussLegendre;
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    pub delta: f64,
    /// Radius L of the ball containing the support.
    pub support: f64,
    pub params: Params,
}

impl BlowupConfig {
    pub fn new(delta: f64, support: f64, params: Params) -> Result<Self> {
        let cfg = BlowupConfig {
            delta,
            support,
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1) for the blow-up functional, got {}",
                self.delta
            )));
        }
        if !(self.support > 0.0 && self.support.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "support radius must be positive, got {}",
                self.support
            )));
        }
        Ok(())
    }
}

/// I for radial data: ω_{n−1}∫₀^L (ρ(r) − ρ(0)) r^{−1−δ} dr.
///
/// The substitution r = L·t^p with p = 2/(1−δ) turns a difference vanishing
/// like r into an integrand vanishing like t, so Gauss–Legendre panels in t
/// (one per breakpoint interval, subdivided) converge without special care.
pub fn weighted_integral_radial(f: &dyn RadialFunction, cfg: &BlowupConfig) -> f64 {
    let big_l = cfg.support;
    let delta = cfg.delta;
    let p = 2.0 / (1.0 - delta);
    let f0 = f.origin_value();
    let mut tb: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .filter(|&r| r > 0.0 && r < big_l)
        .map(|r| (r / big_l).powf(1.0 / p))
        .collect();
    tb.insert(0, 0.0);
    tb.push(1.0);
    let gl = GaussLegendre::cached(8);
    let integrand = |t: f64| {
        let r = big_l * t.powf(p);
        (f.value(r) - f0) * p * big_l.powf(-delta) * t.powf(-1.0 - p * delta)
    };
    let sum_at = |split: usize| -> f64 {
        tb.windows(2)
            .map(|w| {
                let step = (w[1] - w[0]) / split as f64;
                (0..split)
                    .map(|k| {
                        gl.integrate(
                            w[0] + k as f64 * step,
                            w[0] + (k + 1) as f64 * step,
                            integrand,
                        )
                    })
                    .sum::<f64>()
            })
            .sum()
    };
    let mut split = if tb.len() > 64 { 1 } else { 8 };
    let mut prev = sum_at(split);
    loop {
        split *= 2;
        let next = sum_at(split);
        if (next - prev).abs() <= 1e-12 * next.abs() || split >= 1 << 10 {
            return sphere_area(cfg.params.n) * next;
        }
        prev = next;
    }
}

fn smooth_cutoff(t: f64) -> f64 {
    let psi = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let (a, b) = (psi(1.0 - t), psi(t));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// I for a field on the grid. The field must vanish outside B_L.
///
/// With a smooth radial cutoff ψ (1 at the origin, 0 beyond L):
///
/// ```text
/// I = Σ_{x≠0} (ρ − ρ(0)ψ)|x|^{−n−δ} hⁿ − ρ(0)ω∫₀^L (1−ψ) r^{−1−δ} dr
///     − α (Σ_{x≠0} ψ|x|^{2−n−δ} hⁿ − ω∫₀^L ψ r^{1−δ} dr),
/// ```
///
/// where the last bracket removes the lattice error of the leading local
/// behaviour ρ − ρ(0) ≈ α|x|², α = Δρ(0)/(2n).
pub fn weighted_integral_field(rho: &ScalarField, cfg: &BlowupConfig) -> f64 {
    let grid = rho.grid();
    let n = grid.dim();
    let big_l = cfg.support;
    let delta = cfg.delta;
    let origin = grid.origin_index();
    let rho0 = rho.values()[origin];
    let laplacian_at_origin = -rho.lambda_s(2.0).expect("s = 2 is valid").values()[origin];
    let alpha = laplacian_at_origin / (2.0 * n as f64);

    let mut x = vec![0.0; n];
    let mut main = 0.0;
    let mut lattice_model = 0.0;
    for (i, &v) in rho.values().iter().enumerate() {
        if i == origin {
            continue;
        }
        grid.position(i, &mut x);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let psi = if r < big_l {
            smooth_cutoff(r / big_l)
        } else {
            0.0
        };
        if v == 0.0 && psi == 0.0 {
            continue;
        }
        let w = r.powf(-(n as f64) - delta);
        main += (v - rho0 * psi) * w;
        lattice_model += psi * r * r * w;
    }
    let cell = grid.cell_volume();
    let omega = sphere_area(n);
    let gl = GaussLegendre::cached(32);
    // ∫₀^L (1−ψ) r^{−1−δ} dr: 1 − ψ vanishes to all orders at 0.
    let outer: f64 = (0..8)
        .map(|k| {
            let a = big_l * k as f64 / 8.0;
            let b = big_l * (k + 1) as f64 / 8.0;
            gl.integrate(a, b, |r| {
                (1.0 - smooth_cutoff(r / big_l)) * r.powf(-1.0 - delta)
            })
        })
        .sum();
    let model: f64 = (0..8)
        .map(|k| {
            let a = big_l * k as f64 / 8.0;
            let b = big_l * (k + 1) as f64 / 8.0;
            gl.integrate(a, b, |r| smooth_cutoff(r / big_l) * r.powf(1.0 - delta))
        })
        .sum::<f64>();
    main * cell - rho0 * omega * outer - alpha * (lattice_model * cell - omega * model)
}

/// c = g(1−δ)C_{n,δ}/(ω_{n−1}L^{1−δ})·w_a(L).
pub fn riccati_rate(cfg: &BlowupConfig) -> Result<f64> {
    cfg.validate()?;
    let p = &cfg.params;
    let c = constant_cnd(p.n, cfg.delta)?;
    Ok(
        p.g * (1.0 - cfg.delta) * c / (sphere_area(p.n) * cfg.support.powf(1.0 - cfg.delta))
            * weight_w(cfg.support, p),
    )
}

/// Upper bound 1/(c·I₀) on the blow-up time from dI/dt ≥ cI².
pub fn predict_blowup_time(i0: f64, c: f64) -> Result<f64> {
    if !(i0 > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "blow-up prediction needs I0 > 0 and c > 0, got {i0}, {c}"
        )));
    }
    Ok(1.0 / (c * i0))
}

/// One recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Step size that led to this record (0 for the initial record).
    pub dt: f64,
    pub sup_grad: f64,
    pub l2: f64,
    /// (s, ‖ρ‖_{H^s}) pairs; empty for radial runs.
    pub hs: Vec<(f64, f64)>,
    pub i_delta: f64,
    pub bkm_partial: f64,
    pub origin_value: f64,
    pub support_radius: f64,
    pub support_mass_out: f64,
    /// Largest Fourier coefficient in the top third of the retained band,
    /// relative to the largest coefficient (0 for radial runs).
    pub spectral_tail: f64,
}

/// Time series of diagnostics, strictly increasing in time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record, filling `bkm_partial` by the trapezoid rule.
    pub fn push(&mut self, mut rec: DiagnosticsRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::InvalidParameter(format!(
                    "series times must increase ({} after {})",
                    rec.t, last.t
                )));
            }
            rec.bkm_partial =
                last.bkm_partial + 0.5 * (rec.t - last.t) * (rec.sup_grad + last.sup_grad);
        } else {
            rec.bkm_partial = 0.0;
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    /// Prefix of the series up to the first record whose sup_grad exceeds
    /// `factor` times the initial value (that record excluded).
    pub fn window(&self, factor: f64) -> DiagnosticsSeries {
        let Some(first) = self.records.first() else {
            return DiagnosticsSeries::new();
        };
        let limit = factor * first.sup_grad;
        DiagnosticsSeries {
            records: self
                .records
                .iter()
                .take_while(|r| r.sup_grad <= limit)
                .cloned()
                .collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let hs_orders: Vec<f64> = self
            .records
            .first()
            .map(|r| r.hs.iter().map(|p| p.0).collect())
            .unwrap_or_default();
        let mut header: Vec<String> = ["t", "dt", "sup_grad", "l2"].map(String::from).to_vec();
        header.extend(hs_orders.iter().map(|s| format!("hs_{s}")));
        header.extend(
            [
                "I_delta",
                "bkm_partial",
                "origin_value",
                "support_radius",
                "support_mass_out",
                "spectral_tail",
            ]
            .map(String::from),
        );
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in &self.records {
            let mut row = vec![r.t, r.dt, r.sup_grad, r.l2];
            row.extend(r.hs.iter().map(|p| p.1));
            row.extend([
                r.i_delta,
                r.bkm_partial,
                r.origin_value,
                r.support_radius,
                r.support_mass_out,
                r.spectral_tail,
            ]);
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// ∫₀^t sup_grad by the trapezoid rule over the recorded times.
pub fn bkm_partial_integral(series: &DiagnosticsSeries) -> f64 {
    series
        .records
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[1].sup_grad + w[0].sup_grad))
        .sum()
}

/// Outcome of a single check, serialised as
/// `{check, pass, worst_violation, location}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    pub worst_violation: f64,
    pub location: String,
}

/// Comparison of dI/dt (centred differences) against c·I².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiReport {
    pub rate: f64,
    /// min over interior samples of dI/dt − c·I².
    pub min_slack: f64,
    /// min_slack / max|dI/dt|.
    pub normalized_slack: f64,
    pub max_didt: f64,
    pub location_t: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Centred-difference comparison of dI/dt against `rate`·I². Passes when the
/// slack is at least −`rel_tol`·max|dI/dt|.
pub fn riccati_check_with_rate(
    series: &DiagnosticsSeries,
    rate: f64,
    rel_tol: f64,
) -> RiccatiReport {
    let rec = &series.records;
    let mut min_slack = 0.0f64;
    let mut location_t = f64::NAN;
    let mut max_didt = 0.0f64;
    let mut first = true;
    for k in 1..rec.len().saturating_sub(1) {
        let didt = (rec[k + 1].i_delta - rec[k - 1].i_delta) / (rec[k + 1].t - rec[k - 1].t);
        let slack = didt - rate * rec[k].i_delta * rec[k].i_delta;
        max_didt = max_didt.max(didt.abs());
        if first || slack < min_slack {
            min_slack = slack;
            location_t = rec[k].t;
            first = false;
        }
    }
    let normalized_slack = if max_didt > 0.0 {
        min_slack / max_didt
    } else {
        0.0
    };
    let tolerance = rel_tol * max_didt;
    RiccatiReport {
        rate,
        min_slack,
        normalized_slack,
        max_didt,
        location_t,
        tolerance,
        pass: min_slack >= -tolerance,
    }
}

pub const RICCATI_REL_TOL: f64 = 1e-2;

pub fn riccati_check(series: &DiagnosticsSeries, cfg: &BlowupConfig) -> Result<RiccatiReport> {
    if series.len() < 3 {
        return Err(Error::InvalidParameter(
            "riccati check needs at least three samples".into(),
        ));
    }
    Ok(riccati_check_with_rate(
        series,
        riccati_rate(cfg)?,
        RICCATI_REL_TOL,
    ))
}

/// Tolerances for [`structural_checks_field`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralTolerances {
    pub angular_variance: f64,
    pub origin: f64,
    pub mass_fraction_out: f64,
    /// Allowed decrease along a ray, relative to max|ρ|.
    pub monotone: f64,
}

impl Default for StructuralTolerances {
    fn default() -> Self {
        StructuralTolerances {
            angular_variance: 1e-8,
            origin: 1e-6,
            mass_fraction_out: 1e-8,
            monotone: 1e-8,
        }
    }
}

/// Maximum over lattice orbits (signed permutations of the offset from the
/// origin node) of the variance of ρ, divided by max|ρ|². Returns the value
/// and the offset of the worst orbit.
pub fn angular_variance(rho: &ScalarField) -> (f64, Vec<i64>) {
    let grid = rho.grid();
    let np = grid.points_per_dim() as i64;
    let half = np / 2;
    let mut orbits: HashMap<Vec<i64>, (f64, f64, usize)> = HashMap::new();
    let mut idx = vec![0usize; grid.dim()];
    for (i, &v) in rho.values().iter().enumerate() {
        grid.unravel(i, &mut idx);
        let mut key: Vec<i64> = idx.iter().map(|&j| (j as i64 - half).abs()).collect();
        if key.iter().any(|&k| k == half) {
            // the Nyquist row has no mirror partner inside the box
            continue;
        }
        key.sort_unstable();
        let e = orbits.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += v;
        e.1 += v * v;
        e.2 += 1;
    }
    let scale = rho.max_abs().max(f64::MIN_POSITIVE);
    let mut worst = (0.0, Vec::new());
    for (key, (s, s2, c)) in orbits {
        let c = c as f64;
        let var = (s2 / c - (s / c) * (s / c)).max(0.0) / (scale * scale);
        if var > worst.0 {
            worst = (var, key);
        }
    }
    worst
}

/// Fraction of Σ|ρ| carried by nodes with |x| > L.
pub fn mass_fraction_outside(rho: &ScalarField, support: f64) -> f64 {
    let grid = rho.grid();
    let mut x = vec![0.0; grid.dim()];
    let (mut out, mut total) = (0.0, 0.0);
    for (i, &v) in rho.values().iter().enumerate() {
        let a = v.abs();
        total += a;
        grid.position(i, &mut x);
        if x.iter().map(|c| c * c).sum::<f64>() > support * support {
            out += a;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

/// Largest |x| at which |ρ| exceeds `rel` times max|ρ|.
pub fn support_radius_field(rho: &ScalarField, rel: f64) -> f64 {
    let grid = rho.grid();
    let thresh = rel * rho.max_abs();
    if thresh == 0.0 {
        return 0.0;
    }
    rho.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > thresh)
        .map(|(i, _)| grid.radius(i))
        .fold(0.0, f64::max)
}

/// Largest decrease of ρ along the positive axis ray and the main diagonal
/// from the origin node, relative to max|ρ|.
pub fn monotonicity_violation(rho: &ScalarField) -> (f64, String) {
    let grid = rho.grid();
    let n = grid.dim();
    let half = grid.points_per_dim() / 2;
    let scale = rho.max_abs().max(f64::MIN_POSITIVE);
    let mut worst = (0.0, String::new());
    for (name, dirs) in [("axis", 1usize), ("diagonal", n)] {
        let mut prev = rho.values()[grid.origin_index()];
        for m in 1..half {
            let idx: Vec<usize> = (0..n)
                .map(|d| if d < dirs { half + m } else { half })
                .collect();
            let v = rho.values()[grid.ravel(&idx)];
            let drop = (prev - v) / scale;
            if drop > worst.0 {
                worst = (drop, format!("{name} step {m}"));
            }
            prev = v;
        }
    }
    worst
}

/// Structural checks on one field snapshot against the initial origin value.
pub fn structural_checks_field(
    rho: &ScalarField,
    initial_origin: f64,
    support: f64,
    tol: &StructuralTolerances,
) -> Vec<CheckResult> {
    let (var, key) = angular_variance(rho);
    let origin = (rho.value_at_origin() - initial_origin).abs();
    let mass = mass_fraction_outside(rho, support);
    let (drop, where_) = monotonicity_violation(rho);
    vec![
        CheckResult {
            check: "radial_symmetry".into(),
            pass: var < tol.angular_variance,
            worst_violation: var,
            location: format!("orbit {key:?}"),
        },
        CheckResult {
            check: "origin_invariance".into(),
            pass: origin < tol.origin,
            worst_violation: origin,
            location: "origin".into(),
        },
        CheckResult {
            check: "support_containment".into(),
            pass: mass < tol.mass_fraction_out,
            worst_violation: mass,
            location: format!("|x| > {support}"),
        },
        CheckResult {
            check: "radial_monotonicity".into(),
            pass: drop <= tol.monotone,
            worst_violation: drop,
            location: where_,
        },
    ]
}

/// Folds per-snapshot results into one result per check (worst case kept).
pub fn merge_checks(batches: &[(f64, Vec<CheckResult>)]) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = Vec::new();
    for (t, batch) in batches {
        for c in batch {
            match out.iter_mut().find(|o| o.check == c.check) {
                Some(o) => {
                    o.pass &= c.pass;
                    if c.worst_violation > o.worst_violation {
                        o.worst_violation = c.worst_violation;
                        o.location = format!("t={t:.6e}, {}", c.location);
                    }
                }
                None => {
                    let mut c = c.clone();
                    c.location = format!("t={t:.6e}, {}", c.location);
                    out.push(c);
                }
            }
        }
    }
    out
}
