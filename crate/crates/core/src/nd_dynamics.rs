//! Pseudo-spectral solver for ∂tρ + g R_aρ·∇ρ = 0 on the periodic box.
//!
//! Fields are kept in the range of the 2/3-rule projection P (modes with
//! |m_j| ≤ (N−1)/3 on every axis). The right-hand side is −g·P(u·∇ρ) with
//! u = R_aρ; each factor has modes up to N/3, so the product is formed
//! without aliasing onto retained modes.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    mass_fraction_outside, structural_checks_field, support_radius_field, weighted_integral_field,
    BlowupConfig, CheckResult, DiagnosticsRecord, DiagnosticsSeries, StructuralTolerances,
};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::params::Params;
use crate::profile::RadialFunction;
use crate::transform::{KernelKind, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdStopReason {
    TimeLimit,
    GradientThreshold,
    DtUnderflow,
    Nonfinite,
}

/// Precomputed symbols for one grid and parameter set.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    grid: Grid,
    params: Params,
    keep: Vec<bool>,
    /// k_j per axis, flattened per mode.
    wave: Vec<Vec<f64>>,
    /// Imaginary part of the R_a symbol per axis: −k_j/|k|·(1 − e^{−a|k|}).
    velocity: Vec<Vec<f64>>,
}

impl SpectralOperator {
    pub fn new(grid: Grid, params: Params) -> Result<Self> {
        params.validate()?;
        if grid.dim() != params.n {
            return Err(Error::GridMismatch(format!(
                "grid dimension {} but params.n = {}",
                grid.dim(),
                params.n
            )));
        }
        let n = grid.dim();
        let cut = grid.dealias_cutoff();
        let spec = KernelSpec {
            kind: KernelKind::RaKernel,
            params,
        };
        let mut keep = vec![false; grid.len()];
        let mut wave = vec![vec![0.0; grid.len()]; n];
        let mut velocity = vec![vec![0.0; grid.len()]; n];
        let mut idx = vec![0usize; n];
        let mut k = vec![0.0; n];
        for i in 0..grid.len() {
            grid.unravel(i, &mut idx);
            keep[i] = idx.iter().all(|&m| grid.signed_mode(m).abs() <= cut);
            for d in 0..n {
                k[d] = grid.wavenumber(idx[d]);
            }
            let mag = k.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in 0..n {
                wave[d][i] = k[d];
                if mag > 0.0 {
                    velocity[d][i] = -k[d] / mag * spec.symbol_magnitude(mag);
                }
            }
        }
        Ok(SpectralOperator {
            grid,
            params,
            keep,
            wave,
            velocity,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn truncate(&self, coefs: &mut [Complex64]) {
        coefs.par_iter_mut().zip(&self.keep).for_each(|(c, &k)| {
            if !k {
                *c = Complex64::new(0.0, 0.0);
            }
        });
    }

    /// Applies the 2/3-rule projection P.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let mut c = fft::forward_real(&self.grid, values);
        self.truncate(&mut c);
        fft::inverse_real(&self.grid, c)
    }

    /// Real-space u_j and ∂_jρ for projected coefficients, one complex
    /// inverse transform per axis (u_j in the real part, ∂_jρ in the
    /// imaginary part; both spectra are Hermitian).
    fn velocity_and_gradient(&self, coefs: &[Complex64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.grid.dim())
            .map(|j| {
                let mut buf: Vec<Complex64> = coefs
                    .par_iter()
                    .zip(&self.velocity[j])
                    .zip(&self.wave[j])
                    .map(|((c, &v), &k)| {
                        // i·v·c + i·(i·k·c)
                        let u = Complex64::new(0.0, v) * c;
                        let d = Complex64::new(0.0, k) * c;
                        u + Complex64::new(0.0, 1.0) * d
                    })
                    .collect();
                fft::inverse(&self.grid, &mut buf);
                buf.into_par_iter().map(|z| (z.re, z.im)).unzip()
            })
            .collect()
    }

    fn projected_coefs(&self, rho: &ScalarField) -> Vec<Complex64> {
        let mut c = rho.spectral().to_vec();
        self.truncate(&mut c);
        c
    }

    /// −g·P(R_aρ·∇ρ).
    pub fn rhs(&self, rho: &ScalarField) -> ScalarField {
        let coefs = self.projected_coefs(rho);
        let parts = self.velocity_and_gradient(&coefs);
        let len = self.grid.len();
        let mut prod = vec![0.0; len];
        for (u, d) in &parts {
            prod.par_iter_mut()
                .zip(u.par_iter().zip(d))
                .for_each(|(p, (a, b))| *p += a * b);
        }
        let mut c = fft::forward_real(&self.grid, &prod);
        self.truncate(&mut c);
        let g = self.params.g;
        c.par_iter_mut().for_each(|v| *v *= -g);
        ScalarField::from_values(self.grid, fft::inverse_real(&self.grid, c)).expect("same grid")
    }

    /// max over nodes of |R_aρ| for the projected field.
    pub fn max_velocity(&self, rho: &ScalarField) -> f64 {
        let coefs = self.projected_coefs(rho);
        let parts = self.velocity_and_gradient(&coefs);
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| parts.iter().map(|(u, _)| u[i] * u[i]).sum::<f64>().sqrt())
            .reduce(|| 0.0, f64::max)
    }

    /// Both sides of ∫ρ·RHS = (g/2)∫ρ² div R_aρ for the projected field.
    pub fn energy_identity(&self, rho: &ScalarField) -> (f64, f64) {
        let projected =
            ScalarField::from_values(self.grid, self.project(rho.values())).expect("same grid");
        let rhs = self.rhs(&projected);
        let coefs = self.projected_coefs(&projected);
        // div u has symbol Σ_j i k_j · i v_j = −Σ k_j v_j
        let div: Vec<Complex64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let s: f64 = (0..self.grid.dim())
                    .map(|j| self.wave[j][i] * self.velocity[j][i])
                    .sum();
                coefs[i] * (-s)
            })
            .collect();
        let div = fft::inverse_real(&self.grid, div);
        let cell = self.grid.cell_volume();
        let lhs: f64 = projected
            .values()
            .iter()
            .zip(rhs.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * cell;
        let right: f64 = projected
            .values()
            .iter()
            .zip(&div)
            .map(|(r, d)| r * r * d)
            .sum::<f64>()
            * cell
            * 0.5
            * self.params.g;
        (lhs, right)
    }
}

#[derive(Debug, Clone)]
pub struct NdState {
    pub time: f64,
    pub rho: ScalarField,
    pub params: Params,
}

impl NdState {
    /// State at t = 0 from `rho`, projected by the 2/3 rule.
    pub fn new(rho: &ScalarField, op: &SpectralOperator) -> Result<Self> {
        rho.grid().same_as(op.grid())?;
        rho.ensure_finite()?;
        Ok(NdState {
            time: 0.0,
            rho: ScalarField::from_values(*op.grid(), op.project(rho.values()))?,
            params: *op.params(),
        })
    }
}

fn axpy(base: &ScalarField, h: f64, k: &ScalarField) -> ScalarField {
    let v = base
        .values()
        .par_iter()
        .zip(k.values())
        .map(|(a, b)| a + h * b)
        .collect();
    ScalarField::from_values(*base.grid(), v).expect("same grid")
}

/// One classical RK4 step. Fails with `NonFinite` if the result is not finite.
pub fn step_rk4(state: &NdState, dt: f64, op: &SpectralOperator) -> Result<NdState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let r0 = &state.rho;
    let k1 = op.rhs(r0);
    let k2 = op.rhs(&axpy(r0, 0.5 * dt, &k1));
    let k3 = op.rhs(&axpy(r0, 0.5 * dt, &k2));
    let k4 = op.rhs(&axpy(r0, dt, &k3));
    let v: Vec<f64> = (0..r0.values().len())
        .into_par_iter()
        .map(|i| {
            r0.values()[i]
                + dt / 6.0
                    * (k1.values()[i]
                        + 2.0 * k2.values()[i]
                        + 2.0 * k3.values()[i]
                        + k4.values()[i])
        })
        .collect();
    let rho = ScalarField::from_values(*r0.grid(), v)?;
    rho.ensure_finite()?;
    Ok(NdState {
        time: state.time + dt,
        rho,
        params: state.params,
    })
}

/// cfl·h/(g·max|R_aρ| + ε) clamped above by `dt_max`. Returns the unclamped
/// value below `dt_min` unchanged so the caller can detect underflow.
pub fn adaptive_dt(state: &NdState, op: &SpectralOperator, cfl: f64, dt_max: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cfl must lie in (0, 1), got {cfl}"
        )));
    }
    let speed = state.params.g * op.max_velocity(&state.rho);
    Ok((cfl * op.grid().spacing() / (speed + f64::EPSILON)).min(dt_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdRunOptions {
    pub cfl: f64,
    pub t_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub gradient_factor: f64,
    /// Sobolev orders recorded in the series.
    pub hs_orders: Vec<f64>,
    pub delta: f64,
    /// Radius L of the ball holding the initial support.
    pub support: f64,
    /// Keep a snapshot every this many steps (0: only the ends and
    /// `snapshot_times`).
    pub snapshot_every: usize,
    /// Times the integrator must land on exactly; a snapshot is kept at each.
    pub snapshot_times: Vec<f64>,
    /// Run the structural checks at every record while sup_grad stays below
    /// this multiple of its initial value (0 disables).
    pub structure_window: f64,
    pub structure_tolerances: StructuralTolerances,
}

impl Default for NdRunOptions {
    fn default() -> Self {
        NdRunOptions {
            cfl: 0.5,
            t_max: 20.0,
            dt_min: 1e-8,
            dt_max: 0.05,
            gradient_factor: 50.0,
            hs_orders: vec![1.0, 2.0],
            delta: 0.25,
            support: 1.0,
            snapshot_every: 0,
            snapshot_times: Vec::new(),
            structure_window: 3.0,
            structure_tolerances: StructuralTolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NdRunResult {
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub structure: Vec<(f64, Vec<CheckResult>)>,
    pub stop_reason: NdStopReason,
    pub steps: usize,
    pub final_state: NdState,
}

fn record(
    state: &NdState,
    cfg: &BlowupConfig,
    hs_orders: &[f64],
    dt: f64,
) -> Result<DiagnosticsRecord> {
    let rho = &state.rho;
    let hs = hs_orders
        .iter()
        .map(|&s| Ok((s, rho.hs_norm(s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsRecord {
        t: state.time,
        dt,
        sup_grad: rho.sup_grad(),
        l2: rho.l2_norm(),
        hs,
        i_delta: weighted_integral_field(rho, cfg),
        bkm_partial: 0.0,
        origin_value: rho.value_at_origin(),
        support_radius: support_radius_field(rho, 1e-8),
        support_mass_out: mass_fraction_outside(rho, cfg.support),
        spectral_tail: spectral_tail(rho),
    })
}

/// Integrates until a stop criterion. Every step is recorded.
pub fn run_nd(initial: &ScalarField, params: &Params, opts: &NdRunOptions) -> Result<NdRunResult> {
    let op = SpectralOperator::new(*initial.grid(), *params)?;
    let cfg = BlowupConfig::new(opts.delta, opts.support, *params)?;
    if !(opts.dt_min > 0.0 && opts.dt_max >= opts.dt_min) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < dt_min <= dt_max, got {} and {}",
            opts.dt_min, opts.dt_max
        )));
    }
    let mut pending: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < opts.t_max)
        .collect();
    pending.sort_by(|a, b| b.total_cmp(a));

    let mut state = NdState::new(initial, &op)?;
    let first = record(&state, &cfg, &opts.hs_orders, 0.0)?;
    let grad0 = first.sup_grad;
    let origin0 = first.origin_value;
    let mut series = DiagnosticsSeries::new();
    series.push(first)?;
    let mut snapshots = vec![(0.0, state.rho.clone())];
    let mut structure = Vec::new();
    let check = |st: &NdState, grad: f64, out: &mut Vec<(f64, Vec<CheckResult>)>| {
        if opts.structure_window > 0.0 && grad <= opts.structure_window * grad0 {
            out.push((
                st.time,
                structural_checks_field(&st.rho, origin0, opts.support, &opts.structure_tolerances),
            ));
        }
    };
    check(&state, grad0, &mut structure);

    let mut steps = 0;
    let stop = loop {
        if state.time >= opts.t_max * (1.0 - 1e-14) {
            break NdStopReason::TimeLimit;
        }
        let last = series.last().expect("nonempty");
        if grad0 > 0.0 && last.sup_grad > opts.gradient_factor * grad0 {
            break NdStopReason::GradientThreshold;
        }
        let mut dt = adaptive_dt(&state, &op, opts.cfl, opts.dt_max)?;
        if dt < opts.dt_min {
            break NdStopReason::DtUnderflow;
        }
        dt = dt.min(opts.t_max - state.time);
        let mut hit = false;
        if let Some(&t) = pending.last() {
            if state.time + dt >= t {
                dt = t - state.time;
                hit = true;
            }
        }
        state = match step_rk4(&state, dt, &op) {
            Ok(s) => s,
            Err(Error::NonFinite { .. }) => break NdStopReason::Nonfinite,
            Err(e) => return Err(e),
        };
        if hit {
            state.time = pending.pop().expect("pending time");
        }
        steps += 1;
        let rec = record(&state, &cfg, &opts.hs_orders, dt)?;
        check(&state, rec.sup_grad, &mut structure);
        series.push(rec)?;
        if hit || (opts.snapshot_every > 0 && steps % opts.snapshot_every == 0) {
            snapshots.push((state.time, state.rho.clone()));
        }
    };
    if snapshots.last().map(|s| s.0) != Some(state.time) {
        snapshots.push((state.time, state.rho.clone()));
    }
    Ok(NdRunResult {
        series,
        snapshots,
        structure,
        stop_reason: stop,
        steps,
        final_state: state,
    })
}

/// Largest |ρ̂| among retained modes with max_j |m_j| > 2K/3 (K the 2/3-rule
/// cutoff), relative to the largest |ρ̂|. Small values mean the spectrum has
/// decayed well inside the retained band.
pub fn spectral_tail(rho: &ScalarField) -> f64 {
    let grid = rho.grid();
    let cut = grid.dealias_cutoff();
    let shell = 2 * cut / 3;
    let n = grid.dim();
    let (tail, top) = rho
        .spectral()
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0usize; n],
            |idx, (i, c)| {
                grid.unravel(i, idx);
                let m = idx
                    .iter()
                    .map(|&j| grid.signed_mode(j).abs())
                    .max()
                    .unwrap_or(0);
                let a = c.norm();
                (if m > shell && m <= cut { a } else { 0.0 }, a)
            },
        )
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if top == 0.0 {
        0.0
    } else {
        tail / top
    }
}

/// Relative L² distance between a field and a radial profile sampled at the
/// node radii.
pub fn radial_mismatch(field: &ScalarField, profile: &dyn RadialFunction) -> f64 {
    let grid = field.grid();
    let (num, den) = field
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = profile.value(grid.radius(i));
            ((v - p) * (v - p), p * p)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
