//! Characteristics solver for the radial equation ∂tρ + g u_r ∂rρ = 0.
//!
//! Lagrangian markers carry the initial values unchanged; their positions
//! follow dΦ/dt = g u_r(Φ) with u_r the radial velocity of the current
//! profile, rebuilt by monotone cubic interpolation through the markers.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    weighted_integral_radial, BlowupConfig, DiagnosticsRecord, DiagnosticsSeries,
};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::profile::{clustered_nodes, RadialFunction, RadialProfile};
use crate::transform::{RadialOperator, RadialQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialStopReason {
    TimeLimit,
    GradientThreshold,
    MarkersCollided,
}

#[derive(Debug, Clone)]
pub struct RadialState {
    pub time: f64,
    pub labels: Vec<f64>,
    pub positions: Vec<f64>,
    /// ρ₀(labels), never modified.
    pub values: Vec<f64>,
    pub profile: RadialProfile,
    pub origin_value: f64,
}

impl RadialState {
    /// Markers at `labels` (first label 0) carrying ρ₀.
    pub fn new(initial: &dyn RadialFunction, labels: Vec<f64>) -> Result<Self> {
        let values: Vec<f64> = labels.iter().map(|&r| initial.value(r)).collect();
        let profile = RadialProfile::new(labels.clone(), values.clone())?;
        Ok(RadialState {
            time: 0.0,
            positions: labels.clone(),
            origin_value: values[0],
            labels,
            values,
            profile,
        })
    }

    /// Clustered markers on [0, support_end of ρ₀].
    pub fn clustered(initial: &dyn RadialFunction, markers: usize, beta: f64) -> Result<Self> {
        let end = initial.support_end();
        if !(end > 0.0) {
            return Err(Error::InvalidProfile(
                "initial data has no radial extent to place markers on".into(),
            ));
        }
        Self::new(initial, clustered_nodes(end, markers, beta))
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }

    /// Largest |Δρ/Δr| between neighbouring markers.
    pub fn sup_grad(&self) -> f64 {
        self.profile.max_secant_slope()
    }

    fn with_positions(&self, positions: Vec<f64>, time: f64) -> Result<Self> {
        let profile = RadialProfile::new(positions.clone(), self.values.clone())?;
        Ok(RadialState {
            time,
            labels: self.labels.clone(),
            positions,
            values: self.values.clone(),
            profile,
            origin_value: self.origin_value,
        })
    }
}

/// Radial velocity u_r of the current profile at every marker.
pub fn radial_rhs(state: &RadialState, op: &RadialOperator) -> Vec<f64> {
    let mut u = op.velocities(&state.profile, &state.positions);
    if let Some(first) = u.first_mut() {
        if state.positions[0] == 0.0 {
            *first = 0.0;
        }
    }
    u
}

/// Outcome of one step: the new state or a collision.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced(RadialState),
    /// Ordering was lost or a gap fell below the threshold; carries the
    /// smallest gap found and the index of its left marker.
    Collided {
        min_gap: f64,
        at: usize,
    },
}

fn check_order(positions: &[f64], min_gaps: &[f64]) -> Option<(f64, usize)> {
    let mut worst: Option<(f64, usize)> = None;
    for (i, w) in positions.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if !(gap > min_gaps[i]) && worst.is_none_or(|(g, _)| gap < g) {
            worst = Some((gap, i));
        }
    }
    worst
}

/// One classical RK4 step of all marker positions, with intermediate
/// profiles rebuilt from the stage positions. `min_gaps[i]` is the collision
/// threshold for gap i.
pub fn step(
    state: &RadialState,
    dt: f64,
    op: &RadialOperator,
    min_gaps: &[f64],
) -> Result<StepOutcome> {
    step_with_first_stage(state, radial_rhs(state, op), dt, op, min_gaps)
}

fn step_with_first_stage(
    state: &RadialState,
    k1: Vec<f64>,
    dt: f64,
    op: &RadialOperator,
    min_gaps: &[f64],
) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let g = op.params().g;
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(x, v)| x + h * g * v).collect()
    };
    let try_state =
        |pos: Vec<f64>, t: f64| -> Result<std::result::Result<RadialState, (f64, usize)>> {
            if let Some(c) = check_order(&pos, min_gaps) {
                return Ok(Err(c));
            }
            Ok(Ok(state.with_positions(pos, t)?))
        };
    let x0 = &state.positions;
    let s2 = match try_state(stage(x0, &k1, 0.5 * dt), state.time + 0.5 * dt)? {
        Ok(s) => s,
        Err((min_gap, at)) => return Ok(StepOutcome::Collided { min_gap, at }),
    };
    let k2 = radial_rhs(&s2, op);
    let s3 = match try_state(stage(x0, &k2, 0.5 * dt), state.time + 0.5 * dt)? {
        Ok(s) => s,
        Err((min_gap, at)) => return Ok(StepOutcome::Collided { min_gap, at }),
    };
    let k3 = radial_rhs(&s3, op);
    let s4 = match try_state(stage(x0, &k3, dt), state.time + dt)? {
        Ok(s) => s,
        Err((min_gap, at)) => return Ok(StepOutcome::Collided { min_gap, at }),
    };
    let k4 = radial_rhs(&s4, op);
    let pos: Vec<f64> = (0..x0.len())
        .map(|i| x0[i] + dt / 6.0 * g * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok(match try_state(pos, state.time + dt)? {
        Ok(s) => StepOutcome::Advanced(s),
        Err((min_gap, at)) => StepOutcome::Collided { min_gap, at },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialRunOptions {
    pub markers: usize,
    /// Clustering strength of the marker map, in [0, 1).
    pub cluster: f64,
    pub cfl: f64,
    pub t_max: f64,
    pub dt_max: f64,
    /// Stop once sup_grad exceeds this multiple of its initial value.
    pub gradient_factor: f64,
    /// A gap below this fraction of its initial value is a collision.
    pub collision_ratio: f64,
    /// Keep a snapshot every this many steps (0 keeps none but the ends).
    pub snapshot_every: usize,
    /// δ of the weighted functional I.
    pub delta: f64,
    pub quadrature: RadialQuadrature,
}

impl Default for RadialRunOptions {
    fn default() -> Self {
        RadialRunOptions {
            markers: 512,
            cluster: 0.9,
            cfl: 0.4,
            t_max: 100.0,
            dt_max: 0.5,
            gradient_factor: 50.0,
            collision_ratio: 1e-6,
            snapshot_every: 10,
            delta: 0.25,
            quadrature: RadialQuadrature {
                order: 2,
                near_order: 8,
                rel_tol: 0.0,
                max_doublings: 0,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialRunResult {
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<(f64, RadialProfile)>,
    pub labels: Vec<f64>,
    pub stop_reason: RadialStopReason,
    pub steps: usize,
    pub final_state: RadialState,
}

/// Step size limited by how fast neighbouring markers approach each other:
/// min over gaps of cfl·gap/(g·|Δu|), capped at `dt_max`.
pub fn compression_dt(state: &RadialState, u: &[f64], g: f64, cfl: f64, dt_max: f64) -> f64 {
    let mut dt = dt_max;
    for (i, w) in state.positions.windows(2).enumerate() {
        let closing = g * (u[i] - u[i + 1]);
        if closing > 0.0 {
            dt = dt.min(cfl * (w[1] - w[0]) / closing);
        }
    }
    dt
}

fn record(state: &RadialState, cfg: &BlowupConfig, dt: f64) -> DiagnosticsRecord {
    let far = *state.values.last().unwrap();
    let support_radius = state
        .positions
        .iter()
        .zip(&state.values)
        .rev()
        .find(|(_, v)| **v != far)
        .map(|(r, _)| *r)
        .unwrap_or(0.0);
    let n = cfg.params.n as i32;
    let (mut out, mut total) = (0.0, 0.0);
    for (r, v) in state.positions.windows(2).zip(state.values.windows(2)) {
        let m =
            0.5 * (v[0].abs() * r[0].powi(n - 1) + v[1].abs() * r[1].powi(n - 1)) * (r[1] - r[0]);
        total += m;
        if r[0] >= cfg.support {
            out += m;
        }
    }
    let l2 = state
        .positions
        .windows(2)
        .zip(state.values.windows(2))
        .map(|(r, v)| {
            0.5 * (v[0] * v[0] * r[0].powi(n - 1) + v[1] * v[1] * r[1].powi(n - 1)) * (r[1] - r[0])
        })
        .sum::<f64>()
        * crate::special::sphere_area(cfg.params.n);
    DiagnosticsRecord {
        t: state.time,
        dt,
        sup_grad: state.sup_grad(),
        l2: l2.sqrt(),
        hs: Vec::new(),
        i_delta: weighted_integral_radial(&state.profile, cfg),
        bkm_partial: 0.0,
        origin_value: state.origin_value,
        support_radius,
        support_mass_out: if total > 0.0 { out / total } else { 0.0 },
        spectral_tail: 0.0,
    }
}

/// Integrates radial data until the time limit, the gradient threshold or a
/// marker collision. Every step is recorded.
pub fn run_radial(
    initial: &dyn RadialFunction,
    params: &Params,
    opts: &RadialRunOptions,
) -> Result<RadialRunResult> {
    params.validate()?;
    if !(opts.cfl > 0.0 && opts.cfl < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cfl must lie in (0, 1), got {}",
            opts.cfl
        )));
    }
    if opts.markers < 2 {
        return Err(Error::InvalidParameter(
            "need at least two marker intervals".into(),
        ));
    }
    let op = RadialOperator::with_quadrature(*params, opts.quadrature);
    let end = initial.support_end();
    let mut state = if end > 0.0 {
        RadialState::clustered(initial, opts.markers, opts.cluster)?
    } else {
        // flat data: markers on the unit interval, nothing moves
        RadialState::new(initial, clustered_nodes(1.0, opts.markers, opts.cluster))?
    };
    let support = if end > 0.0 { end } else { 1.0 };
    let cfg = BlowupConfig {
        delta: opts.delta,
        support,
        params: *params,
    };
    cfg.validate()?;
    let min_gaps: Vec<f64> = state.gaps().map(|g| g * opts.collision_ratio).collect();

    let mut series = DiagnosticsSeries::new();
    series.push(record(&state, &cfg, 0.0))?;
    let grad0 = state.sup_grad();
    let mut snapshots = vec![(0.0, state.profile.clone())];
    let labels = state.labels.clone();
    let mut steps = 0;
    let stop = loop {
        if state.time >= opts.t_max * (1.0 - 1e-14) {
            break RadialStopReason::TimeLimit;
        }
        if grad0 > 0.0 && state.sup_grad() > opts.gradient_factor * grad0 {
            break RadialStopReason::GradientThreshold;
        }
        let u = radial_rhs(&state, &op);
        let dt = compression_dt(&state, &u, params.g, opts.cfl, opts.dt_max)
            .min(opts.t_max - state.time);
        match step_with_first_stage(&state, u, dt, &op, &min_gaps)? {
            StepOutcome::Advanced(next) => state = next,
            StepOutcome::Collided { min_gap, at } => {
                log::info!(
                    "markers {at} and {} collided near r = {} (gap {min_gap:e}) at t = {}",
                    at + 1,
                    state.positions[at],
                    state.time
                );
                break RadialStopReason::MarkersCollided;
            }
        }
        steps += 1;
        series.push(record(&state, &cfg, dt))?;
        if opts.snapshot_every > 0 && steps % opts.snapshot_every == 0 {
            snapshots.push((state.time, state.profile.clone()));
        }
    };
    if snapshots.last().map(|s| s.0) != Some(state.time) {
        snapshots.push((state.time, state.profile.clone()));
    }
    Ok(RadialRunResult {
        series,
        snapshots,
        labels,
        stop_reason: stop,
        steps,
        final_state: state,
    })
}

/// Comparison of two reconstructions of ∂rρ at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDerivativeReport {
    pub time: f64,
    /// max |(i) − (ii)| / max|(ii)| over markers with label below the edge
    /// fraction of the support.
    pub max_rel_discrepancy: f64,
    /// Smallest value of either reconstruction (monotonicity needs ≥ 0).
    pub min_derivative: f64,
}

/// Second-order derivative of `y` with respect to `x` at interior point i.
fn nonuniform_derivative(x: &[f64], y: &[f64], i: usize) -> f64 {
    let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    (-h1 / (h0 * (h0 + h1))) * y[i - 1]
        + ((h1 - h0) / (h0 * h1)) * y[i]
        + (h0 / (h1 * (h0 + h1))) * y[i + 1]
}

/// ∂rρ at the markers two ways: (i) differences of the snapshot profile,
/// (ii) ρ₀′(label)/∂Φ, the stretch ∂Φ/∂label taken from marker spacing.
/// (ii) is the flow-map form of the derivative: values are carried, slopes
/// are divided by the local stretching of the characteristics.
pub fn derivative_along_flow(
    run: &RadialRunResult,
    initial: &dyn RadialFunction,
    edge_fraction: f64,
) -> Vec<FlowDerivativeReport> {
    let labels = &run.labels;
    let end = *labels.last().unwrap();
    run.snapshots
        .iter()
        .map(|(t, prof)| {
            let x = prof.nodes();
            let y = prof.values();
            let mut fd = Vec::new();
            let mut flow = Vec::new();
            for i in 1..x.len() - 1 {
                if labels[i] > edge_fraction * end {
                    break;
                }
                fd.push(nonuniform_derivative(x, y, i));
                let stretch = nonuniform_derivative(labels, x, i);
                flow.push(initial.derivative(labels[i]) / stretch);
            }
            let scale = flow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let max_rel = if scale > 0.0 {
                fd.iter()
                    .zip(&flow)
                    .map(|(a, b)| (a - b).abs() / scale)
                    .fold(0.0, f64::max)
            } else {
                fd.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            };
            let min_derivative = fd.iter().chain(&flow).fold(f64::INFINITY, |m, v| m.min(*v));
            FlowDerivativeReport {
                time: *t,
                max_rel_discrepancy: max_rel,
                min_derivative: if min_derivative.is_finite() {
                    min_derivative
                } else {
                    0.0
                },
            }
        })
        .collect()
}
