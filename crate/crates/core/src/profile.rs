//! Radial functions: the closed-form bump and tabulated profiles with a
//! shape-preserving (PCHIP) interpolant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A radial function `f(|x|)` with enough structure for the radial
/// quadratures: its value, its derivative, and the points where its
/// derivative is not smooth. The last breakpoint is the radius beyond which
/// `f′` vanishes (or is negligible at double precision).
pub trait RadialFunction: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    fn breakpoints(&self) -> Vec<f64>;

    fn origin_value(&self) -> f64 {
        self.value(0.0)
    }

    fn support_end(&self) -> f64 {
        *self.breakpoints().last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    #[default]
    MonotoneCubic,
    Linear,
}

/// Tabulated radial profile on `0 = r_0 < r_1 < … < r_M`, extended by
/// constants outside the node range. End slopes are zero so that the even
/// extension through the origin and the constant tail are both C¹.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    interp: Interp,
}

impl RadialProfile {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::with_interp(nodes, values, Interp::MonotoneCubic)
    }

    pub fn with_interp(nodes: Vec<f64>, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidProfile(format!(
                "need at least two nodes with matching values ({} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if let Some(w) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(format!(
                "nodes must be strictly increasing (index {})",
                w + 1
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite profile value".into()));
        }
        let slopes = match interp {
            Interp::MonotoneCubic => pchip_slopes(&nodes, &values),
            Interp::Linear => vec![0.0; nodes.len()],
        };
        Ok(RadialProfile {
            nodes,
            values,
            slopes,
            interp,
        })
    }

    /// Samples `f` on the given nodes.
    pub fn sample(f: &dyn RadialFunction, nodes: Vec<f64>) -> Result<Self> {
        let values = nodes.iter().map(|&r| f.value(r)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    fn locate(&self, r: f64) -> Option<usize> {
        if r <= 0.0 || r >= *self.nodes.last().unwrap() {
            return None;
        }
        let i = self.nodes.partition_point(|&x| x <= r);
        Some(i - 1)
    }

    /// Largest secant slope |Δf/Δr| between consecutive nodes.
    pub fn max_secant_slope(&self) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(r, v)| ((v[1] - v[0]) / (r[1] - r[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["r", "rho"])
            .map_err(|e| csv_error(path, e))?;
        for (r, v) in self.nodes.iter().zip(&self.values) {
            w.write_record([format!("{r:.17e}"), format!("{v:.17e}")])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Format {
                        path: path.to_path_buf(),
                        reason: format!("bad number in column {i}"),
                    })
            };
            nodes.push(parse(0)?);
            values.push(parse(1)?);
        }
        Self::new(nodes, values)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

impl RadialFunction for RadialProfile {
    fn value(&self, r: f64) -> f64 {
        let Some(i) = self.locate(r) else {
            return if r <= 0.0 {
                self.values[0]
            } else {
                *self.values.last().unwrap()
            };
        };
        let h = self.nodes[i + 1] - self.nodes[i];
        let t = (r - self.nodes[i]) / h;
        match self.interp {
            Interp::Linear => self.values[i] + t * (self.values[i + 1] - self.values[i]),
            Interp::MonotoneCubic => {
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * d1
            }
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        let Some(i) = self.locate(r) else {
            return 0.0;
        };
        let h = self.nodes[i + 1] - self.nodes[i];
        let t = (r - self.nodes[i]) / h;
        match self.interp {
            Interp::Linear => (self.values[i + 1] - self.values[i]) / h,
            Interp::MonotoneCubic => {
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
                let t2 = t * t;
                (6.0 * t2 - 6.0 * t) * (y0 - y1) / h
                    + (3.0 * t2 - 4.0 * t + 1.0) * d0
                    + (3.0 * t2 - 2.0 * t) * d1
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        // trailing flat stretch carries no derivative
        let mut end = self.nodes.len() - 1;
        while end > 0 && self.values[end - 1] == self.values[end] && self.slopes[end - 1] == 0.0 {
            end -= 1;
        }
        self.nodes[..=end.max(1)].to_vec()
    }

    fn origin_value(&self) -> f64 {
        self.values[0]
    }
}

/// Fritsch–Carlson slopes with the weighted harmonic mean (as in SciPy's
/// PCHIP) at interior nodes and zero slope at both ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; m];
    for k in 1..m - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            continue;
        }
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / a + w2 / b);
    }
    d
}

/// ρ₀(r) = −depth·exp(s(1 − 1/(1 − (r/L)²))) on r < L, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub support: f64,
    pub depth: f64,
    pub sharpness: f64,
}

impl Bump {
    pub fn new(support: f64, depth: f64, sharpness: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump support radius must be positive, got {support}"
            )));
        }
        if !(depth > 0.0 && depth.is_finite()) || !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump depth and sharpness must be positive, got {depth}, {sharpness}"
            )));
        }
        Ok(Bump {
            support,
            depth,
            sharpness,
        })
    }
}

/// The admissible blow-up data: radial, nondecreasing, compactly supported,
/// negative at the origin.
pub fn bump_initial_data(support: f64, depth: f64, sharpness: f64) -> Result<Bump> {
    Bump::new(support, depth, sharpness)
}

impl RadialFunction for Bump {
    fn value(&self, r: f64) -> f64 {
        let u = (r / self.support).powi(2);
        if u >= 1.0 {
            return 0.0;
        }
        -self.depth * (self.sharpness * (1.0 - 1.0 / (1.0 - u))).exp()
    }

    fn derivative(&self, r: f64) -> f64 {
        let u = (r / self.support).powi(2);
        if u >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - u;
        self.value(r) * self.sharpness * (-2.0 * r / (self.support * self.support * om * om))
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.support]
    }

    fn origin_value(&self) -> f64 {
        -self.depth
    }
}

/// Marker radii on [0, L] clustered at both ends by the smooth map
/// r(s) = L(s − β sin(2πs)/(2π)), s = i/M.
pub fn clustered_nodes(support: f64, intervals: usize, beta: f64) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    (0..=intervals)
        .map(|i| {
            let s = i as f64 / intervals as f64;
            support * (s - beta * (tau * s).sin() / tau)
        })
        .collect()
}
