//! Periodic box discretisation.
//!
//! The box is `[-half_width, half_width)^n` with `N` points per axis at
//! `x_j = -half_width + j·h`, `h = 2·half_width/N`. Storage is row-major with
//! the last axis fastest. The origin is always a grid node (index `N/2` on
//! every axis).
//!
//! Wavenumbers are stored in the angular convention: FFT index `m` maps to the
//! signed integer `m' ∈ {-N/2, …, N/2-1}` and to `k = m'·π/half_width`.
//! A symbol written with the `2π|ξ|` convention becomes a function of `|k|`
//! through `2π|ξ| = |k|`; in particular `(2π|ξ|)^s ↦ |k|^s` and
//! `e^{-2πa|ξ|} ↦ e^{-a|k|}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, points: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(
                "grid dimension must be >= 1".into(),
            ));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per dimension must be even and >= 8, got {points}"
            )));
        }
        points
            .checked_pow(n as u32)
            .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
        Ok(Grid {
            n,
            half_width,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.n as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Stride of axis `d` in the flat layout.
    pub fn stride(&self, d: usize) -> usize {
        self.points.pow((self.n - 1 - d) as u32)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Signed mode number for FFT index `m`.
    pub fn signed_mode(&self, m: usize) -> i64 {
        let n = self.points as i64;
        let m = m as i64;
        if m >= n / 2 {
            m - n
        } else {
            m
        }
    }

    /// Angular wavenumber for FFT index `m` along any axis.
    pub fn wavenumber(&self, m: usize) -> f64 {
        self.signed_mode(m) as f64 * std::f64::consts::PI / self.half_width
    }

    /// Smallest nonzero |k|.
    pub fn k_min(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Largest per-axis |k| (the Nyquist magnitude).
    pub fn k_max(&self) -> f64 {
        self.points as f64 / 2.0 * std::f64::consts::PI / self.half_width
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for d in (0..self.n).rev() {
            out[d] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.points + j)
    }

    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.n];
        self.unravel(flat, &mut idx);
        for (o, &j) in out.iter_mut().zip(&idx) {
            *o = self.coordinate(j);
        }
    }

    pub fn radius(&self, flat: usize) -> f64 {
        let mut x = vec![0.0; self.n];
        self.position(flat, &mut x);
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Flat index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        let idx = vec![self.points / 2; self.n];
        self.ravel(&idx)
    }

    /// Wavevector of flat spectral index `flat`.
    pub fn wavevector(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.n];
        self.unravel(flat, &mut idx);
        for (o, &m) in out.iter_mut().zip(&idx) {
            *o = self.wavenumber(m);
        }
    }

    /// True if spectral index `flat` sits on the Nyquist plane of axis `d`.
    pub fn is_nyquist(&self, flat: usize, d: usize) -> bool {
        (flat / self.stride(d)) % self.points == self.points / 2
    }

    /// Modes kept by the 2/3 rule: |m'| <= cutoff on every axis, 3·cutoff < N.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.points as i64 - 1) / 3
    }

    pub fn same_as(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}
