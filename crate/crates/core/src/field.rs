//! Scalar and vector fields on a periodic [`Grid`].
//!
//! A field owns its real-space samples; Fourier coefficients are computed on
//! first use and cached. Fields are immutable once built, so the cache is
//! never stale.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;
use crate::profile::RadialFunction;

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    spectral: OnceLock<Arc<Vec<Complex64>>>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            spectral: OnceLock::new(),
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
            spectral: OnceLock::new(),
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
            spectral: OnceLock::new(),
        }
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let n = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |x, i| {
                    grid.position(i, x);
                    f(x)
                },
            )
            .collect();
        ScalarField {
            grid,
            values,
            spectral: OnceLock::new(),
        }
    }

    /// Samples a radial function at `|x|`.
    pub fn from_radial(grid: Grid, f: &dyn RadialFunction) -> Self {
        Self::from_fn(grid, |x| {
            f.value(x.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
    }

    /// Real part of the inverse transform of `coefs`.
    pub fn from_spectral(grid: Grid, coefs: Vec<Complex64>) -> Result<Self> {
        if coefs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coefs.len()
            )));
        }
        Ok(ScalarField {
            grid,
            values: fft::inverse_real(&grid, coefs),
            spectral: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Unnormalised DFT coefficients (cached).
    pub fn spectral(&self) -> &[Complex64] {
        self.spectral
            .get_or_init(|| Arc::new(fft::forward_real(&self.grid, &self.values)))
    }

    pub fn count_nonfinite(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.count_nonfinite() {
            0 => Ok(()),
            count => Err(Error::NonFinite { count }),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            spectral: OnceLock::new(),
        }
    }

    /// Multiplies every Fourier coefficient by `symbol(k)` and transforms back.
    pub fn apply_multiplier(&self, symbol: impl Fn(&[f64]) -> Complex64 + Sync) -> ScalarField {
        let grid = self.grid;
        let n = grid.dim();
        let coefs: Vec<Complex64> = self
            .spectral()
            .par_iter()
            .enumerate()
            .map_init(
                || vec![0.0; n],
                |k, (i, c)| {
                    grid.wavevector(i, k);
                    c * symbol(k)
                },
            )
            .collect();
        ScalarField {
            grid,
            values: fft::inverse_real(&grid, coefs),
            spectral: OnceLock::new(),
        }
    }

    /// Λ^s = (−Δ)^{s/2}, symbol |k|^s, mean sent to zero (also for s = 0).
    pub fn lambda_s(&self, s: f64) -> Result<ScalarField> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda_s needs s >= 0, got {s}"
            )));
        }
        Ok(self.apply_multiplier(|k| {
            let m = norm(k);
            if m == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(m.powf(s), 0.0)
            }
        }))
    }

    /// ‖f‖_{L²} by Parseval.
    pub fn l2_norm(&self) -> f64 {
        spectral_l2(&self.grid, self.spectral(), |_| 1.0)
    }

    /// ‖f‖_{L²} by the periodic trapezoid rule in real space.
    pub fn l2_norm_real(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// ‖f‖_{L²} + ‖Λ^s f‖_{L²}, both spectrally.
    pub fn hs_norm(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hs_norm needs s >= 0, got {s}"
            )));
        }
        let lam = spectral_l2(&self.grid, self.spectral(), |m| {
            if m == 0.0 {
                0.0
            } else {
                m.powf(s)
            }
        });
        Ok(self.l2_norm() + lam)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Spectral gradient. Odd symbols are zeroed on the Nyquist plane of
    /// their own axis, where `i k_j` has no real-valued counterpart.
    pub fn gradient(&self) -> VectorField {
        let components = (0..self.grid.dim())
            .map(|j| self.odd_multiplier(j, |k| Complex64::new(0.0, k[j])))
            .collect();
        VectorField {
            grid: self.grid,
            components,
        }
    }

    /// Multiplier with a symbol odd in `k_j`, with the Nyquist plane of axis
    /// `j` removed.
    pub(crate) fn odd_multiplier(
        &self,
        j: usize,
        symbol: impl Fn(&[f64]) -> Complex64 + Sync,
    ) -> ScalarField {
        let grid = self.grid;
        let n = grid.dim();
        let coefs: Vec<Complex64> = self
            .spectral()
            .par_iter()
            .enumerate()
            .map_init(
                || vec![0.0; n],
                |k, (i, c)| {
                    if grid.is_nyquist(i, j) {
                        return Complex64::new(0.0, 0.0);
                    }
                    grid.wavevector(i, k);
                    c * symbol(k)
                },
            )
            .collect();
        ScalarField {
            grid,
            values: fft::inverse_real(&grid, coefs),
            spectral: OnceLock::new(),
        }
    }

    /// max over nodes of |∇f|.
    pub fn sup_grad(&self) -> f64 {
        self.gradient().max_magnitude()
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn evaluate_at(&self, x: &[f64]) -> f64 {
        let grid = &self.grid;
        let np = grid.points_per_dim();
        let phases: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xd| {
                let shift = xd + grid.half_width();
                (0..np)
                    .map(|m| Complex64::from_polar(1.0, grid.wavenumber(m) * shift))
                    .collect()
            })
            .collect();
        let coefs = self.spectral();
        let mut idx = vec![0; grid.dim()];
        let mut acc = 0.0;
        for (i, c) in coefs.iter().enumerate() {
            grid.unravel(i, &mut idx);
            let mut ph = Complex64::new(1.0, 0.0);
            for (d, &m) in idx.iter().enumerate() {
                ph *= phases[d][m];
            }
            acc += (c * ph).re;
        }
        acc / grid.len() as f64
    }

    /// Writes the binary snapshot container: magic `KSFD`, format version,
    /// n, N (u32), half_width, time (f64), then the row-major samples, all
    /// little endian.
    pub fn write_binary(&self, path: &Path, time: f64) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = Vec::with_capacity(32);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&(self.grid.dim() as u32).to_le_bytes());
        header.extend_from_slice(&(self.grid.points_per_dim() as u32).to_le_bytes());
        header.extend_from_slice(&self.grid.half_width().to_le_bytes());
        header.extend_from_slice(&time.to_le_bytes());
        w.write_all(&header).map_err(|e| Error::io(path, e))?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a snapshot written by [`ScalarField::write_binary`]; returns the
    /// field and its time stamp.
    pub fn read_binary(path: &Path) -> Result<(ScalarField, f64)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 32 || &bytes[0..4] != MAGIC {
            return Err(bad("missing KSFD header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(4) != FORMAT_VERSION {
            return Err(bad("unsupported format version"));
        }
        let n = u32_at(8) as usize;
        let points = u32_at(12) as usize;
        let half_width = f64_at(16);
        let time = f64_at(24);
        let grid = Grid::new(n, half_width, points).map_err(|e| bad(&e.to_string()))?;
        let payload = &bytes[32..];
        if payload.len() != grid.len() * 8 {
            return Err(bad("payload length does not match header"));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((ScalarField::from_values(grid, values)?, time))
    }
}

const MAGIC: &[u8; 4] = b"KSFD";
const FORMAT_VERSION: u32 = 1;

pub(crate) fn norm(k: &[f64]) -> f64 {
    k.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// sqrt(V/N^{2n} Σ |weight(|k|)·ĉ_k|²)
pub(crate) fn spectral_l2(
    grid: &Grid,
    coefs: &[Complex64],
    weight: impl Fn(f64) -> f64 + Sync,
) -> f64 {
    let n = grid.dim();
    let sum: f64 = coefs
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0; n],
            |k, (i, c)| {
                grid.wavevector(i, k);
                let w = weight(norm(k));
                w * w * c.norm_sqr()
            },
        )
        .sum();
    let npts = grid.len() as f64;
    (grid.volume() * sum).sqrt() / npts
}

#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| Error::InvalidParameter("vector field needs components".into()))?
            .grid();
        for c in &components {
            grid.same_as(c.grid())?;
        }
        if components.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                grid.dim()
            )));
        }
        Ok(VectorField { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values[i] * c.values[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    /// (Σ_j ‖v_j‖²)^{1/2} by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral divergence.
    pub fn divergence(&self) -> ScalarField {
        let grid = self.grid;
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        let n = grid.dim();
        for (j, c) in self.components.iter().enumerate() {
            acc.par_iter_mut()
                .zip(c.spectral().par_iter())
                .enumerate()
                .for_each_init(
                    || vec![0.0; n],
                    |k, (i, (a, v))| {
                        if !grid.is_nyquist(i, j) {
                            grid.wavevector(i, k);
                            *a += v * Complex64::new(0.0, k[j]);
                        }
                    },
                );
        }
        ScalarField {
            grid,
            values: fft::inverse_real(&grid, acc),
            spectral: OnceLock::new(),
        }
    }

    /// Pointwise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        self.grid.same_as(&other.grid)?;
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                self.components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| a.values[i] * b.values[i])
                    .sum()
            })
            .collect();
        ScalarField::from_values(self.grid, values)
    }
}
