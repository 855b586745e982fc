//! Certification sweeps over the shipped test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SweepSettings;
use crate::error::Result;
use crate::inequality::{
    chain_constant, chain_constant_closed, verify_bilinear, verify_pointwise, young_sweep,
    CertificateReport, TestFunctionFamily,
};
use crate::params::Params;

/// Screening lengths and exponents of the bump grid.
pub const BUMP_A_VALUES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const BUMP_DELTA_VALUES: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];

/// `count` radii spaced logarithmically over three decades centred on `a`.
pub fn radii_around(a: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| a * 10f64.powf(-1.5 + 3.0 * i as f64 / (count - 1) as f64))
        .collect()
}

/// Largest gap between the two forms of the chain constant over a δ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantIdentity {
    pub samples: usize,
    pub max_abs_diff: f64,
    pub worst_case: String,
}

pub fn constant_identity(dimensions: &[usize], steps: usize) -> ConstantIdentity {
    let mut out = ConstantIdentity {
        samples: 0,
        max_abs_diff: 0.0,
        worst_case: String::new(),
    };
    for &n in dimensions {
        for i in 1..steps {
            let delta = -1.0 + 2.0 * i as f64 / steps as f64;
            let diff = (chain_constant(n, delta) - chain_constant_closed(n, delta)).abs();
            out.samples += 1;
            if diff > out.max_abs_diff || out.worst_case.is_empty() {
                out.max_abs_diff = out.max_abs_diff.max(diff);
                out.worst_case = format!("n={n} delta={delta}");
            }
        }
    }
    out
}

/// One report per inequality plus the per-group breakdown behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub pointwise: CertificateReport,
    pub bilinear: CertificateReport,
    pub young: CertificateReport,
    pub bilinear_bump_grid: CertificateReport,
    pub bilinear_splines: CertificateReport,
    pub bilinear_families: CertificateReport,
    pub constant_identity: ConstantIdentity,
}

impl Certificates {
    pub fn pass(&self) -> bool {
        self.pointwise.pass && self.bilinear.pass && self.young.pass
    }
}

fn merged(reports: &[CertificateReport], what: &str) -> CertificateReport {
    CertificateReport::merge(reports).unwrap_or_else(|| panic!("{what}: empty sweep"))
}

/// Runs every cell in parallel. Results are gathered in cell order, so the
/// output does not depend on scheduling.
pub fn certification_sweep(settings: &SweepSettings, seed: u64) -> Result<Certificates> {
    let families = TestFunctionFamily::shipped(seed);
    let built = families
        .iter()
        .map(|f| f.build())
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for fi in 0..built.len() {
        for &n in &settings.dimensions {
            for &a in &settings.a_values {
                cells.push((fi, Params::new(n, a, 1.0)?));
            }
        }
    }
    let pointwise: Vec<CertificateReport> = cells
        .par_iter()
        .map(|(fi, p)| verify_pointwise(built[*fi].as_ref(), p, &radii_around(p.a, settings.radii)))
        .collect();

    let mut family_cells = Vec::new();
    for (fi, p) in &cells {
        for &d in &settings.delta_values {
            family_cells.push((*fi, *p, d));
        }
    }
    let families_rep = family_cells
        .par_iter()
        .map(|(fi, p, d)| verify_bilinear(built[*fi].as_ref(), p, *d))
        .collect::<Result<Vec<_>>>()?;

    let bump = TestFunctionFamily::Bump {
        support: 1.0,
        depth: 1.0,
        sharpness: 1.0,
    }
    .build()?;
    let grid: Vec<(f64, f64)> = BUMP_A_VALUES
        .iter()
        .flat_map(|&a| BUMP_DELTA_VALUES.iter().map(move |&d| (a, d)))
        .collect();
    let bump_rep = grid
        .par_iter()
        .map(|&(a, d)| verify_bilinear(bump.as_ref(), &Params::new(2, a, 1.0)?, d))
        .collect::<Result<Vec<_>>>()?;

    let spline_params = Params::new(2, 1.0, 1.0)?;
    let spline_rep = (0..settings.spline_samples as u64)
        .into_par_iter()
        .map(|s| {
            let f = TestFunctionFamily::RandomMonotoneSpline {
                support: 1.0,
                knots: 8,
                depth: 1.0,
                seed: seed.wrapping_add(s),
            }
            .build()?;
            verify_bilinear(f.as_ref(), &spline_params, 0.25)
        })
        .collect::<Result<Vec<_>>>()?;

    let bilinear_bump_grid = merged(&bump_rep, "bump grid");
    let bilinear_splines = merged(&spline_rep, "splines");
    let bilinear_families = merged(&families_rep, "families");
    let bilinear = merged(
        &[
            bilinear_bump_grid.clone(),
            bilinear_splines.clone(),
            bilinear_families.clone(),
        ],
        "bilinear",
    );
    Ok(Certificates {
        pointwise: merged(&pointwise, "pointwise"),
        bilinear,
        young: young_sweep(settings.young_samples, 10.0, seed),
        bilinear_bump_grid,
        bilinear_splines,
        bilinear_families,
        constant_identity: constant_identity(&settings.dimensions, 200),
    })
}
