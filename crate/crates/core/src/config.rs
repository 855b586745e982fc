//! Declarative experiment configuration (TOML).
//!
//! Parsing walks the document by hand rather than through a derived
//! deserializer so that every problem (unknown keys, missing keys, bad
//! values, failed range checks) is reported in one pass.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inequality::TestFunctionFamily;
use crate::params::Params;
use crate::profile::{Bump, RadialFunction, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NdRun,
    RadialRun,
    InequalitySweep,
    LimitReport,
}

impl Mode {
    fn parse(s: &str) -> Option<Mode> {
        Some(match s {
            "nd_run" => Mode::NdRun,
            "radial_run" => Mode::RadialRun,
            "inequality_sweep" => Mode::InequalitySweep,
            "limit_report" => Mode::LimitReport,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::NdRun => "nd_run",
            Mode::RadialRun => "radial_run",
            Mode::InequalitySweep => "inequality_sweep",
            Mode::LimitReport => "limit_report",
        }
    }
}

/// Initial data for the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Bump {
        support: f64,
        depth: f64,
        sharpness: f64,
    },
    SmoothedStep {
        r0: f64,
        width: f64,
        depth: f64,
    },
    PiecewiseLinearSmoothed {
        r0: f64,
        r1: f64,
        depth: f64,
        smoothing: f64,
    },
    RandomMonotoneSpline {
        support: f64,
        knots: usize,
        depth: f64,
    },
    /// Two-column CSV (r, rho).
    ProfileCsv {
        path: PathBuf,
    },
}

struct ZeroProfile;

impl RadialFunction for ZeroProfile {
    fn value(&self, _: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _: f64) -> f64 {
        0.0
    }
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl InitialData {
    pub fn build(&self, seed: u64) -> Result<Box<dyn RadialFunction>> {
        Ok(match self {
            InitialData::Zero => Box::new(ZeroProfile),
            InitialData::Bump {
                support,
                depth,
                sharpness,
            } => Box::new(Bump::new(*support, *depth, *sharpness)?),
            InitialData::SmoothedStep { r0, width, depth } => TestFunctionFamily::SmoothedStep {
                r0: *r0,
                width: *width,
                depth: *depth,
            }
            .build()?,
            InitialData::PiecewiseLinearSmoothed {
                r0,
                r1,
                depth,
                smoothing,
            } => TestFunctionFamily::PiecewiseLinearSmoothed {
                r0: *r0,
                r1: *r1,
                depth: *depth,
                smoothing: *smoothing,
            }
            .build()?,
            InitialData::RandomMonotoneSpline {
                support,
                knots,
                depth,
            } => TestFunctionFamily::RandomMonotoneSpline {
                support: *support,
                knots: *knots,
                depth: *depth,
                seed,
            }
            .build()?,
            InitialData::ProfileCsv { path } => Box::new(RadialProfile::read_csv(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSettings {
    pub markers: usize,
    pub cluster: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub t_max: f64,
    pub gradient_factor: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Snapshot cadence in steps (0: first and last only).
    pub snapshot_every: usize,
    pub hs_orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub dimensions: Vec<usize>,
    pub a_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub radii: usize,
    pub spline_samples: usize,
    pub young_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub params: Params,
    pub delta: f64,
    /// Radius L of the ball holding the initial support.
    pub support: f64,
    pub initial: InitialData,
    /// Centre of the initial data for n-D runs.
    pub center: Vec<f64>,
    pub grid: GridSettings,
    pub radial: RadialSettings,
    pub stop: StopCriteria,
    pub output: OutputSettings,
    pub sweep: SweepSettings,
    /// Screening lengths for limit_report.
    pub limit_a_values: Vec<f64>,
}

impl ExperimentConfig {
    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.params.n, self.grid.half_width, self.grid.points)
    }
}

/// Reads typed keys out of one table and remembers which keys were used.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, table: Option<&'a Table>) -> Self {
        Section {
            name,
            table,
            used: Vec::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &'static str, default: Option<f64>, errs: &mut Vec<String>) -> f64 {
        match self.raw(key) {
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                errs.push(format!(
                    "{}: expected a number, got {}",
                    self.path(key),
                    other.type_str()
                ));
                default.unwrap_or(f64::NAN)
            }
            None => default.unwrap_or_else(|| {
                errs.push(format!("missing required key {}", self.path(key)));
                f64::NAN
            }),
        }
    }

    fn uint(&mut self, key: &'static str, default: Option<u64>, errs: &mut Vec<String>) -> u64 {
        match self.raw(key) {
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(other) => {
                errs.push(format!(
                    "{}: expected a nonnegative integer, got {other}",
                    self.path(key)
                ));
                default.unwrap_or(0)
            }
            None => default.unwrap_or_else(|| {
                errs.push(format!("missing required key {}", self.path(key)));
                0
            }),
        }
    }

    fn string(
        &mut self,
        key: &'static str,
        default: Option<&str>,
        errs: &mut Vec<String>,
    ) -> String {
        match self.raw(key) {
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                errs.push(format!(
                    "{}: expected a string, got {}",
                    self.path(key),
                    other.type_str()
                ));
                default.unwrap_or_default().to_string()
            }
            None => match default {
                Some(d) => d.to_string(),
                None => {
                    errs.push(format!("missing required key {}", self.path(key)));
                    String::new()
                }
            },
        }
    }

    fn floats(&mut self, key: &'static str, default: &[f64], errs: &mut Vec<String>) -> Vec<f64> {
        match self.raw(key) {
            Some(Value::Array(items)) => items
                .iter()
                .filter_map(|v| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(x) => Some(*x as f64),
                    other => {
                        errs.push(format!(
                            "{}: expected numbers, found {}",
                            self.path(key),
                            other.type_str()
                        ));
                        None
                    }
                })
                .collect(),
            Some(other) => {
                errs.push(format!(
                    "{}: expected an array, got {}",
                    self.path(key),
                    other.type_str()
                ));
                default.to_vec()
            }
            None => default.to_vec(),
        }
    }

    fn unknown(&self, errs: &mut Vec<String>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(&key.as_str()) {
                    errs.push(format!("unknown key {}", self.path(key)));
                }
            }
        }
    }
}

const SECTIONS: [&str; 9] = [
    "params", "grid", "radial", "initial", "blowup", "stop", "output", "sweep", "limit",
];

fn sub_table<'a>(root: &'a Table, name: &str, errs: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Some(t),
        Some(other) => {
            errs.push(format!(
                "{name}: expected a table, got {}",
                other.type_str()
            ));
            None
        }
        None => None,
    }
}

/// Parses and validates a configuration document, collecting every error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_with_mode(text, None)
}

/// Like [`parse_config`], but runs the document's [sweep] section whatever
/// its mode says.
pub fn parse_sweep_config(text: &str) -> Result<ExperimentConfig> {
    parse_with_mode(text, Some(Mode::InequalitySweep))
}

fn parse_with_mode(text: &str, forced: Option<Mode>) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(vec![format!("malformed document: {}", e.message())])
    })?;
    let mut errs = Vec::new();

    let mut top = Section::new("", Some(&root));
    let mode_name = top.string("mode", None, &mut errs);
    let mode = Mode::parse(&mode_name);
    if mode.is_none() && !mode_name.is_empty() {
        errs.push(format!(
            "mode: unknown mode {mode_name:?} (expected nd_run, radial_run, inequality_sweep or limit_report)"
        ));
    }
    let mode = forced.or(mode).unwrap_or(Mode::NdRun);
    let seed = top.uint("seed", Some(0), &mut errs);
    top.used.extend(SECTIONS);
    top.unknown(&mut errs);

    let mut p = Section::new("params", sub_table(&root, "params", &mut errs));
    let n = p.uint("n", None, &mut errs) as usize;
    let a = p.float("a", None, &mut errs);
    let g = p.float("g", Some(1.0), &mut errs);
    p.unknown(&mut errs);
    let params = Params { n, a, g };
    if n != 0 && a.is_finite() {
        if let Err(e) = params.validate() {
            errs.push(format!("params: {e}"));
        }
    }

    let mut gs = Section::new("grid", sub_table(&root, "grid", &mut errs));
    let grid = GridSettings {
        half_width: gs.float("half_width", Some(4.0), &mut errs),
        points: gs.uint("points", Some(256), &mut errs) as usize,
    };
    gs.unknown(&mut errs);
    if matches!(mode, Mode::NdRun | Mode::LimitReport) && n >= 1 {
        if let Err(e) = Grid::new(n, grid.half_width, grid.points) {
            errs.push(format!("grid: {e}"));
        }
    }

    let mut rs = Section::new("radial", sub_table(&root, "radial", &mut errs));
    let radial = RadialSettings {
        markers: rs.uint("markers", Some(512), &mut errs) as usize,
        cluster: rs.float("cluster", Some(0.9), &mut errs),
    };
    rs.unknown(&mut errs);
    if radial.markers < 2 {
        errs.push("radial.markers: need at least 2".into());
    }
    if !(radial.cluster >= 0.0 && radial.cluster < 1.0) {
        errs.push(format!(
            "radial.cluster: must lie in [0, 1), got {}",
            radial.cluster
        ));
    }

    let mut is = Section::new("initial", sub_table(&root, "initial", &mut errs));
    let kind = is.string("kind", Some("bump"), &mut errs);
    let initial = match kind.as_str() {
        "zero" => InitialData::Zero,
        "bump" => InitialData::Bump {
            support: is.float("support", Some(1.0), &mut errs),
            depth: is.float("depth", Some(1.0), &mut errs),
            sharpness: is.float("sharpness", Some(1.0), &mut errs),
        },
        "smoothed_step" => InitialData::SmoothedStep {
            r0: is.float("r0", Some(0.5), &mut errs),
            width: is.float("width", Some(0.05), &mut errs),
            depth: is.float("depth", Some(1.0), &mut errs),
        },
        "piecewise_linear_smoothed" => InitialData::PiecewiseLinearSmoothed {
            r0: is.float("r0", Some(0.2), &mut errs),
            r1: is.float("r1", Some(0.8), &mut errs),
            depth: is.float("depth", Some(1.0), &mut errs),
            smoothing: is.float("smoothing", Some(0.005), &mut errs),
        },
        "random_monotone_spline" => InitialData::RandomMonotoneSpline {
            support: is.float("support", Some(1.0), &mut errs),
            knots: is.uint("knots", Some(8), &mut errs) as usize,
            depth: is.float("depth", Some(1.0), &mut errs),
        },
        "profile_csv" => InitialData::ProfileCsv {
            path: PathBuf::from(is.string("path", None, &mut errs)),
        },
        other => {
            errs.push(format!("initial.kind: unknown initial data {other:?}"));
            InitialData::Zero
        }
    };
    let center = is.floats("center", &vec![0.0; n.max(1)], &mut errs);
    is.unknown(&mut errs);
    if center.len() != n && n > 0 {
        errs.push(format!(
            "initial.center: needs {n} coordinates, got {}",
            center.len()
        ));
    }
    let built = match &initial {
        // the file may not exist yet at validation time
        InitialData::ProfileCsv { .. } => None,
        other => match other.build(seed) {
            Ok(f) => Some(f),
            Err(e) => {
                errs.push(format!("initial: {e}"));
                None
            }
        },
    };

    let mut bs = Section::new("blowup", sub_table(&root, "blowup", &mut errs));
    let delta = bs.float("delta", Some(0.25), &mut errs);
    let default_support = built
        .as_ref()
        .map(|f| f.support_end())
        .filter(|&r| r > 0.0)
        .unwrap_or(1.0);
    let support = bs.float("support", Some(default_support), &mut errs);
    bs.unknown(&mut errs);
    if matches!(mode, Mode::NdRun | Mode::RadialRun) && !(delta > 0.0 && delta < 1.0) {
        errs.push(format!(
            "blowup.delta: must lie in (0, 1) for the blow-up functional, got {delta}"
        ));
    }
    if !(support > 0.0 && support.is_finite()) {
        errs.push(format!("blowup.support: must be positive, got {support}"));
    }

    let mut ss = Section::new("stop", sub_table(&root, "stop", &mut errs));
    let (default_cfl, default_dt_max) = match mode {
        Mode::RadialRun => (0.4, 0.05),
        _ => (0.5, 0.05),
    };
    let stop = StopCriteria {
        t_max: ss.float("t_max", Some(20.0), &mut errs),
        gradient_factor: ss.float("gradient_factor", Some(50.0), &mut errs),
        dt_min: ss.float("dt_min", Some(1e-8), &mut errs),
        dt_max: ss.float("dt_max", Some(default_dt_max), &mut errs),
        cfl: ss.float("cfl", Some(default_cfl), &mut errs),
    };
    ss.unknown(&mut errs);
    if !(stop.t_max > 0.0) {
        errs.push(format!("stop.t_max: must be positive, got {}", stop.t_max));
    }
    if !(stop.gradient_factor > 1.0) {
        errs.push(format!(
            "stop.gradient_factor: must exceed 1, got {}",
            stop.gradient_factor
        ));
    }
    if !(stop.dt_min > 0.0 && stop.dt_max >= stop.dt_min) {
        errs.push(format!(
            "stop: need 0 < dt_min <= dt_max, got {} and {}",
            stop.dt_min, stop.dt_max
        ));
    }
    if !(stop.cfl > 0.0 && stop.cfl < 1.0) {
        errs.push(format!("stop.cfl: must lie in (0, 1), got {}", stop.cfl));
    }

    let mut os = Section::new("output", sub_table(&root, "output", &mut errs));
    let output = OutputSettings {
        dir: PathBuf::from(os.string("dir", Some(&format!("out/{}", mode.name())), &mut errs)),
        snapshot_every: os.uint("snapshot_every", Some(50), &mut errs) as usize,
        hs_orders: os.floats("hs_orders", &[1.0, 2.0], &mut errs),
    };
    os.unknown(&mut errs);
    if output.hs_orders.iter().any(|s| !(*s >= 0.0)) {
        errs.push("output.hs_orders: orders must be nonnegative".into());
    }

    let mut sw = Section::new("sweep", sub_table(&root, "sweep", &mut errs));
    let sweep = SweepSettings {
        dimensions: sw
            .floats("dimensions", &[2.0, 3.0], &mut errs)
            .into_iter()
            .map(|v| v as usize)
            .collect(),
        a_values: sw.floats("a_values", &[0.1, 1.0, 10.0], &mut errs),
        delta_values: sw.floats("delta_values", &[-0.5, 0.0, 0.5], &mut errs),
        radii: sw.uint("radii", Some(20), &mut errs) as usize,
        spline_samples: sw.uint("spline_samples", Some(100), &mut errs) as usize,
        young_samples: sw.uint("young_samples", Some(100_000), &mut errs) as usize,
    };
    sw.unknown(&mut errs);
    let mut ls = Section::new("limit", sub_table(&root, "limit", &mut errs));
    let limit_a_values = ls.floats(
        "a_values",
        &[0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0],
        &mut errs,
    );
    ls.unknown(&mut errs);
    if mode == Mode::InequalitySweep {
        if sweep.dimensions.iter().any(|&d| d < 2) {
            errs.push("sweep.dimensions: need n >= 2".into());
        }
        if sweep.a_values.iter().any(|&v| !(v > 0.0)) {
            errs.push("sweep.a_values: screening lengths must be positive".into());
        }
        if sweep.delta_values.iter().any(|&d| !(d > -1.0 && d < 1.0)) {
            errs.push("sweep.delta_values: delta must lie in (-1, 1)".into());
        }
    }
    if mode == Mode::LimitReport
        && (limit_a_values.iter().any(|&v| !(v >= 0.0))
            || limit_a_values.windows(2).any(|w| w[1] <= w[0]))
    {
        errs.push("limit.a_values: must be nonnegative and strictly increasing".into());
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok(ExperimentConfig {
        mode,
        seed,
        params,
        delta,
        support,
        initial,
        center,
        grid,
        radial,
        stop,
        output,
        sweep,
        limit_a_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collects_every_error() {
        let err = parse_config(
            r#"
            mode = "nd_run"
            delta_ = 1
            [params]
            n = 2
            [blowup]
            delta = 1.5
            "#,
        )
        .unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.iter().any(|e| e.contains("delta_")), "{list:?}");
        assert!(list.iter().any(|e| e.contains("params.a")), "{list:?}");
        assert!(list.iter().any(|e| e.contains("(0, 1)")), "{list:?}");
    }
}
