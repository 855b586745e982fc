//! Executes an [`ExperimentConfig`] and writes its artifacts plus a manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode};
use crate::diagnostics::{
    merge_checks, predict_blowup_time, riccati_check, riccati_rate, BlowupConfig, CheckResult,
    DiagnosticsSeries, RiccatiReport,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::nd_dynamics::{run_nd, NdRunOptions, NdStopReason};
use crate::profile::RadialFunction;
use crate::radial_dynamics::{
    derivative_along_flow, run_radial, RadialRunOptions, RadialStopReason,
};
use crate::sweep::certification_sweep;
use crate::transform::limit_report;

/// Records with spectral_tail at or below this count as resolved.
pub const RESOLVED_TAIL: f64 = 1e-3;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GRADIENT_THRESHOLD: i32 = 10;
pub const EXIT_DT_UNDERFLOW: i32 = 11;
pub const EXIT_MARKERS_COLLIDED: i32 = 12;
pub const EXIT_NONFINITE: i32 = 13;
pub const EXIT_CERTIFICATE_FAILED: i32 = 20;

/// Exit status for an error raised before or during a run.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::NonFinite { .. } => EXIT_NONFINITE,
        _ => EXIT_CONFIG,
    }
}

fn nd_exit(reason: NdStopReason) -> i32 {
    match reason {
        NdStopReason::TimeLimit => EXIT_CLEAN,
        NdStopReason::GradientThreshold => EXIT_GRADIENT_THRESHOLD,
        NdStopReason::DtUnderflow => EXIT_DT_UNDERFLOW,
        NdStopReason::Nonfinite => EXIT_NONFINITE,
    }
}

fn radial_exit(reason: RadialStopReason) -> i32 {
    match reason {
        RadialStopReason::TimeLimit => EXIT_CLEAN,
        RadialStopReason::GradientThreshold => EXIT_GRADIENT_THRESHOLD,
        RadialStopReason::MarkersCollided => EXIT_MARKERS_COLLIDED,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
    pub stop_reason: Option<String>,
    pub steps: Option<usize>,
    /// T* = 1/(c·I(0)) from the Riccati inequality.
    pub predicted_blowup_bound: Option<f64>,
    pub threshold_time: Option<f64>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

struct Writer {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Writer {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for a new output, creating parent directories.
    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(PathBuf::from(rel));
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let p = self.path(rel)?;
        let text = serde_json::to_string_pretty(value).expect("serialisable report");
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn entries(&self) -> Result<Vec<OutputEntry>> {
        let mut out: Vec<OutputEntry> = self
            .files
            .iter()
            .map(|rel| {
                let p = self.root.join(rel);
                let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
                Ok(OutputEntry {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    bytes: bytes.len() as u64,
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<_>>()?;
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Whitespace-separated columns under a `#` header, readable by gnuplot.
pub fn gnuplot_table(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    s.push_str("# ");
    s.push_str(&header.join(" "));
    s.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn series_table(series: &DiagnosticsSeries) -> String {
    let orders: Vec<f64> = series
        .records
        .first()
        .map(|r| r.hs.iter().map(|p| p.0).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["t", "dt", "sup_grad", "l2"].map(String::from).to_vec();
    header.extend(orders.iter().map(|s| format!("hs_{s}")));
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
    let rows: Vec<Vec<f64>> = series
        .records
        .iter()
        .map(|r| {
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
            row
        })
        .collect();
    gnuplot_table(&header, &rows)
}

fn write_series(w: &mut Writer, series: &DiagnosticsSeries) -> Result<()> {
    let p = w.path("series.csv")?;
    series.write_csv(&p)?;
    w.text("series.dat", &series_table(series))
}

/// Initial field on the configured grid, translated by `center`.
pub fn initial_field(cfg: &ExperimentConfig, f: &dyn RadialFunction) -> Result<ScalarField> {
    let grid = cfg.grid()?;
    let c = cfg.center.clone();
    Ok(ScalarField::from_fn(grid, move |x| {
        let r2: f64 = x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
        f.value(r2.sqrt())
    }))
}

pub fn nd_options(cfg: &ExperimentConfig) -> NdRunOptions {
    NdRunOptions {
        cfl: cfg.stop.cfl,
        t_max: cfg.stop.t_max,
        dt_min: cfg.stop.dt_min,
        dt_max: cfg.stop.dt_max,
        gradient_factor: cfg.stop.gradient_factor,
        hs_orders: cfg.output.hs_orders.clone(),
        delta: cfg.delta,
        support: cfg.support,
        snapshot_every: cfg.output.snapshot_every,
        ..NdRunOptions::default()
    }
}

pub fn radial_options(cfg: &ExperimentConfig) -> RadialRunOptions {
    RadialRunOptions {
        markers: cfg.radial.markers,
        cluster: cfg.radial.cluster,
        cfl: cfg.stop.cfl,
        t_max: cfg.stop.t_max,
        dt_max: cfg.stop.dt_max,
        gradient_factor: cfg.stop.gradient_factor,
        snapshot_every: cfg.output.snapshot_every,
        delta: cfg.delta,
        ..RadialRunOptions::default()
    }
}

/// Leading records whose spectral tail stays at or below [`RESOLVED_TAIL`].
pub fn resolved_window(series: &DiagnosticsSeries) -> DiagnosticsSeries {
    DiagnosticsSeries {
        records: series
            .records
            .iter()
            .take_while(|r| r.spectral_tail <= RESOLVED_TAIL)
            .cloned()
            .collect(),
    }
}

#[derive(Serialize)]
struct RiccatiFile {
    full: Option<RiccatiReport>,
    resolved: Option<RiccatiReport>,
    resolved_until: Option<f64>,
}

#[derive(Serialize)]
struct StructureFile<'a> {
    window_factor: f64,
    summary: Vec<CheckResult>,
    by_time: &'a [(f64, Vec<CheckResult>)],
}

struct Summary {
    exit_code: i32,
    stop_reason: Option<String>,
    steps: Option<usize>,
    predicted: Option<f64>,
    threshold_time: Option<f64>,
}

impl Summary {
    fn clean() -> Self {
        Summary {
            exit_code: EXIT_CLEAN,
            stop_reason: None,
            steps: None,
            predicted: None,
            threshold_time: None,
        }
    }
}

fn prediction(series: &DiagnosticsSeries, cfg: &BlowupConfig) -> Option<f64> {
    let i0 = series.records.first()?.i_delta;
    let rate = riccati_rate(cfg).ok()?;
    predict_blowup_time(i0, rate).ok()
}

fn nd_run(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Summary> {
    let f = cfg.initial.build(cfg.seed)?;
    let field = initial_field(cfg, f.as_ref())?;
    let opts = nd_options(cfg);
    log::info!("n-D run on {} points per axis", cfg.grid.points);
    let run = run_nd(&field, &cfg.params, &opts)?;
    log::info!("stopped after {} steps: {:?}", run.steps, run.stop_reason);
    write_series(w, &run.series)?;
    for (i, (t, snap)) in run.snapshots.iter().enumerate() {
        let p = w.path(&format!("snapshots/snapshot_{i:05}.bin"))?;
        snap.write_binary(&p, *t)?;
    }
    w.json(
        "structure.json",
        &StructureFile {
            window_factor: opts.structure_window,
            summary: merge_checks(&run.structure),
            by_time: &run.structure,
        },
    )?;
    let bcfg = BlowupConfig::new(cfg.delta, cfg.support, cfg.params)?;
    let resolved = resolved_window(&run.series);
    w.json(
        "riccati.json",
        &RiccatiFile {
            full: riccati_check(&run.series, &bcfg).ok(),
            resolved: riccati_check(&resolved, &bcfg).ok(),
            resolved_until: resolved.last().map(|r| r.t),
        },
    )?;
    let threshold = run.stop_reason == NdStopReason::GradientThreshold;
    Ok(Summary {
        exit_code: nd_exit(run.stop_reason),
        stop_reason: Some(stop_name(&run.stop_reason)),
        steps: Some(run.steps),
        predicted: prediction(&run.series, &bcfg),
        threshold_time: threshold.then(|| run.final_state.time),
    })
}

fn radial_run(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Summary> {
    let f = cfg.initial.build(cfg.seed)?;
    let opts = radial_options(cfg);
    log::info!("radial run with {} markers", opts.markers);
    let run = run_radial(f.as_ref(), &cfg.params, &opts)?;
    log::info!("stopped after {} steps: {:?}", run.steps, run.stop_reason);
    write_series(w, &run.series)?;
    let mut index = Vec::new();
    for (i, (t, prof)) in run.snapshots.iter().enumerate() {
        let rel = format!("profiles/profile_{i:05}.csv");
        let p = w.path(&rel)?;
        prof.write_csv(&p)?;
        index.push(vec![i as f64, *t]);
    }
    w.text(
        "profiles/index.dat",
        &gnuplot_table(&["index".into(), "t".into()], &index),
    )?;
    w.json(
        "flow_derivative.json",
        &derivative_along_flow(&run, f.as_ref(), 0.9),
    )?;
    let support = f.support_end();
    let bcfg = BlowupConfig::new(
        cfg.delta,
        if support > 0.0 { support } else { 1.0 },
        cfg.params,
    )?;
    w.json(
        "riccati.json",
        &RiccatiFile {
            full: riccati_check(&run.series, &bcfg).ok(),
            resolved: None,
            resolved_until: None,
        },
    )?;
    let threshold = run.stop_reason == RadialStopReason::GradientThreshold;
    Ok(Summary {
        exit_code: radial_exit(run.stop_reason),
        stop_reason: Some(stop_name(&run.stop_reason)),
        steps: Some(run.steps),
        predicted: prediction(&run.series, &bcfg),
        threshold_time: threshold.then(|| run.final_state.time),
    })
}

fn sweep_run(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Summary> {
    let certs = certification_sweep(&cfg.sweep, cfg.seed)?;
    w.json("certificates.json", &certs)?;
    for rep in [&certs.pointwise, &certs.bilinear, &certs.young] {
        w.json(&format!("{}.json", rep.inequality), rep)?;
    }
    let mut s = Summary::clean();
    if !certs.pass() {
        s.exit_code = EXIT_CERTIFICATE_FAILED;
    }
    Ok(s)
}

fn limit_run(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Summary> {
    let f = cfg.initial.build(cfg.seed)?;
    let field = initial_field(cfg, f.as_ref())?;
    let rep = limit_report(&field, &cfg.limit_a_values)?;
    let p = w.path("limit_report.csv")?;
    rep.write_csv(&p)?;
    let rows: Vec<Vec<f64>> = (0..rep.a_values.len())
        .map(|i| vec![rep.a_values[i], rep.riesz_gap[i], rep.zero_gap[i]])
        .collect();
    w.text(
        "limit_report.dat",
        &gnuplot_table(&["a".into(), "riesz_gap".into(), "zero_gap".into()], &rows),
    )?;
    Ok(Summary::clean())
}

fn stop_name<T: Serialize>(reason: &T) -> String {
    serde_json::to_value(reason)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Runs the configured mode, writing everything under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut w = Writer::new(out_dir)?;
    w.text("config.toml", &cfg.to_toml())?;
    let summary = match cfg.mode {
        Mode::NdRun => nd_run(cfg, &mut w)?,
        Mode::RadialRun => radial_run(cfg, &mut w)?,
        Mode::InequalitySweep => sweep_run(cfg, &mut w)?,
        Mode::LimitReport => limit_run(cfg, &mut w)?,
    };
    let manifest = Manifest {
        mode: cfg.mode.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        exit_code: summary.exit_code,
        stop_reason: summary.stop_reason,
        steps: summary.steps,
        predicted_blowup_bound: summary.predicted,
        threshold_time: summary.threshold_time,
        outputs: w.entries()?,
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut file = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("serialisable manifest");
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(RunOutcome {
        exit_code: summary.exit_code,
        manifest,
        manifest_path,
    })
}
