//! File formats and command implementations behind the `jetconvex` binary.
//!
//! Commands write their primary output to the supplied writer and return
//! the process exit code; hard errors (I/O, malformed input) come back as
//! `Err` and map to exit code 1.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use jetconvex_core::jet::ValidationStatus;
use jetconvex_core::modulus::{omega0_closed, GapProfile, ModulusModel, DEFAULT_NODES};
use jetconvex_core::verify::{self, CheckReport, Sampler};
use jetconvex_core::{
    build_modulus, build_pipeline, compute_slack, validate, DomainBox, EvalMode, ExtensionConfig, ExtensionModel,
    JetDataset, JetPoint, Tolerances, ValidationReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATES_C: i32 = 2;
pub const EXIT_VIOLATES_CW1: i32 = 3;
/// A gated property check failed.
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetRecord {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetFileV1 {
    pub version: u32,
    pub dim: usize,
    pub points: Vec<JetRecord>,
}

impl JetFileV1 {
    pub fn from_dataset(ds: &JetDataset) -> Self {
        Self {
            version: FORMAT_VERSION,
            dim: ds.dim(),
            points: ds
                .points()
                .iter()
                .map(|p| JetRecord {
                    x: p.x.clone(),
                    f: p.f,
                    g: p.g.clone(),
                })
                .collect(),
        }
    }

    pub fn into_dataset(self) -> Result<JetDataset> {
        ensure!(self.version == FORMAT_VERSION, "unsupported jet file version {}", self.version);
        let records = self.points.into_iter().map(|r| JetPoint::new(r.x, r.f, r.g)).collect();
        Ok(JetDataset::new(records, self.dim)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFileV1 {
    pub version: u32,
    /// Built with `--force` despite a failed validation.
    pub forced: bool,
    pub validation: ValidationStatus,
    pub model: ExtensionModel,
}

pub fn read_jet_file(path: &Path) -> Result<JetDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: JetFileV1 = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.into_dataset().with_context(|| format!("loading {}", path.display()))
}

pub fn write_jet_file(path: &Path, ds: &JetDataset) -> Result<()> {
    let text = serde_json::to_string_pretty(&JetFileV1::from_dataset(ds))?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_model_file(path: &Path) -> Result<ModelFileV1> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ModelFileV1 = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    ensure!(file.version == FORMAT_VERSION, "unsupported model file version {}", file.version);
    Ok(file)
}

pub fn write_model_file(path: &Path, file: &ModelFileV1) -> Result<()> {
    let text = serde_json::to_string(file)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn exit_code_for(status: ValidationStatus) -> i32 {
    match status {
        ValidationStatus::Valid => EXIT_OK,
        ValidationStatus::ViolatesC => EXIT_VIOLATES_C,
        ValidationStatus::ViolatesCw1 => EXIT_VIOLATES_CW1,
    }
}

fn validation_report(ds: &JetDataset, tol: &Tolerances) -> Result<ValidationReport> {
    tol.check().map_err(anyhow::Error::msg)?;
    Ok(validate(&compute_slack(ds), tol, ds))
}

pub fn cmd_validate(jet: &Path, tol: &Tolerances, out: &mut dyn Write) -> Result<i32> {
    let ds = read_jet_file(jet)?;
    let report = validation_report(&ds, tol)?;
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(exit_code_for(report.status))
}

/// Parses `lo:hi`, one per axis.
pub fn parse_box(axes: &[String]) -> Result<DomainBox> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in axes {
        let (a, b) = axis
            .split_once(':')
            .with_context(|| format!("box axis `{axis}` is not of the form lo:hi"))?;
        lo.push(a.trim().parse::<f64>().with_context(|| format!("bad bound `{a}`"))?);
        hi.push(b.trim().parse::<f64>().with_context(|| format!("bad bound `{b}`"))?);
    }
    Ok(DomainBox::new(lo, hi)?)
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub domain_box: Option<DomainBox>,
    pub nodes: usize,
    pub t_max: Option<f64>,
    pub config: ExtensionConfig,
    pub tolerances: Tolerances,
    pub force: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            domain_box: None,
            nodes: DEFAULT_NODES,
            t_max: None,
            config: ExtensionConfig::default(),
            tolerances: Tolerances::default(),
            force: false,
        }
    }
}

/// Builds and writes a model. Invalid jets are refused with their
/// validation exit code unless `force` is set.
pub fn cmd_build(jet: &Path, opts: &BuildOptions, model_out: &Path, err: &mut dyn Write) -> Result<i32> {
    let ds = read_jet_file(jet)?;
    let report = validation_report(&ds, &opts.tolerances)?;
    if !report.is_valid() && !opts.force {
        writeln!(err, "refusing to build: jet is {} (use --force to override)", report.status.as_str())?;
        serde_json::to_writer_pretty(&mut *err, &report)?;
        writeln!(err)?;
        return Ok(exit_code_for(report.status));
    }
    let (model, _) = build_pipeline(
        &ds,
        &opts.tolerances,
        opts.nodes,
        opts.t_max,
        opts.domain_box.clone(),
        opts.config.clone(),
    )?;
    let file = ModelFileV1 {
        version: FORMAT_VERSION,
        forced: !report.is_valid(),
        validation: report.status,
        model,
    };
    write_model_file(model_out, &file)?;
    Ok(EXIT_OK)
}

/// Query rows from CSV; a first row with a non-numeric field is a header.
pub fn read_queries(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("parsing {}", path.display()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => bail!("{}: row {}: {e}", path.display(), line + 1),
        };
        ensure!(
            row.len() == dim,
            "{}: row {} has {} columns, expected {dim}",
            path.display(),
            line + 1,
            row.len()
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Writes one CSV row per query, in input order:
/// `x0.., lower, upper, [grad0..], status`. Rows without values leave the
/// value cells empty.
pub fn write_eval_csv(
    model: &ExtensionModel,
    rows: &[Vec<f64>],
    mode: EvalMode,
    grad: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let d = model.dataset().dim();
    let results = rows
        .par_iter()
        .map(|x| -> Result<Vec<String>> {
            let r = model.evaluate_with(x, mode)?;
            let mut cells: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            if r.status.has_values() {
                cells.push(fmt_f64(r.lower));
                cells.push(fmt_f64(r.upper));
                if grad {
                    cells.extend(model.gradient(x)?.into_iter().map(fmt_f64));
                }
            } else {
                let blanks = 2 + if grad { d } else { 0 };
                cells.extend(std::iter::repeat_n(String::new(), blanks));
            }
            cells.push(r.status.as_str().to_string());
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut writer = csv::WriterBuilder::new().from_writer(out);
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.push("lower".into());
    header.push("upper".into());
    if grad {
        header.extend((0..d).map(|k| format!("grad{k}")));
    }
    header.push("status".into());
    writer.write_record(&header)?;
    for row in results {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn cmd_eval(model_path: &Path, queries: &Path, mode: EvalMode, grad: bool, out: &mut dyn Write) -> Result<i32> {
    let model = read_model_file(model_path)?.model;
    let rows = read_queries(queries, model.dataset().dim())?;
    write_eval_csv(&model, &rows, mode, grad, out)?;
    Ok(EXIT_OK)
}

pub const SUITES: [&str; 8] = [
    "all",
    "interpolation",
    "gradients",
    "sandwich",
    "convexity",
    "lipschitz",
    "second-difference",
    "modulus",
];

pub fn run_suite(model: &ExtensionModel, suite: &str, sampler: &Sampler) -> Result<Vec<CheckReport>> {
    let reports = match suite {
        "all" => verify::run_all(model, sampler)?,
        "interpolation" => vec![verify::check_interpolation(model)?],
        "gradients" => vec![verify::check_gradients(model, 1e-4 * model.data_scale())?],
        "sandwich" => vec![verify::check_sandwich(model, sampler)?],
        "convexity" => vec![verify::check_convexity(model, sampler)?],
        "lipschitz" => vec![verify::check_lipschitz(model, sampler)?],
        "second-difference" => {
            let mut r = vec![
                verify::check_second_difference(model, sampler)?,
                verify::second_difference_diagnostic(model, sampler)?,
            ];
            if model.dataset().dim() == 1 {
                r.push(verify::check_second_difference_1d(model, 1e-3, sampler)?);
            }
            r
        }
        "modulus" => vec![verify::check_modulus_chain(model, sampler)?],
        other => bail!("unknown suite `{other}` (expected one of {})", SUITES.join(", ")),
    };
    Ok(reports)
}

pub fn cmd_check(model_path: &Path, suite: &str, sampler: &Sampler, out: &mut dyn Write) -> Result<i32> {
    if !SUITES.contains(&suite) {
        bail!("unknown suite `{suite}` (expected one of {})", SUITES.join(", "));
    }
    let model = read_model_file(model_path)?.model;
    let reports = run_suite(&model, suite, sampler)?;
    serde_json::to_writer_pretty(&mut *out, &reports)?;
    writeln!(out)?;
    Ok(if reports.iter().all(CheckReport::ok) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusRange {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub steps: usize,
}

/// Either file kind: a model carries its own modulus, a jet gets one built
/// with default settings.
fn modulus_source(path: &Path) -> Result<(JetDataset, ModulusModel)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("model").is_some() {
        let file = read_model_file(path)?;
        let m = file.model;
        Ok((m.dataset().clone(), m.modulus().clone()))
    } else {
        let ds = read_jet_file(path)?;
        let profile = GapProfile::from_slack(&compute_slack(&ds), ds.data_scale(), &Tolerances::default());
        let modulus = build_modulus(&profile, DEFAULT_NODES, None)?;
        Ok((ds, modulus))
    }
}

/// `steps + 1` evenly spaced rows from `t_min` to `t_max`.
pub fn cmd_modulus(path: &Path, range: &ModulusRange, out: &mut dyn Write) -> Result<i32> {
    ensure!(range.steps > 0, "--steps must be positive");
    let (ds, modulus) = modulus_source(path)?;
    let t_max = range.t_max.unwrap_or(modulus.t_max);
    let t_min = range.t_min.unwrap_or(1e-3 * t_max);
    ensure!(
        t_min > 0.0 && t_max >= t_min && t_max.is_finite(),
        "need 0 < tmin <= tmax, got tmin={t_min} tmax={t_max}"
    );
    let slack = compute_slack(&ds);
    let profile = GapProfile::from_slack(&slack, ds.data_scale(), &Tolerances::default());
    let mut writer = csv::WriterBuilder::new().from_writer(out);
    writer.write_record(["t", "omega0", "envelope", "omegahat", "phihat"])?;
    for k in 0..=range.steps {
        let t = if k == range.steps {
            t_max
        } else {
            t_min + (t_max - t_min) * k as f64 / range.steps as f64
        };
        let row = [
            t,
            omega0_closed(&slack, t)?,
            profile.envelope(t)?.0,
            modulus.omega_hat(t)?,
            modulus.phi_hat(t)?,
        ];
        writer.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    writer.flush()?;
    Ok(EXIT_OK)
}
