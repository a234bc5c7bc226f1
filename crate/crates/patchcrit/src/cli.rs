//! Command-line front end: flag/config-file ingestion, the seven
//! subcommands (`eigen`, `critical`, `volume`, `simulate`, `classify`,
//! `preset`, `sweep`), and JSON/CSV report emission.
//!
//! Conventions:
//! - the season is the time unit (all rates are per season, lengths in
//!   user units);
//! - JSON reports go to `--out` (stdout otherwise) and echo the resolved
//!   configuration, so a report's `config` block is itself a valid
//!   `--config` file;
//! - CSV output is comma-separated with a `.` decimal point, a header
//!   row, and LF line endings;
//! - exit codes: 0 success, 2 configuration/validation error, 3 numeric
//!   or I/O failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Grid, MaskedDomain};
use crate::kinetics::{GrowthMap, ReactionTerm};
use crate::sim::{classify_domain, Classification, ClassifyOptions, CycleRecord, Verdict};
use crate::spectral::{
    lambda1_closed, lambda1_numeric, liyau_bound, rfk_bound, EigenOptions, SpectralMethod,
    SpectralResult,
};
use crate::thresholds::{
    application_preset, critical_ball_radius, critical_hypercube_side, critical_rect_constraint,
    extreme_volume, Preset, ThresholdReport, VolumeMethod,
};

#[derive(Parser, Debug)]
#[command(
    name = "patchcrit",
    version,
    about = "Critical habitat sizes and seasonal persistence for populations \
             that spread within a season and reproduce between seasons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Principal eigenvalue of the dispersal operator on a domain.
    Eigen(CommonArgs),
    /// Critical habitat dimensions (interval/square side, ball radius).
    Critical(CommonArgs),
    /// Extreme volumes: sizes below which every shape fails.
    Volume(CommonArgs),
    /// Integrate a fixed number of seasonal cycles.
    Simulate(CommonArgs),
    /// Iterate the seasonal dynamics and classify the outcome.
    Classify(CommonArgs),
    /// Evaluate a named application preset.
    Preset(CommonArgs),
    /// Sweep one or two parameters into a CSV verdict table.
    Sweep(CommonArgs),
}

/// The full flag set, shared by every subcommand; each subcommand
/// validates the subset it needs.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file; explicit flags override file entries.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Domain: rect:L1[,L2[,L3]] | ball:R@n | mask:PATH
    #[arg(long, value_name = "SPEC")]
    pub domain: Option<String>,
    /// Diffusion coefficient (squared length per season).
    #[arg(long, value_name = "NUM")]
    pub d: Option<f64>,
    /// Constant drift vector, comma-separated, one entry per axis.
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Within-season reaction: logistic:r | linear:b | quadratic:alpha,beta
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Between-season map: linear:b | ricker:r | beverton_holt:lambda | skellam:r,b
    #[arg(long, value_name = "SPEC")]
    pub g: Option<String>,
    /// Grid spacing (default: shortest domain extent / 64; ignored for masks).
    #[arg(long, value_name = "NUM")]
    pub h: Option<f64>,
    /// Within-season time step (default 1e-3).
    #[arg(long, value_name = "NUM")]
    pub dt: Option<f64>,
    /// Classification horizon in cycles (default 200).
    #[arg(long, value_name = "N")]
    pub max_cycles: Option<usize>,
    /// Exact cycle count for `simulate` (default 10; no early stopping).
    #[arg(long, value_name = "N")]
    pub cycles: Option<usize>,
    /// Sup-norm below this is extinction (default 1e-8).
    #[arg(long, value_name = "NUM")]
    pub eps_extinct: Option<f64>,
    /// Probe-region floor for a persistence verdict (default 1e-4).
    #[arg(long, value_name = "NUM")]
    pub delta_persist: Option<f64>,
    /// Relative sup-norm change that counts as stationary (default 1e-5).
    #[arg(long, value_name = "NUM")]
    pub tol_stationary: Option<f64>,
    /// Consecutive stationary cycles required for persistence (default 10).
    #[arg(long, value_name = "N")]
    pub window: Option<usize>,
    /// eigen: auto|closed|numeric|rfk|liyau; volume: all|rect|rfk|liyau.
    #[arg(long, value_name = "NAME")]
    pub method: Option<String>,
    /// Application preset: marine | terrestrial | pest | climate.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Mortality rate (presets).
    #[arg(long, value_name = "NUM")]
    pub gamma: Option<f64>,
    /// Beverton-Holt recruitment strength (presets).
    #[arg(long, value_name = "NUM")]
    pub lambda: Option<f64>,
    /// In-season growth rate (pest preset).
    #[arg(long, value_name = "NUM")]
    pub r: Option<f64>,
    /// First habitat side (presets).
    #[arg(long, value_name = "NUM")]
    pub l1: Option<f64>,
    /// Second habitat side (presets).
    #[arg(long, value_name = "NUM")]
    pub l2: Option<f64>,
    /// Spatial dimension for shape-free thresholds (1-3).
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,
    /// Reserve volume for the extreme-mortality report (marine preset).
    #[arg(long, value_name = "NUM")]
    pub volume: Option<f64>,
    /// Sweep axis KEY=MIN:MAX:STEPS with KEY in {l, l1, l2, l3, r, d, a};
    /// repeat once for a second axis.
    #[arg(long = "axis", value_name = "SPEC", allow_hyphen_values = true)]
    pub axis: Vec<String>,
    /// JSON report path (default: stdout). Sweep writes its CSV here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Field dump CSV path (eigenfunction or final density).
    #[arg(long, value_name = "PATH")]
    pub field: Option<PathBuf>,
    /// Trajectory dump CSV path (cycle,sup,probe_min,ratio).
    #[arg(long, value_name = "PATH")]
    pub traj: Option<PathBuf>,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

/// The resolved flat configuration. This is both the `--config` file
/// schema and the `config` block echoed in every JSON report, so reports
/// round-trip: an emitted `config` re-parses and re-validates here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_extinct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_persist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_stationary: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub axis: Vec<String>,
    /// Output destinations are plumbing, not model configuration: they
    /// stay out of the report echo (a report written to two different
    /// paths must be bitwise identical) and out of config files.
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub field: Option<PathBuf>,
    #[serde(skip)]
    pub traj: Option<PathBuf>,
    /// Thread-count hint for sweeps. Never serialized: reports must be
    /// bitwise identical across `--jobs` settings.
    #[serde(skip)]
    pub jobs_hint: Option<usize>,
}

impl RunConfig {
    /// Config-file entries overlaid with explicit flags (flags win).
    /// `--jobs` is deliberately not part of the config: reports must be
    /// bitwise independent of the thread count.
    fn from_sources(subcommand: &str, args: &CommonArgs) -> Result<RunConfig> {
        let mut cfg = match &args.config {
            Some(path) => load_config_file(path)?,
            None => RunConfig::default(),
        };
        cfg.subcommand = Some(subcommand.to_string());
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if args.$field.is_some() { cfg.$field = args.$field.clone(); })*
            };
        }
        overlay!(
            domain, d, a, f, g, h, dt, max_cycles, cycles, eps_extinct, delta_persist,
            tol_stationary, window, method, preset, gamma, lambda, r, l1, l2, n, volume, out,
            field, traj
        );
        if !args.axis.is_empty() {
            cfg.axis = args.axis.clone();
        }
        Ok(cfg)
    }
}

fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidParameter(format!("config file {}: {e}", path.display()))
    })
}

/// Parse `rect:L1[,L2[,L3]] | ball:R@n | mask:PATH`.
pub fn parse_domain_spec(spec: &str) -> Result<Domain> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| {
        Error::InvalidParameter(format!(
            "domain spec '{spec}' must look like rect:L1[,L2[,L3]], ball:R@n, or mask:PATH"
        ))
    })?;
    match kind {
        "rect" => {
            let lengths = parse_csv_f64(rest)?;
            Domain::rect(&lengths)
        }
        "ball" => {
            let (radius, dim) = rest.split_once('@').ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "ball spec '{rest}' must be R@n (radius at dimension)"
                ))
            })?;
            let radius = parse_f64(radius)?;
            let dim: usize = dim.parse().map_err(|_| {
                Error::InvalidParameter(format!("ball dimension '{dim}' is not an integer"))
            })?;
            Domain::ball(radius, dim)
        }
        "mask" => Ok(Domain::Masked(MaskedDomain::read_text(Path::new(rest))?)),
        other => Err(Error::InvalidParameter(format!(
            "unknown domain kind '{other}' (expected rect, ball, or mask)"
        ))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("'{s}' is not a number")))
}

fn parse_csv_f64(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn split_family(spec: &str) -> Result<(&str, Vec<f64>)> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, parse_csv_f64(p)?),
        None => (spec, Vec::new()),
    };
    Ok((name, params))
}

fn arity(params: &[f64], want: usize, what: &str) -> Result<()> {
    if params.len() != want {
        return Err(Error::InvalidParameter(format!(
            "{what} takes {want} parameter(s), got {}",
            params.len()
        )));
    }
    Ok(())
}

/// Parse `logistic:r | linear:b | quadratic:alpha,beta`.
pub fn parse_reaction(spec: &str) -> Result<ReactionTerm> {
    let (name, p) = split_family(spec)?;
    let term = match name {
        "logistic" => {
            arity(&p, 1, "logistic")?;
            ReactionTerm::Logistic { r: p[0] }
        }
        "linear" => {
            arity(&p, 1, "linear")?;
            ReactionTerm::Linear { b: p[0] }
        }
        "quadratic" => {
            arity(&p, 2, "quadratic")?;
            ReactionTerm::Quadratic {
                alpha: p[0],
                beta: p[1],
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown reaction family '{other}' (expected logistic, linear, or quadratic)"
            )))
        }
    };
    term.validate()?;
    Ok(term)
}

/// Parse `linear:b | ricker:r | beverton_holt:lambda | skellam:r,b`.
pub fn parse_growth(spec: &str) -> Result<GrowthMap> {
    let (name, p) = split_family(spec)?;
    match name {
        "linear" => {
            arity(&p, 1, "linear")?;
            GrowthMap::linear(p[0])
        }
        "ricker" => {
            arity(&p, 1, "ricker")?;
            GrowthMap::ricker(p[0])
        }
        "beverton_holt" | "bh" => {
            arity(&p, 1, "beverton_holt")?;
            GrowthMap::beverton_holt(p[0])
        }
        "skellam" => {
            arity(&p, 2, "skellam")?;
            GrowthMap::skellam(p[0], p[1])
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown growth family '{other}' (expected linear, ricker, beverton_holt, or skellam)"
        ))),
    }
}

fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::InvalidParameter(format!("missing required flag --{flag}")))
}

/// Spacing used when `--h` is absent: shortest extent over 64.
fn default_spacing(domain: &Domain) -> f64 {
    match domain {
        Domain::Rect { lengths } => lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 64.0,
        Domain::Ball { radius, .. } => 2.0 * radius / 64.0,
        Domain::Masked(mask) => mask.spacing,
    }
}

/// Domain + transport resolution shared by most subcommands.
struct Transport {
    domain: Domain,
    d: f64,
    advection: Vec<f64>,
    h: f64,
}

fn resolve_transport(cfg: &RunConfig) -> Result<Transport> {
    let domain = parse_domain_spec(&require(&cfg.domain, "domain")?)?;
    let d = cfg.d.unwrap_or(1.0);
    let advection = match &cfg.a {
        Some(s) => {
            let v = parse_csv_f64(s)?;
            if v.is_empty() {
                vec![0.0; domain.dim()]
            } else {
                v
            }
        }
        None => vec![0.0; domain.dim()],
    };
    if advection.len() != domain.dim() {
        return Err(Error::InvalidParameter(format!(
            "drift has {} components for a {}-dimensional domain",
            advection.len(),
            domain.dim()
        )));
    }
    let h = cfg.h.unwrap_or_else(|| default_spacing(&domain));
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive and finite, got {h}"
        )));
    }
    Ok(Transport {
        domain,
        d,
        advection,
        h,
    })
}

fn resolve_kinetics(cfg: &RunConfig) -> Result<(ReactionTerm, GrowthMap)> {
    let f = parse_reaction(&require(&cfg.f, "f")?)?;
    let g = parse_growth(&require(&cfg.g, "g")?)?;
    Ok((f, g))
}

fn resolve_classify_options(cfg: &RunConfig) -> ClassifyOptions {
    let mut opts = ClassifyOptions::default();
    if let Some(v) = cfg.max_cycles {
        opts.max_cycles = v;
    }
    if let Some(v) = cfg.eps_extinct {
        opts.eps_extinct = v;
    }
    if let Some(v) = cfg.delta_persist {
        opts.delta_persist = v;
    }
    if let Some(v) = cfg.tol_stationary {
        opts.tol_stationary = v;
    }
    if let Some(v) = cfg.window {
        opts.window = v;
    }
    if let Some(v) = cfg.dt {
        opts.dt = v;
    }
    opts
}

/// Echo the resolved values back into the config block so the report is
/// reproducible as-is.
fn echo_resolved(cfg: &mut RunConfig, t: &Transport) {
    cfg.d = Some(t.d);
    cfg.a = Some(
        t.advection
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    if !matches!(t.domain, Domain::Masked(_)) {
        cfg.h = Some(t.h);
    }
}

// ---------------------------------------------------------------------
// Report schema
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LambdaValue {
    pub value: f64,
    pub method: SpectralMethod,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub upwind: bool,
    /// Secondary estimate by an independent method, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<Box<LambdaValue>>,
}

impl LambdaValue {
    fn from_result(r: &SpectralResult) -> Self {
        LambdaValue {
            value: r.lambda1,
            method: r.method,
            residual: r.residual,
            iterations: (r.method == SpectralMethod::NumericGrid).then_some(r.iterations),
            upwind: r.upwind,
            cross_check: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationOut {
    pub verdict: Verdict,
    pub growth_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1_used: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_margin: Option<f64>,
    pub cycles: usize,
    pub final_sup: f64,
    pub final_probe_min: f64,
    pub options: ClassifyOptions,
}

impl ClassificationOut {
    fn from_classification(c: &Classification) -> Self {
        ClassificationOut {
            verdict: c.verdict,
            growth_factor: c.growth_factor_estimate,
            lambda1_used: c.lambda1_used,
            threshold_margin: c.threshold_margin,
            cycles: c.cycles_run,
            final_sup: c.final_sup,
            final_probe_min: c.final_probe_min,
            options: c.options.clone(),
        }
    }
}

/// Fixed numeric-core tolerances, echoed for provenance. The adjustable
/// classification tolerances live in `classification.options`.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub eigen_residual: f64,
    pub eigen_delta: f64,
    pub eigen_inner_solver: f64,
    pub season_solver: f64,
    pub negative_clamp: f64,
    pub blow_up: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_residual: 1e-6,
            eigen_delta: 1e-8,
            eigen_inner_solver: 1e-11,
            season_solver: 1e-10,
            negative_clamp: 1e-8,
            blow_up: 1e12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub tolerances: Tolerances,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION"),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<LambdaValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<BTreeMap<String, ThresholdReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationOut>,
    pub provenance: Provenance,
}

impl Report {
    fn new(config: RunConfig) -> Self {
        Report {
            config,
            lambda1: None,
            thresholds: None,
            classification: None,
            provenance: Provenance::default(),
        }
    }
}

// ---------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit_json(report: &Report, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Numeric(format!("report serialization failed: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Field dump: one row per lattice node, header `x[,y[,z]],value`.
fn write_field_csv(grid: &Grid, values: &[f64], path: &Path) -> Result<()> {
    let mut text = String::new();
    let axes = ["x", "y", "z"];
    let header: Vec<&str> = axes[..grid.dim()].to_vec();
    text.push_str(&header.join(","));
    text.push_str(",value\n");
    for flat in 0..grid.node_count() {
        for c in grid.coords(flat) {
            let _ = write!(text, "{c},");
        }
        let _ = writeln!(text, "{}", values[flat]);
    }
    write_text(path, &text)
}

fn write_trajectory_csv(records: &[CycleRecord], path: &Path) -> Result<()> {
    let mut text = String::from("cycle,sup,probe_min,ratio\n");
    for r in records {
        let _ = writeln!(text, "{},{},{},{}", r.cycle, r.sup, r.probe_min, r.ratio);
    }
    write_text(path, &text)
}

fn threshold_map(reports: Vec<(String, ThresholdReport)>) -> BTreeMap<String, ThresholdReport> {
    reports.into_iter().collect()
}

// ---------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------

fn cmd_eigen(mut cfg: RunConfig) -> Result<()> {
    let t = resolve_transport(&cfg)?;
    echo_resolved(&mut cfg, &t);
    let method = cfg.method.clone().unwrap_or_else(|| "auto".into());
    let mut numeric_result: Option<SpectralResult> = None;
    let numeric = |t: &Transport| -> Result<SpectralResult> {
        let grid = t.domain.rasterize(t.h)?;
        let r = lambda1_numeric(&grid, t.d, &t.advection, &EigenOptions::default())?;
        if let Some(path) = &cfg.field {
            let phi = r.eigenfunction.as_ref().expect("numeric eigenfunction");
            write_field_csv(&grid, phi, path)?;
        }
        Ok(r)
    };
    let lambda = match method.as_str() {
        "auto" => {
            let numeric_r = numeric(&t)?;
            numeric_result = Some(numeric_r.clone());
            match lambda1_closed(t.d, &t.advection, &t.domain) {
                Ok(closed) => {
                    let mut v = LambdaValue::from_result(&closed);
                    v.cross_check = Some(Box::new(LambdaValue::from_result(&numeric_r)));
                    v
                }
                Err(_) => LambdaValue::from_result(&numeric_r),
            }
        }
        "closed" => LambdaValue::from_result(&lambda1_closed(t.d, &t.advection, &t.domain)?),
        "numeric" => {
            let r = numeric(&t)?;
            numeric_result = Some(r.clone());
            LambdaValue::from_result(&r)
        }
        "rfk" => LambdaValue::from_result(&rfk_bound(t.d, &t.domain)?),
        "liyau" => LambdaValue::from_result(&liyau_bound(1, t.d, &t.domain)?),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown eigen method '{other}' (expected auto, closed, numeric, rfk, or liyau)"
            )))
        }
    };
    if cfg.field.is_some() && numeric_result.is_none() {
        return Err(Error::InvalidParameter(
            "--field needs a numeric eigenfunction; use --method auto or numeric".into(),
        ));
    }
    let mut report = Report::new(cfg.clone());
    report.lambda1 = Some(lambda);
    emit_json(&report, cfg.out.as_deref())
}

fn preset_from_config(cfg: &RunConfig) -> Result<Preset> {
    let name = require(&cfg.preset, "preset")?;
    match name.as_str() {
        "marine" | "marine_reserve" => {
            let growth = match (&cfg.g, cfg.lambda) {
                (Some(spec), _) => parse_growth(spec)?,
                (None, Some(lambda)) => GrowthMap::beverton_holt(lambda)?,
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "marine preset needs --g or --lambda for the recruitment map".into(),
                    ))
                }
            };
            let advection = match &cfg.a {
                Some(s) => parse_csv_f64(s)?,
                None => Vec::new(),
            };
            Ok(Preset::MarineReserve {
                d: cfg.d.unwrap_or(1.0),
                advection,
                gamma: require(&cfg.gamma, "gamma")?,
                growth,
                dim: cfg.n.unwrap_or(2),
                volume: cfg.volume,
            })
        }
        "terrestrial" | "terrestrial_reserve" => Ok(Preset::TerrestrialReserve {
            gamma: require(&cfg.gamma, "gamma")?,
            lambda: require(&cfg.lambda, "lambda")?,
            l1: require(&cfg.l1, "l1")?,
            l2: require(&cfg.l2, "l2")?,
        }),
        "pest" | "insect_pest" => Ok(Preset::InsectPest {
            d: cfg.d.unwrap_or(1.0),
            r: require(&cfg.r, "r")?,
            l1: require(&cfg.l1, "l1")?,
            l2: require(&cfg.l2, "l2")?,
        }),
        "climate" | "climate_change" => Ok(Preset::ClimateChange {
            d: cfg.d.unwrap_or(1.0),
            lambda: require(&cfg.lambda, "lambda")?,
            gamma: require(&cfg.gamma, "gamma")?,
            l1: require(&cfg.l1, "l1")?,
            l2: require(&cfg.l2, "l2")?,
        }),
        other => Err(Error::InvalidParameter(format!(
            "unknown preset '{other}' (expected marine, terrestrial, pest, or climate)"
        ))),
    }
}

fn cmd_preset(cfg: RunConfig) -> Result<()> {
    let preset = preset_from_config(&cfg)?;
    let reports = application_preset(&preset)?;
    let mut report = Report::new(cfg.clone());
    report.thresholds = Some(threshold_map(
        reports.into_iter().map(|r| (r.name.clone(), r)).collect(),
    ));
    emit_json(&report, cfg.out.as_deref())
}

fn cmd_critical(cfg: RunConfig) -> Result<()> {
    if cfg.preset.is_some() {
        return cmd_preset(cfg);
    }
    let (f, g) = resolve_kinetics(&cfg)?;
    let d = cfg.d.unwrap_or(1.0);
    let domain = match &cfg.domain {
        Some(spec) => Some(parse_domain_spec(spec)?),
        None => None,
    };
    let dim = match (cfg.n, &domain) {
        (Some(n), _) => n,
        (None, Some(dom)) => dom.dim(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "critical needs --n or --domain to fix the dimension".into(),
            ))
        }
    };
    let advection = match &cfg.a {
        Some(s) => {
            let v = parse_csv_f64(s)?;
            if v.is_empty() {
                vec![0.0; dim]
            } else {
                v
            }
        }
        None => vec![0.0; dim],
    };
    let mut reports = vec![
        critical_rect_constraint(d, &advection, &f, &g)?,
        critical_hypercube_side(d, &advection, &f, &g, dim)?,
    ];
    if advection.iter().all(|v| *v == 0.0) {
        reports.push(critical_ball_radius(d, &f, &g, dim)?);
    }
    let mut report = Report::new(cfg.clone());
    report.thresholds = Some(threshold_map(
        reports.into_iter().map(|r| (r.name.clone(), r)).collect(),
    ));
    emit_json(&report, cfg.out.as_deref())
}

fn cmd_volume(cfg: RunConfig) -> Result<()> {
    let (f, g) = resolve_kinetics(&cfg)?;
    let d = cfg.d.unwrap_or(1.0);
    let dim = match (cfg.n, &cfg.domain) {
        (Some(n), _) => n,
        (None, Some(spec)) => parse_domain_spec(spec)?.dim(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "volume needs --n or --domain to fix the dimension".into(),
            ))
        }
    };
    let advection = match &cfg.a {
        Some(s) => parse_csv_f64(s)?,
        None => Vec::new(),
    };
    let method = cfg.method.clone().unwrap_or_else(|| "all".into());
    let chosen: Vec<VolumeMethod> = match method.as_str() {
        "rect" => vec![VolumeMethod::Rect],
        "rfk" => vec![VolumeMethod::Rfk],
        "liyau" => vec![VolumeMethod::LiYau],
        "all" => vec![VolumeMethod::Rect, VolumeMethod::Rfk, VolumeMethod::LiYau],
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown volume method '{other}' (expected rect, rfk, liyau, or all)"
            )))
        }
    };
    let all = method == "all";
    let mut entries = Vec::new();
    for m in chosen {
        let key = match m {
            VolumeMethod::Rect => "extreme_volume_rect",
            VolumeMethod::Rfk => "extreme_volume_rfk",
            VolumeMethod::LiYau => "extreme_volume_liyau",
        };
        match extreme_volume(m, d, &advection, &f, &g, dim) {
            Ok(r) => entries.push((key.to_string(), r)),
            // With `all`, a bound that is undefined for this margin is
            // simply omitted; asking for it by name is an error.
            Err(e) if all && matches!(m, VolumeMethod::Rfk | VolumeMethod::LiYau) => {
                let _ = e;
            }
            Err(e) => return Err(e),
        }
    }
    let mut report = Report::new(cfg.clone());
    report.thresholds = Some(threshold_map(entries));
    emit_json(&report, cfg.out.as_deref())
}

fn run_classification(
    cfg: &RunConfig,
    opts: &ClassifyOptions,
) -> Result<(Classification, Option<SpectralResult>, Transport)> {
    let t = resolve_transport(cfg)?;
    let (f, g) = resolve_kinetics(cfg)?;
    let (classification, spectral) =
        classify_domain(&t.domain, t.h, t.d, &t.advection, &f, &g, opts)?;
    Ok((classification, spectral, t))
}

fn emit_classification(
    mut cfg: RunConfig,
    classification: Classification,
    spectral: Option<SpectralResult>,
    t: &Transport,
) -> Result<()> {
    echo_resolved(&mut cfg, t);
    if let Some(path) = &cfg.traj {
        write_trajectory_csv(&classification.trajectory, path)?;
    }
    if let Some(path) = &cfg.field {
        write_field_csv(
            &classification.final_state.grid,
            &classification.final_state.values,
            path,
        )?;
    }
    let mut report = Report::new(cfg.clone());
    report.lambda1 = spectral.as_ref().map(LambdaValue::from_result);
    report.classification = Some(ClassificationOut::from_classification(&classification));
    emit_json(&report, cfg.out.as_deref())
}

fn cmd_classify(cfg: RunConfig) -> Result<()> {
    let opts = resolve_classify_options(&cfg);
    let (classification, spectral, t) = run_classification(&cfg, &opts)?;
    emit_classification(cfg, classification, spectral, &t)
}

fn cmd_simulate(cfg: RunConfig) -> Result<()> {
    // Fixed-horizon run: exactly `cycles` cycles, no early stopping (the
    // extinction floor is disabled and the stationarity window can never
    // fill), so the verdict is always `inconclusive` and the value of the
    // run is its trajectory and final field.
    let cycles = cfg.cycles.unwrap_or(10);
    if cycles == 0 {
        return Err(Error::InvalidParameter(
            "simulate needs at least one cycle".into(),
        ));
    }
    let mut opts = resolve_classify_options(&cfg);
    opts.max_cycles = cycles;
    opts.eps_extinct = 0.0;
    opts.window = cycles + 1;
    let (classification, spectral, t) = run_classification(&cfg, &opts)?;
    emit_classification(cfg, classification, spectral, &t)
}

// ---------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
struct AxisSpec {
    key: String,
    values: Vec<f64>,
}

/// Parse `KEY=MIN:MAX:STEPS`; STEPS is the point count (1 collapses the
/// axis to MIN).
fn parse_axis(spec: &str) -> Result<AxisSpec> {
    let (key, range) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidParameter(format!("axis '{spec}' must look like KEY=MIN:MAX:STEPS"))
    })?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "axis range '{range}' must be MIN:MAX:STEPS"
        )));
    }
    let min = parse_f64(parts[0])?;
    let max = parse_f64(parts[1])?;
    let steps: usize = parts[2].parse().map_err(|_| {
        Error::InvalidParameter(format!("axis step count '{}' is not an integer", parts[2]))
    })?;
    if steps == 0 {
        return Err(Error::InvalidParameter("axis needs at least one step".into()));
    }
    let key = key.trim().to_ascii_lowercase();
    const KEYS: [&str; 7] = ["l", "l1", "l2", "l3", "r", "d", "a"];
    if !KEYS.contains(&key.as_str()) {
        return Err(Error::InvalidParameter(format!(
            "unknown axis key '{key}' (expected one of {KEYS:?})"
        )));
    }
    let values = if steps == 1 {
        vec![min]
    } else {
        let width = (max - min) / (steps - 1) as f64;
        (0..steps).map(|k| min + width * k as f64).collect()
    };
    Ok(AxisSpec { key, values })
}

/// One sweep point: the base configuration with axis values substituted.
#[derive(Clone)]
struct SweepPoint {
    axis_values: Vec<f64>,
    domain: Domain,
    d: f64,
    advection: Vec<f64>,
}

fn apply_axis(point: &mut SweepPoint, key: &str, value: f64) -> Result<()> {
    let set_side = |domain: &mut Domain, idx: Option<usize>| -> Result<()> {
        match domain {
            Domain::Rect { lengths } => {
                match idx {
                    Some(i) if i < lengths.len() => lengths[i] = value,
                    Some(i) => {
                        return Err(Error::InvalidParameter(format!(
                            "axis l{} exceeds the domain dimension {}",
                            i + 1,
                            lengths.len()
                        )))
                    }
                    None => lengths.iter_mut().for_each(|l| *l = value),
                }
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "swept side length must be positive, got {value}"
                    )));
                }
                Ok(())
            }
            _ => Err(Error::InvalidParameter(
                "side-length axes need a rect domain".into(),
            )),
        }
    };
    match key {
        "l" => set_side(&mut point.domain, None),
        "l1" => set_side(&mut point.domain, Some(0)),
        "l2" => set_side(&mut point.domain, Some(1)),
        "l3" => set_side(&mut point.domain, Some(2)),
        "r" => match &mut point.domain {
            Domain::Ball { radius, .. } => {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "swept radius must be positive, got {value}"
                    )));
                }
                *radius = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter(
                "the r axis needs a ball domain".into(),
            )),
        },
        "d" => {
            point.d = value;
            Ok(())
        }
        "a" => {
            point.advection[0] = value;
            Ok(())
        }
        _ => unreachable!("axis keys are validated at parse time"),
    }
}

fn cmd_sweep(cfg: RunConfig) -> Result<()> {
    if cfg.axis.is_empty() || cfg.axis.len() > 2 {
        return Err(Error::InvalidParameter(
            "sweep takes one or two --axis specs".into(),
        ));
    }
    let axes: Vec<AxisSpec> = cfg.axis.iter().map(|s| parse_axis(s)).collect::<Result<_>>()?;
    if axes.len() == 2 && axes[0].key == axes[1].key {
        return Err(Error::InvalidParameter(format!(
            "conflicting axes: '{}' given twice",
            axes[0].key
        )));
    }
    let t = resolve_transport(&cfg)?;
    let (f, g) = resolve_kinetics(&cfg)?;
    let opts = resolve_classify_options(&cfg);
    let explicit_h = cfg.h;

    // Lexicographic point list: first axis outermost.
    let mut points = Vec::new();
    for &v0 in &axes[0].values {
        let inner: &[f64] = if axes.len() == 2 {
            &axes[1].values
        } else {
            &[f64::NAN]
        };
        for &v1 in inner {
            let mut point = SweepPoint {
                axis_values: if axes.len() == 2 {
                    vec![v0, v1]
                } else {
                    vec![v0]
                },
                domain: t.domain.clone(),
                d: t.d,
                advection: t.advection.clone(),
            };
            apply_axis(&mut point, &axes[0].key, v0)?;
            if axes.len() == 2 {
                apply_axis(&mut point, &axes[1].key, v1)?;
            }
            points.push(point);
        }
    }

    let run_point = |point: &SweepPoint| -> Result<Vec<String>> {
        let h = explicit_h.unwrap_or_else(|| default_spacing(&point.domain));
        let (classification, spectral) = classify_domain(
            &point.domain,
            h,
            point.d,
            &point.advection,
            &f,
            &g,
            &opts,
        )?;
        let lambda1 = spectral.as_ref().map(|r| r.lambda1);
        let rho = lambda1.map(|l| g.slope_at_zero() * (f.slope_at_zero() - l).exp());
        let mut row: Vec<String> = point.axis_values.iter().map(|v| v.to_string()).collect();
        row.push(lambda1.map_or_else(|| "nan".into(), |v| v.to_string()));
        row.push(rho.map_or_else(|| "nan".into(), |v| v.to_string()));
        row.push(classification.verdict.to_string());
        row.push(classification.cycles_run.to_string());
        row.push(classification.final_sup.to_string());
        Ok(row)
    };

    // Points are independent; an ordered collect keeps the output
    // bitwise identical for any thread count.
    let rows: Vec<Vec<String>> = if let Some(jobs) = cfg.jobs_hint {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(run_point).collect::<Result<_>>())?
    } else {
        points.par_iter().map(run_point).collect::<Result<_>>()?
    };

    let mut header: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    header.extend(
        ["lambda1", "rho", "verdict", "cycles", "final_sup"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut text = header.join(",");
    text.push('\n');
    for row in &rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    match cfg.out.as_deref() {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------

fn execute(command: &Command) -> Result<()> {
    let (name, args) = match command {
        Command::Eigen(a) => ("eigen", a),
        Command::Critical(a) => ("critical", a),
        Command::Volume(a) => ("volume", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Classify(a) => ("classify", a),
        Command::Preset(a) => ("preset", a),
        Command::Sweep(a) => ("sweep", a),
    };
    let mut cfg = RunConfig::from_sources(name, args)?;
    cfg.jobs_hint = args.jobs;
    match command {
        Command::Eigen(_) => cmd_eigen(cfg),
        Command::Critical(_) => cmd_critical(cfg),
        Command::Volume(_) => cmd_volume(cfg),
        Command::Simulate(_) => cmd_simulate(cfg),
        Command::Classify(_) => cmd_classify(cfg),
        Command::Preset(_) => cmd_preset(cfg),
        Command::Sweep(_) => cmd_sweep(cfg),
    }
}

/// Parse and run; returns the process exit status (0 success, 2
/// validation, 3 numeric/I-O). Usage errors print clap's message.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}
