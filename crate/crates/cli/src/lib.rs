//! `pathfuse` command-line pipeline.
//!
//! Exit status: 0 on success, 1 when a validation or tolerance check fails,
//! 2 on usage, parse, read or write errors. Diagnostics go to stderr; data
//! goes to the `-o` file or stdout.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pathfuse_core::cad::{parse_cad, resample_cad};
use pathfuse_core::demo::{downsample, filter_outliers, parse_demo, synth_demo, write_demo};
use pathfuse_core::fusion::{fuse, parse_fused_json, to_robot_frame, write_fused_json, ParamKind};
use pathfuse_core::pathml::{
    build_document, expand_layers, parse_xml, validate_document, write_xml, PathMLDocument,
    PathmlError, ProcessParameters, ProcessType,
};
use pathfuse_core::program::{deviation_report, emit_program, validate_path, ProgramError};
use pathfuse_core::{FusedPath, TrackerErrorModel};
use thiserror::Error;

use config::{load_calibration, load_config, read_json, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Pipeline(String),
    /// Checks ran and failed; the listing has already been written.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_VALIDATION,
            _ => EXIT_USAGE,
        }
    }

    fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "pathfuse",
    version,
    about = "Fuse demonstrations with CAD paths and emit robot programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a tracker recording of a truth path (frame S) as demo CSV.
    Synth(SynthArgs),
    /// Fuse CAD positions with demonstrated orientations and speeds.
    Fuse(FuseArgs),
    /// PathML document tools.
    #[command(subcommand)]
    Pathml(PathmlCommand),
    /// Emit a neutral robot program from a validated PathML document.
    Emit(EmitArgs),
    /// Per-section deviation of an executed path from the nominal one.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum PathmlCommand {
    /// Build a single-layer document from a robot-frame fused path.
    Gen(GenArgs),
    /// List document and limit violations; exit 0 iff there are none.
    Validate(ValidateArgs),
    /// Stack the single layer into N layers.
    Expand(ExpandArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Fused JSON truth path in frame S.
    #[arg(long)]
    truth: PathBuf,
    /// Tracker error model JSON (defaults apply to missing fields).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the model's maximum z bias (mm).
    #[arg(long)]
    z_bias_max: Option<f64>,
    /// Record the truth without any error.
    #[arg(long, conflicts_with_all = ["model", "z_bias_max"])]
    zero_noise: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// CAD path, CSV or JSON.
    #[arg(long)]
    cad: PathBuf,
    /// Demonstration CSV.
    #[arg(long)]
    demo: PathBuf,
    /// Calibration JSON with t_r_f and t_f_s.
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Fused JSON path in frame R.
    #[arg(long)]
    fused: PathBuf,
    /// adhesive, welding or other (config value when omitted).
    #[arg(long)]
    process: Option<ProcessType>,
    /// ml/min
    #[arg(long)]
    glue_flow_rate: Option<f64>,
    /// mm/s
    #[arg(long)]
    wire_feed_rate: Option<f64>,
    /// mm
    #[arg(long)]
    layer_height: Option<f64>,
    /// Extra process attribute, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
    #[arg(long, default_value = "pathfuse")]
    project: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    xml: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    xml: PathBuf,
    #[arg(long)]
    layers: usize,
    /// Stacking direction, normalized before use.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,1")]
    direction: [f64; 3],
    /// Override the document's layer height (mm).
    #[arg(long)]
    layer_height: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct EmitArgs {
    xml: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Fused JSON of the executed path.
    #[arg(long)]
    executed: PathBuf,
    /// Fused JSON of the nominal path.
    #[arg(long)]
    nominal: PathBuf,
    /// Comma-separated section breaks in (0, 1).
    #[arg(long, value_parser = parse_breaks, default_value = "")]
    sections: Breaks,
    /// mm (config value when omitted).
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Clone)]
struct Breaks(Vec<f64>);

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v = parse_f64_list(s)?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 components, got {}", v.len()))
}

fn parse_breaks(s: &str) -> Result<Breaks, String> {
    if s.trim().is_empty() {
        return Ok(Breaks(Vec::new()));
    }
    parse_f64_list(s).map(Breaks)
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    Ok((k.to_string(), v.to_string()))
}

/// Run with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Run against explicit streams and return the exit status.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a, out, err),
        Command::Fuse(a) => fuse_cmd(a, out, err),
        Command::Pathml(PathmlCommand::Gen(a)) => gen(a, out),
        Command::Pathml(PathmlCommand::Validate(a)) => validate(a, out, err),
        Command::Pathml(PathmlCommand::Expand(a)) => expand(a, out),
        Command::Emit(a) => emit(a, out),
        Command::Report(a) => report(a, out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "pathfuse: {e}");
            e.exit_code()
        }
    }
}

fn write_output(target: &Output, data: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match &target.output {
        Some(path) => std::fs::write(path, data).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => out.write_all(data).map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn read_fused(path: &Path) -> Result<FusedPath, CliError> {
    parse_fused_json(&read_file(path)?).map_err(|e| CliError::input(path, e))
}

fn read_pathml(path: &Path) -> Result<PathMLDocument, CliError> {
    parse_xml(&read_file(path)?).map_err(|e| CliError::input(path, e))
}

fn synth(a: SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let truth = read_fused(&a.truth)?;
    let mut model = match (&a.model, a.zero_noise) {
        (_, true) => TrackerErrorModel::zero(),
        (Some(p), false) => read_json::<TrackerErrorModel>(p)?,
        (None, false) => TrackerErrorModel::default(),
    };
    if let Some(z) = a.z_bias_max {
        model.z_bias_max = z;
    }
    if let Some(s) = a.seed {
        model.seed = s;
    }
    let demo = synth_demo(&truth, &model, a.rate).map_err(|e| CliError::Usage(e.to_string()))?;
    let _ = writeln!(err, "synth: {} samples at {} Hz", demo.len(), a.rate);
    write_output(&a.out, write_demo(&demo).as_bytes(), out)
}

fn fuse_cmd(a: FuseArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let mut cad = parse_cad(&read_file(&a.cad)?).map_err(|e| CliError::input(&a.cad, e))?;
    let demo = parse_demo(&read_file(&a.demo)?).map_err(|e| CliError::input(&a.demo, e))?;
    let calib = load_calibration(&a.calib)?;

    if let Some(spacing) = cfg.resample_spacing_mm {
        let r = resample_cad(&cad, spacing).map_err(|e| CliError::Pipeline(e.to_string()))?;
        if r.spacing_exceeded {
            let _ = writeln!(
                err,
                "fuse: resample spacing {spacing} mm exceeds the path length; kept endpoints only"
            );
        }
        cad = r.path;
    }
    let pipeline = |e: &dyn std::fmt::Display| CliError::Pipeline(e.to_string());
    let filtered =
        filter_outliers(&demo, cfg.filter_window, cfg.filter_k).map_err(|e| pipeline(&e))?;
    let target = cfg.downsample_target_for(cad.polyline().len(), filtered.len());
    let reduced = if target < filtered.len() {
        downsample(&filtered, target).map_err(|e| pipeline(&e))?
    } else {
        filtered
    };
    let fused = fuse(&cad, &reduced).map_err(|e| pipeline(&e))?;
    if fused.parameterization == ParamKind::NormalizedTime {
        let _ = writeln!(
            err,
            "fuse: demonstration barely moves; parameterized by time instead of arc length"
        );
    }
    let robot = to_robot_frame(&fused.path, &calib).map_err(|e| pipeline(&e))?;
    write_output(&a.out, write_fused_json(&robot).as_bytes(), out)
}

/// Config process settings, overridden by whatever flags were given.
fn process_from(a: &GenArgs, cfg: &PipelineConfig) -> Result<ProcessParameters, CliError> {
    let mut p = cfg.process.to_parameters();
    if let Some(t) = a.process {
        p.process_type = t;
    }
    if a.glue_flow_rate.is_some() {
        p.glue_flow_rate = a.glue_flow_rate;
    }
    if a.wire_feed_rate.is_some() {
        p.wire_feed_rate = a.wire_feed_rate;
    }
    if a.layer_height.is_some() {
        p.layer_height = a.layer_height;
    }
    for (k, v) in &a.params {
        p.extra.insert(k.clone(), v.clone());
    }
    let problems = p.check();
    if !problems.is_empty() {
        return Err(CliError::Usage(format!(
            "process parameters: {}",
            problems.join("; ")
        )));
    }
    Ok(p)
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let process = process_from(&a, &cfg)?;
    let path = read_fused(&a.fused)?;
    let doc = build_document(&path, process, &a.project).map_err(|e| match e {
        PathmlError::Invalid(_) => CliError::Failed(e.to_string()),
        PathmlError::Frame(_) => CliError::input(&a.fused, e),
        other => CliError::Pipeline(other.to_string()),
    })?;
    write_output(&a.out, &write_xml(&doc), out)
}

fn validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let doc = read_pathml(&a.xml)?;
    let mut listing = String::new();
    let structural = validate_document(&doc);
    for v in &structural {
        listing.push_str(&format!("{v}\n"));
    }
    let limits = validate_path(&doc, &cfg.limits);
    for v in &limits.violations {
        listing.push_str(&format!("{v}\n"));
    }
    out.write_all(listing.as_bytes())
        .map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        })?;
    let total = structural.len() + limits.violations.len();
    if total == 0 {
        let _ = writeln!(
            err,
            "{}: valid, {} points",
            a.xml.display(),
            doc.point_count()
        );
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{}: {total} violation(s)",
            a.xml.display()
        )))
    }
}

fn expand(a: ExpandArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut doc = read_pathml(&a.xml)?;
    let d = a.direction;
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(CliError::Usage(
            "--direction must be a non-zero vector".into(),
        ));
    }
    let dir = if n == 1.0 {
        d
    } else {
        [d[0] / n, d[1] / n, d[2] / n]
    };
    if a.layer_height.is_some() {
        doc.process.layer_height = a.layer_height;
    }
    let expanded =
        expand_layers(&doc, a.layers, dir).map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(&a.out, &write_xml(&expanded), out)
}

fn emit(a: EmitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let doc = read_pathml(&a.xml)?;
    let structural = validate_document(&doc);
    if !structural.is_empty() {
        return Err(CliError::Failed(format!(
            "refusing to emit: {} document violation(s), first: {}",
            structural.len(),
            structural[0]
        )));
    }
    let report = validate_path(&doc, &cfg.limits);
    let program = emit_program(&doc, Some(&report)).map_err(|e| match e {
        ProgramError::ValidationFailed(_) => CliError::Failed(format!(
            "{e}; first: {}",
            report
                .violations
                .first()
                .map(|v| v.to_string())
                .unwrap_or_default()
        )),
        other => CliError::Pipeline(other.to_string()),
    })?;
    write_output(&a.out, program.to_text().as_bytes(), out)
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let executed = read_fused(&a.executed)?;
    let nominal = read_fused(&a.nominal)?;
    let tolerance = a.tolerance.unwrap_or(cfg.tolerance_mm);
    let r = deviation_report(&executed, &nominal, &a.sections.0, tolerance)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(&a.out, r.to_json().as_bytes(), out)?;
    if r.within_tolerance {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "deviation {:.6} mm exceeds tolerance {tolerance} mm",
            r.overall_max
        )))
    }
}
