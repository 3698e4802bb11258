//! JSON configuration and calibration files.

use std::collections::BTreeMap;
use std::path::Path;

use pathfuse_core::demo::{DEFAULT_FILTER_K, DEFAULT_FILTER_WINDOW};
use pathfuse_core::geometry::{
    make_transform, rot_from_fixed_xyz, CalibrationSet, FixedXyz, Transform4,
};
use pathfuse_core::pathml::{ProcessParameters, ProcessType};
use pathfuse_core::program::{PathLimits, DEFAULT_TOLERANCE_MM};
use serde::Deserialize;

use crate::CliError;

/// Environment variable naming a default pipeline config.
pub const CONFIG_ENV: &str = "PATHFUSE_CONFIG";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    pub translation_mm: [f64; 3],
    pub rotation_deg_fixed_xyz: [f64; 3],
}

impl PoseJson {
    fn to_transform(&self, name: &str) -> Result<Transform4, String> {
        if !self
            .translation_mm
            .iter()
            .chain(&self.rotation_deg_fixed_xyz)
            .all(|v| v.is_finite())
        {
            return Err(format!("{name}: values must be finite"));
        }
        let [rx, ry, rz] = self.rotation_deg_fixed_xyz;
        let r = rot_from_fixed_xyz(FixedXyz::from_degrees(rx, ry, rz))
            .map_err(|e| format!("{name}: {e}"))?;
        Ok(make_transform(r, self.translation_mm))
    }
}

/// `{R} <- {F}` and `{F} <- {S}` as measured in the cell.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub t_r_f: PoseJson,
    pub t_f_s: PoseJson,
}

impl CalibrationFile {
    pub fn to_calibration(&self) -> Result<CalibrationSet, String> {
        Ok(CalibrationSet {
            t_r_f: self.t_r_f.to_transform("t_r_f")?,
            t_f_s: self.t_f_s.to_transform("t_f_s")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Adhesive,
    Welding,
    Other,
}

impl From<ProcessKind> for ProcessType {
    fn from(k: ProcessKind) -> Self {
        match k {
            ProcessKind::Adhesive => ProcessType::Adhesive,
            ProcessKind::Welding => ProcessType::Welding,
            ProcessKind::Other => ProcessType::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub process_type: ProcessKind,
    pub glue_flow_rate_ml_min: Option<f64>,
    pub wire_feed_rate_mm_s: Option<f64>,
    pub layer_height_mm: Option<f64>,
    pub extra: BTreeMap<String, String>,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            process_type: ProcessKind::Other,
            glue_flow_rate_ml_min: None,
            wire_feed_rate_mm_s: None,
            layer_height_mm: None,
            extra: BTreeMap::new(),
        }
    }
}

impl ProcessConfig {
    pub fn to_parameters(&self) -> ProcessParameters {
        ProcessParameters {
            process_type: self.process_type.into(),
            glue_flow_rate: self.glue_flow_rate_ml_min,
            wire_feed_rate: self.wire_feed_rate_mm_s,
            layer_height: self.layer_height_mm,
            extra: self.extra.clone(),
        }
    }
}

/// Pipeline settings. Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter_window: usize,
    pub filter_k: f64,
    /// Demonstration samples kept before fusion. Default:
    /// `max(100, 2 * CAD waypoints)`, capped at the demonstration length.
    pub downsample_target: Option<usize>,
    /// Optional CAD resampling before fusion.
    pub resample_spacing_mm: Option<f64>,
    pub limits: PathLimits,
    pub tolerance_mm: f64,
    pub process: ProcessConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter_window: DEFAULT_FILTER_WINDOW,
            filter_k: DEFAULT_FILTER_K,
            downsample_target: None,
            resample_spacing_mm: None,
            limits: PathLimits::default(),
            tolerance_mm: DEFAULT_TOLERANCE_MM,
            process: ProcessConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.filter_window < 3 || self.filter_window % 2 == 0 {
            return Err(format!(
                "filter_window must be odd and >= 3, got {}",
                self.filter_window
            ));
        }
        if !(self.filter_k > 0.0) || !self.filter_k.is_finite() {
            return Err(format!("filter_k must be > 0, got {}", self.filter_k));
        }
        if let Some(t) = self.downsample_target {
            if t < 2 {
                return Err(format!("downsample_target must be >= 2, got {t}"));
            }
        }
        if let Some(s) = self.resample_spacing_mm {
            if !(s > 0.0) || !s.is_finite() {
                return Err(format!("resample_spacing_mm must be > 0, got {s}"));
            }
        }
        self.limits.validate().map_err(|e| e.to_string())?;
        if !(self.tolerance_mm >= 0.0) || !self.tolerance_mm.is_finite() {
            return Err(format!(
                "tolerance_mm must be finite and >= 0, got {}",
                self.tolerance_mm
            ));
        }
        let problems = self.process.to_parameters().check();
        if let Some(p) = problems.first() {
            return Err(format!("process: {p}"));
        }
        Ok(())
    }

    /// Demonstration sample count to keep for `cad_points` waypoints.
    pub fn downsample_target_for(&self, cad_points: usize, demo_len: usize) -> usize {
        self.downsample_target
            .unwrap_or_else(|| (2 * cad_points).max(100))
            .min(demo_len)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = crate::read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Explicit path first, then the environment variable, then defaults.
pub fn load_config(explicit: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let from_env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| from_env.map(Into::into));
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let cfg: PipelineConfig = read_json(&path)?;
    cfg.validate().map_err(|message| CliError::Input {
        path: path.display().to_string(),
        message,
    })?;
    Ok(cfg)
}

pub fn load_calibration(path: &Path) -> Result<CalibrationSet, CliError> {
    let file: CalibrationFile = read_json(path)?;
    file.to_calibration().map_err(|message| CliError::Input {
        path: path.display().to_string(),
        message,
    })
}
