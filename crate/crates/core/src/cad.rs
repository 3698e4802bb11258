//! Nominal positional paths exported from CAD/CAM.
//!
//! Two neutral encodings are accepted:
//!
//! * CSV with header `x_mm,y_mm,z_mm`, one waypoint per row, and an optional
//!   metadata line `# closed=true`.
//! * JSON `{"waypoints": [[x, y, z], ...], "closed": false}`.
//!
//! The CAD frame coincides with the tracker receiver frame `{S}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Vec3};

/// Consecutive waypoints closer than this are merged.
pub const MERGE_TOL_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CadError {
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("path needs at least 2 distinct waypoints, got {distinct}")]
    Degenerate { distinct: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadPath {
    waypoints: Vec<Vec3>,
    closed: bool,
}

impl CadPath {
    /// Builds a path, merging consecutive near-duplicates. For a closed path
    /// a final waypoint equal to the first is dropped; the closing segment is
    /// always implicit.
    pub fn new(points: Vec<Vec3>, closed: bool) -> Result<Self, CadError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(CadError::InvalidArgument(format!(
                "waypoint {i} is not finite"
            )));
        }
        let mut waypoints: Vec<Vec3> = Vec::with_capacity(points.len());
        for p in points {
            match waypoints.last() {
                Some(last) if geometry::distance(*last, p) < MERGE_TOL_MM => {}
                _ => waypoints.push(p),
            }
        }
        if closed && waypoints.len() > 2 {
            let first = waypoints[0];
            if geometry::distance(first, *waypoints.last().unwrap()) < MERGE_TOL_MM {
                waypoints.pop();
            }
        }
        if waypoints.len() < 2 {
            return Err(CadError::Degenerate {
                distinct: waypoints.len(),
            });
        }
        Ok(Self { waypoints, closed })
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Waypoints with the closing vertex appended for closed paths.
    pub fn polyline(&self) -> Vec<Vec3> {
        let mut pts = self.waypoints.clone();
        if self.closed {
            pts.push(self.waypoints[0]);
        }
        pts
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline())
    }
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points
        .windows(2)
        .map(|w| geometry::distance(w[0], w[1]))
        .sum()
}

/// Normalized arc-length parameter of each polyline vertex.
///
/// For open paths there is one entry per waypoint. Closed paths carry one
/// extra trailing entry (always 1.0) for the implicit return to the first
/// waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcParams {
    pub params: Vec<f64>,
}

pub fn arc_params(p: &CadPath) -> ArcParams {
    ArcParams {
        params: normalized_cumulative_length(&p.polyline()),
    }
}

/// Cumulative polyline length divided by the total. Returns all zeros when
/// the total length is zero.
pub fn normalized_cumulative_length(points: &[Vec3]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += geometry::distance(points[i - 1], *p);
        }
        cum.push(acc);
    }
    if acc > 0.0 {
        for c in cum.iter_mut() {
            *c /= acc;
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
    }
    cum
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub path: CadPath,
    /// Set when the requested spacing exceeded the path length and only the
    /// endpoints were kept.
    pub spacing_exceeded: bool,
}

/// Subdivide every segment into the fewest equal pieces no longer than
/// `spacing`. Original vertices are kept exactly.
pub fn resample_cad(p: &CadPath, spacing: f64) -> Result<Resampled, CadError> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(CadError::InvalidArgument(format!(
            "spacing must be > 0, got {spacing}"
        )));
    }
    if spacing > p.length() {
        let wp = p.waypoints();
        let path = CadPath::new(vec![wp[0], *wp.last().unwrap()], false).or_else(|_| {
            // closed loop whose last waypoint is adjacent to the first
            CadPath::new(vec![wp[0], wp[1]], false)
        })?;
        return Ok(Resampled {
            path,
            spacing_exceeded: true,
        });
    }

    let poly = p.polyline();
    let mut out = Vec::new();
    for w in poly.windows(2) {
        let len = geometry::distance(w[0], w[1]);
        let pieces = ((len / spacing) - 1e-9).ceil().max(1.0) as usize;
        out.push(w[0]);
        for k in 1..pieces {
            out.push(geometry::lerp(w[0], w[1], k as f64 / pieces as f64));
        }
    }
    if !p.closed() {
        out.push(*poly.last().unwrap());
    }
    Ok(Resampled {
        path: CadPath::new(out, p.closed())?,
        spacing_exceeded: false,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CadJson {
    waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    closed: bool,
}

/// Parse a CAD path, detecting JSON by a leading `{`.
pub fn parse_cad(input: &[u8]) -> Result<CadPath, CadError> {
    let first = input.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        parse_cad_json(input)
    } else {
        parse_cad_csv(input)
    }
}

fn parse_cad_json(input: &[u8]) -> Result<CadPath, CadError> {
    let doc: CadJson = serde_json::from_slice(input).map_err(|e| CadError::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    CadPath::new(doc.waypoints, doc.closed)
}

fn parse_cad_csv(input: &[u8]) -> Result<CadPath, CadError> {
    let text = std::str::from_utf8(input).map_err(|e| CadError::Parse {
        location: "input".into(),
        message: format!("not UTF-8: {e}"),
    })?;
    let mut closed = false;
    let mut header_seen = false;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(v) = meta.strip_prefix("closed=") {
                closed = match v.trim() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(CadError::Parse {
                            location: format!("line {line_no}"),
                            message: format!("closed must be true or false, got `{other}`"),
                        })
                    }
                };
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["x_mm", "y_mm", "z_mm"] {
                return Err(CadError::Parse {
                    location: format!("line {line_no}"),
                    message: format!("expected header `x_mm,y_mm,z_mm`, found `{line}`"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CadError::Parse {
                location: format!("line {line_no}"),
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut p = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CadError::Parse {
                    location: format!("line {line_no} column {}", k + 1),
                    message: format!("`{f}` is not a finite number"),
                })?;
        }
        points.push(p);
    }
    if !header_seen {
        return Err(CadError::Parse {
            location: "line 1".into(),
            message: "missing header `x_mm,y_mm,z_mm`".into(),
        });
    }
    CadPath::new(points, closed)
}

pub fn write_cad_csv(p: &CadPath) -> String {
    let mut out = String::from("x_mm,y_mm,z_mm\n");
    for w in p.waypoints() {
        out.push_str(&format!("{},{},{}\n", w[0], w[1], w[2]));
    }
    if p.closed() {
        out.push_str("# closed=true\n");
    }
    out
}

pub fn write_cad_json(p: &CadPath) -> String {
    let doc = CadJson {
        waypoints: p.waypoints().to_vec(),
        closed: p.closed(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}
