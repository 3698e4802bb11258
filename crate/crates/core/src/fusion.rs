//! Marrying CAD positions with demonstrated orientations and speeds, and
//! moving the result into the robot frame.
//!
//! CAD positions are taken verbatim: the tracker's positions only serve to
//! parameterize the demonstration by normalized arc length, which is then
//! matched against the CAD path's own normalized arc length. Demonstration
//! and CAD path are assumed to start and end at corresponding points; no
//! time warping is attempted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad::{arc_params, normalized_cumulative_length, polyline_length, CadPath};
use crate::demo::{estimate_speed, quat_of, DemoError, PoseSeries};
use crate::geometry::{
    self, compose, make_transform, robot_angles_fixed_xyz, rot_from_fixed_xyz, CalibrationSet,
    FixedXyz, FrameId, GeometryError, Vec3,
};

/// Below this demonstrated arc length (mm) the demonstration is
/// parameterized by normalized time instead.
pub const MIN_DEMO_ARC_LENGTH_MM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("invalid fused path: {0}")]
    InvalidPath(String),
    #[error("fused path JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ArcLength,
    /// Fallback for demonstrations that barely move.
    NormalizedTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameterization {
    /// Non-decreasing, first 0, last 1.
    pub params: Vec<f64>,
    pub kind: ParamKind,
}

/// Normalized cumulative arc length of the demonstrated positions, or
/// normalized time when the demonstration covers less than
/// [`MIN_DEMO_ARC_LENGTH_MM`].
pub fn parameterize(s: &PoseSeries) -> Parameterization {
    let positions = s.positions();
    if polyline_length(&positions) >= MIN_DEMO_ARC_LENGTH_MM {
        return Parameterization {
            params: normalized_cumulative_length(&positions),
            kind: ParamKind::ArcLength,
        };
    }
    let t0 = s.samples[0].t;
    let span = s.samples[s.samples.len() - 1].t - t0;
    let mut params: Vec<f64> = s.samples.iter().map(|p| (p.t - t0) / span).collect();
    *params.last_mut().unwrap() = 1.0;
    Parameterization {
        params,
        kind: ParamKind::NormalizedTime,
    }
}

/// Segment index `i` and fraction `f` such that `u` lies at
/// `params[i] + f (params[i+1] - params[i])`, choosing a segment of positive
/// length whenever `u` is strictly inside `(0, 1)`.
pub(crate) fn locate(params: &[f64], u: f64) -> (usize, f64) {
    let n = params.len();
    debug_assert!(n >= 2);
    if u <= params[0] {
        return (0, 0.0);
    }
    if u >= params[n - 1] {
        return (n - 2, 1.0);
    }
    let j = params.partition_point(|&p| p <= u);
    let i = j - 1;
    let f = (u - params[i]) / (params[j] - params[i]);
    (i, f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPoint {
    /// mm
    pub position: Vec3,
    /// Fixed X-Y-Z angles, radians.
    pub orientation: FixedXyz,
    /// mm/s
    pub speed: f64,
}

/// A robot-ready pose sequence. `closed` marks a contour; fused contours
/// carry the return to the start as an explicit final point.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedPath {
    pub points: Vec<FusedPoint>,
    pub frame: FrameId,
    pub closed: bool,
}

impl FusedPath {
    pub fn new(points: Vec<FusedPoint>, frame: FrameId, closed: bool) -> Result<Self, FusionError> {
        let p = Self {
            points,
            frame,
            closed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.points.len() < 2 {
            return Err(FusionError::InvalidPath(format!(
                "need at least 2 points, got {}",
                self.points.len()
            )));
        }
        if !matches!(self.frame, FrameId::S | FrameId::R) {
            return Err(FusionError::InvalidPath(format!(
                "paths live in frame S or R, not {}",
                self.frame
            )));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.position.iter().all(|v| v.is_finite()) || !p.orientation.is_finite() {
                return Err(FusionError::InvalidPath(format!("point {i} is not finite")));
            }
            if !(p.speed >= 0.0) || !p.speed.is_finite() {
                return Err(FusionError::InvalidPath(format!(
                    "point {i} has invalid speed {}",
                    p.speed
                )));
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// Positions with the loop closed explicitly (closed paths whose last
    /// point differs from the first get the first point appended).
    pub fn polyline(&self) -> Vec<Vec3> {
        let mut pts = self.positions();
        if self.closed && pts.first() != pts.last() {
            pts.push(pts[0]);
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub path: FusedPath,
    /// [`ParamKind::NormalizedTime`] flags a demonstration that did not move.
    pub parameterization: ParamKind,
}

/// One fused point per CAD waypoint (plus the explicit closing point for
/// closed contours), in frame S.
///
/// The demonstration should already be outlier filtered.
pub fn fuse(cad: &CadPath, demo: &PoseSeries) -> Result<FusionResult, FusionError> {
    if demo.samples.len() < 2 {
        return Err(FusionError::InvalidArgument(format!(
            "demonstration has {} samples",
            demo.samples.len()
        )));
    }
    let param = parameterize(demo);
    let speeds = estimate_speed(demo)?;
    let quats: Vec<_> = demo
        .samples
        .iter()
        .map(|s| quat_of(&s.orientation))
        .collect();

    let positions = cad.polyline();
    let cad_params = arc_params(cad).params;
    let points = positions
        .iter()
        .zip(&cad_params)
        .map(|(&position, &u)| {
            let (i, f) = locate(&param.params, u);
            let q = quats[i].slerp(&quats[i + 1], f);
            let speed = if f == 1.0 {
                speeds[i + 1]
            } else {
                speeds[i] + f * (speeds[i + 1] - speeds[i])
            };
            FusedPoint {
                position,
                orientation: robot_angles_fixed_xyz(&q.to_matrix()),
                speed,
            }
        })
        .collect();
    Ok(FusionResult {
        path: FusedPath::new(points, FrameId::S, cad.closed())?,
        parameterization: param.kind,
    })
}

/// Left-compose every pose with `T_R_F * T_F_S`.
pub fn to_robot_frame(path: &FusedPath, calib: &CalibrationSet) -> Result<FusedPath, FusionError> {
    if path.frame != FrameId::S {
        return Err(FusionError::FrameMismatch {
            expected: FrameId::S,
            found: path.frame,
        });
    }
    let prefix = calib.robot_from_receiver();
    let points = path
        .points
        .iter()
        .map(|p| {
            let pose = make_transform(rot_from_fixed_xyz(p.orientation)?, p.position);
            let robot = compose(&prefix, &pose);
            Ok(FusedPoint {
                position: robot.translation,
                orientation: robot_angles_fixed_xyz(&robot.rotation),
                speed: p.speed,
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    FusedPath::new(points, FrameId::R, path.closed)
}

#[derive(Debug, Serialize, Deserialize)]
struct PointJson {
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    rx_deg: f64,
    ry_deg: f64,
    rz_deg: f64,
    v_mm_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathJson {
    frame: String,
    closed: bool,
    points: Vec<PointJson>,
}

pub fn write_fused_json(path: &FusedPath) -> String {
    let doc = PathJson {
        frame: path.frame.to_string(),
        closed: path.closed,
        points: path
            .points
            .iter()
            .map(|p| {
                let [rx, ry, rz] = p.orientation.to_degrees();
                PointJson {
                    x_mm: p.position[0],
                    y_mm: p.position[1],
                    z_mm: p.position[2],
                    rx_deg: rx,
                    ry_deg: ry,
                    rz_deg: rz,
                    v_mm_s: p.speed,
                }
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn parse_fused_json(input: &[u8]) -> Result<FusedPath, FusionError> {
    let doc: PathJson =
        serde_json::from_slice(input).map_err(|e| FusionError::Json(e.to_string()))?;
    let frame = match doc.frame.as_str() {
        "S" => FrameId::S,
        "R" => FrameId::R,
        other => {
            return Err(FusionError::Json(format!(
                "frame must be \"S\" or \"R\", got {other:?}"
            )))
        }
    };
    let points = doc
        .points
        .into_iter()
        .map(|p| FusedPoint {
            position: [p.x_mm, p.y_mm, p.z_mm],
            orientation: FixedXyz::from_degrees(p.rx_deg, p.ry_deg, p.rz_deg),
            speed: p.v_mm_s,
        })
        .collect();
    FusedPath::new(points, frame, doc.closed)
}

/// Largest rotation angle (radians) between corresponding orientations.
pub fn max_orientation_error(a: &FusedPath, b: &FusedPath) -> Result<f64, FusionError> {
    if a.points.len() != b.points.len() {
        return Err(FusionError::InvalidArgument(format!(
            "paths have {} and {} points",
            a.points.len(),
            b.points.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (p, q) in a.points.iter().zip(&b.points) {
        let ra = rot_from_fixed_xyz(p.orientation)?;
        let rb = rot_from_fixed_xyz(q.orientation)?;
        worst = worst.max(ra.angle_to(&rb));
    }
    Ok(worst)
}

/// Inter-point distances, used to check rigid-motion isometry.
pub fn segment_lengths(path: &FusedPath) -> Vec<f64> {
    path.points
        .windows(2)
        .map(|w| geometry::distance(w[0].position, w[1].position))
        .collect()
}
