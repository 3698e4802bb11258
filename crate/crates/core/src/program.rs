//! Pre-emit path checks, neutral robot program text, and sectioned
//! deviation reports comparing an executed path with its nominal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad::normalized_cumulative_length;
use crate::fusion::FusedPath;
use crate::geometry::{self, rot_from_fixed_xyz, FixedXyz, FrameId, Vec3};
use crate::pathml::{PathMLDocument, PathPoint};

/// Worst deviation still accepted on the glass-frame adhesive cell.
pub const ADHESIVE_TOLERANCE_MM: f64 = 4.0;
/// Worst deviation still accepted on the welding cell.
pub const WELDING_TOLERANCE_MM: f64 = 2.0;
pub const DEFAULT_TOLERANCE_MM: f64 = ADHESIVE_TOLERANCE_MM;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("refusing to emit: validation reported {0} violation(s)")]
    ValidationFailed(usize),
    #[error("frame mismatch: executed path in {executed}, nominal in {nominal}")]
    FrameMismatch { executed: FrameId, nominal: FrameId },
    #[error("invalid section breaks: {0}")]
    InvalidSections(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLimits {
    /// mm between consecutive points
    pub max_step: f64,
    /// mm/s
    pub max_speed: f64,
    pub workspace_center: Vec3,
    /// mm
    pub workspace_radius: f64,
    /// degrees between consecutive points
    pub max_orient_step: f64,
}

impl Default for PathLimits {
    fn default() -> Self {
        Self {
            max_step: 50.0,
            max_speed: 500.0,
            workspace_center: [0.0; 3],
            workspace_radius: 2000.0,
            max_orient_step: 30.0,
        }
    }
}

impl PathLimits {
    pub fn validate(&self) -> Result<(), ProgramError> {
        let named = [
            ("max_step", self.max_step),
            ("max_speed", self.max_speed),
            ("workspace_radius", self.workspace_radius),
            ("max_orient_step", self.max_orient_step),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ProgramError::InvalidArgument(format!(
                    "limit {name} must be positive, got {v}"
                )));
            }
        }
        if !self.workspace_center.iter().all(|v| v.is_finite()) {
            return Err(ProgramError::InvalidArgument(
                "workspace_center must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Position step from the previous point.
    Step,
    /// Orientation step from the previous point.
    OrientStep,
    /// Outside the workspace sphere.
    Reach,
    Speed,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Step => "step",
            Rule::OrientStep => "orient_step",
            Rule::Reach => "reach",
            Rule::Speed => "speed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitViolation {
    /// Layer index as stored in the document.
    pub layer: usize,
    /// Track position within its layer.
    pub track: usize,
    /// Point position within its track; step rules blame the later point.
    pub point: usize,
    pub rule: Rule,
    pub measured: f64,
    pub limit: f64,
}

impl fmt::Display for LimitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "layer {} track {} point {}: {} {:.6} exceeds {:.6}",
            self.layer, self.track, self.point, self.rule, self.measured, self.limit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<LimitViolation>,
    pub passed: bool,
}

impl ValidationReport {
    fn from_violations(violations: Vec<LimitViolation>) -> Self {
        let passed = violations.is_empty();
        Self { violations, passed }
    }
}

/// Layers in index order; ties keep document order.
fn layers_in_order(doc: &PathMLDocument) -> Vec<&crate::pathml::Layer> {
    let mut layers: Vec<_> = doc.layers.iter().collect();
    layers.sort_by_key(|l| l.index);
    layers
}

fn orientation_step_deg(a: &PathPoint, b: &PathPoint) -> f64 {
    let ra = rot_from_fixed_xyz(FixedXyz::from_degrees(a.rx, a.ry, a.rz));
    let rb = rot_from_fixed_xyz(FixedXyz::from_degrees(b.rx, b.ry, b.rz));
    match (ra, rb) {
        (Ok(ra), Ok(rb)) => ra.angle_to(&rb).to_degrees(),
        _ => f64::INFINITY,
    }
}

/// Step, orientation-step, reach and speed checks on every track.
///
/// Violations come out ordered by (layer index, track, point, rule).
pub fn validate_path(doc: &PathMLDocument, limits: &PathLimits) -> ValidationReport {
    let mut out = Vec::new();
    for layer in layers_in_order(doc) {
        for (ti, track) in layer.tracks.iter().enumerate() {
            for (pi, p) in track.points.iter().enumerate() {
                let mut push = |rule, measured, limit| {
                    out.push(LimitViolation {
                        layer: layer.index,
                        track: ti,
                        point: pi,
                        rule,
                        measured,
                        limit,
                    })
                };
                if pi > 0 {
                    let prev = &track.points[pi - 1];
                    let step = geometry::distance(prev.position(), p.position());
                    if !(step <= limits.max_step) {
                        push(Rule::Step, step, limits.max_step);
                    }
                    let turn = orientation_step_deg(prev, p);
                    if !(turn <= limits.max_orient_step) {
                        push(Rule::OrientStep, turn, limits.max_orient_step);
                    }
                }
                let reach = geometry::distance(p.position(), limits.workspace_center);
                if !(reach <= limits.workspace_radius) {
                    push(Rule::Reach, reach, limits.workspace_radius);
                }
                if !(p.velocity <= limits.max_speed) {
                    push(Rule::Speed, p.velocity, limits.max_speed);
                }
            }
        }
    }
    ValidationReport::from_violations(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    #[default]
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotProgram {
    pub dialect: Dialect,
    pub lines: Vec<String>,
    /// Number of leading comment lines.
    pub header_lines: usize,
}

impl RobotProgram {
    /// Program text, LF-terminated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn comment_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect()
}

/// Neutral program text for `doc`. A supplied failing report blocks emission.
///
/// Each tool-active track is wrapped in `SET_IO TOOL 1` / `SET_IO TOOL 0`.
/// The move to its first point therefore runs with the tool on; separate
/// approach moves belong in tool-off tracks.
pub fn emit_program(
    doc: &PathMLDocument,
    report: Option<&ValidationReport>,
) -> Result<RobotProgram, ProgramError> {
    if let Some(r) = report {
        if !r.passed {
            return Err(ProgramError::ValidationFailed(r.violations.len()));
        }
    }
    if doc.point_count() == 0 {
        return Err(ProgramError::InvalidArgument(
            "document has no points".into(),
        ));
    }

    let p = &doc.process;
    let mut lines = vec![
        "# pathfuse neutral program".to_string(),
        format!("# project: {}", comment_safe(&doc.project_name)),
        format!("# process: {}", p.process_type),
    ];
    for (name, v) in [
        ("GlueFlowRate_ml_min", p.glue_flow_rate),
        ("WireFeedRate_mm_s", p.wire_feed_rate),
        ("LayerHeight_mm", p.layer_height),
    ] {
        if let Some(v) = v {
            lines.push(format!("# {name}: {}", fmt3(v)));
        }
    }
    for (k, v) in &p.extra {
        lines.push(format!("# {}: {}", comment_safe(k), comment_safe(v)));
    }
    let header_lines = lines.len();

    for layer in layers_in_order(doc) {
        for track in &layer.tracks {
            if track.tool_active {
                lines.push("SET_IO TOOL 1".into());
            }
            for pt in &track.points {
                lines.push(format!(
                    "MOVEL {} {} {} {} {} {} V={}",
                    fmt3(pt.x),
                    fmt3(pt.y),
                    fmt3(pt.z),
                    fmt3(pt.rx),
                    fmt3(pt.ry),
                    fmt3(pt.rz),
                    fmt3(pt.velocity)
                ));
            }
            if track.tool_active {
                lines.push("SET_IO TOOL 0".into());
            }
        }
    }
    Ok(RobotProgram {
        dialect: Dialect::Neutral,
        lines,
        header_lines,
    })
}

/// Closest point on segment `ab` to `p`, as (distance, segment fraction).
pub fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> (f64, f64) {
    let ab = geometry::sub(b, a);
    let len2 = geometry::dot(ab, ab);
    let f = if len2 > 0.0 {
        (geometry::dot(geometry::sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    // Exact endpoints, so points on the polyline measure exactly zero.
    let closest = if f == 1.0 { b } else { geometry::lerp(a, b, f) };
    (geometry::distance(p, closest), f)
}

/// Minimum distance from `p` to `polyline`, with the normalized arc-length
/// parameter of the closest point (first one on ties).
pub fn point_polyline_distance(p: Vec3, polyline: &[Vec3]) -> (f64, f64) {
    match polyline {
        [] => (f64::INFINITY, 0.0),
        [only] => (geometry::distance(p, *only), 0.0),
        _ => {
            let params = normalized_cumulative_length(polyline);
            let mut best = (f64::INFINITY, 0.0);
            for (i, w) in polyline.windows(2).enumerate() {
                let (d, f) = point_segment_distance(p, w[0], w[1]);
                if d < best.0 {
                    best = (d, params[i] + f * (params[i + 1] - params[i]));
                }
            }
            best
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionDeviation {
    pub label: String,
    /// mm
    pub max_deviation: f64,
    pub point_count: usize,
    /// No executed point fell in this section.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub sections: Vec<SectionDeviation>,
    pub overall_max: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

impl DeviationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Per-section maxima of the distance from each executed point to the
/// nominal polyline. A point belongs to the section containing the
/// arc-length parameter of its closest nominal point; `section_breaks`
/// split `[0, 1]` into `breaks + 1` sections.
pub fn deviation_report(
    executed: &FusedPath,
    nominal: &FusedPath,
    section_breaks: &[f64],
    tolerance: f64,
) -> Result<DeviationReport, ProgramError> {
    if executed.frame != nominal.frame {
        return Err(ProgramError::FrameMismatch {
            executed: executed.frame,
            nominal: nominal.frame,
        });
    }
    if !(tolerance >= 0.0) || !tolerance.is_finite() {
        return Err(ProgramError::InvalidArgument(format!(
            "tolerance must be finite and >= 0, got {tolerance}"
        )));
    }
    if let Some(b) = section_breaks.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(ProgramError::InvalidSections(format!(
            "break {b} outside (0, 1)"
        )));
    }
    if section_breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ProgramError::InvalidSections(
            "breaks must be strictly increasing".into(),
        ));
    }

    let mut sections: Vec<SectionDeviation> = (0..=section_breaks.len())
        .map(|k| SectionDeviation {
            label: format!("Section #{}", k + 1),
            max_deviation: 0.0,
            point_count: 0,
            empty: true,
        })
        .collect();
    let line = nominal.polyline();
    for p in &executed.points {
        let (d, u) = point_polyline_distance(p.position, &line);
        let k = section_breaks.partition_point(|b| *b <= u);
        let s = &mut sections[k];
        s.max_deviation = s.max_deviation.max(d);
        s.point_count += 1;
        s.empty = false;
    }
    let overall_max = sections.iter().map(|s| s.max_deviation).fold(0.0, f64::max);
    Ok(DeviationReport {
        sections,
        overall_max,
        tolerance,
        within_tolerance: overall_max <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathml::{Layer, ProcessParameters, Track};

    fn pt(x: f64, y: f64, z: f64, v: f64) -> PathPoint {
        PathPoint {
            x,
            y,
            z,
            velocity: v,
            ..PathPoint::default()
        }
    }

    fn doc_with(tracks: Vec<Track>) -> PathMLDocument {
        PathMLDocument {
            project_name: "t".into(),
            process: ProcessParameters::adhesive(5.0),
            layers: vec![Layer {
                name: "Layer_0".into(),
                index: 0,
                tracks,
            }],
        }
    }

    fn track(points: Vec<PathPoint>, tool_active: bool) -> Track {
        Track {
            name: "Track_0".into(),
            points,
            tool_active,
        }
    }

    #[test]
    fn inside_limits_passes() {
        let d = doc_with(vec![track(
            vec![pt(0.0, 0.0, 0.0, 10.0), pt(10.0, 0.0, 0.0, 10.0)],
            true,
        )]);
        let r = validate_path(&d, &PathLimits::default());
        assert!(r.passed);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn reach_violation_at_index() {
        let limits = PathLimits {
            workspace_radius: 100.0,
            ..PathLimits::default()
        };
        let d = doc_with(vec![track(
            vec![
                pt(60.0, 0.0, 0.0, 1.0),
                pt(90.0, 0.0, 0.0, 1.0),
                pt(101.0, 0.0, 0.0, 1.0),
            ],
            true,
        )]);
        let r = validate_path(&d, &limits);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, Rule::Reach);
        assert_eq!(r.violations[0].point, 2);
        assert_eq!(r.violations[0].measured, 101.0);
        assert!(!r.passed);
    }

    #[test]
    fn step_violation_measures_distance() {
        let limits = PathLimits {
            max_step: 10.0,
            ..PathLimits::default()
        };
        let d = doc_with(vec![track(
            vec![pt(0.0, 0.0, 0.0, 1.0), pt(30.0, 40.0, 0.0, 1.0)],
            true,
        )]);
        let r = validate_path(&d, &limits);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, Rule::Step);
        assert_eq!(r.violations[0].measured, 50.0);
        assert_eq!(r.violations[0].point, 1);
    }

    #[test]
    fn orientation_step_and_speed() {
        let mut b = pt(1.0, 0.0, 0.0, 600.0);
        b.rz = 45.0;
        let d = doc_with(vec![track(vec![pt(0.0, 0.0, 0.0, 1.0), b], true)]);
        let r = validate_path(&d, &PathLimits::default());
        let rules: Vec<Rule> = r.violations.iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::OrientStep, Rule::Speed]);
        assert!((r.violations[0].measured - 45.0).abs() < 1e-9);
    }

    #[test]
    fn orientation_step_wraps() {
        let mut a = pt(0.0, 0.0, 0.0, 1.0);
        let mut b = pt(1.0, 0.0, 0.0, 1.0);
        a.rz = 179.0;
        b.rz = -179.0;
        assert!((orientation_step_deg(&a, &b) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn emit_structure() {
        let d = doc_with(vec![track(
            vec![pt(1.0, 2.0, 3.0, 4.0), pt(-0.0001, 0.0, 0.0, 4.0)],
            true,
        )]);
        let p = emit_program(&d, None).unwrap();
        let body = &p.lines[p.header_lines..];
        assert_eq!(
            body,
            [
                "SET_IO TOOL 1",
                "MOVEL 1.000 2.000 3.000 0.000 0.000 0.000 V=4.000",
                "MOVEL 0.000 0.000 0.000 0.000 0.000 0.000 V=4.000",
                "SET_IO TOOL 0",
            ]
        );
        assert!(p.lines[..p.header_lines].iter().all(|l| l.starts_with('#')));
        assert!(p.to_text().ends_with("SET_IO TOOL 0\n"));

        let off = doc_with(vec![track(
            vec![pt(0.0, 0.0, 0.0, 1.0), pt(1.0, 0.0, 0.0, 1.0)],
            false,
        )]);
        let p = emit_program(&off, None).unwrap();
        assert!(!p.lines.iter().any(|l| l.starts_with("SET_IO")));
        assert_eq!(p.lines.len(), p.header_lines + 2);
    }

    #[test]
    fn emit_refuses_failed_report_and_empty_doc() {
        let d = doc_with(vec![track(
            vec![pt(0.0, 0.0, 0.0, 1.0), pt(100.0, 0.0, 0.0, 1.0)],
            true,
        )]);
        let limits = PathLimits {
            max_step: 10.0,
            ..PathLimits::default()
        };
        let r = validate_path(&d, &limits);
        assert_eq!(
            emit_program(&d, Some(&r)),
            Err(ProgramError::ValidationFailed(1))
        );
        let mut empty = d.clone();
        empty.layers.clear();
        assert!(matches!(
            emit_program(&empty, None),
            Err(ProgramError::InvalidArgument(_))
        ));
    }

    #[test]
    fn layers_emitted_in_index_order() {
        let mut d = doc_with(vec![track(
            vec![pt(0.0, 0.0, 0.0, 1.0), pt(1.0, 0.0, 0.0, 1.0)],
            false,
        )]);
        let mut upper = d.layers[0].clone();
        upper.index = 1;
        upper.name = "Layer_1".into();
        for p in &mut upper.tracks[0].points {
            p.z = 2.0;
        }
        d.layers.insert(0, upper);
        let p = emit_program(&d, None).unwrap();
        assert!(p.lines[p.header_lines].ends_with("0.000 0.000 0.000 0.000 V=1.000"));
        assert!(p
            .lines
            .last()
            .unwrap()
            .starts_with("MOVEL 1.000 0.000 2.000"));
    }

    #[test]
    fn segment_distance_oracle() {
        let (d, f) = point_segment_distance([5.0, 3.0, 4.0], [0.0; 3], [10.0, 0.0, 0.0]);
        assert_eq!(d, 5.0);
        assert_eq!(f, 0.5);
        let (d, f) = point_segment_distance([-3.0, 4.0, 0.0], [0.0; 3], [10.0, 0.0, 0.0]);
        assert_eq!((d, f), (5.0, 0.0));
        let (d, _) = point_segment_distance([1.0, 1.0, 1.0], [0.0; 3], [0.0; 3]);
        assert_eq!(d, 3f64.sqrt());
    }

    #[test]
    fn polyline_distance_param() {
        let line = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0]];
        let (d, u) = point_polyline_distance([12.0, 5.0, 0.0], &line);
        assert_eq!(d, 2.0);
        assert_eq!(u, 0.75);
    }
}
