//! PathML: robot paths and process parameters in a CAEX-style XML
//! hierarchy (project → layers → tracks → points). The accepted subset is
//! described in `docs/pathml.md`.
//!
//! The writer is
//! canonical: numbers carry exactly six decimals, attributes appear in a
//! fixed order, extras are sorted by key, lines end in LF. Documents that
//! are semantically equal (see [`PathMLDocument::canonical`]) serialize to
//! identical bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::fusion::FusedPath;
use crate::geometry::{self, FrameId, Vec3};

pub const INSTANCE_HIERARCHY_NAME: &str = "PathML";

const ATTR_PROCESS_TYPE: &str = "ProcessType";
const ATTR_GLUE: &str = "GlueFlowRate_ml_min";
const ATTR_WIRE: &str = "WireFeedRate_mm_s";
const ATTR_LAYER_HEIGHT: &str = "LayerHeight_mm";
const ATTR_LAYER_INDEX: &str = "LayerIndex";
const ATTR_TOOL_ACTIVE: &str = "ToolActive";
const POINT_ATTRS: [(&str, &str); 7] = [
    ("X_mm", "mm"),
    ("Y_mm", "mm"),
    ("Z_mm", "mm"),
    ("RX_deg", "deg"),
    ("RY_deg", "deg"),
    ("RZ_deg", "deg"),
    ("Velocity_mm_s", "mm/s"),
];
const RESERVED_PROCESS_ATTRS: [&str; 4] =
    [ATTR_PROCESS_TYPE, ATTR_GLUE, ATTR_WIRE, ATTR_LAYER_HEIGHT];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathmlError {
    #[error("PathML documents hold robot-frame paths, got frame {0}")]
    Frame(FrameId),
    #[error("invalid document: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("XML error at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("document already has {0} layers; expansion needs exactly one")]
    AlreadyExpanded(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One broken invariant, located by element path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessType {
    Adhesive,
    Welding,
    Other,
}

impl ProcessType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProcessType::Adhesive => "adhesive",
            ProcessType::Welding => "welding",
            ProcessType::Other => "other",
        }
    }
}

impl fmt::Display for ProcessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProcessType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adhesive" => Ok(ProcessType::Adhesive),
            "welding" => Ok(ProcessType::Welding),
            "other" => Ok(ProcessType::Other),
            _ => Err(format!(
                "unknown process type `{s}` (expected adhesive, welding or other)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessParameters {
    pub process_type: ProcessType,
    /// ml/min
    pub glue_flow_rate: Option<f64>,
    /// mm/s
    pub wire_feed_rate: Option<f64>,
    /// mm
    pub layer_height: Option<f64>,
    /// Pass-through attributes, sorted by key.
    pub extra: BTreeMap<String, String>,
}

impl ProcessParameters {
    pub fn new(process_type: ProcessType) -> Self {
        Self {
            process_type,
            glue_flow_rate: None,
            wire_feed_rate: None,
            layer_height: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn adhesive(glue_flow_rate: f64) -> Self {
        Self {
            glue_flow_rate: Some(glue_flow_rate),
            ..Self::new(ProcessType::Adhesive)
        }
    }

    pub fn welding(wire_feed_rate: f64) -> Self {
        Self {
            wire_feed_rate: Some(wire_feed_rate),
            ..Self::new(ProcessType::Welding)
        }
    }

    /// Broken process invariants as messages; empty when valid.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.violations("", &mut out);
        out.into_iter().map(|v| v.rule).collect()
    }

    fn violations(&self, at: &str, out: &mut Vec<Violation>) {
        let mut push = |rule: String| {
            out.push(Violation {
                path: at.to_string(),
                rule,
            })
        };
        match self.process_type {
            ProcessType::Adhesive if self.glue_flow_rate.is_none() => {
                push("adhesive process requires GlueFlowRate_ml_min".into())
            }
            ProcessType::Welding if self.wire_feed_rate.is_none() => {
                push("welding process requires WireFeedRate_mm_s".into())
            }
            _ => {}
        }
        for (name, v) in [
            (ATTR_GLUE, self.glue_flow_rate),
            (ATTR_WIRE, self.wire_feed_rate),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    push(format!("{name} must be finite and >= 0, got {v}"));
                }
            }
        }
        if let Some(h) = self.layer_height {
            if !(h > 0.0) || !h.is_finite() {
                push(format!("{ATTR_LAYER_HEIGHT} must be > 0, got {h}"));
            }
        }
        for key in self.extra.keys() {
            if RESERVED_PROCESS_ATTRS.contains(&key.as_str()) || key.is_empty() {
                push(format!("extra parameter name `{key}` is reserved or empty"));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathPoint {
    /// mm
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Fixed X-Y-Z degrees.
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    /// mm/s
    pub velocity: f64,
}

impl PathPoint {
    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    fn values(&self) -> [f64; 7] {
        [
            self.x,
            self.y,
            self.z,
            self.rx,
            self.ry,
            self.rz,
            self.velocity,
        ]
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            z: v[2],
            rx: v[3],
            ry: v[4],
            rz: v[5],
            velocity: v[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    pub points: Vec<PathPoint>,
    /// Process (glue gun, torch) switched on along this track.
    pub tool_active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub index: usize,
    pub tracks: Vec<Track>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathMLDocument {
    pub project_name: String,
    pub process: ProcessParameters,
    pub layers: Vec<Layer>,
}

/// Same rounding the writer applies.
fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn canon6(v: f64) -> f64 {
    if v.is_finite() {
        fmt6(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

impl PathMLDocument {
    /// The document as it reads back after a write: every number rounded to
    /// six decimals, negative zero folded to zero.
    pub fn canonical(&self) -> PathMLDocument {
        let mut d = self.clone();
        d.process.glue_flow_rate = d.process.glue_flow_rate.map(canon6);
        d.process.wire_feed_rate = d.process.wire_feed_rate.map(canon6);
        d.process.layer_height = d.process.layer_height.map(canon6);
        for layer in &mut d.layers {
            for track in &mut layer.tracks {
                for p in &mut track.points {
                    *p = PathPoint::from_values(p.values().map(canon6));
                }
            }
        }
        d
    }

    /// Equality at the resolution of the file format.
    pub fn semantically_eq(&self, other: &PathMLDocument) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn point_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.tracks)
            .map(|t| t.points.len())
            .sum()
    }
}

/// Single layer, single tool-on track, one point per fused point.
pub fn build_document(
    path: &FusedPath,
    process: ProcessParameters,
    project: &str,
) -> Result<PathMLDocument, PathmlError> {
    if path.frame != FrameId::R {
        return Err(PathmlError::Frame(path.frame));
    }
    path.validate()
        .map_err(|e| PathmlError::InvalidArgument(e.to_string()))?;
    let points = path
        .points
        .iter()
        .map(|p| {
            let [rx, ry, rz] = p.orientation.to_degrees();
            PathPoint {
                x: p.position[0],
                y: p.position[1],
                z: p.position[2],
                rx,
                ry,
                rz,
                velocity: p.speed,
            }
        })
        .collect();
    let doc = PathMLDocument {
        project_name: project.to_string(),
        process,
        layers: vec![Layer {
            name: "Layer_0".into(),
            index: 0,
            tracks: vec![Track {
                name: "Track_0".into(),
                points,
                tool_active: true,
            }],
        }],
    };
    let violations = validate_document(&doc);
    if violations.is_empty() {
        Ok(doc)
    } else {
        Err(PathmlError::Invalid(violations))
    }
}

fn doc_path(doc: &PathMLDocument) -> String {
    format!("PathML/{}", doc.project_name)
}

/// Every broken invariant, in document order. Empty means valid.
pub fn validate_document(doc: &PathMLDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let root = doc_path(doc);
    let push = |out: &mut Vec<Violation>, path: &str, rule: String| {
        out.push(Violation {
            path: path.to_string(),
            rule,
        })
    };

    if doc.project_name.trim().is_empty() {
        push(&mut out, &root, "project name is empty".into());
    }
    doc.process.violations(&root, &mut out);
    if doc.layers.is_empty() {
        push(&mut out, &root, "document requires >= 1 Layer".into());
    }
    for dup in duplicates(doc.layers.iter().map(|l| l.name.as_str())) {
        push(&mut out, &root, format!("duplicate layer name `{dup}`"));
    }
    let mut indices = HashSet::new();
    for l in &doc.layers {
        if !indices.insert(l.index) {
            push(
                &mut out,
                &root,
                format!("duplicate layer index {}", l.index),
            );
        }
    }

    for layer in &doc.layers {
        let lpath = format!("{root}/{}", layer.name);
        if layer.name.trim().is_empty() {
            push(&mut out, &lpath, "layer name is empty".into());
        }
        if layer.tracks.is_empty() {
            push(&mut out, &lpath, "Layer requires >= 1 Track".into());
        }
        for dup in duplicates(layer.tracks.iter().map(|t| t.name.as_str())) {
            push(&mut out, &lpath, format!("duplicate track name `{dup}`"));
        }
        for track in &layer.tracks {
            let tpath = format!("{lpath}/{}", track.name);
            if track.name.trim().is_empty() {
                push(&mut out, &tpath, "track name is empty".into());
            }
            if track.points.len() < 2 {
                push(
                    &mut out,
                    &tpath,
                    format!("Track requires >= 2 Points, has {}", track.points.len()),
                );
            }
            for (k, p) in track.points.iter().enumerate() {
                let ppath = format!("{tpath}/Point_{k}");
                if !p.values().iter().all(|v| v.is_finite()) {
                    push(&mut out, &ppath, "non-finite value".into());
                } else if p.velocity < 0.0 {
                    push(
                        &mut out,
                        &ppath,
                        format!("negative velocity {}", p.velocity),
                    );
                }
            }
        }
    }
    out
}

fn duplicates<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    let mut out = Vec::new();
    for n in names {
        if !seen.insert(n) && reported.insert(n) {
            out.push(n);
        }
    }
    out
}

/// Stack `n_layers` copies of the single layer, layer `k` offset by
/// `k * layer_height * direction`.
pub fn expand_layers(
    doc: &PathMLDocument,
    n_layers: usize,
    direction: Vec3,
) -> Result<PathMLDocument, PathmlError> {
    if n_layers < 1 {
        return Err(PathmlError::InvalidArgument(
            "number of layers must be >= 1".into(),
        ));
    }
    if doc.layers.len() != 1 {
        return Err(PathmlError::AlreadyExpanded(doc.layers.len()));
    }
    let height = match doc.process.layer_height {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(PathmlError::Parameter(format!(
                "layer height must be > 0, got {h}"
            )))
        }
        None => return Err(PathmlError::Parameter("process has no layer height".into())),
    };
    if !direction.iter().all(|v| v.is_finite()) || (geometry::norm(direction) - 1.0).abs() > 1e-9 {
        return Err(PathmlError::InvalidArgument(format!(
            "direction {direction:?} is not a unit vector"
        )));
    }

    let base = &doc.layers[0];
    let mut layers = Vec::with_capacity(n_layers);
    layers.push(base.clone());
    for k in 1..n_layers {
        let offset = geometry::scale(direction, k as f64 * height);
        let tracks = base
            .tracks
            .iter()
            .map(|t| Track {
                name: t.name.clone(),
                tool_active: t.tool_active,
                points: t
                    .points
                    .iter()
                    .map(|p| PathPoint {
                        x: p.x + offset[0],
                        y: p.y + offset[1],
                        z: p.z + offset[2],
                        ..*p
                    })
                    .collect(),
            })
            .collect();
        layers.push(Layer {
            name: format!("Layer_{k}"),
            index: base.index + k,
            tracks,
        });
    }
    Ok(PathMLDocument {
        project_name: doc.project_name.clone(),
        process: doc.process.clone(),
        layers,
    })
}

// ---------------------------------------------------------------------------
// Writer

struct XmlOut {
    buf: String,
}

impl XmlOut {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.buf.push_str("  ");
        }
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    fn attribute(
        &mut self,
        depth: usize,
        name: &str,
        data_type: &str,
        unit: Option<&str>,
        value: &str,
    ) {
        let mut s = format!(
            "<Attribute Name=\"{}\" AttributeDataType=\"{}\"",
            escape(name),
            data_type
        );
        if let Some(u) = unit {
            let _ = write!(s, " Unit=\"{}\"", escape(u));
        }
        let _ = write!(s, "><Value>{}</Value></Attribute>", escape(value));
        self.line(depth, &s);
    }
}

/// Serialize to canonical PathML bytes (UTF-8, LF).
pub fn write_xml(doc: &PathMLDocument) -> Vec<u8> {
    let mut w = XmlOut { buf: String::new() };
    w.line(0, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    w.line(
        0,
        &format!(
            "<CAEXFile FileName=\"{}.aml\" SchemaVersion=\"3.0\" xmlns=\"http://www.dke.de/CAEX\">",
            escape(&doc.project_name)
        ),
    );
    w.line(
        1,
        &format!("<InstanceHierarchy Name=\"{INSTANCE_HIERARCHY_NAME}\">"),
    );
    w.line(
        2,
        &format!("<InternalElement Name=\"{}\">", escape(&doc.project_name)),
    );

    let p = &doc.process;
    w.attribute(
        3,
        ATTR_PROCESS_TYPE,
        "xs:string",
        None,
        p.process_type.as_str(),
    );
    if let Some(v) = p.glue_flow_rate {
        w.attribute(3, ATTR_GLUE, "xs:double", Some("ml/min"), &fmt6(v));
    }
    if let Some(v) = p.wire_feed_rate {
        w.attribute(3, ATTR_WIRE, "xs:double", Some("mm/s"), &fmt6(v));
    }
    if let Some(v) = p.layer_height {
        w.attribute(3, ATTR_LAYER_HEIGHT, "xs:double", Some("mm"), &fmt6(v));
    }
    for (k, v) in &p.extra {
        w.attribute(3, k, "xs:string", None, v);
    }

    for layer in &doc.layers {
        w.line(
            3,
            &format!("<InternalElement Name=\"{}\">", escape(&layer.name)),
        );
        w.attribute(
            4,
            ATTR_LAYER_INDEX,
            "xs:int",
            None,
            &layer.index.to_string(),
        );
        for track in &layer.tracks {
            w.line(
                4,
                &format!("<InternalElement Name=\"{}\">", escape(&track.name)),
            );
            w.attribute(
                5,
                ATTR_TOOL_ACTIVE,
                "xs:boolean",
                None,
                if track.tool_active { "true" } else { "false" },
            );
            for (k, pt) in track.points.iter().enumerate() {
                w.line(5, &format!("<InternalElement Name=\"Point_{k}\">"));
                for ((name, unit), v) in POINT_ATTRS.iter().zip(pt.values()) {
                    w.attribute(6, name, "xs:double", Some(unit), &fmt6(v));
                }
                w.line(5, "</InternalElement>");
            }
            w.line(4, "</InternalElement>");
        }
        w.line(3, "</InternalElement>");
    }
    w.line(2, "</InternalElement>");
    w.line(1, "</InstanceHierarchy>");
    w.line(0, "</CAEXFile>");
    w.buf.into_bytes()
}

// ---------------------------------------------------------------------------
// Reader

#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
}

impl Node {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn elements<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn label(&self) -> String {
        match self.attr("Name") {
            Some(n) => format!("{}[{}]", self.name, n),
            None => self.name.clone(),
        }
    }
}

fn line_of(input: &str, pos: u64) -> usize {
    let end = (pos as usize).min(input.len());
    input.as_bytes()[..end]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn start_node(e: &BytesStart, input: &str, pos: u64) -> Result<Node, PathmlError> {
    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| PathmlError::Xml {
            line: line_of(input, pos),
            message: err.to_string(),
        })?;
        let key = String::from_utf8_lossy(a.key.local_name().as_ref()).into_owned();
        if a.key.as_ref().starts_with(b"xmlns") {
            continue;
        }
        let value = a
            .unescape_value()
            .map_err(|err| PathmlError::Xml {
                line: line_of(input, pos),
                message: err.to_string(),
            })?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Node {
        name,
        attrs,
        ..Node::default()
    })
}

fn parse_tree(input: &str) -> Result<Node, PathmlError> {
    let mut reader = Reader::from_str(input);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;
    let xml_err = |reader: &Reader<&[u8]>, message: String| PathmlError::Xml {
        line: line_of(input, reader.error_position()),
        message,
    };
    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => stack.push(start_node(&e, input, pos)?),
            Event::Empty(e) => {
                let node = start_node(&e, input, pos)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => {
                        return Err(PathmlError::Xml {
                            line: line_of(input, pos),
                            message: "multiple root elements".into(),
                        })
                    }
                }
            }
            Event::End(_) => {
                let node = stack.pop().expect("reader checks end tags");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => {
                        return Err(PathmlError::Xml {
                            line: line_of(input, pos),
                            message: "multiple root elements".into(),
                        })
                    }
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| PathmlError::Xml {
                    line: line_of(input, pos),
                    message: e.to_string(),
                })?;
                match stack.last_mut() {
                    Some(node) => node.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => {
                        return Err(PathmlError::Xml {
                            line: line_of(input, pos),
                            message: "text outside the root element".into(),
                        })
                    }
                }
            }
            Event::CData(t) => {
                if let Some(node) = stack.last_mut() {
                    node.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(PathmlError::Xml {
            line: line_of(input, input.len() as u64),
            message: format!("unclosed element <{}>", open.name),
        });
    }
    root.ok_or_else(|| PathmlError::Xml {
        line: 1,
        message: "no root element".into(),
    })
}

fn schema(path: &str, message: impl Into<String>) -> PathmlError {
    PathmlError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Collects `Attribute` children by name, rejecting duplicates.
fn attributes_of(node: &Node, path: &str) -> Result<Vec<(String, String)>, PathmlError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for a in node.elements("Attribute") {
        let name = a
            .attr("Name")
            .ok_or_else(|| schema(path, "Attribute without Name"))?;
        if out.iter().any(|(n, _)| n == name) {
            return Err(schema(path, format!("duplicate Attribute `{name}`")));
        }
        let mut values = a.elements("Value");
        let value = values
            .next()
            .ok_or_else(|| schema(&format!("{path}/Attribute[{name}]"), "missing Value"))?;
        if values.next().is_some() {
            return Err(schema(
                &format!("{path}/Attribute[{name}]"),
                "more than one Value",
            ));
        }
        out.push((name.to_string(), value.text.clone()));
    }
    Ok(out)
}

fn take(attrs: &mut Vec<(String, String)>, name: &str) -> Option<String> {
    attrs
        .iter()
        .position(|(n, _)| n == name)
        .map(|i| attrs.remove(i).1)
}

fn number(path: &str, name: &str, text: &str) -> Result<f64, PathmlError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            schema(
                path,
                format!("Attribute `{name}`: `{text}` is not a finite number"),
            )
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Layer,
    Track,
    Point,
}

impl Role {
    fn title(self) -> &'static str {
        match self {
            Role::Layer => "Layer",
            Role::Track => "Track",
            Role::Point => "Point",
        }
    }
}

/// Role an element claims by name prefix; unprefixed names take the role
/// implied by their depth.
fn check_role(node: &Node, path: &str, expected: Role, parent: &str) -> Result<(), PathmlError> {
    let name = node.attr("Name").unwrap_or("");
    let claimed = [Role::Layer, Role::Track, Role::Point]
        .into_iter()
        .find(|r| name.starts_with(&format!("{}_", r.title())));
    match claimed {
        Some(r) if r != expected => Err(schema(
            path,
            format!("hierarchy violation: {} inside {parent}", r.title()),
        )),
        _ => Ok(()),
    }
}

fn element_name<'a>(node: &'a Node, path: &str) -> Result<&'a str, PathmlError> {
    node.attr("Name")
        .ok_or_else(|| schema(path, "InternalElement without Name"))
}

/// Parse a PathML file.
pub fn parse_xml(input: &[u8]) -> Result<PathMLDocument, PathmlError> {
    let text = std::str::from_utf8(input).map_err(|e| {
        let line = line_of(
            &String::from_utf8_lossy(&input[..e.valid_up_to()]),
            e.valid_up_to() as u64,
        );
        PathmlError::Xml {
            line,
            message: format!("invalid UTF-8: {e}"),
        }
    })?;
    let root = parse_tree(text)?;
    if root.name != "CAEXFile" {
        return Err(schema(&root.name, "root element must be CAEXFile"));
    }
    let hierarchies: Vec<&Node> = root
        .elements("InstanceHierarchy")
        .filter(|h| h.attr("Name") == Some(INSTANCE_HIERARCHY_NAME))
        .collect();
    let ih = match hierarchies.as_slice() {
        [one] => *one,
        [] => {
            return Err(schema(
                "CAEXFile",
                format!("missing InstanceHierarchy Name=\"{INSTANCE_HIERARCHY_NAME}\""),
            ))
        }
        _ => {
            return Err(schema(
                "CAEXFile",
                format!("more than one InstanceHierarchy Name=\"{INSTANCE_HIERARCHY_NAME}\""),
            ))
        }
    };
    let ih_path = format!("CAEXFile/{}", ih.label());
    let projects: Vec<&Node> = ih.elements("InternalElement").collect();
    let project = match projects.as_slice() {
        [one] => *one,
        _ => {
            return Err(schema(
                &ih_path,
                format!(
                    "expected exactly one project InternalElement, found {}",
                    projects.len()
                ),
            ))
        }
    };
    let ppath = format!("{ih_path}/{}", project.label());
    let project_name = element_name(project, &ppath)?.to_string();
    if let Some(r) = [Role::Layer, Role::Track, Role::Point]
        .into_iter()
        .find(|r| project_name.starts_with(&format!("{}_", r.title())))
    {
        return Err(schema(
            &ppath,
            format!(
                "hierarchy violation: {} directly under the InstanceHierarchy",
                r.title()
            ),
        ));
    }

    let mut attrs = attributes_of(project, &ppath)?;
    let process_type = take(&mut attrs, ATTR_PROCESS_TYPE)
        .ok_or_else(|| schema(&ppath, format!("missing Attribute `{ATTR_PROCESS_TYPE}`")))?;
    let process_type: ProcessType = process_type
        .trim()
        .parse()
        .map_err(|m: String| schema(&ppath, m))?;
    let mut opt_number = |name: &str| -> Result<Option<f64>, PathmlError> {
        take(&mut attrs, name)
            .map(|t| number(&ppath, name, &t))
            .transpose()
    };
    let glue_flow_rate = opt_number(ATTR_GLUE)?;
    let wire_feed_rate = opt_number(ATTR_WIRE)?;
    let layer_height = opt_number(ATTR_LAYER_HEIGHT)?;
    let process = ProcessParameters {
        process_type,
        glue_flow_rate,
        wire_feed_rate,
        layer_height,
        extra: attrs.into_iter().collect(),
    };

    let mut layers = Vec::new();
    for (li, lnode) in project.elements("InternalElement").enumerate() {
        let lpath = format!("{ppath}/{}", lnode.label());
        check_role(lnode, &lpath, Role::Layer, "the project")?;
        let name = element_name(lnode, &lpath)?.to_string();
        let mut lattrs = attributes_of(lnode, &lpath)?;
        let index = match take(&mut lattrs, ATTR_LAYER_INDEX) {
            Some(t) => t.trim().parse::<usize>().map_err(|_| {
                schema(
                    &lpath,
                    format!("Attribute `{ATTR_LAYER_INDEX}`: `{t}` is not an index"),
                )
            })?,
            None => li,
        };
        let mut tracks = Vec::new();
        for tnode in lnode.elements("InternalElement") {
            let tpath = format!("{lpath}/{}", tnode.label());
            check_role(tnode, &tpath, Role::Track, "a Layer")?;
            let tname = element_name(tnode, &tpath)?.to_string();
            let mut tattrs = attributes_of(tnode, &tpath)?;
            let tool_active = match take(&mut tattrs, ATTR_TOOL_ACTIVE)
                .as_deref()
                .map(str::trim)
            {
                Some("true") => true,
                Some("false") => false,
                Some(other) => {
                    return Err(schema(
                        &tpath,
                        format!("Attribute `{ATTR_TOOL_ACTIVE}`: `{other}` is not a boolean"),
                    ))
                }
                None => {
                    return Err(schema(
                        &tpath,
                        format!("missing Attribute `{ATTR_TOOL_ACTIVE}`"),
                    ))
                }
            };
            let mut points = Vec::new();
            let mut point_names = HashSet::new();
            for pnode in tnode.elements("InternalElement") {
                let pt_path = format!("{tpath}/{}", pnode.label());
                check_role(pnode, &pt_path, Role::Point, "a Track")?;
                let pname = element_name(pnode, &pt_path)?;
                if !point_names.insert(pname) {
                    return Err(schema(&tpath, format!("duplicate point name `{pname}`")));
                }
                if pnode.elements("InternalElement").next().is_some() {
                    return Err(schema(
                        &pt_path,
                        "hierarchy violation: element nested inside a Point",
                    ));
                }
                let mut pattrs = attributes_of(pnode, &pt_path)?;
                let mut values = [0.0; 7];
                for (slot, (name, _)) in values.iter_mut().zip(POINT_ATTRS) {
                    let t = take(&mut pattrs, name)
                        .ok_or_else(|| schema(&pt_path, format!("missing Attribute `{name}`")))?;
                    *slot = number(&pt_path, name, &t)?;
                }
                points.push(PathPoint::from_values(values));
            }
            if points.len() < 2 {
                return Err(schema(
                    &tpath,
                    format!("Track requires >= 2 Points, found {}", points.len()),
                ));
            }
            tracks.push(Track {
                name: tname,
                points,
                tool_active,
            });
        }
        if tracks.is_empty() {
            return Err(schema(&lpath, "Layer requires >= 1 Track"));
        }
        layers.push(Layer {
            name,
            index,
            tracks,
        });
    }
    if layers.is_empty() {
        return Err(schema(&ppath, "document requires >= 1 Layer"));
    }
    Ok(PathMLDocument {
        project_name,
        process,
        layers,
    })
}
