//! Demonstration pose streams: ingest, outlier filtering, speed
//! estimation, downsampling, and a synthetic tracker for test data.
//!
//! Positions are millimetres in the receiver frame `{S}`; orientations are
//! Z-Y'-X'' Euler angles of the sensor `{E}` relative to `{S}`. On disk
//! angles are degrees, in memory radians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::fusion::{locate, parameterize, FusedPath};
use crate::geometry::{
    self, euler_zyx_from_rot, rot_from_euler_zyx, wrap_angle, EulerZyx, FrameId, Vec3,
};
use crate::quat::Quat;

pub const DEMO_CSV_HEADER: [&str; 7] = [
    "t_s", "x_mm", "y_mm", "z_mm", "az_deg", "el_deg", "roll_deg",
];

/// Scale factor turning a MAD into a Gaussian sigma estimate.
pub const MAD_SCALE: f64 = 1.4826;

pub const DEFAULT_FILTER_WINDOW: usize = 11;
pub const DEFAULT_FILTER_K: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemoError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp {t} does not increase (previous {previous})")]
    NonMonotonic { line: u64, previous: f64, t: f64 },
    #[error("sample {index}: timestamp {t} does not increase (previous {previous})")]
    NonMonotonicSample { index: usize, previous: f64, t: f64 },
    #[error("series has {len} samples, at least 2 are required")]
    TooShort { len: usize },
    #[error("sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("filter window {window} does not fit a series of {len} samples")]
    DegenerateWindow { window: usize, len: usize },
    #[error("zero time step between samples {index} and {next}")]
    ZeroTimeStep { index: usize, next: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    /// Seconds from stream start.
    pub t: f64,
    pub position: Vec3,
    pub orientation: EulerZyx,
}

impl PoseSample {
    fn check(&self, index: usize) -> Result<(), DemoError> {
        let bad = |reason: &str| DemoError::InvalidSample {
            index,
            reason: reason.to_string(),
        };
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(bad("timestamp must be finite and >= 0"));
        }
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite position"));
        }
        let o = self.orientation;
        if !(o.psi.is_finite() && o.theta.is_finite() && o.phi.is_finite()) {
            return Err(bad("non-finite orientation"));
        }
        Ok(())
    }
}

/// An ordered demonstration. Fields are public; [`PoseSeries::new`] is the
/// checked constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSeries {
    pub samples: Vec<PoseSample>,
    pub source: String,
}

impl PoseSeries {
    pub fn new(samples: Vec<PoseSample>, source: impl Into<String>) -> Result<Self, DemoError> {
        if samples.len() < 2 {
            return Err(DemoError::TooShort { len: samples.len() });
        }
        for (i, s) in samples.iter().enumerate() {
            s.check(i)?;
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(DemoError::NonMonotonicSample {
                    index: i,
                    previous: samples[i - 1].t,
                    t: s.t,
                });
            }
        }
        Ok(Self {
            samples,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

/// Parse the demonstration CSV (`t_s,x_mm,y_mm,z_mm,az_deg,el_deg,roll_deg`).
pub fn parse_demo(input: &[u8]) -> Result<PoseSeries, DemoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let header = reader.headers().map_err(|e| DemoError::Parse {
        line: csv_line(&e).max(1),
        message: e.to_string(),
    })?;
    if header.iter().ne(DEMO_CSV_HEADER.iter().copied()) {
        return Err(DemoError::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                DEMO_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut samples = Vec::new();
    let mut previous: Option<f64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| DemoError::Parse {
            line: csv_line(&e),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut values = [0.0f64; 7];
        for (i, (field, name)) in record.iter().zip(DEMO_CSV_HEADER).enumerate() {
            values[i] = field.parse::<f64>().map_err(|_| DemoError::Parse {
                line,
                message: format!("column `{name}`: `{field}` is not a number"),
            })?;
            if !values[i].is_finite() {
                return Err(DemoError::Parse {
                    line,
                    message: format!("column `{name}`: non-finite value"),
                });
            }
        }
        let t = values[0];
        if t < 0.0 {
            return Err(DemoError::Parse {
                line,
                message: format!("negative timestamp {t}"),
            });
        }
        if let Some(prev) = previous {
            if t <= prev {
                return Err(DemoError::NonMonotonic {
                    line,
                    previous: prev,
                    t,
                });
            }
        }
        previous = Some(t);
        samples.push(PoseSample {
            t,
            position: [values[1], values[2], values[3]],
            orientation: EulerZyx {
                psi: values[4].to_radians(),
                theta: values[5].to_radians(),
                phi: values[6].to_radians(),
            },
        });
    }
    PoseSeries::new(samples, "csv")
}

/// Write the demonstration CSV. Values use the shortest round-trip decimal
/// representation.
pub fn write_demo(series: &PoseSeries) -> String {
    let mut out = DEMO_CSV_HEADER.join(",");
    out.push('\n');
    for s in &series.samples {
        let [az, el, roll] = s.orientation.to_degrees();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.position[0], s.position[1], s.position[2], az, el, roll
        ));
    }
    out
}

fn median_of(buf: &mut [f64]) -> f64 {
    buf.sort_by(|a, b| a.total_cmp(b));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Result of filtering one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct HampelOutput {
    pub filtered: Vec<f64>,
    /// Indices replaced by their window median.
    pub flagged: Vec<usize>,
}

/// Hampel filter over one channel.
///
/// Each sample is compared against the median of a window of `window`
/// samples centred on it. Near the ends the window is shifted inwards so it
/// always holds `window` samples. A sample is an outlier when its distance
/// to the median exceeds `k * 1.4826 * MAD`; outliers are replaced by the
/// median.
pub fn hampel(values: &[f64], window: usize, k: f64) -> Result<HampelOutput, DemoError> {
    check_filter_args(values.len(), window, k)?;
    let n = values.len();
    let half = window / 2;
    let mut filtered = values.to_vec();
    let mut flagged = Vec::new();
    let mut buf = vec![0.0; window];
    let mut dev = vec![0.0; window];
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - window);
        buf.copy_from_slice(&values[start..start + window]);
        let med = median_of(&mut buf);
        for (d, v) in dev.iter_mut().zip(&values[start..start + window]) {
            *d = (v - med).abs();
        }
        let mad = median_of(&mut dev);
        if (values[i] - med).abs() > k * MAD_SCALE * mad {
            filtered[i] = med;
            flagged.push(i);
        }
    }
    Ok(HampelOutput { filtered, flagged })
}

/// Upper bound on the passes [`filter_outliers`] makes per channel.
pub const MAX_FILTER_PASSES: usize = 32;

/// Hampel passes until none flags a sample. Returns the final values and
/// every index replaced along the way, ascending.
fn hampel_until_stable(
    values: &[f64],
    window: usize,
    k: f64,
) -> Result<(Vec<f64>, Vec<usize>), DemoError> {
    let mut current = values.to_vec();
    let mut touched = vec![false; values.len()];
    for _ in 0..MAX_FILTER_PASSES {
        let h = hampel(&current, window, k)?;
        if h.flagged.is_empty() {
            break;
        }
        for i in h.flagged {
            touched[i] = true;
        }
        current = h.filtered;
    }
    let touched = (0..values.len()).filter(|&i| touched[i]).collect();
    Ok((current, touched))
}

fn check_filter_args(len: usize, window: usize, k: f64) -> Result<(), DemoError> {
    if window < 3 || window % 2 == 0 {
        return Err(DemoError::InvalidArgument(format!(
            "filter window must be odd and >= 3, got {window}"
        )));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(DemoError::InvalidArgument(format!(
            "filter threshold k must be > 0, got {k}"
        )));
    }
    if window > len {
        return Err(DemoError::DegenerateWindow { window, len });
    }
    Ok(())
}

fn unwrap_angles(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if i == 0 {
            out.push(v);
        } else {
            let prev = out[i - 1];
            out.push(prev + wrap_angle(v - values[i - 1]));
        }
    }
    out
}

/// Per-channel Hampel filter over x, y, z and the three Euler angles.
///
/// Each channel is filtered repeatedly until a pass flags nothing (at most
/// [`MAX_FILTER_PASSES`]), so the output is a fixed point of the filter and
/// filtering it again changes nothing. A single pass is not: removing a
/// spike shrinks the local MAD and exposes smaller ones.
///
/// Angle channels are unwrapped before filtering and replaced values are
/// wrapped back into `(-pi, pi]`. Samples that are never flagged keep their
/// original values bit for bit.
pub fn filter_outliers(s: &PoseSeries, window: usize, k: f64) -> Result<PoseSeries, DemoError> {
    check_filter_args(s.len(), window, k)?;
    let mut out = s.samples.clone();

    for axis in 0..3 {
        let channel: Vec<f64> = s.samples.iter().map(|p| p.position[axis]).collect();
        let (filtered, touched) = hampel_until_stable(&channel, window, k)?;
        for i in touched {
            out[i].position[axis] = filtered[i];
        }
    }

    type Getter = fn(&EulerZyx) -> f64;
    type Setter = fn(&mut EulerZyx, f64);
    let angles: [(Getter, Setter); 3] = [
        (|e| e.psi, |e, v| e.psi = v),
        (|e| e.theta, |e, v| e.theta = v),
        (|e| e.phi, |e, v| e.phi = v),
    ];
    for (get, set) in angles {
        let raw: Vec<f64> = s.samples.iter().map(|p| get(&p.orientation)).collect();
        let unwrapped = unwrap_angles(&raw);
        let (filtered, touched) = hampel_until_stable(&unwrapped, window, k)?;
        for i in touched {
            set(&mut out[i].orientation, wrap_angle(filtered[i]));
        }
    }

    Ok(PoseSeries {
        samples: out,
        source: s.source.clone(),
    })
}

/// Tool speed (mm/s) at every sample: central differences inside, one-sided
/// differences at the ends.
pub fn estimate_speed(s: &PoseSeries) -> Result<Vec<f64>, DemoError> {
    let n = s.samples.len();
    if n < 2 {
        return Err(DemoError::TooShort { len: n });
    }
    for i in 1..n {
        if !(s.samples[i].t > s.samples[i - 1].t) {
            return Err(DemoError::ZeroTimeStep {
                index: i - 1,
                next: i,
            });
        }
    }
    let speed = |a: usize, b: usize| -> Result<f64, DemoError> {
        let dt = s.samples[b].t - s.samples[a].t;
        if !(dt > 0.0) {
            return Err(DemoError::ZeroTimeStep { index: a, next: b });
        }
        Ok(geometry::distance(s.samples[b].position, s.samples[a].position) / dt)
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i == 0 {
            speed(0, 1)?
        } else if i == n - 1 {
            speed(n - 2, n - 1)?
        } else {
            speed(i - 1, i + 1)?
        };
        out.push(v);
    }
    Ok(out)
}

pub(crate) fn quat_of(e: &EulerZyx) -> Quat {
    // Angles inside a validated series are finite.
    Quat::from_matrix(&rot_from_euler_zyx(*e).expect("finite Euler angles"))
}

/// Resample to `target_count` samples at uniformly spaced path parameters
/// (see [`crate::fusion::parameterize`]). Positions and timestamps are
/// interpolated linearly, orientations by slerp. The first and last samples
/// are copied unchanged.
pub fn downsample(s: &PoseSeries, target_count: usize) -> Result<PoseSeries, DemoError> {
    let n = s.len();
    if target_count < 2 || target_count > n {
        return Err(DemoError::InvalidArgument(format!(
            "target count {target_count} outside 2..={n}"
        )));
    }
    if target_count == n {
        return Ok(s.clone());
    }
    let params = parameterize(s).params;
    let mut samples = Vec::with_capacity(target_count);
    samples.push(s.samples[0]);
    for j in 1..target_count - 1 {
        let u = j as f64 / (target_count - 1) as f64;
        let (i, f) = locate(&params, u);
        let a = &s.samples[i];
        let b = &s.samples[i + 1];
        let q = quat_of(&a.orientation).slerp(&quat_of(&b.orientation), f);
        samples.push(PoseSample {
            t: a.t + f * (b.t - a.t),
            position: geometry::lerp(a.position, b.position, f),
            orientation: euler_zyx_from_rot(&q.to_matrix()),
        });
    }
    samples.push(s.samples[n - 1]);
    PoseSeries::new(samples, s.source.clone())
}

/// Synthetic magnetic-tracker error model.
///
/// The z error grows linearly with the receiver-sensor distance and
/// saturates at `z_bias_max` once the distance reaches `z_bias_range`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrackerErrorModel {
    /// mm
    pub z_bias_max: f64,
    /// mm
    pub z_bias_range: f64,
    /// mm
    pub xy_noise_sigma: f64,
    /// degrees
    pub orient_noise_sigma: f64,
    /// Probability per sample of a positional spike.
    pub spike_rate: f64,
    /// mm, added to one randomly chosen axis.
    pub spike_magnitude: f64,
    pub seed: u64,
}

impl Default for TrackerErrorModel {
    fn default() -> Self {
        Self {
            z_bias_max: 60.0,
            z_bias_range: 800.0,
            xy_noise_sigma: 2.0,
            orient_noise_sigma: 1.0,
            spike_rate: 0.005,
            spike_magnitude: 50.0,
            seed: 0,
        }
    }
}

impl TrackerErrorModel {
    /// A model that adds no error at all.
    pub fn zero() -> Self {
        Self {
            z_bias_max: 0.0,
            z_bias_range: 800.0,
            xy_noise_sigma: 0.0,
            orient_noise_sigma: 0.0,
            spike_rate: 0.0,
            spike_magnitude: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), DemoError> {
        let fields = [
            ("z_bias_max", self.z_bias_max),
            ("z_bias_range", self.z_bias_range),
            ("xy_noise_sigma", self.xy_noise_sigma),
            ("orient_noise_sigma", self.orient_noise_sigma),
            ("spike_magnitude", self.spike_magnitude),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DemoError::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.spike_rate) {
            return Err(DemoError::InvalidArgument(format!(
                "spike_rate must lie in [0, 1], got {}",
                self.spike_rate
            )));
        }
        Ok(())
    }

    /// z bias (mm) for a true sensor position.
    pub fn z_bias(&self, position: Vec3) -> f64 {
        if self.z_bias_range > 0.0 {
            self.z_bias_max * (geometry::norm(position) / self.z_bias_range).min(1.0)
        } else {
            self.z_bias_max
        }
    }
}

/// Simulate a tracker recording of `truth` at `rate` Hz.
///
/// The truth path is traversed segment by segment at the mean of the two
/// endpoint speeds. Samples are taken on the regular `1/rate` grid and, in
/// addition, at every truth vertex so the recording passes through the
/// path's corners.
pub fn synth_demo(
    truth: &FusedPath,
    model: &TrackerErrorModel,
    rate: f64,
) -> Result<PoseSeries, DemoError> {
    model.validate()?;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(DemoError::InvalidArgument(format!(
            "sampling rate must be > 0, got {rate}"
        )));
    }
    if truth.frame != FrameId::S {
        return Err(DemoError::InvalidArgument(format!(
            "truth path must be in frame S, got {}",
            truth.frame
        )));
    }

    // Vertices, with the loop closed explicitly and zero-length segments dropped.
    let mut verts: Vec<(Vec3, Quat, f64)> = Vec::new();
    let mut push = |p: &crate::fusion::FusedPoint| {
        let e = EulerZyx {
            psi: p.orientation.rz,
            theta: p.orientation.ry,
            phi: p.orientation.rx,
        };
        let q = quat_of(&e);
        match verts.last() {
            Some(last) if geometry::distance(last.0, p.position) == 0.0 => {}
            _ => verts.push((p.position, q, p.speed)),
        }
    };
    for p in &truth.points {
        push(p);
    }
    if truth.closed {
        push(&truth.points[0]);
    }
    if verts.len() < 2 {
        return Err(DemoError::InvalidArgument(
            "truth path has zero length".into(),
        ));
    }

    let mut times = vec![0.0];
    for w in verts.windows(2) {
        let len = geometry::distance(w[0].0, w[1].0);
        let v = 0.5 * (w[0].2 + w[1].2);
        if !(v > 0.0) {
            return Err(DemoError::InvalidArgument(
                "truth path has a moving segment with zero speed".into(),
            ));
        }
        times.push(times.last().unwrap() + len / v);
    }

    const EPS_T: f64 = 1e-9;
    let mut clean = Vec::new();
    for (seg, w) in verts.windows(2).enumerate() {
        let (t0, t1) = (times[seg], times[seg + 1]);
        let mut emit = |t: f64| {
            let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let q = w[0].1.slerp(&w[1].1, f);
            let position = if f == 1.0 {
                w[1].0
            } else {
                geometry::lerp(w[0].0, w[1].0, f)
            };
            clean.push((t, position, euler_zyx_from_rot(&q.to_matrix())));
        };
        emit(t0);
        let mut j = (t0 * rate).floor() as u64 + 1;
        loop {
            let t = j as f64 / rate;
            if t >= t1 - EPS_T {
                break;
            }
            if t > t0 + EPS_T {
                emit(t);
            }
            j += 1;
        }
    }
    {
        let last = verts.last().unwrap();
        clean.push((
            *times.last().unwrap(),
            last.0,
            euler_zyx_from_rot(&last.1.to_matrix()),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let sigma_o = model.orient_noise_sigma.to_radians();
    let samples = clean
        .into_iter()
        .map(|(t, truth_pos, truth_orient)| {
            let n: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let spike_draw: f64 = rng.random();
            let spike_axis = rng.random_range(0..3usize);
            let spike_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };

            let mut position = truth_pos;
            position[0] += model.xy_noise_sigma * n[0];
            position[1] += model.xy_noise_sigma * n[1];
            position[2] += model.z_bias(truth_pos);
            if spike_draw < model.spike_rate {
                position[spike_axis] += spike_sign * model.spike_magnitude;
            }

            let orientation = if sigma_o > 0.0 {
                let noisy = EulerZyx {
                    psi: truth_orient.psi + sigma_o * n[2],
                    theta: truth_orient.theta + sigma_o * n[3],
                    phi: truth_orient.phi + sigma_o * n[4],
                };
                euler_zyx_from_rot(&rot_from_euler_zyx(noisy).expect("finite angles"))
            } else {
                truth_orient
            };
            PoseSample {
                t,
                position,
                orientation,
            }
        })
        .collect();
    PoseSeries::new(samples, format!("synthetic seed={}", model.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusedPoint;
    use crate::geometry::FixedXyz;

    fn line_series(n: usize, dt: f64, speed: f64) -> PoseSeries {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                PoseSample {
                    t,
                    position: [speed * t, 0.0, 0.0],
                    orientation: EulerZyx::default(),
                }
            })
            .collect();
        PoseSeries::new(samples, "line").unwrap()
    }

    #[test]
    fn parse_two_rows() {
        let csv =
            "t_s,x_mm,y_mm,z_mm,az_deg,el_deg,roll_deg\n0,1,2,3,90,0,0\n0.01,1.5,2,3,90,0,0\n";
        let s = parse_demo(csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.samples[0].orientation.psi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(s.samples[1].position, [1.5, 2.0, 3.0]);
    }

    #[test]
    fn parse_accepts_crlf() {
        let csv = "t_s,x_mm,y_mm,z_mm,az_deg,el_deg,roll_deg\r\n0,1,2,3,0,0,0\r\n1,1,2,3,0,0,0\r\n";
        assert_eq!(parse_demo(csv.as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn parse_error_names_line() {
        let csv = "t_s,x_mm,y_mm,z_mm,az_deg,el_deg,roll_deg\n0,1,2,3,0,0,0\n0.1,abc,2,3,0,0,0\n";
        match parse_demo(csv.as_bytes()) {
            Err(DemoError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("x_mm"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_shapes() {
        let hdr = "t_s,x_mm,y_mm,z_mm,az_deg,el_deg,roll_deg\n";
        assert!(matches!(
            parse_demo(format!("{hdr}0,1,2,3,0,0,0\n").as_bytes()),
            Err(DemoError::TooShort { len: 1 })
        ));
        assert!(matches!(
            parse_demo(format!("{hdr}0,1,2,3,0,0,0\n0,1,2,3,0,0,0\n").as_bytes()),
            Err(DemoError::NonMonotonic { line: 3, .. })
        ));
        assert!(matches!(
            parse_demo(format!("{hdr}0,1,2,3,0,0\n1,1,2,3,0,0,0\n").as_bytes()),
            Err(DemoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_demo(b"t,x,y,z,a,b,c\n0,1,2,3,0,0,0\n1,1,2,3,0,0,0\n"),
            Err(DemoError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_demo(b""), Err(DemoError::Parse { .. })));
    }

    #[test]
    fn hampel_constant_is_unchanged() {
        let v = vec![4.2; 30];
        let h = hampel(&v, 11, 3.0).unwrap();
        assert!(h.flagged.is_empty());
        assert_eq!(h.filtered, v);
    }

    #[test]
    fn hampel_rejects_bad_windows() {
        let v = vec![0.0; 5];
        assert!(matches!(
            hampel(&v, 7, 3.0),
            Err(DemoError::DegenerateWindow { window: 7, len: 5 })
        ));
        assert!(matches!(
            hampel(&v, 4, 3.0),
            Err(DemoError::InvalidArgument(_))
        ));
        assert!(matches!(
            hampel(&v, 1, 3.0),
            Err(DemoError::InvalidArgument(_))
        ));
        assert!(matches!(
            hampel(&v, 3, 0.0),
            Err(DemoError::InvalidArgument(_))
        ));
    }

    #[test]
    fn line_with_z_spike_is_repaired() {
        let mut s = line_series(50, 0.01, 100.0);
        s.samples[20].position[2] += 100.0;
        let f = filter_outliers(&s, 11, 3.0).unwrap();
        let max_dev = f
            .samples
            .iter()
            .map(|p| p.position[2].abs().max(p.position[1].abs()))
            .fold(0.0, f64::max);
        assert!(max_dev < 1.0, "{max_dev}");
        for (a, b) in f
            .samples
            .iter()
            .zip(line_series(50, 0.01, 100.0).samples.iter())
        {
            assert!((a.position[0] - b.position[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_sinusoid_is_left_alone() {
        let samples: Vec<PoseSample> = (0..1000)
            .map(|i| {
                let u = i as f64 / 1000.0;
                let w = 2.0 * std::f64::consts::PI * u;
                PoseSample {
                    t: i as f64 * 0.01,
                    position: [
                        150.0 * (1.5 * w).sin(),
                        80.0 * (2.0 * w).cos(),
                        20.0 * w.sin(),
                    ],
                    orientation: EulerZyx {
                        psi: 0.4 * (3.0 * w).sin(),
                        theta: 0.2 * w.cos(),
                        phi: 1.0 + 0.1 * (2.5 * w).sin(),
                    },
                }
            })
            .collect();
        let s = PoseSeries::new(samples, "sinusoid").unwrap();
        let f = filter_outliers(&s, 11, 3.0).unwrap();
        let modified = s
            .samples
            .iter()
            .zip(&f.samples)
            .filter(|(a, b)| a != b)
            .count();
        assert!(modified <= 10, "{modified} of 1000 samples modified");
    }

    #[test]
    fn angle_filter_handles_wraparound() {
        // psi sweeps across +-pi; no sample is an outlier.
        let samples: Vec<PoseSample> = (0..40)
            .map(|i| PoseSample {
                t: i as f64,
                position: [i as f64, 0.0, 0.0],
                orientation: EulerZyx {
                    psi: wrap_angle(3.0 + 0.01 * i as f64),
                    theta: 0.0,
                    phi: 0.0,
                },
            })
            .collect();
        let s = PoseSeries::new(samples, "wrap").unwrap();
        let f = filter_outliers(&s, 11, 3.0).unwrap();
        assert_eq!(f, s);
    }

    #[test]
    fn constant_speed_line() {
        let s = line_series(30, 0.01, 100.0);
        for v in estimate_speed(&s).unwrap() {
            assert!((v - 100.0).abs() < 1e-6, "{v}");
        }
        let still = PoseSeries::new(
            (0..5)
                .map(|i| PoseSample {
                    t: i as f64,
                    position: [1.0, 2.0, 3.0],
                    orientation: EulerZyx::default(),
                })
                .collect(),
            "still",
        )
        .unwrap();
        assert!(estimate_speed(&still).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicate_timestamps_are_guarded() {
        let mut s = line_series(5, 0.1, 10.0);
        s.samples[3].t = s.samples[2].t;
        assert!(matches!(
            estimate_speed(&s),
            Err(DemoError::ZeroTimeStep { .. })
        ));
    }

    #[test]
    fn quadratic_profile_speed() {
        // x = a t^2: central differences are exact on a uniform grid, the
        // one-sided end differences are off by a*h.
        let a = 50.0;
        let h = 0.01;
        let samples: Vec<PoseSample> = (0..=100)
            .map(|i| {
                let t = 1.0 + i as f64 * h;
                PoseSample {
                    t,
                    position: [a * t * t, 0.0, 0.0],
                    orientation: EulerZyx::default(),
                }
            })
            .collect();
        let s = PoseSeries::new(samples, "quad").unwrap();
        let v = estimate_speed(&s).unwrap();
        for (i, vi) in v.iter().enumerate() {
            let t = s.samples[i].t;
            let exact = 2.0 * a * t;
            let bound = if i == 0 || i == v.len() - 1 {
                a * h + 1e-9
            } else {
                a * h * h
            };
            assert!((vi - exact).abs() <= bound, "i={i} {vi} vs {exact}");
        }
    }

    #[test]
    fn downsample_identity_and_uniform() {
        let s = line_series(101, 0.01, 100.0);
        assert_eq!(downsample(&s, 101).unwrap(), s);
        let d = downsample(&s, 11).unwrap();
        assert_eq!(d.len(), 11);
        for (j, p) in d.samples.iter().enumerate() {
            let u = p.position[0] / 100.0;
            assert!((u - j as f64 / 10.0).abs() < 1e-12);
            assert!((p.t - j as f64 * 0.1).abs() < 1e-12);
        }
        assert_eq!(d.samples[0], s.samples[0]);
        assert_eq!(d.samples[10], s.samples[100]);
        assert!(downsample(&s, 1).is_err());
        assert!(downsample(&s, 102).is_err());
    }

    #[test]
    fn zero_model_lies_on_truth() {
        let truth = FusedPath::new(
            vec![
                FusedPoint {
                    position: [0.0, 0.0, 0.0],
                    orientation: FixedXyz::default(),
                    speed: 100.0,
                },
                FusedPoint {
                    position: [100.0, 0.0, 0.0],
                    orientation: FixedXyz::default(),
                    speed: 100.0,
                },
            ],
            FrameId::S,
            false,
        )
        .unwrap();
        let s = synth_demo(&truth, &TrackerErrorModel::zero(), 100.0).unwrap();
        assert_eq!(s.len(), 101);
        for p in &s.samples {
            assert!((p.position[0] - 100.0 * p.t).abs() < 1e-9);
            assert_eq!(p.position[1], 0.0);
            assert_eq!(p.position[2], 0.0);
        }
    }

    #[test]
    fn z_bias_saturates_at_max() {
        let m = TrackerErrorModel::default();
        assert_eq!(m.z_bias([0.0, 0.0, 800.0]), 60.0);
        assert_eq!(m.z_bias([0.0, 3000.0, 0.0]), 60.0);
        assert_eq!(m.z_bias([400.0, 0.0, 0.0]), 30.0);
        let mut bad = m.clone();
        bad.spike_rate = 1.5;
        assert!(bad.validate().is_err());
    }
}
