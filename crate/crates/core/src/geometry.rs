//! Rotation and rigid-transform math.
//!
//! Conventions used throughout the crate:
//!
//! * Tracker orientations are intrinsic Z-Y'-X'' Euler angles
//!   (azimuth `psi`, elevation `theta`, roll `phi`), i.e.
//!   `R = Rz(psi) * Ry(theta) * Rx(phi)`.
//! * Robot orientations are fixed-axis (extrinsic) X-Y-Z angles
//!   `(rx, ry, rz)`: rotate about the fixed X axis by `rx`, then about
//!   fixed Y by `ry`, then about fixed Z by `rz`. The resulting matrix is
//!   again `Rz(rz) * Ry(ry) * Rx(rx)`, so `(rx, ry, rz) = (phi, theta, psi)`.
//! * Angles are radians, translations millimetres.
//!
//! Note on the closed form: some printed versions of the Z-Y'-X'' matrix
//! carry sign/argument typos in the first two rows (e.g. `-s(psi)c(theta)`
//! in place of `-s(psi)c(phi)`). The matrix built here is the plain product
//! of the three axis rotations, which is the only form for which the
//! Z-Y'-X'' / fixed X-Y-Z equivalence holds.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 3-vector in millimetres.
pub type Vec3 = [f64; 3];

/// Below this value of `cos(theta)` the Z-Y-X extraction is treated as
/// gimbal-locked.
pub const GIMBAL_LOCK_EPS: f64 = 1e-7;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid angle: {0}")]
    InvalidAngle(String),
    #[error("matrix is not a proper rotation (orthonormality error {error:.3e})")]
    NotOrthonormal { error: f64 },
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: String, found: String },
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Linear interpolation `a + f (b - a)`.
pub fn lerp(a: Vec3, b: Vec3, f: f64) -> Vec3 {
    [
        a[0] + f * (b[0] - a[0]),
        a[1] + f * (b[1] - a[1]),
        a[2] + f * (b[2] - a[2]),
    ]
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

fn canonical_atan2(y: f64, x: f64) -> f64 {
    let a = y.atan2(x);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Intrinsic Z-Y'-X'' Euler angles as reported by the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZyx {
    /// Azimuth / yaw about Z.
    pub psi: f64,
    /// Elevation / pitch about Y'.
    pub theta: f64,
    /// Roll about X''.
    pub phi: f64,
}

impl EulerZyx {
    pub fn new(psi: f64, theta: f64, phi: f64) -> Result<Self, GeometryError> {
        let e = Self { psi, theta, phi };
        e.check_finite()?;
        Ok(e)
    }

    pub fn from_degrees(az: f64, el: f64, roll: f64) -> Result<Self, GeometryError> {
        Self::new(az.to_radians(), el.to_radians(), roll.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.psi.to_degrees(),
            self.theta.to_degrees(),
            self.phi.to_degrees(),
        ]
    }

    fn check_finite(&self) -> Result<(), GeometryError> {
        if self.psi.is_finite() && self.theta.is_finite() && self.phi.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::InvalidAngle(format!(
                "non-finite Euler angles ({}, {}, {})",
                self.psi, self.theta, self.phi
            )))
        }
    }
}

/// Fixed-axis X-Y-Z angles, the robot-side orientation convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedXyz {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl FixedXyz {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    pub fn from_degrees(rx: f64, ry: f64, rz: f64) -> Self {
        Self::new(rx.to_radians(), ry.to_radians(), rz.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.rx.to_degrees(),
            self.ry.to_degrees(),
            self.rz.to_degrees(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.rx.is_finite() && self.ry.is_finite() && self.rz.is_finite()
    }
}

/// A 3x3 rotation matrix, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub const fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Checked constructor: rejects matrices that are not orthonormal with
    /// determinant +1 (within 1e-9).
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let m = Self(rows);
        let error = m.orthonormality_error();
        if !(error <= ORTHONORMAL_TOL) || (m.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::NotOrthonormal { error });
        }
        Ok(m)
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn mul(&self, other: &RotationMatrix) -> RotationMatrix {
        let a = &self.0;
        let b = &other.0;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        RotationMatrix(out)
    }

    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        RotationMatrix([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest elementwise deviation of `R^T R` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose().mul(self);
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((rtr.0[i][j] - target).abs());
            }
        }
        err
    }

    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        d
    }

    /// Rotation angle (radians, in `[0, pi]`) of `self^T * other`.
    pub fn angle_to(&self, other: &RotationMatrix) -> f64 {
        let rel = self.transpose().mul(other);
        let q = crate::quat::Quat::from_matrix(&rel);
        q.angle()
    }
}

/// `Rz(psi) * Ry(theta) * Rx(phi)` in closed form.
pub fn rot_from_euler_zyx(e: EulerZyx) -> Result<RotationMatrix, GeometryError> {
    e.check_finite()?;
    let (sp, cp) = e.psi.sin_cos();
    let (st, ct) = e.theta.sin_cos();
    let (sf, cf) = e.phi.sin_cos();
    Ok(RotationMatrix([
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ]))
}

/// Inverse of [`rot_from_euler_zyx`].
///
/// Returns `psi, phi` in `(-pi, pi]` and `theta` in `[-pi/2, pi/2]`. When
/// `|cos(theta)| < GIMBAL_LOCK_EPS` roll is pinned to zero and the coupled
/// rotation is attributed entirely to `psi`.
pub fn euler_zyx_from_rot(r: &RotationMatrix) -> EulerZyx {
    let m = &r.0;
    let cos_theta = m[0][0].hypot(m[1][0]);
    let theta = (-m[2][0]).atan2(cos_theta);
    if cos_theta < GIMBAL_LOCK_EPS {
        // With phi = 0: r01 = -sin(psi), r11 = cos(psi) for either sign of theta.
        EulerZyx {
            psi: canonical_atan2(-m[0][1], m[1][1]),
            theta,
            phi: 0.0,
        }
    } else {
        EulerZyx {
            psi: canonical_atan2(m[1][0], m[0][0]),
            theta,
            phi: canonical_atan2(m[2][1], m[2][2]),
        }
    }
}

/// Robot fixed X-Y-Z angles of a rotation: `(rx, ry, rz) = (phi, theta, psi)`.
pub fn robot_angles_fixed_xyz(r: &RotationMatrix) -> FixedXyz {
    let e = euler_zyx_from_rot(r);
    FixedXyz {
        rx: e.phi,
        ry: e.theta,
        rz: e.psi,
    }
}

/// Rotation of fixed X-Y-Z angles, built by applying the three extrinsic
/// rotations in sequence (X first, each subsequent one left-multiplied).
pub fn rot_from_fixed_xyz(a: FixedXyz) -> Result<RotationMatrix, GeometryError> {
    if !a.is_finite() {
        return Err(GeometryError::InvalidAngle(format!(
            "non-finite fixed X-Y-Z angles ({}, {}, {})",
            a.rx, a.ry, a.rz
        )));
    }
    let r = RotationMatrix::rot_x(a.rx);
    let r = RotationMatrix::rot_y(a.ry).mul(&r);
    Ok(RotationMatrix::rot_z(a.rz).mul(&r))
}

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transform4 {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl Transform4 {
    pub const fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: [0.0; 3],
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: [x, y, z],
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(self.rotation.apply(p), self.translation)
    }

    /// The equivalent homogeneous 4x4 matrix; the bottom row is exactly
    /// `(0, 0, 0, 1)`.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation.0;
        let t = &self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn max_abs_diff(&self, other: &Transform4) -> f64 {
        let a = self.to_matrix();
        let b = other.to_matrix();
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                d = d.max((a[i][j] - b[i][j]).abs());
            }
        }
        d
    }
}

pub fn make_transform(r: RotationMatrix, t: Vec3) -> Transform4 {
    Transform4 {
        rotation: r,
        translation: t,
    }
}

/// `a * b`: apply `b` first, then `a`.
pub fn compose(a: &Transform4, b: &Transform4) -> Transform4 {
    Transform4 {
        rotation: a.rotation.mul(&b.rotation),
        translation: a.apply(b.translation),
    }
}

pub fn invert(t: &Transform4) -> Transform4 {
    let rt = t.rotation.transpose();
    let p = rt.apply(t.translation);
    Transform4 {
        rotation: rt,
        translation: [-p[0], -p[1], -p[2]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameId {
    /// World.
    F,
    /// Tracker receiver (and CAD frame).
    S,
    /// Robot base.
    R,
    /// Tracker sensor / tool.
    E,
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrameId::F => "F",
            FrameId::S => "S",
            FrameId::R => "R",
            FrameId::E => "E",
        };
        f.write_str(s)
    }
}

/// A transform tagged with the frame it maps from (`child`) and the frame
/// it is expressed in (`reference`): `p_reference = T * p_child`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramedTransform {
    pub reference: FrameId,
    pub child: FrameId,
    pub transform: Transform4,
}

impl FramedTransform {
    pub fn new(reference: FrameId, child: FrameId, transform: Transform4) -> Self {
        Self {
            reference,
            child,
            transform,
        }
    }
}

/// Fixed part of the frame chain `{R} <- {F} <- {S}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CalibrationSet {
    /// `{F}` relative to `{R}`.
    pub t_r_f: Transform4,
    /// `{S}` relative to `{F}`.
    pub t_f_s: Transform4,
}

impl CalibrationSet {
    pub fn identity() -> Self {
        Self::default()
    }

    /// `T_R_F * T_F_S`.
    pub fn robot_from_receiver(&self) -> Transform4 {
        compose(&self.t_r_f, &self.t_f_s)
    }
}

/// `T_R_E = T_R_F * T_F_S * T_S_E`.
pub fn chain_to_robot(
    calib: &CalibrationSet,
    t_s_e: &FramedTransform,
) -> Result<FramedTransform, GeometryError> {
    if t_s_e.reference != FrameId::S || t_s_e.child != FrameId::E {
        return Err(GeometryError::FrameMismatch {
            expected: "S <- E".into(),
            found: format!("{} <- {}", t_s_e.reference, t_s_e.child),
        });
    }
    Ok(FramedTransform {
        reference: FrameId::R,
        child: FrameId::E,
        transform: compose(&calib.robot_from_receiver(), &t_s_e.transform),
    })
}
