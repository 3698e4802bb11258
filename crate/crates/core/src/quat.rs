//! Unit quaternions, used only for orientation interpolation.

use crate::geometry::RotationMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    fn neg(self) -> Quat {
        Quat {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    fn normalized(self) -> Quat {
        let n = self.dot(&self).sqrt();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Shepperd's method: pick the largest diagonal combination for stability.
    pub fn from_matrix(r: &RotationMatrix) -> Quat {
        let m = &r.0;
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    pub fn to_matrix(&self) -> RotationMatrix {
        let Quat { w, x, y, z } = *self;
        RotationMatrix([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * v.atan2(self.w.abs())
    }

    /// Shortest-arc spherical interpolation, `f` in `[0, 1]`.
    pub fn slerp(&self, other: &Quat, f: f64) -> Quat {
        if f == 0.0 {
            return *self;
        }
        let mut b = *other;
        let mut d = self.dot(&b);
        if d < 0.0 {
            b = b.neg();
            d = -d;
        }
        if f == 1.0 {
            return b;
        }
        if d > 1.0 - 1e-12 {
            // Nearly identical: normalized lerp is exact to rounding.
            return Quat {
                w: self.w + f * (b.w - self.w),
                x: self.x + f * (b.x - self.x),
                y: self.y + f * (b.y - self.y),
                z: self.z + f * (b.z - self.z),
            }
            .normalized();
        }
        let theta = d.min(1.0).acos();
        let sin_theta = theta.sin();
        let wa = ((1.0 - f) * theta).sin() / sin_theta;
        let wb = (f * theta).sin() / sin_theta;
        Quat {
            w: wa * self.w + wb * b.w,
            x: wa * self.x + wb * b.x,
            y: wa * self.y + wb * b.y,
            z: wa * self.z + wb * b.z,
        }
        .normalized()
    }
}
