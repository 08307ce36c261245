//! 2×2 real matrices and projective directions in the plane.

use core::ops::{Mul, Sub};

use libm::{atan2, cos, fabs, hypot, sin};

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Counterclockwise rotation by `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (sin(angle), cos(angle));
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Classical adjugate; equals the inverse when `det == 1`.
    pub fn adjugate(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.adjugate().scale(1.0 / det))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// `(σ_max + σ_min, σ_max − σ_min)`, computed without cancellation.
    fn singular_sum_diff(&self) -> (f64, f64) {
        let sum = hypot(self.a + self.d, self.c - self.b);
        let diff = hypot(self.a - self.d, self.b + self.c);
        (sum, diff)
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> f64 {
        let (s, d) = self.singular_sum_diff();
        0.5 * (s + d)
    }

    /// Co-norm `m(M) = ‖M⁻¹‖⁻¹`, the smallest singular value.
    pub fn conorm(&self) -> f64 {
        let (s, d) = self.singular_sum_diff();
        0.5 * fabs(s - d)
    }

    pub fn max_abs(&self) -> f64 {
        fabs(self.a)
            .max(fabs(self.b))
            .max(fabs(self.c))
            .max(fabs(self.d))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

/// Angle in `[0, π)` of the line spanned by `v`.
pub fn line_angle(v: [f64; 2]) -> f64 {
    let mut th = atan2(v[1], v[0]);
    if th < 0.0 {
        th += core::f64::consts::PI;
    }
    if th >= core::f64::consts::PI {
        th -= core::f64::consts::PI;
    }
    th
}

/// Unit vector spanning the line at `angle`.
pub fn direction(angle: f64) -> [f64; 2] {
    [cos(angle), sin(angle)]
}

pub fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = hypot(v[0], v[1]);
    [v[0] / n, v[1] / n]
}

/// Acute angle in `[0, π/2]` between two lines; `None` for a zero vector.
pub fn line_separation(u: [f64; 2], v: [f64; 2]) -> Option<f64> {
    let nu = hypot(u[0], u[1]);
    let nv = hypot(v[0], v[1]);
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return None;
    }
    let cross = fabs(u[0] * v[1] - u[1] * v[0]);
    let dot = fabs(u[0] * v[0] + u[1] * v[1]);
    Some(atan2(cross, dot))
}
