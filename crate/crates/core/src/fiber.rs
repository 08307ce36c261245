//! Area-preserving diffeomorphisms of the torus `T² = ℝ²/ℤ²`.
//!
//! Every map comes with its exact Jacobian and a closed-form inverse.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, fabs, floor, hypot, round, sin};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::rng;

const TAU: f64 = 2.0 * PI;

/// `x mod 1` in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `x mod 1` in `[-1/2, 1/2]`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    x - round(x)
}

/// A point of `T²` with both coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    u: f64,
    v: f64,
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Self {
            u: wrap_unit(u),
            v: wrap_unit(v),
        }
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Shortest lift of `other − self`.
    pub fn displacement_to(&self, other: &TorusPoint) -> [f64; 2] {
        [
            wrap_centered(other.u - self.u),
            wrap_centered(other.v - self.v),
        ]
    }

    /// Flat torus distance.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let [du, dv] = self.displacement_to(other);
        hypot(du, dv)
    }

    fn translate(&self, w: [f64; 2]) -> Self {
        Self::new(self.u + w[0], self.v + w[1])
    }
}

/// Smooth radial cut-off: `1` on `[0, plateau_end]`, `0` from `support_end` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    plateau_end: f64,
    support_end: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self {
            plateau_end: 1.0 / 3.0,
            support_end: 2.0 / 3.0,
        }
    }
}

impl BumpProfile {
    pub fn new(plateau_end: f64, support_end: f64) -> Result<Self> {
        if !(0.0 < plateau_end && plateau_end < support_end && support_end < 1.0) {
            return Err(Error::Config(format!(
                "bump profile needs 0 < {plateau_end} < {support_end} < 1"
            )));
        }
        Ok(Self {
            plateau_end,
            support_end,
        })
    }

    pub fn plateau_end(&self) -> f64 {
        self.plateau_end
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    fn step(&self, s: f64) -> (f64, f64) {
        // q(u) = 1 / (1 + exp(1/u - 1/(1-u))) rises smoothly from 0 to 1.
        let width = self.support_end - self.plateau_end;
        let u = (s - self.plateau_end) / width;
        let e = exp(1.0 / u - 1.0 / (1.0 - u));
        let q = 1.0 / (1.0 + e);
        let dq = q * (1.0 - q) * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u)));
        (q, dq / width)
    }

    /// `ρ(s)`.
    pub fn value(&self, s: f64) -> f64 {
        if s <= self.plateau_end {
            1.0
        } else if s >= self.support_end {
            0.0
        } else {
            1.0 - self.step(s).0
        }
    }

    /// `ρ'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        if s <= self.plateau_end || s >= self.support_end {
            0.0
        } else {
            -self.step(s).1
        }
    }
}

/// Rotation by `angle · ρ(|t − center| / radius)` about `center`.
///
/// In polar coordinates around the center this is `(s, θ) ↦ (s, θ + Tρ(s))`,
/// so it preserves area, is the identity outside the disc of radius
/// `support_end · R`, and its derivative at the center is the rotation `R_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedTwist {
    center: TorusPoint,
    radius: f64,
    angle: f64,
    profile: BumpProfile,
}

impl LocalizedTwist {
    pub fn new(center: TorusPoint, radius: f64, angle: f64) -> Result<Self> {
        Self::with_profile(center, radius, angle, BumpProfile::default())
    }

    pub fn with_profile(
        center: TorusPoint,
        radius: f64,
        angle: f64,
        profile: BumpProfile,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.25) {
            return Err(Error::Config(format!(
                "twist radius {radius} not in (0, 1/4]"
            )));
        }
        if !angle.is_finite() {
            return Err(Error::Config(format!("twist angle {angle} is not finite")));
        }
        Ok(Self {
            center,
            radius,
            angle,
            profile,
        })
    }

    pub fn center(&self) -> TorusPoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    /// The same twist with angle `−T`.
    pub fn inverse(&self) -> Self {
        Self {
            angle: -self.angle,
            ..*self
        }
    }

    /// Radius of the support disc.
    pub fn support_radius(&self) -> f64 {
        self.profile.support_end * self.radius
    }

    pub fn apply(&self, t: TorusPoint) -> (TorusPoint, Mat2) {
        let w = self.center.displacement_to(&t);
        let r = hypot(w[0], w[1]);
        let s = r / self.radius;
        if s >= self.profile.support_end {
            return (t, Mat2::IDENTITY);
        }
        let phi = self.angle * self.profile.value(s);
        if phi == 0.0 {
            return (t, Mat2::IDENTITY);
        }
        let rot = Mat2::rotation(phi);
        let image = self.center.translate(rot.apply(w));
        // D = Rot(φ)(I + J w ∇φᵀ) with J the quarter turn and ∇φ = Tρ'(s) w / (rR).
        let dphi = self.angle * self.profile.derivative(s);
        if dphi == 0.0 {
            return (image, rot);
        }
        let g = [
            dphi * w[0] / (r * self.radius),
            dphi * w[1] / (r * self.radius),
        ];
        let jw = [-w[1], w[0]];
        let inner = Mat2::new(
            1.0 + jw[0] * g[0],
            jw[0] * g[1],
            jw[1] * g[0],
            1.0 + jw[1] * g[1],
        );
        (image, rot * inner)
    }
}

/// Area-preserving torus map.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberMap {
    /// `t ↦ M t mod 1` for an integer matrix with determinant one.
    Toral([i64; 4]),
    /// Chirikov standard map `(u, v) ↦ (u + v', v')`, `v' = v + (K/2π) sin 2πu`.
    StandardMap(f64),
    /// Closed-form inverse of [`FiberMap::StandardMap`].
    StandardMapInverse(f64),
    Twist(LocalizedTwist),
    /// `Composite([f, g])` is `f ∘ g`: the last entry acts first.
    Composite(Vec<FiberMap>),
}

impl FiberMap {
    pub fn toral(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(Error::Config(format!(
                "toral matrix [[{a},{b}],[{c},{d}]] has determinant {}",
                a * d - b * c
            )));
        }
        Ok(FiberMap::Toral([a, b, c, d]))
    }

    pub fn identity() -> Self {
        FiberMap::Toral([1, 0, 0, 1])
    }

    pub fn standard_map(k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::Config(format!(
                "standard map parameter {k} is not finite"
            )));
        }
        Ok(FiberMap::StandardMap(k))
    }

    pub fn twist(center: TorusPoint, radius: f64, angle: f64) -> Result<Self> {
        Ok(FiberMap::Twist(LocalizedTwist::new(center, radius, angle)?))
    }

    /// `f ∘ g`.
    pub fn compose(f: FiberMap, g: FiberMap) -> Self {
        FiberMap::Composite(alloc::vec![f, g])
    }

    /// Image and Jacobian at `t`.
    pub fn apply(&self, t: TorusPoint) -> (TorusPoint, Mat2) {
        match self {
            FiberMap::Toral(m) => {
                let [a, b, c, d] = m.map(|e| e as f64);
                (
                    TorusPoint::new(a * t.u + b * t.v, c * t.u + d * t.v),
                    Mat2::new(a, b, c, d),
                )
            }
            FiberMap::StandardMap(k) => {
                let arg = TAU * t.u;
                let kick = k / TAU * sin(arg);
                let kc = k * cos(arg);
                let v = t.v + kick;
                (
                    TorusPoint::new(t.u + v, v),
                    Mat2::new(1.0 + kc, 1.0, kc, 1.0),
                )
            }
            FiberMap::StandardMapInverse(k) => {
                let u = wrap_unit(t.u - t.v);
                let arg = TAU * u;
                let kc = k * cos(arg);
                (
                    TorusPoint::new(u, t.v - k / TAU * sin(arg)),
                    Mat2::new(1.0, -1.0, -kc, 1.0 + kc),
                )
            }
            FiberMap::Twist(tw) => tw.apply(t),
            FiberMap::Composite(parts) => {
                let mut p = t;
                let mut d = Mat2::IDENTITY;
                for f in parts.iter().rev() {
                    let (q, df) = f.apply(p);
                    p = q;
                    d = df * d;
                }
                (p, d)
            }
        }
    }

    /// Image only.
    pub fn image(&self, t: TorusPoint) -> TorusPoint {
        match self {
            FiberMap::Composite(parts) => parts.iter().rev().fold(t, |p, f| f.image(p)),
            _ => self.apply(t).0,
        }
    }

    pub fn inverse(&self) -> FiberMap {
        match self {
            FiberMap::Toral([a, b, c, d]) => FiberMap::Toral([*d, -b, -c, *a]),
            FiberMap::StandardMap(k) => FiberMap::StandardMapInverse(*k),
            FiberMap::StandardMapInverse(k) => FiberMap::StandardMap(*k),
            FiberMap::Twist(tw) => FiberMap::Twist(tw.inverse()),
            FiberMap::Composite(parts) => {
                FiberMap::Composite(parts.iter().rev().map(FiberMap::inverse).collect())
            }
        }
    }

    /// Whether the derivative is a constant matrix (no dependence on `t`).
    pub fn is_linear(&self) -> bool {
        match self {
            FiberMap::Toral(_) => true,
            FiberMap::StandardMap(k) | FiberMap::StandardMapInverse(k) => *k == 0.0,
            FiberMap::Twist(tw) => tw.angle == 0.0,
            FiberMap::Composite(parts) => parts.iter().all(FiberMap::is_linear),
        }
    }

    /// Short textual form, matching the config syntax where possible.
    pub fn describe(&self) -> alloc::string::String {
        match self {
            FiberMap::Toral([a, b, c, d]) => format!("toral:{a},{b},{c},{d}"),
            FiberMap::StandardMap(k) => format!("stdmap:{k}"),
            FiberMap::StandardMapInverse(k) => format!("stdmap_inv:{k}"),
            FiberMap::Twist(tw) => format!(
                "twist:{},{},{},{}",
                tw.center.u, tw.center.v, tw.radius, tw.angle
            ),
            FiberMap::Composite(parts) => {
                let inner: Vec<_> = parts.iter().map(FiberMap::describe).collect();
                format!("compose({})", inner.join(" ∘ "))
            }
        }
    }
}

impl From<LocalizedTwist> for FiberMap {
    fn from(tw: LocalizedTwist) -> Self {
        FiberMap::Twist(tw)
    }
}

/// `max |det Df(t) − 1|` over `n_samples` uniform points.
pub fn area_preservation_defect(f: &FiberMap, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Config(
            "area defect needs at least one sample".into(),
        ));
    }
    let mut rng = rng::stream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let t = rng::torus_point(&mut rng);
        worst = worst.max(fabs(f.apply(t).1.det() - 1.0));
    }
    Ok(worst)
}

/// Central finite-difference Jacobian, for cross-checks.
pub fn finite_difference_jacobian(f: &FiberMap, t: TorusPoint, h: f64) -> Mat2 {
    let col = |du: f64, dv: f64| {
        let plus = f.image(TorusPoint::new(t.u + du, t.v + dv));
        let minus = f.image(TorusPoint::new(t.u - du, t.v - dv));
        let d = minus.displacement_to(&plus);
        [d[0] / (2.0 * h), d[1] / (2.0 * h)]
    };
    let cu = col(h, 0.0);
    let cv = col(0.0, h);
    Mat2::new(cu[0], cv[0], cu[1], cv[1])
}
