//! Lyapunov exponents of the fiber derivative cocycle.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fiber::{FiberMap, TorusPoint};
use crate::linalg::{direction, line_angle, line_separation, normalize, Mat2};
use crate::rng;
use crate::shift::{BaseMeasure, BaseSequence, PeriodicPoint};
use crate::skew::{Accumulator, SkewSystem, StepMap};
use crate::stats::mean_stderr;
use libm::log;

/// Exponents at or below this band count as zero.
pub const DELTA_PINCH: f64 = 0.05;
/// Default backward-orbit depth for Oseledets frames.
pub const DEFAULT_FRAME_DEPTH: usize = 200;
/// Frames are converged when depth `m` and `2m` agree to this angle.
pub const FRAME_TOL: f64 = 1e-4;
/// Determinant defect above which an estimate is flagged unreliable.
pub const DET_DEFECT_LIMIT: f64 = 1e-6;

/// Angle of the reference direction pushed along orbits.
pub(crate) const REFERENCE_ANGLE: f64 = 1.0;

/// Monte Carlo estimate of the integrated exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_orbits: usize,
    pub n_steps: usize,
    pub det_defect_max: f64,
    pub seed: u64,
}

impl ExponentEstimate {
    pub fn reliable(&self) -> bool {
        self.det_defect_max < DET_DEFECT_LIMIT
    }
}

/// Per-orbit result feeding [`reduce_orbits`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSample {
    pub exponent: f64,
    pub det_defect: f64,
}

/// `log ‖Dfⁿ_x(t)‖ / n`.
pub fn pointwise_exponent(
    sys: &SkewSystem,
    x: &BaseSequence,
    t: TorusPoint,
    n: usize,
    renorm_every: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("exponent needs n ≥ 1".into()));
    }
    Ok(sys.iterate_cocycle(x, t, n as i64, renorm_every)?.log_norm / n as f64)
}

/// Forward and backward exponents `(λ̂⁺, λ̂⁻)` along one orbit segment, with
/// `λ̂⁻ = −log ‖(Dfⁿ_x(t))⁻¹‖ / n` computed by running the inverse cocycle from
/// the end point `(σⁿx, fⁿ_x(t))`.
pub fn exponent_pair(
    sys: &SkewSystem,
    x: &BaseSequence,
    t: TorusPoint,
    n: usize,
    renorm_every: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Config("exponent needs n ≥ 1".into()));
    }
    if renorm_every == 0 {
        return Err(Error::Config("renorm_every must be positive".into()));
    }
    let fwd = sys.steps(x, 0, n, false)?;
    let inv = sys.steps(x, 0, n, true)?;
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(t);
    let (mut m, mut log_fwd) = (Mat2::IDENTITY, 0.0);
    for (k, s) in fwd.iter().enumerate() {
        let (next, d) = s.apply(orbit[k]);
        orbit.push(next);
        m = d * m;
        if (k + 1) % renorm_every == 0 || k + 1 == n {
            let nrm = m.norm();
            log_fwd += log(nrm);
            m = m.scale(1.0 / nrm);
        }
    }
    // inverse cocycle over σⁿx along the same fiber orbit, nearest step first
    let (mut m, mut log_inv) = (Mat2::IDENTITY, 0.0);
    for (i, k) in (0..n).rev().enumerate() {
        m = inv[k].apply(orbit[k + 1]).1 * m;
        if (i + 1) % renorm_every == 0 || i + 1 == n {
            let nrm = m.norm();
            log_inv += log(nrm);
            m = m.scale(1.0 / nrm);
        }
    }
    Ok((log_fwd / n as f64, -log_inv / n as f64))
}

/// Starting point of orbit `k`: base from stream `2k`, fiber from `2k + 1`.
pub fn orbit_start(measure: &BaseMeasure, seed: u64, k: u64) -> (BaseSequence, TorusPoint) {
    let x = measure.sample_sequence(seed, 2 * k);
    let t = rng::torus_point(&mut rng::stream(seed, 2 * k + 1));
    (x, t)
}

/// Exponent of orbit `k` of an integrated-exponent run.
pub fn orbit_exponent(
    sys: &SkewSystem,
    seed: u64,
    k: u64,
    n_steps: usize,
    renorm_every: usize,
) -> Result<OrbitSample> {
    let (x, t) = orbit_start(sys.measure(), seed, k);
    let r = sys.iterate_cocycle(&x, t, n_steps as i64, renorm_every)?;
    Ok(OrbitSample {
        exponent: r.log_norm / n_steps as f64,
        det_defect: r.det_defect_max,
    })
}

/// Mean and standard error over orbits given in index order. The pairwise
/// reduction makes the result independent of how the orbits were scheduled.
pub fn reduce_orbits(samples: &[OrbitSample], n_steps: usize, seed: u64) -> ExponentEstimate {
    let xs: Vec<f64> = samples.iter().map(|s| s.exponent).collect();
    let (mean, stderr) = mean_stderr(&xs);
    ExponentEstimate {
        mean,
        stderr,
        n_orbits: samples.len(),
        n_steps,
        det_defect_max: samples.iter().map(|s| s.det_defect).fold(0.0, f64::max),
        seed,
    }
}

/// Monte Carlo estimate of `L(f) = ∫ λ⁺ d(μ̂ × leb)`.
pub fn integrated_exponent(
    sys: &SkewSystem,
    n_orbits: usize,
    n_steps: usize,
    seed: u64,
    renorm_every: usize,
) -> Result<ExponentEstimate> {
    if n_orbits == 0 || n_steps == 0 {
        return Err(Error::Config(
            "integrated exponent needs n_orbits, n_steps ≥ 1".into(),
        ));
    }
    let samples = (0..n_orbits as u64)
        .map(|k| orbit_exponent(sys, seed, k, n_steps, renorm_every))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_orbits(&samples, n_steps, seed))
}

/// `log ‖Dgⁿ(t)‖ / n` for a single map.
pub fn map_exponent(g: &FiberMap, t: TorusPoint, n: usize, renorm_every: usize) -> f64 {
    let step = StepMap::Table(g);
    let mut acc = Accumulator::new(t, renorm_every.max(1));
    for _ in 0..n {
        acc.push(&step);
    }
    acc.finish(n as i64).log_norm / n.max(1) as f64
}

/// Cell-centre grid of side `grid` on the torus, row by row.
pub fn fiber_grid(grid: usize) -> Vec<TorusPoint> {
    let h = 1.0 / grid as f64;
    (0..grid)
        .flat_map(|i| {
            (0..grid).map(move |j| TorusPoint::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h))
        })
        .collect()
}

/// Exponents of the return map `g = f^κ_p` on a fiber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingIntegral {
    pub integral: f64,
    /// Per-point exponents in [`fiber_grid`] order.
    pub values: Vec<f64>,
}

/// Grid average over the periodic fiber of the exponent of `g = f^κ_p`.
pub fn pinching_integral(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    grid: usize,
    n_steps: usize,
) -> Result<PinchingIntegral> {
    if grid == 0 || n_steps == 0 {
        return Err(Error::Config(
            "pinching integral needs grid, n_steps ≥ 1".into(),
        ));
    }
    let g = sys.return_map(p)?;
    let values: Vec<f64> = fiber_grid(grid)
        .into_iter()
        .map(|t| map_exponent(&g, t, n_steps, crate::skew::DEFAULT_RENORM_EVERY))
        .collect();
    let integral = crate::stats::pairwise_sum(&values) / values.len() as f64;
    Ok(PinchingIntegral { integral, values })
}

/// Estimated Oseledets directions of the return map at a fiber point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OseledetsFrame {
    /// Angle in `[0, π)` of the unstable direction.
    pub e_u: f64,
    /// Angle in `[0, π)` of the stable direction.
    pub e_s: f64,
    /// Exponent estimate at the point.
    pub gap: f64,
    pub converged: bool,
    pub depth_used: usize,
}

/// Pushes `v` along `points` (farthest first) with `map`'s derivative and
/// returns the directions after `m` and `2m` steps.
fn push_direction(map: &FiberMap, points: &[TorusPoint], m: usize) -> ([f64; 2], [f64; 2]) {
    // points[k] = k-th point of the pseudo-orbit ending at t (points[0] = t).
    let run = |depth: usize| {
        let mut v = direction(REFERENCE_ANGLE);
        for k in (1..=depth).rev() {
            v = normalize(map.apply(points[k]).1.apply(v));
        }
        v
    };
    (run(m), run(2 * m))
}

/// Unstable direction from `Dgᵐ(g⁻ᵐ t)` applied to a fixed direction along the
/// stored backward orbit; stable direction from the same construction for
/// `g⁻¹`. Converged when depths `m` and `2m` agree within [`FRAME_TOL`] for
/// both directions and the exponent exceeds [`DELTA_PINCH`].
pub fn oseledets_frame(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    t: TorusPoint,
    depth: usize,
) -> Result<OseledetsFrame> {
    let g = sys.return_map(p)?;
    frame_for_map(&g, &g.inverse(), t, depth)
}

/// [`oseledets_frame`] for an explicit map and its inverse.
pub fn frame_for_map(
    g: &FiberMap,
    g_inv: &FiberMap,
    t: TorusPoint,
    depth: usize,
) -> Result<OseledetsFrame> {
    if depth == 0 {
        return Err(Error::Config(format!(
            "frame depth {depth} must be positive"
        )));
    }
    let orbit = |f: &FiberMap| {
        let mut pts = Vec::with_capacity(2 * depth + 1);
        pts.push(t);
        for _ in 0..2 * depth {
            let last = pts[pts.len() - 1];
            pts.push(f.image(last));
        }
        pts
    };
    let backward = orbit(g_inv);
    let forward = orbit(g);
    let (u_m, u_2m) = push_direction(g, &backward, depth);
    let (s_m, s_2m) = push_direction(g_inv, &forward, depth);
    let gap = map_exponent(g, t, 2 * depth, crate::skew::DEFAULT_RENORM_EVERY);
    let stable_u = line_separation(u_m, u_2m).is_some_and(|a| a < FRAME_TOL);
    let stable_s = line_separation(s_m, s_2m).is_some_and(|a| a < FRAME_TOL);
    Ok(OseledetsFrame {
        e_u: line_angle(u_2m),
        e_s: line_angle(s_2m),
        gap,
        converged: stable_u && stable_s && gap > DELTA_PINCH,
        depth_used: 2 * depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::ShiftSpace;
    use alloc::vec;
    use libm::{atan, sqrt};

    fn constant(f: FiberMap) -> SkewSystem {
        let sp = ShiftSpace::full(2).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        SkewSystem::random_product(sp, m, vec![f.clone(), f]).unwrap()
    }

    fn cat() -> FiberMap {
        FiberMap::toral(2, 1, 1, 1).unwrap()
    }

    const CAT_EXPONENT: f64 = 0.9624236501192069;

    #[test]
    fn constant_cocycles() {
        let x = BaseMeasure::bernoulli(vec![0.5, 0.5])
            .unwrap()
            .sample_sequence(1, 1);
        let t = TorusPoint::new(0.1, 0.2);
        let l = pointwise_exponent(&constant(cat()), &x, t, 10_000, 16).unwrap();
        assert!((l - CAT_EXPONENT).abs() < 1e-3);
        let rot = pointwise_exponent(
            &constant(FiberMap::toral(0, -1, 1, 0).unwrap()),
            &x,
            t,
            10_000,
            16,
        )
        .unwrap();
        assert!(rot.abs() < 1e-6);
        let sh = pointwise_exponent(
            &constant(FiberMap::toral(1, 1, 0, 1).unwrap()),
            &x,
            t,
            10_000,
            16,
        )
        .unwrap();
        assert!(sh <= 1.01 * log(10_000.0) / 10_000.0);
        assert!(pointwise_exponent(&constant(cat()), &x, t, 0, 16).is_err());
    }

    #[test]
    fn stabilizes_with_length() {
        let sys = constant(cat());
        let x = sys.measure().sample_sequence(3, 0);
        let t = TorusPoint::new(0.3, 0.6);
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let a = pointwise_exponent(&sys, &x, t, n, 16).unwrap();
            let b = pointwise_exponent(&sys, &x, t, 2 * n, 16).unwrap();
            assert!((a - b).abs() < prev.max(1e-12), "{n}: {a} {b} {prev}");
            prev = (a - b).abs();
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn forward_and_backward_cancel() {
        let sp = ShiftSpace::full(2).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let sys =
            SkewSystem::random_product(sp, m, vec![FiberMap::StandardMap(2.0), cat()]).unwrap();
        for k in 0..10 {
            let (x, t) = orbit_start(sys.measure(), 5, k);
            let (lp, lm) = exponent_pair(&sys, &x, t, 1000, 16).unwrap();
            assert!((lp + lm).abs() < 1e-2);
        }
    }

    #[test]
    fn identity_estimate_is_exactly_zero() {
        let est = integrated_exponent(&constant(FiberMap::identity()), 20, 100, 1, 16).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
        assert!(est.reliable());
    }

    #[test]
    fn estimates_are_deterministic() {
        let sp = ShiftSpace::full(2).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let sys =
            SkewSystem::random_product(sp, m, vec![FiberMap::StandardMap(1.0), cat()]).unwrap();
        let a = integrated_exponent(&sys, 16, 200, 42, 16).unwrap();
        let b = integrated_exponent(&sys, 16, 200, 42, 16).unwrap();
        assert_eq!(a, b);
        let samples: Vec<_> = (0..16)
            .map(|k| orbit_exponent(&sys, 42, k, 200, 16).unwrap())
            .collect();
        assert_eq!(reduce_orbits(&samples, 200, 42), a);
    }

    #[test]
    fn pinching_integrals() {
        let sp = ShiftSpace::full(2).unwrap();
        let p = PeriodicPoint::new(&sp, &[0]).unwrap();
        let c = pinching_integral(&constant(cat()), &p, 16, 1000).unwrap();
        assert!((c.integral - CAT_EXPONENT).abs() < 1e-2);
        let id = pinching_integral(&constant(FiberMap::identity()), &p, 16, 1000).unwrap();
        assert_eq!(id.integral, 0.0);
        let tw = FiberMap::twist(TorusPoint::new(0.5, 0.5), 0.2, 0.7).unwrap();
        let elliptic = FiberMap::compose(FiberMap::toral(0, -1, 1, 0).unwrap(), tw);
        let e = pinching_integral(&constant(elliptic), &p, 16, 1000).unwrap();
        assert!(e.integral <= 1e-2);
    }

    #[test]
    fn cat_frame_is_eigenframe() {
        let sys = constant(cat());
        let sp = ShiftSpace::full(2).unwrap();
        let p = PeriodicPoint::new(&sp, &[0]).unwrap();
        let eu = atan((sqrt(5.0) - 1.0) / 2.0);
        let es = eu + core::f64::consts::FRAC_PI_2;
        for t in [TorusPoint::new(0.1, 0.7), TorusPoint::new(0.9, 0.35)] {
            let f = oseledets_frame(&sys, &p, t, DEFAULT_FRAME_DEPTH).unwrap();
            assert!(f.converged);
            assert!((f.e_u - eu).abs() < 1e-6);
            assert!((f.e_s - es).abs() < 1e-6);
        }
        let rot = constant(FiberMap::toral(0, -1, 1, 0).unwrap());
        assert!(
            !oseledets_frame(&rot, &p, TorusPoint::new(0.1, 0.1), 50)
                .unwrap()
                .converged
        );
    }

    #[test]
    fn frames_are_equivariant() {
        let sp = ShiftSpace::full(2).unwrap();
        let sys = constant(FiberMap::StandardMap(3.0));
        let p = PeriodicPoint::new(&sp, &[0]).unwrap();
        let g = sys.return_map(&p).unwrap();
        let t = TorusPoint::new(0.123, 0.456);
        let here = oseledets_frame(&sys, &p, t, 100).unwrap();
        let (gt, dg) = g.apply(t);
        let there = oseledets_frame(&sys, &p, gt, 100).unwrap();
        if here.converged && there.converged {
            let moved = dg.apply(direction(here.e_u));
            assert!(line_separation(moved, direction(there.e_u)).unwrap() < 1e-4);
        }
    }
}
