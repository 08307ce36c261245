//! Stable and unstable holonomies of fiber-bunched skew products.
//!
//! The non-linear holonomy along a stable pair is the limit of
//! `hⁿ = (fⁿ_y)⁻¹ ∘ fⁿ_x`; the linear one is the limit of
//! `Hⁿ = (Dfⁿ_y(h(t)))⁻¹ · Dfⁿ_x(t)`. Unstable holonomies use the same
//! truncations for the inverse system along the backward orbits.

use alloc::format;
use alloc::vec::Vec;

use libm::{log, pow};

use crate::error::{Error, Result};
use crate::fiber::TorusPoint;
use crate::linalg::Mat2;
use crate::shift::BaseSequence;
use crate::skew::{fiber_samples, Family, SkewSystem, StepMap, C1_GRID};
use crate::stats::fitted_rate;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_N_MAX: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `x_j = y_j` for `j ≥ 0`.
    Stable,
    /// `x_j = y_j` for `j ≤ 0`.
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyQuery {
    pub direction: Direction,
    pub x: BaseSequence,
    pub y: BaseSequence,
    pub tol: f64,
    pub n_max: usize,
}

impl HolonomyQuery {
    pub fn new(direction: Direction, x: BaseSequence, y: BaseSequence) -> Self {
        Self {
            direction,
            x,
            y,
            tol: DEFAULT_TOL,
            n_max: DEFAULT_N_MAX,
        }
    }

    pub fn stable(x: BaseSequence, y: BaseSequence) -> Self {
        Self::new(Direction::Stable, x, y)
    }

    pub fn unstable(x: BaseSequence, y: BaseSequence) -> Self {
        Self::new(Direction::Unstable, x, y)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Query for the same direction between the `j`-th images, i.e. `σʲ` for
    /// stable and `σ⁻ʲ` for unstable pairs.
    pub fn advanced(&self, j: i64) -> Self {
        let k = match self.direction {
            Direction::Stable => j,
            Direction::Unstable => -j,
        };
        Self {
            x: self.x.shift(k),
            y: self.y.shift(k),
            ..self.clone()
        }
    }
}

/// Truncation history of a holonomy computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceDiagnostics {
    /// `increments[n]` is the gap between truncations `n + 1` and `n`.
    pub increments: Vec<f64>,
    /// Least-squares rate of the positive increments.
    pub fitted_theta: Option<f64>,
    /// Truncation depth of the returned value.
    pub stopped_at: usize,
    /// The truncations became identical after `stopped_at`, so the returned
    /// value is the exact limit (locally constant short-circuit).
    pub exact: bool,
}

impl ConvergenceDiagnostics {
    fn new(increments: Vec<f64>, stopped_at: usize, exact: bool) -> Self {
        let pts: Vec<(f64, f64)> = increments
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (i as f64, log(v)))
            .collect();
        Self {
            fitted_theta: fitted_rate(&pts),
            increments,
            stopped_at,
            exact,
        }
    }

    /// `C θⁿ · scale` with `C` the smallest constant covering the first three
    /// increments.
    pub fn envelope(&self, theta: f64, scale: f64) -> Vec<f64> {
        let c = self
            .increments
            .iter()
            .take(3)
            .enumerate()
            .map(|(n, &v)| v / (pow(theta, n as f64) * scale))
            .fold(0.0, f64::max);
        (0..self.increments.len())
            .map(|n| c * pow(theta, n as f64) * scale)
            .collect()
    }
}

/// Fiber-bunching inequalities evaluated on samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BunchingReport {
    pub beta: f64,
    /// `max(forward_margin, inverse_margin)`.
    pub worst_margin: f64,
    /// `sup_x (sup_t ‖Df_x(t)‖ / inf_t m(Df_x(t))) · λ^β`.
    pub forward_margin: f64,
    /// The same for `f_x⁻¹`.
    pub inverse_margin: f64,
    pub satisfied: bool,
    pub n_base: usize,
    pub n_fiber: usize,
}

/// Evaluates the β-fiber-bunching inequalities.
///
/// The co-norm is taken as the infimum over the fiber of the smallest singular
/// value, which makes the margin an upper bound. Base points are the table
/// words for locally constant systems and `n_base` sampled sequences
/// otherwise; fibers use a 64×64 grid plus `n_fiber` random points.
pub fn fiber_bunching_margin(
    sys: &SkewSystem,
    beta: f64,
    n_base: usize,
    n_fiber: usize,
    seed: u64,
) -> Result<BunchingReport> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!(
            "bunching exponent {beta} must be positive"
        )));
    }
    let points = fiber_samples(C1_GRID, n_fiber, seed);
    let factor = pow(sys.space().metric_base(), beta);
    let ratio = |step: &StepMap<'_>, pts: &[TorusPoint]| {
        let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
        for &t in pts {
            let d = step.apply(t).1;
            sup = sup.max(d.norm());
            inf = inf.min(d.conorm());
        }
        sup / inf
    };
    let mut fwd: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut bases = 0;
    match sys.family() {
        Family::LocallyConstant { table, inverse, .. } => {
            for (f, g) in table.iter().zip(inverse) {
                if let (Some(f), Some(g)) = (f, g) {
                    fwd = fwd.max(ratio(&StepMap::Table(f), &points));
                    inv = inv.max(ratio(&StepMap::Table(g), &points));
                    bases += 1;
                }
            }
        }
        Family::Holder { .. } => {
            for i in 0..n_base as u64 {
                let x = sys.measure().sample_sequence(seed, i);
                fwd = fwd.max(ratio(&sys.step(&x, 0, false)?, &points));
                inv = inv.max(ratio(&sys.step(&x, 0, true)?, &points));
                bases += 1;
            }
        }
    }
    let forward_margin = fwd * factor;
    let inverse_margin = inv * factor;
    let worst_margin = forward_margin.max(inverse_margin);
    Ok(BunchingReport {
        beta,
        worst_margin,
        forward_margin,
        inverse_margin,
        satisfied: worst_margin < 1.0,
        n_base: bases,
        n_fiber: points.len(),
    })
}

/// Step maps of one query, oriented so that both directions read as
/// `hⁿ = (Gⁿ)⁻¹ ∘ Fⁿ` with `Fⁿ = F_{n−1} ∘ … ∘ F_0`.
struct Legs<'a> {
    fx: Vec<StepMap<'a>>,
    fy: Vec<StepMap<'a>>,
    fy_inv: Vec<StepMap<'a>>,
    /// First index from which `fx[k]` and `fy[k]` coincide up to `n_max`.
    merge: Option<usize>,
}

fn legs<'a>(sys: &'a SkewSystem, q: &HolonomyQuery) -> Result<Legs<'a>> {
    if !(q.tol > 0.0) || q.n_max == 0 {
        return Err(Error::Config("holonomy needs tol > 0 and n_max ≥ 1".into()));
    }
    let h = sys.space().metric_horizon() as i64;
    let n = q.n_max;
    let (fx, fy, fy_inv) = match q.direction {
        Direction::Stable => {
            if !q.x.agrees_on(&q.y, 0, h) {
                return Err(Error::Precondition(
                    "stable holonomy needs x_j = y_j for all j ≥ 0".into(),
                ));
            }
            (
                sys.steps(&q.x, 0, n, false)?,
                sys.steps(&q.y, 0, n, false)?,
                sys.steps(&q.y, 0, n, true)?,
            )
        }
        Direction::Unstable => {
            if !q.x.agrees_on(&q.y, -h, 0) {
                return Err(Error::Precondition(
                    "unstable holonomy needs x_j = y_j for all j ≤ 0".into(),
                ));
            }
            let from = -(n as i64);
            let rev = |mut v: Vec<StepMap<'a>>| {
                v.reverse();
                v
            };
            (
                rev(sys.steps(&q.x, from, n, true)?),
                rev(sys.steps(&q.y, from, n, true)?),
                rev(sys.steps(&q.y, from, n, false)?),
            )
        }
    };
    let mut merge = n;
    while merge > 0 && fx[merge - 1].same_as(&fy[merge - 1]) {
        merge -= 1;
    }
    Ok(Legs {
        merge: (merge < n).then_some(merge),
        fx,
        fy,
        fy_inv,
    })
}

/// Non-linear holonomy `h_{x,y}(t)` for a stable or unstable pair.
///
/// Returns the first truncation whose increment drops below `q.tol`, or the
/// exact limit when the generators along both orbits coincide from some depth
/// on (always the case for locally constant families).
pub fn holonomy_point(
    sys: &SkewSystem,
    q: &HolonomyQuery,
    t: TorusPoint,
) -> Result<(TorusPoint, ConvergenceDiagnostics)> {
    let legs = legs(sys, q)?;
    let last = legs.merge.unwrap_or(q.n_max);
    let mut increments = Vec::new();
    let mut forward = t;
    let mut current = t;
    for n in 1..=last {
        forward = legs.fx[n - 1].image(forward);
        let mut back = forward;
        for step in legs.fy_inv[..n].iter().rev() {
            back = step.image(back);
        }
        let inc = back.distance(&current);
        increments.push(inc);
        current = back;
        if inc < q.tol {
            return Ok((current, ConvergenceDiagnostics::new(increments, n, false)));
        }
    }
    match legs.merge {
        Some(k0) => Ok((current, ConvergenceDiagnostics::new(increments, k0, true))),
        None => Err(Error::NonConvergence(ConvergenceDiagnostics::new(
            increments, q.n_max, false,
        ))),
    }
}

/// Linear holonomy together with the non-linear image it is based at.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHolonomy {
    pub matrix: Mat2,
    pub image: TorusPoint,
    pub diag: ConvergenceDiagnostics,
}

/// Linear holonomy `H_{(x,t),(y,h(t))}`.
pub fn linear_holonomy(
    sys: &SkewSystem,
    q: &HolonomyQuery,
    t: TorusPoint,
) -> Result<LinearHolonomy> {
    let (image, _) = holonomy_point(sys, q, t)?;
    let legs = legs(sys, q)?;
    let last = legs.merge.unwrap_or(q.n_max);
    let mut increments = Vec::new();
    let (mut px, mut py) = (t, image);
    let (mut dx, mut dy) = (Mat2::IDENTITY, Mat2::IDENTITY);
    let mut current = Mat2::IDENTITY;
    for n in 1..=last {
        let (nx, ax) = legs.fx[n - 1].apply(px);
        let (ny, ay) = legs.fy[n - 1].apply(py);
        px = nx;
        py = ny;
        dx = ax * dx;
        dy = ay * dy;
        let next = dy.adjugate() * dx;
        let inc = (next - current).norm();
        increments.push(inc);
        current = next;
        if inc < q.tol {
            return Ok(LinearHolonomy {
                matrix: current,
                image,
                diag: ConvergenceDiagnostics::new(increments, n, false),
            });
        }
    }
    match legs.merge {
        Some(k0) => Ok(LinearHolonomy {
            matrix: current,
            image,
            diag: ConvergenceDiagnostics::new(increments, k0, true),
        }),
        None => Err(Error::NonConvergence(ConvergenceDiagnostics::new(
            increments, q.n_max, false,
        ))),
    }
}

/// Constant `L` in `d(h_{x,y}(t), t) ≤ L d(x,y)^α`: `H / (1 − Λγ)` with `H`
/// the declared Hölder constant, `Λ` the derivative bound and `γ = λ^α`.
/// Infinite when no certificate is declared or `Λγ ≥ 1`.
pub fn holder_constant(sys: &SkewSystem) -> f64 {
    let Some(cert) = sys.certificate() else {
        return f64::INFINITY;
    };
    let rate = sys.derivative_bound() * pow(sys.space().metric_base(), cert.alpha);
    if rate >= 1.0 {
        f64::INFINITY
    } else {
        cert.h / (1.0 - rate)
    }
}

/// Worst violation of the holonomy axioms at `t`: equivariance
/// `h_{σʲx,σʲy} = fʲ_y ∘ h_{x,y} ∘ (fʲ_x)⁻¹` for `j ∈ {1, 2, 3}` plus the
/// excess over the Hölder bound `d(h(t), t) ≤ L d(x,y)^α`.
pub fn holonomy_cocycle_check(sys: &SkewSystem, q: &HolonomyQuery, t: TorusPoint) -> Result<f64> {
    let (h_t, _) = holonomy_point(sys, q, t)?;
    let legs = legs(sys, &q.clone().with_n_max(3))?;
    let (mut px, mut py) = (t, h_t);
    let mut defect: f64 = 0.0;
    for j in 1..=3 {
        px = legs.fx[j - 1].image(px);
        py = legs.fy[j - 1].image(py);
        let (lhs, _) = holonomy_point(sys, &q.advanced(j as i64), px)?;
        defect = defect.max(lhs.distance(&py));
    }
    let d = sys.space().distance(&q.x, &q.y)?;
    let bound = holder_constant(sys) * pow(d, sys.alpha());
    let excess = h_t.distance(&t) - bound;
    Ok(if excess > 0.0 {
        defect + excess
    } else {
        defect
    })
}

/// Fitted exponential rate of `d(Fⁿ_x(t), Fⁿ_y(h(t)))` over `n` steps, using
/// only distances above `1000 · q.tol`; zero when the points never separate
/// from the truncation noise floor (e.g. identity holonomies).
pub fn strong_stable_contraction_rate(
    sys: &SkewSystem,
    q: &HolonomyQuery,
    t: TorusPoint,
    n: usize,
) -> Result<f64> {
    let (h_t, _) = holonomy_point(sys, q, t)?;
    let legs = legs(sys, &q.clone().with_n_max(n.max(1)))?;
    let floor = 1e3 * q.tol;
    let (mut px, mut py) = (t, h_t);
    let mut pts = Vec::new();
    for k in 0..=n {
        let dist = px.distance(&py);
        if dist > floor {
            pts.push((k as f64, log(dist)));
        }
        if k < n {
            px = legs.fx[k].image(px);
            py = legs.fy[k].image(py);
        }
    }
    Ok(fitted_rate(&pts).unwrap_or(0.0))
}

/// `h_{x,y}` for two queries is consistent with `h_{x,z}` followed by
/// `h_{z,y}`; returns the distance between both sides at `t`.
pub fn composition_defect(
    sys: &SkewSystem,
    xz: &HolonomyQuery,
    zy: &HolonomyQuery,
    t: TorusPoint,
) -> Result<f64> {
    if xz.direction != zy.direction {
        return Err(Error::Precondition(
            "composition needs one direction".into(),
        ));
    }
    let xy = HolonomyQuery {
        y: zy.y.clone(),
        ..xz.clone()
    };
    let (direct, _) = holonomy_point(sys, &xy, t)?;
    let (mid, _) = holonomy_point(sys, xz, t)?;
    let (two_step, _) = holonomy_point(sys, zy, mid)?;
    Ok(direct.distance(&two_step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FiberMap;
    use crate::shift::{BaseMeasure, ShiftSpace};
    use crate::skew::HolderParams;
    use alloc::vec;

    fn cat() -> FiberMap {
        FiberMap::toral(2, 1, 1, 1).unwrap()
    }

    fn random_product(lambda: f64, gens: Vec<FiberMap>) -> SkewSystem {
        let sp = ShiftSpace::full(2)
            .unwrap()
            .with_metric_base(lambda)
            .unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        SkewSystem::random_product(sp, m, gens).unwrap()
    }

    fn holder(lambda: f64) -> SkewSystem {
        let sp = ShiftSpace::full(2)
            .unwrap()
            .with_metric_base(lambda)
            .unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        SkewSystem::holder(
            sp,
            m,
            HolderParams {
                k0: 0.5,
                eps: 0.05,
                alpha: 1.0,
                horizon: 16,
            },
        )
        .unwrap()
    }

    #[test]
    fn bunching_examples() {
        let rot = random_product(0.5, vec![FiberMap::toral(0, -1, 1, 0).unwrap(); 2]);
        let r = fiber_bunching_margin(&rot, 0.3, 0, 16, 1).unwrap();
        assert!(r.satisfied && (r.worst_margin - pow(0.5, 0.3)).abs() < 1e-12);

        let golden = (3.0 + libm::sqrt(5.0)) / 2.0;
        let c = random_product(0.5, vec![cat(), cat()]);
        let r = fiber_bunching_margin(&c, 1.0, 0, 16, 1).unwrap();
        assert!(!r.satisfied && (r.worst_margin - golden * golden / 2.0).abs() < 1e-9);
        let c = random_product(1.0 / 16.0, vec![cat(), cat()]);
        let r = fiber_bunching_margin(&c, 1.0, 0, 16, 1).unwrap();
        assert!(r.satisfied && (r.worst_margin - golden * golden / 16.0).abs() < 1e-9);
        assert!(fiber_bunching_margin(&c, 0.0, 0, 16, 1).is_err());
    }

    #[test]
    fn locally_constant_holonomies_are_identity() {
        let sys = random_product(0.5, vec![cat(), FiberMap::StandardMap(1.3)]);
        let m = sys.measure().clone();
        let t = TorusPoint::new(0.31, 0.72);
        for i in 0..20u64 {
            let x = m.sample_sequence(4, 2 * i);
            let y = m.resample_past(&x, 0, 4, 2 * i + 1);
            let (img, diag) =
                holonomy_point(&sys, &HolonomyQuery::stable(x.clone(), y.clone()), t).unwrap();
            assert_eq!(img, t);
            assert!(diag.stopped_at <= 1 && diag.exact);
            let lin = linear_holonomy(&sys, &HolonomyQuery::stable(x.clone(), y), t).unwrap();
            assert_eq!(lin.matrix, Mat2::IDENTITY);
            let z = m.resample_future(&x, 0, 5, i);
            let (img, _) = holonomy_point(&sys, &HolonomyQuery::unstable(x, z), t).unwrap();
            assert_eq!(img, t);
        }
    }

    #[test]
    fn deep_tables_short_circuit_exactly() {
        let sp = ShiftSpace::full(2).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let entries = sp
            .words(3)
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, FiberMap::StandardMap(0.1 * i as f64)))
            .collect();
        let sys = SkewSystem::locally_constant(sp, m.clone(), 3, entries).unwrap();
        let x = m.sample_sequence(8, 0);
        let y = m.resample_future(&x, 0, 8, 1);
        let (img, diag) = holonomy_point(
            &sys,
            &HolonomyQuery::unstable(x, y),
            TorusPoint::new(0.4, 0.1),
        )
        .unwrap();
        assert!(diag.exact && diag.stopped_at <= 1);
        assert!(img.u().is_finite());
    }

    #[test]
    fn identical_points_give_identity() {
        let sys = holder(0.5);
        let x = sys.measure().sample_sequence(1, 1);
        let t = TorusPoint::new(0.2, 0.2);
        let q = HolonomyQuery::stable(x.clone(), x);
        let (img, diag) = holonomy_point(&sys, &q, t).unwrap();
        assert_eq!(img, t);
        assert_eq!(diag.stopped_at, 0);
        assert_eq!(linear_holonomy(&sys, &q, t).unwrap().matrix, Mat2::IDENTITY);
    }

    #[test]
    fn rejects_non_stable_pairs() {
        let sys = holder(0.5);
        let m = sys.measure().clone();
        let x = m.sample_sequence(1, 1);
        let y = m.sample_sequence(1, 2);
        let q = HolonomyQuery::stable(x, y);
        assert!(matches!(
            holonomy_point(&sys, &q, TorusPoint::ORIGIN),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn holder_family_converges_with_axioms() {
        let sys = holder(1.0 / 16.0);
        let m = sys.measure().clone();
        let t = TorusPoint::new(0.61, 0.13);
        for i in 0..10u64 {
            let x = m.sample_sequence(7, 2 * i);
            let y = m.resample_past(&x, 0, 7, 2 * i + 1);
            let q = HolonomyQuery::stable(x, y).with_tol(1e-12);
            let lin = linear_holonomy(&sys, &q, t).unwrap();
            assert!((lin.matrix.det() - 1.0).abs() < 1e-8);
            assert!(holonomy_cocycle_check(&sys, &q, t).unwrap() < 1e-10);
            let rate = strong_stable_contraction_rate(&sys, &q, t, 12).unwrap();
            assert!(rate <= 1.0 / 16.0 + 0.05, "rate {rate}");
        }
    }

    #[test]
    fn non_convergence_reports_diagnostics() {
        // strongly expanding Hölder family with a far horizon and a tiny cap
        let sp = ShiftSpace::full(2).unwrap().with_metric_base(0.9).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let sys = SkewSystem::holder(
            sp,
            m.clone(),
            HolderParams {
                k0: 6.0,
                eps: 0.5,
                alpha: 1.0,
                horizon: 64,
            },
        )
        .unwrap();
        let x = m.sample_sequence(2, 0);
        let y = m.resample_past(&x, 0, 2, 1);
        let q = HolonomyQuery::stable(x, y).with_n_max(8);
        match holonomy_point(&sys, &q, TorusPoint::new(0.3, 0.3)) {
            Err(Error::NonConvergence(d)) => assert_eq!(d.increments.len(), 8),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
