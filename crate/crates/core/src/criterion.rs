//! Pinching and twisting detectors, homoclinic holonomy loops, the su-state
//! invariance probe and twist perturbation sweeps.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::floor;

use crate::error::{Error, Result};
use crate::fiber::{FiberMap, LocalizedTwist, TorusPoint};
use crate::holonomy::{linear_holonomy, HolonomyQuery, DEFAULT_N_MAX, DEFAULT_TOL};
use crate::linalg::{direction, line_angle, line_separation, normalize, Mat2};
use crate::lyapunov::{
    fiber_grid, frame_for_map, integrated_exponent, pinching_integral, ExponentEstimate,
    OseledetsFrame, DEFAULT_FRAME_DEPTH, DELTA_PINCH, REFERENCE_ANGLE,
};
use crate::rng::derive_seed;
use crate::shift::{BaseSequence, PeriodicPoint};
use crate::skew::{SkewSystem, DEFAULT_RENORM_EVERY};
use crate::stats::median;

/// Acute angle between the lines spanned by `u` and `v`, in `[0, π/2]`.
pub fn projective_distance(u: [f64; 2], v: [f64; 2]) -> Result<f64> {
    line_separation(u, v).ok_or_else(|| Error::Precondition("zero direction vector".into()))
}

/// `h = h^s_{σⁱz, p} ∘ fⁱ_z ∘ h^u_{p, z}` on the fiber over a periodic point,
/// with its linear part `H_t = H^s · Dfⁱ_z(h^u(t)) · H^u`.
#[derive(Debug, Clone)]
pub struct HolonomyLoop {
    sys: SkewSystem,
    p: PeriodicPoint,
    z: BaseSequence,
    i: usize,
    excursion: FiberMap,
    unstable: HolonomyQuery,
    stable: HolonomyQuery,
    /// Both holonomies are exactly the identity.
    trivial_holonomies: bool,
}

/// Builds the homoclinic loop for `z ∈ W^u_loc(p)` with `σⁱz ∈ W^s_loc(p)`.
pub fn build_holonomy_loop(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    z: &BaseSequence,
    i: usize,
) -> Result<HolonomyLoop> {
    build_holonomy_loop_with(sys, p, z, i, DEFAULT_TOL, DEFAULT_N_MAX)
}

pub fn build_holonomy_loop_with(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    z: &BaseSequence,
    i: usize,
    tol: f64,
    n_max: usize,
) -> Result<HolonomyLoop> {
    let space = sys.space();
    let ps = p.sequence(space)?;
    let h = space.metric_horizon() as i64;
    if !z.agrees_on(&ps, -h, 0) {
        return Err(Error::Precondition(
            "z is not in the local unstable set of p (differs at some j ≤ 0)".into(),
        ));
    }
    let zi = z.shift(i as i64);
    if !zi.agrees_on(&ps, 0, h) {
        return Err(Error::Precondition(format!(
            "σ^{i}(z) is not in the local stable set of p (differs at some j ≥ 0)"
        )));
    }
    let steps = sys.steps(z, 0, i, false)?;
    let excursion = FiberMap::Composite(steps.iter().rev().map(|s| s.to_fiber_map()).collect());
    let unstable = HolonomyQuery::unstable(ps.clone(), z.clone())
        .with_tol(tol)
        .with_n_max(n_max);
    let stable = HolonomyQuery::stable(zi, ps)
        .with_tol(tol)
        .with_n_max(n_max);
    let probe = TorusPoint::new(0.5, 0.5);
    let u = linear_holonomy(sys, &unstable, probe)?;
    let s = linear_holonomy(sys, &stable, excursion.image(u.image))?;
    let trivial_holonomies =
        u.diag.exact && u.diag.stopped_at == 0 && s.diag.exact && s.diag.stopped_at == 0;
    Ok(HolonomyLoop {
        sys: sys.clone(),
        p: p.clone(),
        z: z.clone(),
        i,
        excursion,
        unstable,
        stable,
        trivial_holonomies,
    })
}

impl HolonomyLoop {
    pub fn periodic_point(&self) -> &PeriodicPoint {
        &self.p
    }

    pub fn homoclinic_point(&self) -> &BaseSequence {
        &self.z
    }

    pub fn transition_time(&self) -> usize {
        self.i
    }

    /// `fⁱ_z` as a single map.
    pub fn excursion(&self) -> &FiberMap {
        &self.excursion
    }

    /// The loop as a closed-form map when both holonomies are the identity
    /// (locally constant systems).
    pub fn exact_map(&self) -> Option<&FiberMap> {
        self.trivial_holonomies.then_some(&self.excursion)
    }

    /// `(h(t), H_t)`.
    pub fn apply(&self, t: TorusPoint) -> Result<(TorusPoint, Mat2)> {
        if self.trivial_holonomies {
            return Ok(self.excursion.apply(t));
        }
        let u = linear_holonomy(&self.sys, &self.unstable, t)?;
        let (mid, d) = self.excursion.apply(u.image);
        let s = linear_holonomy(&self.sys, &self.stable, mid)?;
        Ok((s.image, s.matrix * d * u.matrix))
    }

    pub fn map(&self, t: TorusPoint) -> Result<TorusPoint> {
        Ok(self.apply(t)?.0)
    }

    /// The loop's linear part `H_t`.
    pub fn linear_part(&self, t: TorusPoint) -> Result<Mat2> {
        Ok(self.apply(t)?.1)
    }

    /// `max |det H_t − 1|` over a `grid × grid` fiber grid.
    pub fn area_defect(&self, grid: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in fiber_grid(grid) {
            worst = worst.max((self.linear_part(t)?.det() - 1.0).abs());
        }
        Ok(worst)
    }
}

/// Positivity of the exponent integral over the periodic fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingReport {
    pub integral: f64,
    pub positive: bool,
    /// Fraction of grid points with exponent above [`DELTA_PINCH`].
    pub nuh_fraction: f64,
    pub grid: usize,
    pub n_steps: usize,
}

pub fn check_pinching(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    grid: usize,
    n_steps: usize,
) -> Result<PinchingReport> {
    let pi = pinching_integral(sys, p, grid, n_steps)?;
    let nuh = pi.values.iter().filter(|&&v| v > DELTA_PINCH).count();
    Ok(PinchingReport {
        integral: pi.integral,
        positive: pi.integral > DELTA_PINCH,
        nuh_fraction: nuh as f64 / pi.values.len() as f64,
        grid,
        n_steps,
    })
}

/// Thresholds of the twisting detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistParams {
    /// Upper bound on `|K|`; the grid side is `⌊√n_k⌋`.
    pub n_k: usize,
    pub j_max: usize,
    pub epsilon_twist: f64,
    pub fraction_required: f64,
    /// Return radius for matching `hʲ(t)` with a point of `K`.
    pub epsilon_k: f64,
    pub frame_depth: usize,
}

impl Default for TwistParams {
    fn default() -> Self {
        Self {
            n_k: 200,
            j_max: 64,
            epsilon_twist: 0.05,
            fraction_required: 0.1,
            epsilon_k: 0.01,
            frame_depth: DEFAULT_FRAME_DEPTH,
        }
    }
}

impl TwistParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.epsilon_twist, self.fraction_required, self.epsilon_k];
        if self.n_k == 0
            || self.j_max == 0
            || self.frame_depth == 0
            || positive.iter().any(|&v| !(v > 0.0))
        {
            return Err(Error::Config(
                "twisting thresholds must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One point of `K` and what happened along its loop orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistSample {
    pub point: TorusPoint,
    pub frame: OseledetsFrame,
    /// First return time into the `ε_K`-neighbourhood of `K`.
    pub j_t: Option<usize>,
    /// Smallest of the four separations between the transported and target
    /// frames at the return.
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwistingReport {
    pub samples: Vec<TwistSample>,
    /// Fraction of `K` with `min_separation > epsilon_twist`.
    pub fraction: f64,
    pub twisting: bool,
    /// No point of `K` returned within `j_max` loop iterations.
    pub inconclusive: bool,
    pub epsilon_twist: f64,
    pub fraction_required: f64,
    pub j_max: usize,
}

impl TwistingReport {
    pub fn min_separation_median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .samples
            .iter()
            .filter_map(|s| s.min_separation)
            .collect();
        median(&mut v)
    }

    pub fn j_t_median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .samples
            .iter()
            .filter_map(|s| s.j_t.map(|j| j as f64))
            .collect();
        median(&mut v)
    }
}

/// Converged Oseledets frames on the `⌊√n_k⌋²` cell-centre grid.
pub fn pinching_sample(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    params: &TwistParams,
) -> Result<Vec<(TorusPoint, OseledetsFrame)>> {
    let side = floor(libm::sqrt(params.n_k as f64)) as usize;
    let g = sys.return_map(p)?;
    let g_inv = g.inverse();
    let mut out = Vec::new();
    for t in fiber_grid(side.max(1)) {
        let f = frame_for_map(&g, &g_inv, t, params.frame_depth)?;
        if f.converged && f.gap > DELTA_PINCH {
            out.push((t, f));
        }
    }
    Ok(out)
}

/// Checks whether the loop's linear parts move the Oseledets pair off the
/// pair at the first return to `K`.
pub fn check_twisting(
    sys: &SkewSystem,
    hl: &HolonomyLoop,
    params: &TwistParams,
) -> Result<TwistingReport> {
    params.validate()?;
    let k = pinching_sample(sys, &hl.p, params)?;
    if k.is_empty() {
        return Err(Error::NotApplicable(
            "no fiber point with a converged Oseledets frame; pinching failed".into(),
        ));
    }
    let nearest = |s: &TorusPoint| {
        k.iter()
            .map(|(q, f)| (q.distance(s), f))
            .filter(|(d, _)| *d < params.epsilon_k)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, f)| *f)
    };
    let mut samples = Vec::with_capacity(k.len());
    for (t, frame) in &k {
        let mut s = *t;
        let mut m = Mat2::IDENTITY;
        let mut hit = None;
        for j in 1..=params.j_max {
            let (next, h) = hl.apply(s)?;
            s = next;
            m = h * m;
            let nrm = m.norm();
            m = m.scale(1.0 / nrm);
            if let Some(target) = nearest(&s) {
                let moved = [m.apply(direction(frame.e_u)), m.apply(direction(frame.e_s))];
                let aims = [direction(target.e_u), direction(target.e_s)];
                let mut sep = f64::INFINITY;
                for a in &moved {
                    for b in &aims {
                        sep = sep.min(projective_distance(*a, *b)?);
                    }
                }
                hit = Some((j, sep));
                break;
            }
        }
        samples.push(TwistSample {
            point: *t,
            frame: *frame,
            j_t: hit.map(|h| h.0),
            min_separation: hit.map(|h| h.1),
        });
    }
    let twisted = samples
        .iter()
        .filter(|s| s.min_separation.is_some_and(|d| d > params.epsilon_twist))
        .count();
    let fraction = twisted as f64 / samples.len() as f64;
    let inconclusive = samples.iter().all(|s| s.j_t.is_none());
    Ok(TwistingReport {
        samples,
        fraction,
        twisting: !inconclusive && fraction >= params.fraction_required,
        inconclusive,
        epsilon_twist: params.epsilon_twist,
        fraction_required: params.fraction_required,
        j_max: params.j_max,
    })
}

/// Burn-in steps skipped before directions enter the histograms.
pub const PROBE_BURN_IN: usize = 16;
/// Side of the fiber grid sampled by [`su_state_probe`].
pub const PROBE_GRID: usize = 16;

/// Histogram on `[0, π)` of `Dgⁿ(g⁻ⁿt)·v₀` for `n = 1..=n_iter` (after
/// burn-in), together with the raw directions.
fn direction_histogram(
    g: &FiberMap,
    g_inv: &FiberMap,
    t: TorusPoint,
    bins: usize,
    n_iter: usize,
) -> (Vec<f64>, Vec<[f64; 2]>) {
    let v0 = direction(REFERENCE_ANGLE);
    let mut dirs = Vec::with_capacity(n_iter);
    let mut prod = Mat2::IDENTITY;
    let mut back = t;
    for n in 1..=n_iter {
        back = g_inv.image(back);
        prod = prod * g.apply(back).1;
        prod = prod.scale(1.0 / prod.norm());
        if n > PROBE_BURN_IN.min(n_iter / 2) {
            dirs.push(normalize(prod.apply(v0)));
        }
    }
    (histogram(&dirs, bins), dirs)
}

fn histogram(dirs: &[[f64; 2]], bins: usize) -> Vec<f64> {
    let mut h = alloc::vec![0.0; bins];
    for v in dirs {
        let b = ((line_angle(*v) / PI) * bins as f64) as usize;
        h[b.min(bins - 1)] += 1.0;
    }
    let total = dirs.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= total);
    h
}

/// Mean L1 distance between `(H_t)_* m_t` and `m_{h(t)}` over a 16×16 fiber
/// grid, where `m_t` is the empirical projective measure of the return map's
/// pushed directions at `t`.
pub fn su_state_probe(
    sys: &SkewSystem,
    p: &PeriodicPoint,
    hl: &HolonomyLoop,
    bins: usize,
    n_iter: usize,
) -> Result<f64> {
    if bins == 0 || n_iter == 0 {
        return Err(Error::Config("probe needs bins, n_iter ≥ 1".into()));
    }
    let g = sys.return_map(p)?;
    let g_inv = g.inverse();
    let mut total = 0.0;
    let grid = fiber_grid(PROBE_GRID);
    for t in &grid {
        let (_, dirs) = direction_histogram(&g, &g_inv, *t, bins, n_iter);
        let (ht, h) = hl.apply(*t)?;
        let moved: Vec<[f64; 2]> = dirs.iter().map(|v| h.apply(*v)).collect();
        let pushed = histogram(&moved, bins);
        let (target, _) = direction_histogram(&g, &g_inv, ht, bins, n_iter);
        total += pushed
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    }
    Ok(total / grid.len() as f64)
}

/// Run parameters of a perturbation sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub generator_index: usize,
    pub center: TorusPoint,
    pub radius: f64,
    pub periodic_word: Vec<u8>,
    pub insert_symbol: u8,
    pub insert_index: i64,
    pub transition: usize,
    pub pinching_grid: usize,
    pub pinching_steps: usize,
    pub twist: TwistParams,
    pub n_orbits: usize,
    pub n_steps: usize,
    pub renorm_every: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            generator_index: 1,
            center: TorusPoint::new(0.25, 0.25),
            radius: 0.2,
            periodic_word: alloc::vec![0],
            insert_symbol: 1,
            insert_index: 1,
            transition: 2,
            pinching_grid: 64,
            pinching_steps: 1000,
            twist: TwistParams::default(),
            n_orbits: 200,
            n_steps: 5000,
            renorm_every: DEFAULT_RENORM_EVERY,
        }
    }
}

/// Outcome of the full criterion pipeline on one system.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub pinching: PinchingReport,
    /// `Err` when twisting could not be evaluated (e.g. no pinching points).
    pub twisting: core::result::Result<TwistingReport, String>,
}

impl CriterionOutcome {
    pub fn twisting_flag(&self) -> bool {
        self.twisting.as_ref().is_ok_and(|r| r.twisting)
    }

    /// `pinching=… twisting=…`.
    pub fn verdict(&self) -> String {
        format!(
            "pinching={} twisting={}",
            self.pinching.positive,
            self.twisting_flag()
        )
    }
}

/// Pinching, homoclinic loop and twisting for the configured periodic point.
pub fn run_criterion(sys: &SkewSystem, params: &SweepParams) -> Result<CriterionOutcome> {
    let space = sys.space();
    let p = PeriodicPoint::new(space, &params.periodic_word)?;
    let pinching = check_pinching(sys, &p, params.pinching_grid, params.pinching_steps)?;
    let z = space.homoclinic_point(&p, params.insert_symbol, params.insert_index)?;
    let hl = build_holonomy_loop(sys, &p, &z, params.transition)?;
    let twisting = match check_twisting(sys, &hl, &params.twist) {
        Ok(r) => Ok(r),
        Err(e @ Error::NotApplicable(_)) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(CriterionOutcome { pinching, twisting })
}

/// One row of a perturbation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub angle: f64,
    pub outcome: Option<CriterionOutcome>,
    pub exponent: Option<ExponentEstimate>,
    pub error: Option<String>,
}

/// Row `row` of a sweep: post-compose the chosen generator with the twist of
/// angle `angle`, run the criterion and estimate `L`. Sub-seeds derive from
/// `(seed, row)`. Failures are recorded in the row instead of propagating.
pub fn sweep_row(
    sys: &SkewSystem,
    params: &SweepParams,
    angle: f64,
    row: usize,
    seed: u64,
) -> SweepRow {
    let run = || -> Result<(CriterionOutcome, ExponentEstimate)> {
        let twist = LocalizedTwist::new(params.center, params.radius, angle)?;
        let g = sys.with_twisted_generator(params.generator_index, twist)?;
        let outcome = run_criterion(&g, params)?;
        let est = integrated_exponent(
            &g,
            params.n_orbits,
            params.n_steps,
            derive_seed(seed, row as u64),
            params.renorm_every,
        )?;
        Ok((outcome, est))
    };
    match run() {
        Ok((o, e)) => SweepRow {
            angle,
            outcome: Some(o),
            exponent: Some(e),
            error: None,
        },
        Err(e) => SweepRow {
            angle,
            outcome: None,
            exponent: None,
            error: Some(e.to_string()),
        },
    }
}

/// Sequential sweep over twist angles.
pub fn perturbation_sweep(
    sys: &SkewSystem,
    params: &SweepParams,
    angles: &[f64],
    seed: u64,
) -> Vec<SweepRow> {
    angles
        .iter()
        .enumerate()
        .map(|(row, &a)| sweep_row(sys, params, a, row, seed))
        .collect()
}
