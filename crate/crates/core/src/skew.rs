//! Skew products `f(x, t) = (σx, f_x(t))` and their derivative cocycles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{log, pow};

use crate::error::{Error, Result};
use crate::fiber::{FiberMap, LocalizedTwist, TorusPoint};
use crate::linalg::Mat2;
use crate::rng;
use crate::shift::{BaseMeasure, BaseSequence, PeriodicPoint, ShiftSpace, Symbol};

/// Default number of cocycle steps between renormalizations.
pub const DEFAULT_RENORM_EVERY: usize = 16;
/// Default symbol horizon `J` of the Hölder family.
pub const DEFAULT_HOLDER_HORIZON: usize = 16;
/// Side of the fiber grid used by [`c1_distance`].
pub const C1_GRID: usize = 64;

const CHUNK: i64 = 4096;

/// Parameters of the Hölder standard-map family
/// `f_x = standard_map(k0 + eps · Σ_{|j|≤J} c(x_j) γ^{|j|})`, `γ = λ^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderParams {
    pub k0: f64,
    pub eps: f64,
    pub alpha: f64,
    pub horizon: usize,
}

/// The rule `x ↦ f_x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `f_x` depends on `x_0 … x_{m−1}` only. Tables are indexed by the
    /// base-`d` code of the word (most significant symbol first); entries for
    /// inadmissible words are `None`.
    LocallyConstant {
        depth: usize,
        table: Vec<Option<FiberMap>>,
        inverse: Vec<Option<FiberMap>>,
    },
    Holder {
        params: HolderParams,
        /// `c(i) = −1 + 2i/(d−1)`.
        weights: Vec<f64>,
        /// `γ^j` for `j = 0..=J`.
        decay: Vec<f64>,
    },
}

/// Declared Hölder data: `d_C¹(f_x, f_y) ≤ h · d(x, y)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderCertificate {
    pub h: f64,
    pub alpha: f64,
}

/// Base shift, invariant measure and fiber family.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewSystem {
    space: ShiftSpace,
    measure: BaseMeasure,
    family: Family,
    certificate: Option<HolderCertificate>,
}

/// One generator along an orbit, borrowed from the system's tables or built
/// on the fly for parametric families.
#[derive(Debug, Clone, Copy)]
pub enum StepMap<'a> {
    Table(&'a FiberMap),
    Standard(f64),
    StandardInverse(f64),
}

impl StepMap<'_> {
    pub fn apply(&self, t: TorusPoint) -> (TorusPoint, Mat2) {
        match self {
            StepMap::Table(f) => f.apply(t),
            StepMap::Standard(k) => FiberMap::StandardMap(*k).apply(t),
            StepMap::StandardInverse(k) => FiberMap::StandardMapInverse(*k).apply(t),
        }
    }

    pub fn image(&self, t: TorusPoint) -> TorusPoint {
        match self {
            StepMap::Table(f) => f.image(t),
            _ => self.apply(t).0,
        }
    }

    pub fn to_fiber_map(&self) -> FiberMap {
        match self {
            StepMap::Table(f) => (*f).clone(),
            StepMap::Standard(k) => FiberMap::StandardMap(*k),
            StepMap::StandardInverse(k) => FiberMap::StandardMapInverse(*k),
        }
    }

    /// Same table entry or bit-identical parameter.
    pub fn same_as(&self, other: &StepMap<'_>) -> bool {
        match (self, other) {
            (StepMap::Table(a), StepMap::Table(b)) => core::ptr::eq(*a, *b),
            (StepMap::Standard(a), StepMap::Standard(b))
            | (StepMap::StandardInverse(a), StepMap::StandardInverse(b)) => {
                a.to_bits() == b.to_bits()
            }
            _ => false,
        }
    }
}

/// Outcome of [`SkewSystem::iterate_cocycle`].
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleResult {
    pub end_point: TorusPoint,
    /// `log ‖Df^n_x(t)‖`.
    pub log_norm: f64,
    /// Full product divided by its norm, so `Df^n_x(t) = e^{log_norm} · product`.
    pub product: Mat2,
    /// Product of the last renormalization block, divided by its norm.
    pub matrix_tail: Mat2,
    pub steps: i64,
    /// Largest `|det − 1|` over renormalization blocks.
    pub det_defect_max: f64,
}

impl SkewSystem {
    /// Depth-one random product: symbol `i` applies `generators[i]`.
    pub fn random_product(
        space: ShiftSpace,
        measure: BaseMeasure,
        generators: Vec<FiberMap>,
    ) -> Result<Self> {
        let entries = generators
            .into_iter()
            .enumerate()
            .map(|(i, f)| (vec![i as Symbol], f))
            .collect();
        Self::locally_constant(space, measure, 1, entries)
    }

    /// Locally constant family of depth `m`; every admissible word of length
    /// `m` needs an entry.
    pub fn locally_constant(
        space: ShiftSpace,
        measure: BaseMeasure,
        depth: usize,
        entries: Vec<(Vec<Symbol>, FiberMap)>,
    ) -> Result<Self> {
        check_measure(&space, &measure)?;
        let d = space.alphabet_size();
        if depth == 0 {
            return Err(Error::Config("table depth must be at least 1".into()));
        }
        let size = d
            .checked_pow(depth as u32)
            .filter(|&s| s <= 1 << 20)
            .ok_or_else(|| Error::Config(format!("table of depth {depth} is too large")))?;
        let mut table = vec![None; size];
        for (word, f) in entries {
            if word.len() != depth {
                return Err(Error::Config(format!(
                    "table word {word:?} has length {}, expected {depth}",
                    word.len()
                )));
            }
            space.check_word(&word)?;
            let code = word_code(&word, d);
            if table[code].is_some() {
                return Err(Error::Config(format!("duplicate table word {word:?}")));
            }
            table[code] = Some(f);
        }
        for w in space.words(depth) {
            if table[word_code(&w, d)].is_none() {
                return Err(Error::Config(format!("missing table entry for word {w:?}")));
            }
        }
        let inverse = table
            .iter()
            .map(|e| e.as_ref().map(FiberMap::inverse))
            .collect();
        Ok(Self {
            space,
            measure,
            family: Family::LocallyConstant {
                depth,
                table,
                inverse,
            },
            certificate: None,
        })
    }

    /// Hölder standard-map family. Declares the geometric-series certificate
    /// `H = 4ε/(1−γ) · √2 (1 + 1/2π)`.
    pub fn holder(space: ShiftSpace, measure: BaseMeasure, params: HolderParams) -> Result<Self> {
        check_measure(&space, &measure)?;
        if !(params.alpha > 0.0 && params.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "Hölder exponent {} not in (0, 1]",
                params.alpha
            )));
        }
        if !params.k0.is_finite() || !params.eps.is_finite() || params.eps < 0.0 {
            return Err(Error::Config(
                "Hölder family needs finite k0 and eps ≥ 0".into(),
            ));
        }
        let d = space.alphabet_size();
        let gamma = pow(space.metric_base(), params.alpha);
        let weights = (0..d)
            .map(|i| -1.0 + 2.0 * i as f64 / (d - 1) as f64)
            .collect();
        let decay = (0..=params.horizon).map(|j| pow(gamma, j as f64)).collect();
        let h =
            params.eps * 4.0 / (1.0 - gamma) * core::f64::consts::SQRT_2 * (1.0 + 1.0 / (2.0 * PI));
        let alpha = params.alpha;
        Ok(Self {
            space,
            measure,
            family: Family::Holder {
                params,
                weights,
                decay,
            },
            certificate: Some(HolderCertificate { h, alpha }),
        })
    }

    /// Replaces the declared Hölder certificate.
    pub fn with_certificate(mut self, h: f64, alpha: f64) -> Result<Self> {
        if !(h >= 0.0) || !(alpha > 0.0) {
            return Err(Error::Config(format!(
                "invalid Hölder certificate ({h}, {alpha})"
            )));
        }
        self.certificate = Some(HolderCertificate { h, alpha });
        Ok(self)
    }

    pub fn space(&self) -> &ShiftSpace {
        &self.space
    }

    pub fn measure(&self) -> &BaseMeasure {
        &self.measure
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn certificate(&self) -> Option<HolderCertificate> {
        self.certificate
    }

    pub fn is_locally_constant(&self) -> bool {
        matches!(self.family, Family::LocallyConstant { .. })
    }

    /// Table depth for locally constant families.
    pub fn depth(&self) -> Option<usize> {
        match &self.family {
            Family::LocallyConstant { depth, .. } => Some(*depth),
            Family::Holder { .. } => None,
        }
    }

    /// Hölder exponent used for estimates: declared, else the family's, else 1.
    pub fn alpha(&self) -> f64 {
        match (&self.certificate, &self.family) {
            (Some(c), _) => c.alpha,
            (None, Family::Holder { params, .. }) => params.alpha,
            _ => 1.0,
        }
    }

    /// Offsets `(lo, hi)` such that `f_{σ^k x}` depends on `x_{k+lo} … x_{k+hi}`.
    fn support(&self) -> (i64, i64) {
        match &self.family {
            Family::LocallyConstant { depth, .. } => (0, *depth as i64 - 1),
            Family::Holder { params, .. } => (-(params.horizon as i64), params.horizon as i64),
        }
    }

    /// Generator for the symbols `syms[at + lo ..= at + hi]` (see `support`).
    fn step_from(&self, syms: &[Symbol], at: usize, inverse: bool) -> Result<StepMap<'_>> {
        match &self.family {
            Family::LocallyConstant {
                depth,
                table,
                inverse: inv,
            } => {
                let word = &syms[at..at + depth];
                let code = word_code(word, self.space.alphabet_size());
                let entry = if inverse { &inv[code] } else { &table[code] };
                entry
                    .as_ref()
                    .map(StepMap::Table)
                    .ok_or_else(|| Error::Config(format!("no table entry for word {word:?}")))
            }
            Family::Holder {
                params,
                weights,
                decay,
            } => {
                let j = params.horizon;
                let mut s = weights[syms[at] as usize];
                for i in 1..=j {
                    s += (weights[syms[at - i] as usize] + weights[syms[at + i] as usize])
                        * decay[i];
                }
                let k = params.k0 + params.eps * s;
                Ok(if inverse {
                    StepMap::StandardInverse(k)
                } else {
                    StepMap::Standard(k)
                })
            }
        }
    }

    /// `f_{σ^k x}`, or its inverse.
    pub fn step(&self, x: &BaseSequence, k: i64, inverse: bool) -> Result<StepMap<'_>> {
        let (lo, hi) = self.support();
        let syms = x.symbols(k + lo, k + hi);
        self.step_from(&syms, (-lo) as usize, inverse)
    }

    /// `f_{σ^{from+i} x}` (or inverses) for `i = 0..n`.
    pub fn steps(
        &self,
        x: &BaseSequence,
        from: i64,
        n: usize,
        inverse: bool,
    ) -> Result<Vec<StepMap<'_>>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let (lo, hi) = self.support();
        let syms = x.symbols(from + lo, from + n as i64 - 1 + hi);
        (0..n)
            .map(|i| self.step_from(&syms, i + (-lo) as usize, inverse))
            .collect()
    }

    /// The generator acting on the fiber over `x`.
    pub fn fiber_map_at(&self, x: &BaseSequence) -> Result<FiberMap> {
        if x.alphabet_size() != self.space.alphabet_size() {
            return Err(Error::Config(
                "sequence alphabet does not match the system".into(),
            ));
        }
        Ok(self.step(x, 0, false)?.to_fiber_map())
    }

    /// Generator for a base word; only for locally constant families, where
    /// the word's first `m` symbols determine the map.
    pub fn map_for_word(&self, word: &[Symbol]) -> Result<&FiberMap> {
        match &self.family {
            Family::LocallyConstant { depth, table, .. } => {
                if word.len() < *depth {
                    return Err(Error::Config(format!(
                        "word shorter than table depth {depth}"
                    )));
                }
                let w = &word[..*depth];
                table[word_code(w, self.space.alphabet_size())]
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("no table entry for word {w:?}")))
            }
            Family::Holder { .. } => Err(Error::Config(
                "map_for_word needs a locally constant family".into(),
            )),
        }
    }

    /// Table entries in code order (locally constant families only).
    pub fn generators(&self) -> Option<Vec<&FiberMap>> {
        match &self.family {
            Family::LocallyConstant { table, .. } => Some(table.iter().flatten().collect()),
            Family::Holder { .. } => None,
        }
    }

    /// Upper estimate of `sup_{x,t} ‖Df_x(t)‖`: exact for the standard-map
    /// family (the norm is convex in `K cos 2πu`), a 64×64 grid maximum over
    /// table entries otherwise.
    pub fn derivative_bound(&self) -> f64 {
        match &self.family {
            Family::LocallyConstant { table, .. } => {
                let pts = fiber_samples(C1_GRID, 0, 0);
                table
                    .iter()
                    .flatten()
                    .flat_map(|f| pts.iter().map(move |&t| f.apply(t).1.norm()))
                    .fold(1.0, f64::max)
            }
            Family::Holder {
                params,
                weights,
                decay,
            } => {
                let wmax = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
                let s = wmax * (decay[0] + 2.0 * decay[1..].iter().sum::<f64>());
                let kmax = params.k0.abs() + params.eps * s;
                [kmax, -kmax]
                    .iter()
                    .map(|&a| Mat2::new(1.0 + a, 1.0, a, 1.0).norm())
                    .fold(1.0, f64::max)
            }
        }
    }

    /// `g = f^κ_p` on the fiber over a periodic point.
    pub fn return_map(&self, p: &PeriodicPoint) -> Result<FiberMap> {
        let x = p.sequence(&self.space)?;
        let steps = self.steps(&x, 0, p.period(), false)?;
        if steps.len() == 1 {
            return Ok(steps[0].to_fiber_map());
        }
        Ok(FiberMap::Composite(
            steps.iter().rev().map(StepMap::to_fiber_map).collect(),
        ))
    }

    /// A copy with table entry `index` (code order) replaced by `f_index ∘ twist`.
    pub fn with_twisted_generator(&self, index: usize, twist: LocalizedTwist) -> Result<Self> {
        let Family::LocallyConstant { depth, table, .. } = &self.family else {
            return Err(Error::Config(
                "twist perturbation needs a locally constant family".into(),
            ));
        };
        let codes: Vec<usize> = (0..table.len()).filter(|&c| table[c].is_some()).collect();
        let code = *codes.get(index).ok_or_else(|| {
            Error::Config(format!(
                "generator index {index} out of range ({} entries)",
                codes.len()
            ))
        })?;
        let d = self.space.alphabet_size();
        let entries = codes
            .iter()
            .map(|&c| {
                let f = table[c].clone().unwrap_or_else(FiberMap::identity);
                let f = if c == code {
                    FiberMap::compose(f, twist.into())
                } else {
                    f
                };
                (code_word(c, d, *depth), f)
            })
            .collect();
        let mut out =
            Self::locally_constant(self.space.clone(), self.measure.clone(), *depth, entries)?;
        out.certificate = self.certificate;
        Ok(out)
    }

    /// `Df^n_x(t)` with periodic renormalization; negative `n` runs the
    /// inverse generators along the backward orbit.
    pub fn iterate_cocycle(
        &self,
        x: &BaseSequence,
        t: TorusPoint,
        n: i64,
        renorm_every: usize,
    ) -> Result<CocycleResult> {
        if renorm_every == 0 {
            return Err(Error::Config("renorm_every must be positive".into()));
        }
        let mut acc = Accumulator::new(t, renorm_every);
        let total = n.unsigned_abs() as i64;
        let mut done = 0;
        while done < total {
            let len = CHUNK.min(total - done) as usize;
            if n > 0 {
                for s in self.steps(x, done, len, false)? {
                    acc.push(&s);
                }
            } else {
                // f^{-1}_{σ^{-k}x} for k = done+1 ..= done+len, nearest first
                let from = -(done + len as i64);
                let steps = self.steps(x, from, len, true)?;
                for s in steps.iter().rev() {
                    acc.push(s);
                }
            }
            done += len as i64;
        }
        Ok(acc.finish(n))
    }
}

/// Running product with renormalization bookkeeping.
pub(crate) struct Accumulator {
    point: TorusPoint,
    running: Mat2,
    block: Mat2,
    log_acc: f64,
    in_block: usize,
    every: usize,
    det_defect: f64,
    last_block: Mat2,
}

impl Accumulator {
    pub(crate) fn new(point: TorusPoint, every: usize) -> Self {
        Self {
            point,
            running: Mat2::IDENTITY,
            block: Mat2::IDENTITY,
            log_acc: 0.0,
            in_block: 0,
            every,
            det_defect: 0.0,
            last_block: Mat2::IDENTITY,
        }
    }

    pub(crate) fn push(&mut self, step: &StepMap<'_>) {
        let (p, d) = step.apply(self.point);
        self.point = p;
        self.running = d * self.running;
        self.block = d * self.block;
        self.in_block += 1;
        if self.in_block == self.every {
            self.close_block();
        }
    }

    fn close_block(&mut self) {
        self.det_defect = self.det_defect.max((self.block.det() - 1.0).abs());
        self.last_block = self.block;
        self.block = Mat2::IDENTITY;
        self.in_block = 0;
        let nrm = self.running.norm();
        self.log_acc += log(nrm);
        self.running = self.running.scale(1.0 / nrm);
    }

    pub(crate) fn finish(mut self, steps: i64) -> CocycleResult {
        if self.in_block > 0 {
            self.close_block();
        }
        let tail_norm = self.last_block.norm();
        CocycleResult {
            end_point: self.point,
            log_norm: self.log_acc,
            product: self.running,
            matrix_tail: self.last_block.scale(1.0 / tail_norm),
            steps,
            det_defect_max: self.det_defect,
        }
    }
}

fn check_measure(space: &ShiftSpace, measure: &BaseMeasure) -> Result<()> {
    if space.alphabet_size() != measure.alphabet_size() {
        return Err(Error::Config(format!(
            "measure on {} symbols for a shift on {}",
            measure.alphabet_size(),
            space.alphabet_size()
        )));
    }
    if let BaseMeasure::Bernoulli { probs } = measure {
        if !space.is_full() && probs.iter().filter(|&&p| p > 0.0).count() > 1 {
            return Err(Error::Config(
                "Bernoulli measures need the full shift; use a Markov measure on subshifts".into(),
            ));
        }
    }
    Ok(())
}

fn word_code(word: &[Symbol], d: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * d + s as usize)
}

fn code_word(mut code: usize, d: usize, depth: usize) -> Vec<Symbol> {
    let mut w = vec![0; depth];
    for slot in w.iter_mut().rev() {
        *slot = (code % d) as Symbol;
        code /= d;
    }
    w
}

/// `d_C¹(f, g)` over a point set: displacement plus derivative gap.
fn c1_gap(f: &StepMap<'_>, g: &StepMap<'_>, points: &[TorusPoint]) -> f64 {
    if f.same_as(g) {
        return 0.0;
    }
    points.iter().fold(0.0, |worst: f64, &t| {
        let (a, da) = f.apply(t);
        let (b, db) = g.apply(t);
        worst.max(a.distance(&b) + (da - db).norm())
    })
}

pub(crate) fn fiber_samples(grid: usize, n_random: usize, seed: u64) -> Vec<TorusPoint> {
    let mut pts = Vec::with_capacity(grid * grid + n_random);
    for i in 0..grid {
        for j in 0..grid {
            pts.push(TorusPoint::new(
                i as f64 / grid as f64,
                j as f64 / grid as f64,
            ));
        }
    }
    let mut r = rng::stream(seed, u64::MAX);
    pts.extend((0..n_random).map(|_| rng::torus_point(&mut r)));
    pts
}

/// Sampled estimate of `sup_x d_C¹(f_x, g_x)`.
///
/// Exhaustive over base words when both systems are locally constant,
/// otherwise over `n_base_samples` sequences drawn from `sys_f`'s measure. The
/// fiber sample is a 64×64 grid plus `n_fiber_samples` uniform points.
pub fn c1_distance(
    sys_f: &SkewSystem,
    sys_g: &SkewSystem,
    n_base_samples: usize,
    n_fiber_samples: usize,
    seed: u64,
) -> Result<f64> {
    if sys_f.space != sys_g.space {
        return Err(Error::Config(
            "C¹ distance needs systems over the same base".into(),
        ));
    }
    let points = fiber_samples(C1_GRID, n_fiber_samples, seed);
    let mut worst: f64 = 0.0;
    if let (Some(mf), Some(mg)) = (sys_f.depth(), sys_g.depth()) {
        for w in sys_f.space.words(mf.max(mg)) {
            let f = StepMap::Table(sys_f.map_for_word(&w)?);
            let g = StepMap::Table(sys_g.map_for_word(&w)?);
            worst = worst.max(c1_gap(&f, &g, &points));
        }
        return Ok(worst);
    }
    for i in 0..n_base_samples as u64 {
        let x = sys_f.measure.sample_sequence(seed, i);
        let f = sys_f.step(&x, 0, false)?;
        let g = sys_g.step(&x, 0, false)?;
        worst = worst.max(c1_gap(&f, &g, &points));
    }
    Ok(worst)
}

/// Result of [`holder_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub h_hat: f64,
    pub alpha: f64,
    pub pairs_used: usize,
}

/// Largest sampled quotient `d_C¹(f_x, f_y) / d(x, y)^α`, checked against the
/// declared certificate when there is one.
///
/// Pairs share a random number of central symbols. Agreement radii whose
/// expected gap would sit below double-precision resolution are not sampled.
pub fn holder_estimate(sys: &SkewSystem, n_pairs: usize, seed: u64) -> Result<HolderEstimate> {
    let alpha = sys.alpha();
    let gamma = pow(sys.space.metric_base(), alpha);
    let max_radius = match &sys.family {
        Family::LocallyConstant { depth, .. } => depth + 1,
        Family::Holder { params, .. } => {
            let resolvable = (log(1e-7) / log(gamma)) as usize;
            resolvable.min(params.horizon + 2)
        }
    };
    let points = fiber_samples(32, 64, seed);
    let mut h_hat: f64 = 0.0;
    let mut used = 0;
    for i in 0..n_pairs {
        let x = sys.measure.sample_sequence(seed, 2 * i as u64);
        let radius =
            (rng::uniform_at(seed, u64::MAX - 1, i as i64) * (max_radius + 1) as f64) as usize;
        let y = sys
            .measure
            .resample_beyond(&x, radius.min(max_radius), seed, 2 * i as u64 + 1);
        let n = sys.space.agreement(&x, &y)?;
        let dist = sys.space.distance(&x, &y)?;
        if dist == 0.0 {
            continue;
        }
        used += 1;
        let gap = c1_gap(&sys.step(&x, 0, false)?, &sys.step(&y, 0, false)?, &points);
        let q = gap / pow(dist, alpha);
        if let Some(cert) = sys.certificate {
            if q > cert.h * (1.0 + 1e-9) {
                return Err(Error::CertificateViolation {
                    declared: cert.h,
                    observed: q,
                    pair_index: i,
                    agreement: n,
                });
            }
        }
        h_hat = h_hat.max(q);
    }
    Ok(HolderEstimate {
        h_hat,
        alpha,
        pairs_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern2() -> (ShiftSpace, BaseMeasure) {
        (
            ShiftSpace::full(2).unwrap(),
            BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap(),
        )
    }

    fn constant(f: FiberMap) -> SkewSystem {
        let (sp, m) = bern2();
        SkewSystem::random_product(sp, m, vec![f.clone(), f]).unwrap()
    }

    fn cat() -> FiberMap {
        FiberMap::toral(2, 1, 1, 1).unwrap()
    }

    #[test]
    fn lookup_depth_one_and_two() {
        let (sp, m) = bern2();
        let a = cat();
        let b = FiberMap::StandardMap(0.3);
        let sys =
            SkewSystem::random_product(sp.clone(), m.clone(), vec![a.clone(), b.clone()]).unwrap();
        let x = sp.periodic_point(&[1, 0]).unwrap();
        assert_eq!(sys.fiber_map_at(&x).unwrap(), b);
        assert_eq!(sys.fiber_map_at(&x.shift(1)).unwrap(), a);

        let words = sp.words(2);
        let entries = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), FiberMap::StandardMap(i as f64)))
            .collect();
        let sys2 = SkewSystem::locally_constant(sp.clone(), m.clone(), 2, entries).unwrap();
        let y = sp.periodic_point(&[0, 1]).unwrap();
        assert_eq!(sys2.fiber_map_at(&y).unwrap(), FiberMap::StandardMap(1.0));

        let missing = vec![(vec![0, 0], cat())];
        assert!(matches!(
            SkewSystem::locally_constant(sp, m, 2, missing),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_amplitude_holder_is_constant() {
        let (sp, m) = bern2();
        let p = HolderParams {
            k0: 0.7,
            eps: 0.0,
            alpha: 1.0,
            horizon: 16,
        };
        let sys = SkewSystem::holder(sp, m.clone(), p).unwrap();
        for i in 0..20 {
            let x = m.sample_sequence(5, i);
            assert_eq!(sys.fiber_map_at(&x).unwrap(), FiberMap::StandardMap(0.7));
        }
        let est = holder_estimate(&sys, 200, 1).unwrap();
        assert_eq!(est.h_hat, 0.0);
    }

    #[test]
    fn cocycle_basics() {
        let sys = constant(cat());
        let x = sys.measure().sample_sequence(1, 0);
        let t = TorusPoint::new(0.3, 0.4);
        let r0 = sys.iterate_cocycle(&x, t, 0, 16).unwrap();
        assert_eq!(r0.end_point, t);
        assert_eq!(r0.log_norm, 0.0);
        let r = sys.iterate_cocycle(&x, t, 100, 16).unwrap();
        let expected = log((3.0 + libm::sqrt(5.0)) / 2.0);
        assert!((r.log_norm / 100.0 - expected).abs() < 1e-3);
        assert!(r.det_defect_max < 1e-8);
        assert!(matches!(
            sys.iterate_cocycle(&x, t, 5, 0),
            Err(Error::Config(_))
        ));

        let shear = constant(FiberMap::toral(1, 1, 0, 1).unwrap());
        let r = shear.iterate_cocycle(&x, t, 10_000, 16).unwrap();
        // ‖[[1,n],[0,1]]‖ = n/2 + sqrt(1 + n²/4)
        let n = 10_000.0;
        let exact = log(n / 2.0 + libm::sqrt(1.0 + n * n / 4.0));
        assert!((r.log_norm - exact).abs() < 1e-9);
        assert!(r.log_norm / n < 2e-3);
    }

    #[test]
    fn cocycle_additivity_and_inverse() {
        let (sp, m) = bern2();
        let sys =
            SkewSystem::random_product(sp, m.clone(), vec![FiberMap::StandardMap(1.2), cat()])
                .unwrap();
        for i in 0..10 {
            let x = m.sample_sequence(9, i);
            let t = TorusPoint::new(0.1 * i as f64, 0.77);
            let (a, b) = (300, 450);
            let whole = sys.iterate_cocycle(&x, t, a + b, 16).unwrap();
            let first = sys.iterate_cocycle(&x, t, a, 16).unwrap();
            let second = sys
                .iterate_cocycle(&x.shift(a), first.end_point, b, 16)
                .unwrap();
            let combined = second.product * first.product;
            let split = first.log_norm + second.log_norm + log(combined.norm());
            assert!((whole.log_norm - split).abs() < 1e-8 * (a + b) as f64);
        }
        // linear fibers: the inverse cocycle over σⁿx has the same norm
        let lin = SkewSystem::random_product(
            bern2().0,
            m.clone(),
            vec![FiberMap::toral(1, 1, 0, 1).unwrap(), cat()],
        )
        .unwrap();
        let x = m.sample_sequence(4, 0);
        let t = TorusPoint::new(0.3, 0.4);
        let whole = lin.iterate_cocycle(&x, t, 500, 16).unwrap();
        let back = lin
            .iterate_cocycle(&x.shift(500), whole.end_point, -500, 16)
            .unwrap();
        assert!((whole.log_norm - back.log_norm).abs() < 1e-6 * whole.log_norm);
    }

    #[test]
    fn backward_iteration_inverts_forward() {
        let (sp, m) = bern2();
        let sys = SkewSystem::random_product(
            sp,
            m.clone(),
            vec![FiberMap::StandardMap(0.4), FiberMap::StandardMap(-0.3)],
        )
        .unwrap();
        let x = m.sample_sequence(2, 2);
        let t = TorusPoint::new(0.2, 0.9);
        let fwd = sys.iterate_cocycle(&x, t, 5, 16).unwrap();
        let back = sys
            .iterate_cocycle(&x.shift(5), fwd.end_point, -5, 16)
            .unwrap();
        assert!(back.end_point.distance(&t) < 1e-12);
    }

    #[test]
    fn c1_distances() {
        let (sp, m) = bern2();
        let f = SkewSystem::random_product(sp.clone(), m.clone(), vec![cat(), cat()]).unwrap();
        assert_eq!(c1_distance(&f, &f, 10, 100, 1).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for t in [1e-1, 1e-2, 1e-3] {
            let tw = LocalizedTwist::new(TorusPoint::new(0.25, 0.25), 0.2, t).unwrap();
            let g = f.with_twisted_generator(1, tw).unwrap();
            let dist = c1_distance(&f, &g, 10, 1000, 1).unwrap();
            assert!(dist < prev && dist > 0.0);
            prev = dist;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn holder_quotients_below_certificate() {
        let sp = ShiftSpace::full(2).unwrap().with_metric_base(0.5).unwrap();
        let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
        let p = HolderParams {
            k0: 0.5,
            eps: 0.05,
            alpha: 1.0,
            horizon: 16,
        };
        let sys = SkewSystem::holder(sp.clone(), m.clone(), p).unwrap();
        let est = holder_estimate(&sys, 300, 3).unwrap();
        assert!(est.h_hat > 0.0 && est.h_hat <= sys.certificate().unwrap().h);

        let tight = sys.clone().with_certificate(1e-6, 1.0).unwrap();
        assert!(matches!(
            holder_estimate(&tight, 300, 3),
            Err(Error::CertificateViolation { .. })
        ));
    }

    #[test]
    fn depth_one_holder_quotient_is_generator_gap() {
        let (sp, m) = bern2();
        let a = FiberMap::StandardMap(0.5);
        let b = FiberMap::StandardMap(0.6);
        let sys = SkewSystem::random_product(sp, m, vec![a.clone(), b.clone()]).unwrap();
        let points = fiber_samples(32, 64, 4);
        let gap = c1_gap(&StepMap::Table(&a), &StepMap::Table(&b), &points);
        let est = holder_estimate(&sys, 400, 4).unwrap();
        assert_eq!(est.h_hat, gap);
    }

    #[test]
    fn return_map_composes_period() {
        let (sp, m) = bern2();
        let a = cat();
        let b = FiberMap::StandardMap(0.3);
        let sys = SkewSystem::random_product(sp.clone(), m, vec![a.clone(), b.clone()]).unwrap();
        let p = PeriodicPoint::new(&sp, &[0, 1]).unwrap();
        let g = sys.return_map(&p).unwrap();
        assert_eq!(g, FiberMap::compose(b, a));
    }
}
