//! Symbolic bases: full shifts and subshifts of finite type.
//!
//! A point of `Σ ⊂ {0..d-1}^ℤ` is a [`BaseSequence`]: a materialized window of
//! symbols plus a continuation rule on each side. Continuations are either
//! periodic repetitions of a word or counter-based samples of a Bernoulli or
//! Markov measure, so any coordinate can be queried on demand and sampled
//! coordinates are pure functions of `(seed, stream_id, index)`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, pow};

use crate::error::{Error, Result};
use crate::rng::{uniform_at, IndexedUniforms};

pub type Symbol = u8;

/// Default metric base `λ_dist`.
pub const DEFAULT_METRIC_BASE: f64 = 0.5;
/// Default agreement horizon beyond which sequences are treated as equal.
pub const DEFAULT_METRIC_HORIZON: usize = 128;
/// Half-width of the window materialized by [`BaseMeasure::sample_sequence`].
pub const SAMPLE_WINDOW: i64 = 128;

const STATIONARY_TOL: f64 = 1e-12;

/// Alphabet, transition matrix and metric of a shift space.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpace {
    alphabet: usize,
    transitions: Vec<bool>,
    metric_base: f64,
    metric_horizon: usize,
}

impl ShiftSpace {
    /// Full shift on `d` symbols.
    pub fn full(d: usize) -> Result<Self> {
        Self::with_transitions(d, vec![true; d * d])
    }

    /// Subshift of finite type with row-major `d×d` transition matrix.
    pub fn with_transitions(d: usize, transitions: Vec<bool>) -> Result<Self> {
        if !(2..=256).contains(&d) {
            return Err(Error::Config(format!("alphabet size {d} outside 2..=256")));
        }
        if transitions.len() != d * d {
            return Err(Error::Config(format!(
                "transition matrix has {} entries, expected {}",
                transitions.len(),
                d * d
            )));
        }
        for s in 0..d {
            let out = (0..d).any(|t| transitions[s * d + t]);
            let inc = (0..d).any(|t| transitions[t * d + s]);
            if !out || !inc {
                return Err(Error::Config(format!(
                    "symbol {s} is dead in the transition matrix"
                )));
            }
        }
        Ok(Self {
            alphabet: d,
            transitions,
            metric_base: DEFAULT_METRIC_BASE,
            metric_horizon: DEFAULT_METRIC_HORIZON,
        })
    }

    pub fn with_metric_base(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!("metric base {lambda} not in (0, 1)")));
        }
        self.metric_base = lambda;
        Ok(self)
    }

    pub fn with_metric_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("metric horizon must be positive".into()));
        }
        self.metric_horizon = horizon;
        Ok(self)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn metric_base(&self) -> f64 {
        self.metric_base
    }

    pub fn metric_horizon(&self) -> usize {
        self.metric_horizon
    }

    pub fn is_full(&self) -> bool {
        self.transitions.iter().all(|&t| t)
    }

    pub fn allows(&self, a: Symbol, b: Symbol) -> bool {
        let (a, b) = (a as usize, b as usize);
        a < self.alphabet && b < self.alphabet && self.transitions[a * self.alphabet + b]
    }

    pub fn transitions(&self) -> &[bool] {
        &self.transitions
    }

    pub fn check_word(&self, word: &[Symbol]) -> Result<()> {
        if let Some(&s) = word.iter().find(|&&s| s as usize >= self.alphabet) {
            return Err(Error::Inadmissible(format!("symbol {s} outside alphabet")));
        }
        for (i, w) in word.windows(2).enumerate() {
            if !self.allows(w[0], w[1]) {
                return Err(Error::Inadmissible(format!(
                    "transition {}→{} at position {i}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Admissible and closing up: `word·word` is admissible.
    pub fn check_cyclic(&self, word: &[Symbol]) -> Result<()> {
        if word.is_empty() {
            return Err(Error::Inadmissible("empty periodic word".into()));
        }
        self.check_word(word)?;
        let (last, first) = (word[word.len() - 1], word[0]);
        if !self.allows(last, first) {
            return Err(Error::Inadmissible(format!(
                "periodic word does not close: {last}→{first}"
            )));
        }
        Ok(())
    }

    /// All admissible words of length `len`, in lexicographic order.
    pub fn words(&self, len: usize) -> Vec<Vec<Symbol>> {
        let mut out: Vec<Vec<Symbol>> = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::new();
            for w in &out {
                for s in 0..self.alphabet as Symbol {
                    if w.last().is_none_or(|&l| self.allows(l, s)) {
                        let mut v = w.clone();
                        v.push(s);
                        next.push(v);
                    }
                }
            }
            out = next;
        }
        out
    }

    fn check_member(&self, x: &BaseSequence) -> Result<()> {
        if x.alphabet != self.alphabet {
            return Err(Error::Config(format!(
                "sequence over {} symbols used in a shift on {}",
                x.alphabet, self.alphabet
            )));
        }
        Ok(())
    }

    /// Agreement radius: largest `n ≤ horizon` with `x_j = y_j` for `|j| < n`.
    pub fn agreement(&self, x: &BaseSequence, y: &BaseSequence) -> Result<usize> {
        self.check_member(x)?;
        self.check_member(y)?;
        let h = self.metric_horizon as i64;
        let xs = x.symbols(-h, h);
        let ys = y.symbols(-h, h);
        let mid = h as usize;
        for k in 0..self.metric_horizon {
            if xs[mid + k] != ys[mid + k] || xs[mid - k] != ys[mid - k] {
                return Ok(k);
            }
        }
        Ok(self.metric_horizon)
    }

    /// `d(x, y) = λ^n` with `n` the two-sided agreement radius; exactly `0.0`
    /// when the sequences agree on the whole metric horizon.
    pub fn distance(&self, x: &BaseSequence, y: &BaseSequence) -> Result<f64> {
        let n = self.agreement(x, y)?;
        if n >= self.metric_horizon {
            return Ok(0.0);
        }
        Ok(pow(self.metric_base, n as f64))
    }

    /// Splice `z_j = x_j (j ≤ 0)`, `z_j = y_j (j ≥ 0)`; needs `x_0 = y_0`.
    pub fn bracket(&self, x: &BaseSequence, y: &BaseSequence) -> Result<BaseSequence> {
        self.check_member(x)?;
        self.check_member(y)?;
        let (x0, y0) = (x.symbol(0), y.symbol(0));
        if x0 != y0 {
            return Err(Error::BracketUndefined { x0, y0 });
        }
        let lo = x.lo.min(0);
        let hi = y.hi().max(0);
        let mut window = x.symbols(lo, 0);
        if hi > 0 {
            window.extend(y.symbols(1, hi));
        }
        let z = BaseSequence {
            alphabet: self.alphabet,
            lo,
            window,
            past: x.past.clone(),
            future: y.future.clone(),
        };
        if !self.allows(z.symbol(0), z.symbol(1)) || !self.allows(z.symbol(-1), z.symbol(0)) {
            return Err(Error::Internal(
                "bracket produced an inadmissible splice".into(),
            ));
        }
        Ok(z)
    }

    /// Bi-infinite repetition of a cyclically admissible word, phase 0 at index 0.
    pub fn periodic_point(&self, word: &[Symbol]) -> Result<BaseSequence> {
        self.check_cyclic(word)?;
        let rule = Continuation::Periodic {
            word: word.to_vec(),
            anchor: 0,
        };
        Ok(BaseSequence {
            alphabet: self.alphabet,
            lo: 0,
            window: Vec::new(),
            past: rule.clone(),
            future: rule,
        })
    }

    /// Homoclinic excursion from the fixed point `…iii…`: the returned
    /// sequence carries `symbol` at `index` and `i` everywhere else.
    pub fn homoclinic_point(
        &self,
        p: &PeriodicPoint,
        symbol: Symbol,
        index: i64,
    ) -> Result<BaseSequence> {
        if p.period() != 1 {
            return Err(Error::Precondition(format!(
                "homoclinic excursion needs a fixed point, got period {}",
                p.period()
            )));
        }
        let i = p.word()[0];
        if symbol == i {
            return Err(Error::Precondition(format!(
                "inserted symbol {symbol} equals the fixed symbol"
            )));
        }
        self.check_word(&[i, symbol, i])?;
        let rule = Continuation::Periodic {
            word: vec![i],
            anchor: 0,
        };
        Ok(BaseSequence {
            alphabet: self.alphabet,
            lo: index,
            window: vec![symbol],
            past: rule.clone(),
            future: rule,
        })
    }

    /// Checks every adjacent pair on `[lo, hi]`.
    pub fn check_sequence(&self, x: &BaseSequence, lo: i64, hi: i64) -> Result<()> {
        self.check_member(x)?;
        self.check_word(&x.symbols(lo, hi))
    }
}

/// A periodic orbit of the shift, given by one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPoint {
    word: Vec<Symbol>,
}

impl PeriodicPoint {
    pub fn new(space: &ShiftSpace, word: &[Symbol]) -> Result<Self> {
        space.check_cyclic(word)?;
        Ok(Self {
            word: word.to_vec(),
        })
    }

    pub fn word(&self) -> &[Symbol] {
        &self.word
    }

    /// Period `κ`.
    pub fn period(&self) -> usize {
        self.word.len()
    }

    pub fn sequence(&self, space: &ShiftSpace) -> Result<BaseSequence> {
        space.periodic_point(&self.word)
    }
}

/// How a sequence continues outside its materialized window.
#[derive(Debug, Clone, PartialEq)]
pub enum Continuation {
    /// `x_j = word[(j - anchor) mod |word|]`.
    Periodic {
        word: Vec<Symbol>,
        anchor: i64,
    },
    Sampled(SampledTail),
}

/// Counter-based sample of a measure, continued from a boundary symbol.
///
/// The symbol at sequence index `j` uses the uniform draw at stream counter
/// `j + origin`. Markov tails run the chain (forward, or the time-reversed
/// chain backward) from `boundary_symbol` at index `boundary`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTail {
    measure: Arc<BaseMeasure>,
    seed: u64,
    stream: u64,
    boundary: i64,
    boundary_symbol: Symbol,
    origin: i64,
    forward: bool,
}

impl SampledTail {
    fn symbol(&self, j: i64) -> Symbol {
        let mut out = [0];
        self.fill(j, j, &mut out);
        out[0]
    }

    /// Writes symbols for indices `a..=b` (all strictly beyond the boundary).
    fn fill(&self, a: i64, b: i64, out: &mut [Symbol]) {
        debug_assert_eq!(out.len() as i64, b - a + 1);
        match &*self.measure {
            BaseMeasure::Bernoulli { probs } => {
                let mut it = IndexedUniforms::starting_at(self.seed, self.stream, a + self.origin);
                for slot in out.iter_mut() {
                    *slot = draw(probs, it.next_indexed().1);
                }
            }
            BaseMeasure::Markov {
                matrix,
                reverse,
                dim,
                ..
            } => {
                if self.forward {
                    debug_assert!(a > self.boundary);
                    let mut state = self.boundary_symbol;
                    let mut it = IndexedUniforms::starting_at(
                        self.seed,
                        self.stream,
                        self.boundary + 1 + self.origin,
                    );
                    for j in self.boundary + 1..=b {
                        let u = it.next_indexed().1;
                        let s = state as usize;
                        state = draw(&matrix[s * dim..(s + 1) * dim], u);
                        if j >= a {
                            out[(j - a) as usize] = state;
                        }
                    }
                } else {
                    debug_assert!(b < self.boundary);
                    let n = (self.boundary - a) as usize;
                    let mut us = Vec::with_capacity(n);
                    let mut it =
                        IndexedUniforms::starting_at(self.seed, self.stream, a + self.origin);
                    for _ in 0..n {
                        us.push(it.next_indexed().1);
                    }
                    let mut state = self.boundary_symbol;
                    for j in (a..self.boundary).rev() {
                        let s = state as usize;
                        state = draw(&reverse[s * dim..(s + 1) * dim], us[(j - a) as usize]);
                        if j <= b {
                            out[(j - a) as usize] = state;
                        }
                    }
                }
            }
        }
    }
}

impl Continuation {
    fn fill(&self, a: i64, b: i64, out: &mut [Symbol]) {
        match self {
            Continuation::Periodic { word, anchor } => {
                let k = word.len() as i64;
                for (slot, j) in out.iter_mut().zip(a..=b) {
                    *slot = word[(j - anchor).rem_euclid(k) as usize];
                }
            }
            Continuation::Sampled(tail) => tail.fill(a, b, out),
        }
    }

    fn symbol(&self, j: i64) -> Symbol {
        match self {
            Continuation::Periodic { word, anchor } => {
                word[(j - anchor).rem_euclid(word.len() as i64) as usize]
            }
            Continuation::Sampled(tail) => tail.symbol(j),
        }
    }

    fn shifted(&self, k: i64) -> Self {
        match self {
            Continuation::Periodic { word, anchor } => Continuation::Periodic {
                word: word.clone(),
                anchor: anchor - k,
            },
            Continuation::Sampled(tail) => Continuation::Sampled(SampledTail {
                boundary: tail.boundary - k,
                origin: tail.origin + k,
                ..tail.clone()
            }),
        }
    }
}

/// A point of the shift space.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSequence {
    alphabet: usize,
    /// Index of `window[0]`.
    lo: i64,
    window: Vec<Symbol>,
    past: Continuation,
    future: Continuation,
}

impl BaseSequence {
    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn hi(&self) -> i64 {
        self.lo + self.window.len() as i64 - 1
    }

    pub fn symbol(&self, j: i64) -> Symbol {
        if j < self.lo {
            self.past.symbol(j)
        } else if j > self.hi() {
            self.future.symbol(j)
        } else {
            self.window[(j - self.lo) as usize]
        }
    }

    /// Symbols `x_lo, …, x_hi` (inclusive; empty when `hi < lo`).
    pub fn symbols(&self, lo: i64, hi: i64) -> Vec<Symbol> {
        if hi < lo {
            return Vec::new();
        }
        let mut out = vec![0; (hi - lo + 1) as usize];
        // past segment
        let p_hi = hi.min(self.lo - 1);
        if lo <= p_hi {
            self.past
                .fill(lo, p_hi, &mut out[..(p_hi - lo + 1) as usize]);
        }
        // window segment
        let w_lo = lo.max(self.lo);
        let w_hi = hi.min(self.hi());
        for j in w_lo..=w_hi {
            out[(j - lo) as usize] = self.window[(j - self.lo) as usize];
        }
        // future segment
        let f_lo = lo.max(self.hi() + 1);
        if f_lo <= hi {
            self.future.fill(f_lo, hi, &mut out[(f_lo - lo) as usize..]);
        }
        out
    }

    /// `σ^k`: `(σ^k x)_j = x_{j+k}`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            alphabet: self.alphabet,
            lo: self.lo - k,
            window: self.window.clone(),
            past: self.past.shifted(k),
            future: self.future.shifted(k),
        }
    }

    /// True when `x_j = y_j` for every `j ∈ [lo, hi]`.
    pub fn agrees_on(&self, other: &BaseSequence, lo: i64, hi: i64) -> bool {
        self.symbols(lo, hi) == other.symbols(lo, hi)
    }
}

/// Shift-invariant measures with local product structure.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    /// i.i.d. symbols.
    Bernoulli { probs: Vec<f64> },
    /// Stationary two-sided Markov chain. `reverse` is the time-reversed kernel
    /// `P̂(a, b) = π_b P(b, a) / π_a`.
    Markov {
        matrix: Vec<f64>,
        stationary: Vec<f64>,
        reverse: Vec<f64>,
        dim: usize,
    },
}

impl BaseMeasure {
    /// Bernoulli measure. Zero weights are accepted (degenerate measures); use
    /// [`BaseMeasure::has_full_support`] to require full support.
    pub fn bernoulli(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Config(
                "Bernoulli measure needs at least two symbols".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Config("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if fabs(total - 1.0) > 1e-12 {
            return Err(Error::Config(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(BaseMeasure::Bernoulli { probs })
    }

    /// Stationary Markov measure for a row-stochastic matrix supported on the
    /// admissible transitions of `space`.
    pub fn markov(space: &ShiftSpace, matrix: Vec<f64>) -> Result<Self> {
        let d = space.alphabet_size();
        if matrix.len() != d * d {
            return Err(Error::Config(format!(
                "transition matrix has {} entries, expected {}",
                matrix.len(),
                d * d
            )));
        }
        for a in 0..d {
            let row = &matrix[a * d..(a + 1) * d];
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Config(format!("row {a} has negative entries")));
            }
            let total: f64 = row.iter().sum();
            if fabs(total - 1.0) > 1e-12 {
                return Err(Error::Config(format!("row {a} sums to {total}, not 1")));
            }
            for (b, &p) in row.iter().enumerate() {
                if p > 0.0 && !space.allows(a as Symbol, b as Symbol) {
                    return Err(Error::Config(format!(
                        "P({a},{b}) > 0 on a forbidden transition"
                    )));
                }
            }
        }
        let stationary = stationary_vector(&matrix, d)?;
        let mut reverse = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                if stationary[a] > 0.0 {
                    reverse[a * d + b] = stationary[b] * matrix[b * d + a] / stationary[a];
                }
            }
        }
        Ok(BaseMeasure::Markov {
            matrix,
            stationary,
            reverse,
            dim: d,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            BaseMeasure::Bernoulli { probs } => probs.len(),
            BaseMeasure::Markov { dim, .. } => *dim,
        }
    }

    /// One-dimensional marginal.
    pub fn marginal(&self) -> &[f64] {
        match self {
            BaseMeasure::Bernoulli { probs } => probs,
            BaseMeasure::Markov { stationary, .. } => stationary,
        }
    }

    pub fn has_full_support(&self) -> bool {
        self.marginal().iter().all(|&p| p > 0.0)
    }

    /// Exact probability of the cylinder `[word]` starting at `start_index`.
    /// Both families are shift invariant, so the start index does not matter.
    pub fn cylinder_measure(&self, word: &[Symbol], _start_index: i64) -> f64 {
        if word.iter().any(|&s| s as usize >= self.alphabet_size()) {
            return 0.0;
        }
        match self {
            BaseMeasure::Bernoulli { probs } => word.iter().map(|&s| probs[s as usize]).product(),
            BaseMeasure::Markov {
                matrix,
                stationary,
                dim,
                ..
            } => match word.first() {
                None => 1.0,
                Some(&w0) => {
                    let mut p = stationary[w0 as usize];
                    for w in word.windows(2) {
                        p *= matrix[w[0] as usize * dim + w[1] as usize];
                    }
                    p
                }
            },
        }
    }

    fn tail(
        self: &Arc<Self>,
        seed: u64,
        stream: u64,
        boundary: i64,
        symbol: Symbol,
        forward: bool,
    ) -> Continuation {
        Continuation::Sampled(SampledTail {
            measure: Arc::clone(self),
            seed,
            stream,
            boundary,
            boundary_symbol: symbol,
            origin: 0,
            forward,
        })
    }

    /// Two-sided sample; `x_j` is a pure function of `(seed, stream_id, j)`.
    pub fn sample_sequence(&self, seed: u64, stream_id: u64) -> BaseSequence {
        let w = SAMPLE_WINDOW;
        let mut window = vec![0; (2 * w + 1) as usize];
        match self {
            BaseMeasure::Bernoulli { probs } => {
                let mut it = IndexedUniforms::starting_at(seed, stream_id, -w);
                for slot in window.iter_mut() {
                    *slot = draw(probs, it.next_indexed().1);
                }
            }
            BaseMeasure::Markov {
                matrix,
                stationary,
                reverse,
                dim,
            } => {
                let mut us = Vec::with_capacity(window.len());
                let mut it = IndexedUniforms::starting_at(seed, stream_id, -w);
                for _ in 0..window.len() {
                    us.push(it.next_indexed().1);
                }
                let mid = w as usize;
                window[mid] = draw(stationary, us[mid]);
                for i in mid + 1..window.len() {
                    let s = window[i - 1] as usize;
                    window[i] = draw(&matrix[s * dim..(s + 1) * dim], us[i]);
                }
                for i in (0..mid).rev() {
                    let s = window[i + 1] as usize;
                    window[i] = draw(&reverse[s * dim..(s + 1) * dim], us[i]);
                }
            }
        }
        let me = Arc::new(self.clone());
        let first = window[0];
        let last = window[window.len() - 1];
        BaseSequence {
            alphabet: self.alphabet_size(),
            lo: -w,
            past: me.tail(seed, stream_id, -w, first, false),
            future: me.tail(seed, stream_id, w, last, true),
            window,
        }
    }

    /// A sequence agreeing with `x` on `|j| < radius` and freshly sampled
    /// (conditioned on the boundary symbols) elsewhere. `radius = 0` gives an
    /// independent sample.
    pub fn resample_beyond(
        &self,
        x: &BaseSequence,
        radius: usize,
        seed: u64,
        stream_id: u64,
    ) -> BaseSequence {
        if radius == 0 {
            return self.sample_sequence(seed, stream_id);
        }
        let r = radius as i64 - 1;
        let window = x.symbols(-r, r);
        let me = Arc::new(self.clone());
        BaseSequence {
            alphabet: x.alphabet,
            lo: -r,
            past: me.tail(seed, stream_id, -r, window[0], false),
            future: me.tail(seed, stream_id, r, window[window.len() - 1], true),
            window,
        }
    }

    /// A sequence agreeing with `x` on `j ≥ keep_from` with a fresh past.
    pub fn resample_past(
        &self,
        x: &BaseSequence,
        keep_from: i64,
        seed: u64,
        stream_id: u64,
    ) -> BaseSequence {
        let hi = x.hi().max(keep_from);
        let window = x.symbols(keep_from, hi);
        let me = Arc::new(self.clone());
        BaseSequence {
            alphabet: x.alphabet,
            lo: keep_from,
            past: me.tail(seed, stream_id, keep_from, window[0], false),
            future: x.future.clone(),
            window,
        }
    }

    /// A sequence agreeing with `x` on `j ≤ keep_to` with a fresh future.
    pub fn resample_future(
        &self,
        x: &BaseSequence,
        keep_to: i64,
        seed: u64,
        stream_id: u64,
    ) -> BaseSequence {
        let lo = x.lo.min(keep_to);
        let window = x.symbols(lo, keep_to);
        let me = Arc::new(self.clone());
        BaseSequence {
            alphabet: x.alphabet,
            lo,
            past: x.past.clone(),
            future: me.tail(seed, stream_id, keep_to, window[window.len() - 1], true),
            window,
        }
    }

    /// Single draw of a symbol at counter `index` from the marginal.
    pub fn marginal_draw(&self, seed: u64, stream_id: u64, index: i64) -> Symbol {
        draw(self.marginal(), uniform_at(seed, stream_id, index))
    }
}

/// Inverse-CDF draw; never returns a zero-weight symbol.
fn draw(weights: &[f64], u: f64) -> Symbol {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i as Symbol;
            }
        }
    }
    last_positive as Symbol
}

/// Solves `π P = π`, `Σπ = 1` by Gaussian elimination with partial pivoting.
fn stationary_vector(matrix: &[f64], d: usize) -> Result<Vec<f64>> {
    // Rows 0..d-1 of (Pᵀ − I), last row replaced by the normalization.
    let mut a = vec![0.0; d * (d + 1)];
    for i in 0..d {
        for j in 0..d {
            a[i * (d + 1) + j] = matrix[j * d + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..d {
        a[(d - 1) * (d + 1) + j] = 1.0;
    }
    a[(d - 1) * (d + 1) + d] = 1.0;
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&r, &s| fabs(a[r * (d + 1) + col]).total_cmp(&fabs(a[s * (d + 1) + col])))
            .unwrap_or(col);
        if fabs(a[piv * (d + 1) + col]) < 1e-14 {
            return Err(Error::Config(
                "Markov chain has no unique stationary vector".into(),
            ));
        }
        if piv != col {
            for k in 0..=d {
                a.swap(piv * (d + 1) + k, col * (d + 1) + k);
            }
        }
        let p = a[col * (d + 1) + col];
        for r in 0..d {
            if r != col {
                let f = a[r * (d + 1) + col] / p;
                if f != 0.0 {
                    for k in col..=d {
                        a[r * (d + 1) + k] -= f * a[col * (d + 1) + k];
                    }
                }
            }
        }
    }
    let pi: Vec<f64> = (0..d)
        .map(|i| a[i * (d + 1) + d] / a[i * (d + 1) + i])
        .collect();
    if pi.iter().any(|&p| p < -1e-12) {
        return Err(Error::Config(
            "stationary vector has negative entries".into(),
        ));
    }
    let pi: Vec<f64> = pi.into_iter().map(|p| p.max(0.0)).collect();
    for j in 0..d {
        let lhs: f64 = (0..d).map(|i| pi[i] * matrix[i * d + j]).sum();
        if fabs(lhs - pi[j]) > STATIONARY_TOL {
            return Err(Error::Internal(format!(
                "stationary residual {} exceeds tolerance",
                fabs(lhs - pi[j])
            )));
        }
    }
    Ok(pi)
}
