//! Line-based experiment configuration.
//!
//! ```text
//! [base]
//! type = bernoulli
//! d = 2
//! probs = 0.5, 0.5
//!
//! [fiber]
//! maps = toral:2,1,1,1; twist:0.25,0.25,0.2,0.5; compose:0,1
//! generators = 0, 2
//!
//! [run]
//! seed = 1
//! ```
//!
//! Lists are comma-separated; map lists are `;`-separated because map specs
//! carry comma-separated parameters. `compose:i,j,…` refers to earlier maps
//! by index and means `maps[i] ∘ maps[j] ∘ …`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use skewlab_core::criterion::{SweepParams, TwistParams};
use skewlab_core::fiber::{FiberMap, TorusPoint};
use skewlab_core::holonomy::{DEFAULT_N_MAX, DEFAULT_TOL};
use skewlab_core::lyapunov::DEFAULT_FRAME_DEPTH;
use skewlab_core::shift::DEFAULT_METRIC_HORIZON;
use skewlab_core::skew::{HolderParams, DEFAULT_HOLDER_HORIZON, DEFAULT_RENORM_EVERY};
use skewlab_core::{BaseMeasure, ShiftSpace, SkewSystem};

/// Problem with a configuration, located by section, key and line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", location(.section, .key, .line))]
pub struct ConfigError {
    pub section: Option<String>,
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

fn location(section: &Option<String>, key: &Option<String>, line: &Option<usize>) -> String {
    let mut s = String::new();
    match (section, key) {
        (Some(sec), Some(k)) => write!(s, "[{sec}].{k}").unwrap(),
        (Some(sec), None) => write!(s, "[{sec}]").unwrap(),
        (None, Some(k)) => write!(s, "{k}").unwrap(),
        (None, None) => {}
    }
    if let Some(l) = line {
        write!(s, " (line {l})").unwrap();
    }
    if !s.is_empty() {
        s.push_str(": ");
    }
    s
}

impl ConfigError {
    fn plain(message: impl Into<String>) -> Self {
        Self {
            section: None,
            key: None,
            line: None,
            message: message.into(),
        }
    }

    fn at(section: &str, key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            section: Some(section.into()),
            key: Some(key.into()),
            line,
            message: message.into(),
        }
    }
}

/// One fiber map as written in the config.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Identity,
    Toral([i64; 4]),
    StandardMap(f64),
    StandardMapInverse(f64),
    /// `center_u, center_v, radius, angle`.
    Twist([f64; 4]),
    Compose(Vec<usize>),
}

impl MapSpec {
    fn build(&self, earlier: &[FiberMap]) -> Result<FiberMap, String> {
        let map = match self {
            MapSpec::Identity => FiberMap::identity(),
            MapSpec::Toral([a, b, c, d]) => {
                FiberMap::toral(*a, *b, *c, *d).map_err(|e| e.to_string())?
            }
            MapSpec::StandardMap(k) => FiberMap::standard_map(*k).map_err(|e| e.to_string())?,
            MapSpec::StandardMapInverse(k) => FiberMap::standard_map(*k)
                .map_err(|e| e.to_string())?
                .inverse(),
            MapSpec::Twist([u, v, r, t]) => {
                FiberMap::twist(TorusPoint::new(*u, *v), *r, *t).map_err(|e| e.to_string())?
            }
            MapSpec::Compose(idx) => {
                let mut parts = Vec::with_capacity(idx.len());
                for &i in idx {
                    let m = earlier.get(i).ok_or_else(|| {
                        format!(
                            "compose refers to map {i}, only {} defined before it",
                            earlier.len()
                        )
                    })?;
                    parts.push(m.clone());
                }
                FiberMap::Composite(parts)
            }
        };
        Ok(map)
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::Identity => write!(f, "identity"),
            MapSpec::Toral(m) => write!(f, "toral:{}", join(m)),
            MapSpec::StandardMap(k) => write!(f, "stdmap:{k:?}"),
            MapSpec::StandardMapInverse(k) => write!(f, "stdmap_inv:{k:?}"),
            MapSpec::Twist(p) => write!(f, "twist:{}", join_f(p)),
            MapSpec::Compose(idx) => write!(f, "compose:{}", join(idx)),
        }
    }
}

impl FromStr for MapSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let kind = kind.trim();
        match kind {
            "identity" if args.trim().is_empty() => Ok(MapSpec::Identity),
            "toral" => {
                let v: Vec<i64> = parse_list(args)?;
                let m: [i64; 4] = v.try_into().map_err(|_| "toral needs 4 integer entries".to_string())?;
                Ok(MapSpec::Toral(m))
            }
            "stdmap" => Ok(MapSpec::StandardMap(parse_one(args)?)),
            "stdmap_inv" => Ok(MapSpec::StandardMapInverse(parse_one(args)?)),
            "twist" => {
                let v: Vec<f64> = parse_list(args)?;
                let p: [f64; 4] = v.try_into().map_err(|_| "twist needs center_u,center_v,radius,angle".to_string())?;
                Ok(MapSpec::Twist(p))
            }
            "compose" => {
                let v: Vec<usize> = parse_list(args)?;
                if v.is_empty() {
                    return Err("compose needs at least one map index".into());
                }
                Ok(MapSpec::Compose(v))
            }
            _ => Err(format!("unknown map kind `{kind}` (expected identity, toral, stdmap, stdmap_inv, twist, compose)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseKind {
    Bernoulli {
        probs: Vec<f64>,
    },
    /// Row-major `d×d` stochastic matrix; its support is the transition matrix.
    Markov {
        matrix: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseConfig {
    pub d: usize,
    pub kind: BaseKind,
    pub lambda: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberConfig {
    pub maps: Vec<MapSpec>,
    /// Indices into `maps`; all maps in order when absent.
    pub generators: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkewConfig {
    /// Depth 1 uses one generator per symbol; deeper tables list `word:map`.
    LocallyConstant {
        depth: usize,
        table: Vec<(Vec<u8>, usize)>,
    },
    Holder {
        params: HolderParams,
        certificate: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_orbits: usize,
    pub n_steps: usize,
    pub renorm_every: usize,
    pub tol: f64,
    pub n_max: usize,
    pub grid: usize,
    pub pinching_steps: usize,
    pub beta: f64,
    pub n_base: usize,
    pub n_fiber: usize,
    pub n_k: usize,
    pub j_max: usize,
    pub epsilon_twist: f64,
    pub fraction_required: f64,
    pub epsilon_k: f64,
    pub frame_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolonomyDirection {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyConfig {
    pub direction: HolonomyDirection,
    pub point: [f64; 2],
    /// Symbols agree on `|j| < radius` before the tail on the holonomy side
    /// is resampled; 0 keeps only the side that defines the local leaf.
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionConfig {
    pub p_word: Vec<u8>,
    /// `(symbol, index)` of the excursion inserted into `p`.
    pub z_insert: (u8, i64),
    pub transition: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub t_values: Vec<f64>,
    pub generator_index: usize,
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: BaseConfig,
    pub fiber: FiberConfig,
    pub skew: SkewConfig,
    pub run: RunConfig,
    pub holonomy: Option<HolonomyConfig>,
    pub criterion: Option<CriterionConfig>,
    pub sweep: Option<SweepConfig>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("base", &["type", "d", "probs", "P", "lambda", "horizon"]),
    ("fiber", &["maps", "generators"]),
    (
        "skew",
        &[
            "family",
            "depth",
            "table",
            "k0",
            "eps",
            "alpha",
            "horizon",
            "certificate",
        ],
    ),
    (
        "run",
        &[
            "seed",
            "n_orbits",
            "n_steps",
            "renorm_every",
            "tol",
            "n_max",
            "grid",
            "pinching_steps",
            "beta",
            "n_base",
            "n_fiber",
            "n_k",
            "j_max",
            "epsilon_twist",
            "fraction_required",
            "epsilon_k",
            "frame_depth",
        ],
    ),
    ("holonomy", &["direction", "point", "radius"]),
    ("criterion", &["p_word", "z_insert", "transition"]),
    (
        "sweep",
        &["T_values", "generator_index", "center", "radius"],
    ),
];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Section name, header line and entries.
type Section = (String, usize, Vec<(String, Entry)>);

/// Raw `section → key → value` view with usage tracking.
struct Raw {
    sections: Vec<Section>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError {
                        line: Some(line),
                        ..ConfigError::plain("unterminated section header")
                    })?
                    .trim();
                let Some((_, _)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                    return Err(ConfigError {
                        section: Some(name.into()),
                        line: Some(line),
                        ..ConfigError::plain("unknown section")
                    });
                };
                if sections.iter().any(|(s, _, _)| s == name) {
                    return Err(ConfigError {
                        section: Some(name.into()),
                        line: Some(line),
                        ..ConfigError::plain("section appears twice")
                    });
                }
                sections.push((name.to_string(), line, Vec::new()));
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    ..ConfigError::plain("expected `key = value`")
                });
            };
            let key = key.trim();
            let Some((section, _, entries)) = sections.last_mut() else {
                return Err(ConfigError {
                    key: Some(key.into()),
                    line: Some(line),
                    ..ConfigError::plain("key outside of any section")
                });
            };
            let known = SECTIONS
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, k)| *k)
                .unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(ConfigError::at(section, key, Some(line), "unknown key"));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(ConfigError::at(
                    section,
                    key,
                    Some(line),
                    "key appears twice",
                ));
            }
            entries.push((
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            ));
        }
        Ok(Self { sections })
    }

    fn has(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _, _)| s == section)
    }

    fn get(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let (_, _, entries) = self.sections.iter_mut().find(|(s, _, _)| s == section)?;
        let (_, e) = entries.iter_mut().find(|(k, _)| k == key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let (_, _, entries) = self.sections.iter().find(|(s, _, _)| s == section)?;
        entries.iter().find(|(k, _)| k == key).map(|(_, e)| e.line)
    }

    fn req<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T, ConfigError> {
        self.opt(section, key)?.ok_or_else(|| ConfigError {
            section: None,
            key: None,
            line: None,
            message: format!("{section}.{key} required"),
        })
    }

    fn opt<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        let Some((v, line)) = self.get(section, key) else {
            return Ok(None);
        };
        parse_one(&v)
            .map(Some)
            .map_err(|m| ConfigError::at(section, key, Some(line), m))
    }

    fn list<T: FromStr>(
        &mut self,
        section: &str,
        key: &str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((v, line)) = self.get(section, key) else {
            return Ok(None);
        };
        parse_list(&v)
            .map(Some)
            .map_err(|m| ConfigError::at(section, key, Some(line), m))
    }

    fn or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.opt(section, key)?.unwrap_or(default))
    }

    fn unused(&self) -> Option<ConfigError> {
        for (s, _, entries) in &self.sections {
            for (k, e) in entries {
                if !e.used {
                    return Some(ConfigError::at(
                        s,
                        k,
                        Some(e.line),
                        "key not used by this configuration",
                    ));
                }
            }
        }
        None
    }
}

fn parse_one<T: FromStr>(s: &str) -> Result<T, String> {
    let s = s.trim();
    s.parse()
        .map_err(|_| format!("cannot parse `{s}` as {}", short_type::<T>()))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    let s = s.trim();
    let s = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(s);
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_one).collect()
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    name.rsplit("::").next().unwrap_or(name)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_word(s: &str) -> Result<Vec<u8>, String> {
    parse_list(&s.replace('-', ","))
}

fn word_string(w: &[u8]) -> String {
    w.iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TwistParams::default();
        let s = SweepParams::default();
        Self {
            seed: 0,
            n_orbits: s.n_orbits,
            n_steps: s.n_steps,
            renorm_every: DEFAULT_RENORM_EVERY,
            tol: DEFAULT_TOL,
            n_max: DEFAULT_N_MAX,
            grid: s.pinching_grid,
            pinching_steps: s.pinching_steps,
            beta: 1.0,
            n_base: 64,
            n_fiber: 64,
            n_k: t.n_k,
            j_max: t.j_max,
            epsilon_twist: t.epsilon_twist,
            fraction_required: t.fraction_required,
            epsilon_k: t.epsilon_k,
            frame_depth: DEFAULT_FRAME_DEPTH,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Raw::parse(text)?;
        for s in ["base", "run"] {
            if !raw.has(s) {
                return Err(ConfigError {
                    section: Some(s.into()),
                    ..ConfigError::plain("section required")
                });
            }
        }
        let base = parse_base(&mut raw)?;
        let skew = parse_skew(&mut raw, &base)?;
        let fiber = match (&skew, raw.has("fiber")) {
            (SkewConfig::Holder { .. }, false) => FiberConfig {
                maps: Vec::new(),
                generators: None,
            },
            _ => parse_fiber(&mut raw)?,
        };
        let run = parse_run(&mut raw)?;
        let holonomy = if raw.has("holonomy") {
            let direction = match raw.req::<String>("holonomy", "direction")?.as_str() {
                "stable" => HolonomyDirection::Stable,
                "unstable" => HolonomyDirection::Unstable,
                other => {
                    let line = raw.line_of("holonomy", "direction");
                    return Err(ConfigError::at(
                        "holonomy",
                        "direction",
                        line,
                        format!("`{other}` is not stable or unstable"),
                    ));
                }
            };
            let point = pair(&mut raw, "holonomy", "point")?.unwrap_or([0.5, 0.5]);
            let radius = raw.or("holonomy", "radius", 0)?;
            Some(HolonomyConfig {
                direction,
                point,
                radius,
            })
        } else {
            None
        };
        let criterion = if raw.has("criterion") {
            let p_word = match raw.get("criterion", "p_word") {
                Some((v, line)) => parse_word(&v)
                    .map_err(|m| ConfigError::at("criterion", "p_word", Some(line), m))?,
                None => vec![0],
            };
            let z = raw
                .list::<i64>("criterion", "z_insert")?
                .unwrap_or(vec![1, 1]);
            let line = raw.line_of("criterion", "z_insert");
            let z_insert = match z.as_slice() {
                [s, i] if (0..=255).contains(s) => (*s as u8, *i),
                _ => {
                    return Err(ConfigError::at(
                        "criterion",
                        "z_insert",
                        line,
                        "expected `symbol, index`",
                    ))
                }
            };
            let transition = raw.or("criterion", "transition", 2)?;
            Some(CriterionConfig {
                p_word,
                z_insert,
                transition,
            })
        } else {
            None
        };
        let sweep = if raw.has("sweep") {
            let t_values = raw
                .list("sweep", "T_values")?
                .ok_or_else(|| ConfigError::plain("sweep.T_values required"))?;
            let d = SweepParams::default();
            Some(SweepConfig {
                t_values,
                generator_index: raw.or("sweep", "generator_index", d.generator_index)?,
                center: pair(&mut raw, "sweep", "center")?.unwrap_or([d.center.u(), d.center.v()]),
                radius: raw.or("sweep", "radius", d.radius)?,
            })
        } else {
            None
        };
        if let Some(e) = raw.unused() {
            return Err(e);
        }
        let cfg = Self {
            base,
            fiber,
            skew,
            run,
            holonomy,
            criterion,
            sweep,
        };
        cfg.validate(&raw)?;
        Ok(cfg)
    }

    fn validate(&self, raw: &Raw) -> Result<(), ConfigError> {
        let n_maps = self.fiber.maps.len();
        if let Some(g) = &self.fiber.generators {
            if let Some(&bad) = g.iter().find(|&&i| i >= n_maps) {
                return Err(ConfigError::at(
                    "fiber",
                    "generators",
                    raw.line_of("fiber", "generators"),
                    format!("map {bad} does not exist ({n_maps} maps)"),
                ));
            }
        }
        let n_gen = self.generator_count();
        if let SkewConfig::LocallyConstant { depth, table } = &self.skew {
            if *depth == 1 && n_gen != self.base.d {
                return Err(ConfigError::at(
                    "fiber",
                    "generators",
                    raw.line_of("fiber", "generators")
                        .or(raw.line_of("fiber", "maps")),
                    format!("{n_gen} generators for {} symbols", self.base.d),
                ));
            }
            if let Some((_, bad)) = table.iter().find(|(_, i)| *i >= n_gen) {
                return Err(ConfigError::at(
                    "skew",
                    "table",
                    raw.line_of("skew", "table"),
                    format!("generator {bad} does not exist ({n_gen} generators)"),
                ));
            }
        }
        if let Some(s) = &self.sweep {
            if self.skew_is_holder() || s.generator_index >= n_gen {
                return Err(ConfigError::at(
                    "sweep",
                    "generator_index",
                    raw.line_of("sweep", "generator_index"),
                    format!(
                        "generator {} does not exist ({n_gen} generators)",
                        s.generator_index
                    ),
                ));
            }
        }
        let r = &self.run;
        let positive = [
            ("tol", r.tol),
            ("beta", r.beta),
            ("epsilon_twist", r.epsilon_twist),
            ("fraction_required", r.fraction_required),
            ("epsilon_k", r.epsilon_k),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::at(
                    "run",
                    k,
                    raw.line_of("run", k),
                    "must be positive",
                ));
            }
        }
        let counts = [
            ("n_orbits", r.n_orbits),
            ("n_steps", r.n_steps),
            ("renorm_every", r.renorm_every),
            ("n_max", r.n_max),
            ("grid", r.grid),
            ("pinching_steps", r.pinching_steps),
            ("n_fiber", r.n_fiber),
            ("n_k", r.n_k),
            ("j_max", r.j_max),
            ("frame_depth", r.frame_depth),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(ConfigError::at(
                    "run",
                    k,
                    raw.line_of("run", k),
                    "must be positive",
                ));
            }
        }
        // build once so constraint violations surface as config errors
        self.build_system().map_err(|e| ConfigError {
            message: e.to_string(),
            ..ConfigError::plain("")
        })?;
        Ok(())
    }

    fn skew_is_holder(&self) -> bool {
        matches!(self.skew, SkewConfig::Holder { .. })
    }

    fn generator_count(&self) -> usize {
        self.fiber
            .generators
            .as_ref()
            .map_or(self.fiber.maps.len(), |g| g.len())
    }

    /// Fiber generators in order.
    pub fn generators(&self) -> Result<Vec<FiberMap>, ConfigError> {
        let mut built: Vec<FiberMap> = Vec::with_capacity(self.fiber.maps.len());
        for (i, spec) in self.fiber.maps.iter().enumerate() {
            let m = spec
                .build(&built)
                .map_err(|m| ConfigError::at("fiber", "maps", None, format!("map {i}: {m}")))?;
            built.push(m);
        }
        Ok(match &self.fiber.generators {
            Some(idx) => idx.iter().map(|&i| built[i].clone()).collect(),
            None => built,
        })
    }

    /// The configured skew system. A one-symbol base is realized as the full
    /// 2-shift with the point mass on symbol 0 and the generator repeated.
    pub fn build_system(&self) -> Result<SkewSystem, ConfigError> {
        let b = &self.base;
        let wrap = |key: &'static str| {
            move |e: skewlab_core::Error| ConfigError::at("base", key, None, e.to_string())
        };
        let mut gens = self.generators()?;
        let (space, measure) = if b.d == 1 {
            if let Some(g) = gens.first().cloned() {
                gens.push(g);
            }
            (
                ShiftSpace::full(2).map_err(wrap("d"))?,
                BaseMeasure::bernoulli(vec![1.0, 0.0]).map_err(wrap("probs"))?,
            )
        } else {
            match &b.kind {
                BaseKind::Bernoulli { probs } => (
                    ShiftSpace::full(b.d).map_err(wrap("d"))?,
                    BaseMeasure::bernoulli(probs.clone()).map_err(wrap("probs"))?,
                ),
                BaseKind::Markov { matrix } => {
                    let space = ShiftSpace::with_transitions(
                        b.d,
                        matrix.iter().map(|&p| p > 0.0).collect(),
                    )
                    .map_err(wrap("P"))?;
                    let m = BaseMeasure::markov(&space, matrix.clone()).map_err(wrap("P"))?;
                    (space, m)
                }
            }
        };
        let space = space
            .with_metric_base(b.lambda)
            .map_err(wrap("lambda"))?
            .with_metric_horizon(b.horizon)
            .map_err(wrap("horizon"))?;
        let skew_err = |e: skewlab_core::Error| ConfigError {
            section: Some("skew".into()),
            ..ConfigError::plain(e.to_string())
        };
        match &self.skew {
            SkewConfig::LocallyConstant { depth: 1, .. } => {
                SkewSystem::random_product(space, measure, gens).map_err(skew_err)
            }
            SkewConfig::LocallyConstant { depth, table } => {
                let entries = table
                    .iter()
                    .map(|(w, i)| (w.clone(), gens[*i].clone()))
                    .collect();
                SkewSystem::locally_constant(space, measure, *depth, entries).map_err(skew_err)
            }
            SkewConfig::Holder {
                params,
                certificate,
            } => {
                let sys = SkewSystem::holder(space, measure, params.clone()).map_err(skew_err)?;
                match certificate {
                    Some(h) => sys.with_certificate(*h, params.alpha).map_err(skew_err),
                    None => Ok(sys),
                }
            }
        }
    }

    pub fn twist_params(&self) -> TwistParams {
        let r = &self.run;
        TwistParams {
            n_k: r.n_k,
            j_max: r.j_max,
            epsilon_twist: r.epsilon_twist,
            fraction_required: r.fraction_required,
            epsilon_k: r.epsilon_k,
            frame_depth: r.frame_depth,
        }
    }

    /// Criterion and sweep parameters; the twist placement comes from
    /// `[sweep]` when present.
    pub fn sweep_params(&self) -> SweepParams {
        let r = &self.run;
        let c = self.criterion.clone().unwrap_or(CriterionConfig {
            p_word: vec![0],
            z_insert: (1, 1),
            transition: 2,
        });
        let d = SweepParams::default();
        let (generator_index, center, radius) = match &self.sweep {
            Some(s) => (
                s.generator_index,
                TorusPoint::new(s.center[0], s.center[1]),
                s.radius,
            ),
            None => (d.generator_index, d.center, d.radius),
        };
        SweepParams {
            generator_index,
            center,
            radius,
            periodic_word: c.p_word,
            insert_symbol: c.z_insert.0,
            insert_index: c.z_insert.1,
            transition: c.transition,
            pinching_grid: r.grid,
            pinching_steps: r.pinching_steps,
            twist: self.twist_params(),
            n_orbits: r.n_orbits,
            n_steps: r.n_steps,
            renorm_every: r.renorm_every,
        }
    }
}

fn pair(raw: &mut Raw, section: &str, key: &str) -> Result<Option<[f64; 2]>, ConfigError> {
    let line = raw.line_of(section, key);
    match raw.list::<f64>(section, key)? {
        None => Ok(None),
        Some(v) => v
            .try_into()
            .map(Some)
            .map_err(|_| ConfigError::at(section, key, line, "expected two numbers")),
    }
}

fn parse_base(raw: &mut Raw) -> Result<BaseConfig, ConfigError> {
    let d: usize = raw.req("base", "d")?;
    let line = |raw: &Raw, k: &str| raw.line_of("base", k);
    let kind_name: String = raw.or("base", "type", "bernoulli".to_string())?;
    let kind = match kind_name.as_str() {
        "bernoulli" => {
            let probs: Vec<f64> = match raw.list("base", "probs")? {
                Some(p) => p,
                None if d == 1 => vec![1.0],
                None => return Err(ConfigError::plain("base.probs required")),
            };
            let l = line(raw, "probs");
            if probs.len() != d {
                return Err(ConfigError::at(
                    "base",
                    "probs",
                    l,
                    format!("{} probabilities for d = {d}", probs.len()),
                ));
            }
            if probs.iter().any(|&p| p.is_nan() || p <= 0.0) {
                return Err(ConfigError::at(
                    "base",
                    "probs",
                    l,
                    "probabilities must be positive",
                ));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ConfigError::at(
                    "base",
                    "probs",
                    l,
                    format!("probabilities sum to {sum}, not 1 (tolerance 1e-12)"),
                ));
            }
            BaseKind::Bernoulli { probs }
        }
        "markov" => {
            let matrix: Vec<f64> = raw
                .list("base", "P")?
                .ok_or_else(|| ConfigError::plain("base.P required"))?;
            let l = line(raw, "P");
            if matrix.len() != d * d {
                return Err(ConfigError::at(
                    "base",
                    "P",
                    l,
                    format!("{} entries for a {d}×{d} matrix", matrix.len()),
                ));
            }
            for (r, row) in matrix.chunks(d).enumerate() {
                let s: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (s - 1.0).abs() > 1e-12 {
                    return Err(ConfigError::at(
                        "base",
                        "P",
                        l,
                        format!("row {r} is not a probability vector"),
                    ));
                }
            }
            BaseKind::Markov { matrix }
        }
        other => {
            return Err(ConfigError::at(
                "base",
                "type",
                line(raw, "type"),
                format!("`{other}` is not bernoulli or markov"),
            ))
        }
    };
    if d == 0 || (d == 1 && !matches!(kind, BaseKind::Bernoulli { .. })) {
        return Err(ConfigError::at(
            "base",
            "d",
            line(raw, "d"),
            "alphabet needs at least one symbol (two for Markov)",
        ));
    }
    let lambda = raw.or("base", "lambda", 0.5)?;
    let horizon = raw.or("base", "horizon", DEFAULT_METRIC_HORIZON)?;
    Ok(BaseConfig {
        d,
        kind,
        lambda,
        horizon,
    })
}

fn parse_fiber(raw: &mut Raw) -> Result<FiberConfig, ConfigError> {
    let (v, line) = raw
        .get("fiber", "maps")
        .ok_or_else(|| ConfigError::plain("fiber.maps required"))?;
    let maps = v
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .enumerate()
        .map(|(i, s)| {
            s.parse::<MapSpec>()
                .map_err(|m| ConfigError::at("fiber", "maps", Some(line), format!("map {i}: {m}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if maps.is_empty() {
        return Err(ConfigError::at(
            "fiber",
            "maps",
            Some(line),
            "no maps given",
        ));
    }
    for (i, m) in maps.iter().enumerate() {
        if let MapSpec::Compose(idx) = m {
            if let Some(&bad) = idx.iter().find(|&&j| j >= i) {
                return Err(ConfigError::at(
                    "fiber",
                    "maps",
                    Some(line),
                    format!("map {i}: compose may only refer to earlier maps, got {bad}"),
                ));
            }
        }
    }
    let generators = raw.list("fiber", "generators")?;
    let cfg = FiberConfig { maps, generators };
    // surface construction errors (det ≠ 1, bad radius, …) with the line
    let mut built = Vec::new();
    for (i, spec) in cfg.maps.iter().enumerate() {
        built.push(
            spec.build(&built).map_err(|m| {
                ConfigError::at("fiber", "maps", Some(line), format!("map {i}: {m}"))
            })?,
        );
    }
    Ok(cfg)
}

fn parse_skew(raw: &mut Raw, base: &BaseConfig) -> Result<SkewConfig, ConfigError> {
    if !raw.has("skew") {
        return Ok(SkewConfig::LocallyConstant {
            depth: 1,
            table: Vec::new(),
        });
    }
    let family: String = raw.or("skew", "family", "locally_constant".to_string())?;
    match family.as_str() {
        "locally_constant" => {
            let depth: usize = raw.or("skew", "depth", 1)?;
            let line = raw.line_of("skew", "depth");
            if depth == 0 {
                return Err(ConfigError::at("skew", "depth", line, "must be positive"));
            }
            let table = match raw.get("skew", "table") {
                None if depth == 1 => Vec::new(),
                None => return Err(ConfigError::plain("skew.table required for depth > 1")),
                Some(_) if depth == 1 => {
                    return Err(ConfigError::at(
                        "skew",
                        "table",
                        raw.line_of("skew", "table"),
                        "depth 1 takes one generator per symbol, not a table",
                    ))
                }
                Some((v, line)) => v
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|e| {
                        let (w, i) = e.split_once(':').ok_or("expected `word:generator`")?;
                        let w = parse_word(w)?;
                        if w.len() != depth || w.iter().any(|&s| s as usize >= base.d) {
                            return Err(format!(
                                "word {} is not a length-{depth} word over {} symbols",
                                word_string(&w),
                                base.d
                            ));
                        }
                        Ok((w, parse_one(i)?))
                    })
                    .collect::<Result<Vec<_>, String>>()
                    .map_err(|m| ConfigError::at("skew", "table", Some(line), m))?,
            };
            Ok(SkewConfig::LocallyConstant { depth, table })
        }
        "holder" => {
            let params = HolderParams {
                k0: raw.req("skew", "k0")?,
                eps: raw.req("skew", "eps")?,
                alpha: raw.or("skew", "alpha", 1.0)?,
                horizon: raw.or("skew", "horizon", DEFAULT_HOLDER_HORIZON)?,
            };
            let certificate = raw.opt("skew", "certificate")?;
            Ok(SkewConfig::Holder {
                params,
                certificate,
            })
        }
        other => Err(ConfigError::at(
            "skew",
            "family",
            raw.line_of("skew", "family"),
            format!("`{other}` is not locally_constant or holder"),
        )),
    }
}

fn parse_run(raw: &mut Raw) -> Result<RunConfig, ConfigError> {
    let d = RunConfig::default();
    Ok(RunConfig {
        seed: raw.req("run", "seed")?,
        n_orbits: raw.or("run", "n_orbits", d.n_orbits)?,
        n_steps: raw.or("run", "n_steps", d.n_steps)?,
        renorm_every: raw.or("run", "renorm_every", d.renorm_every)?,
        tol: raw.or("run", "tol", d.tol)?,
        n_max: raw.or("run", "n_max", d.n_max)?,
        grid: raw.or("run", "grid", d.grid)?,
        pinching_steps: raw.or("run", "pinching_steps", d.pinching_steps)?,
        beta: raw.or("run", "beta", d.beta)?,
        n_base: raw.or("run", "n_base", d.n_base)?,
        n_fiber: raw.or("run", "n_fiber", d.n_fiber)?,
        n_k: raw.or("run", "n_k", d.n_k)?,
        j_max: raw.or("run", "j_max", d.j_max)?,
        epsilon_twist: raw.or("run", "epsilon_twist", d.epsilon_twist)?,
        fraction_required: raw.or("run", "fraction_required", d.fraction_required)?,
        epsilon_k: raw.or("run", "epsilon_k", d.epsilon_k)?,
        frame_depth: raw.or("run", "frame_depth", d.frame_depth)?,
    })
}

impl fmt::Display for ExperimentConfig {
    /// Canonical text form; parsing it yields an equal config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.base;
        writeln!(f, "[base]")?;
        match &b.kind {
            BaseKind::Bernoulli { probs } => {
                writeln!(f, "type = bernoulli")?;
                writeln!(f, "d = {}", b.d)?;
                writeln!(f, "probs = {}", join_f(probs))?;
            }
            BaseKind::Markov { matrix } => {
                writeln!(f, "type = markov")?;
                writeln!(f, "d = {}", b.d)?;
                writeln!(f, "P = {}", join_f(matrix))?;
            }
        }
        writeln!(f, "lambda = {:?}", b.lambda)?;
        writeln!(f, "horizon = {}", b.horizon)?;

        if !self.fiber.maps.is_empty() {
            writeln!(f, "\n[fiber]")?;
            let maps: Vec<String> = self.fiber.maps.iter().map(|m| m.to_string()).collect();
            writeln!(f, "maps = {}", maps.join("; "))?;
            if let Some(g) = &self.fiber.generators {
                writeln!(f, "generators = {}", join(g))?;
            }
        }

        writeln!(f, "\n[skew]")?;
        match &self.skew {
            SkewConfig::LocallyConstant { depth, table } => {
                writeln!(f, "family = locally_constant")?;
                writeln!(f, "depth = {depth}")?;
                if !table.is_empty() {
                    let t: Vec<String> = table
                        .iter()
                        .map(|(w, i)| format!("{}:{i}", word_string(w)))
                        .collect();
                    writeln!(f, "table = {}", t.join("; "))?;
                }
            }
            SkewConfig::Holder {
                params,
                certificate,
            } => {
                writeln!(f, "family = holder")?;
                writeln!(f, "k0 = {:?}", params.k0)?;
                writeln!(f, "eps = {:?}", params.eps)?;
                writeln!(f, "alpha = {:?}", params.alpha)?;
                writeln!(f, "horizon = {}", params.horizon)?;
                if let Some(h) = certificate {
                    writeln!(f, "certificate = {h:?}")?;
                }
            }
        }

        let r = &self.run;
        writeln!(f, "\n[run]")?;
        writeln!(f, "seed = {}", r.seed)?;
        writeln!(f, "n_orbits = {}", r.n_orbits)?;
        writeln!(f, "n_steps = {}", r.n_steps)?;
        writeln!(f, "renorm_every = {}", r.renorm_every)?;
        writeln!(f, "tol = {:?}", r.tol)?;
        writeln!(f, "n_max = {}", r.n_max)?;
        writeln!(f, "grid = {}", r.grid)?;
        writeln!(f, "pinching_steps = {}", r.pinching_steps)?;
        writeln!(f, "beta = {:?}", r.beta)?;
        writeln!(f, "n_base = {}", r.n_base)?;
        writeln!(f, "n_fiber = {}", r.n_fiber)?;
        writeln!(f, "n_k = {}", r.n_k)?;
        writeln!(f, "j_max = {}", r.j_max)?;
        writeln!(f, "epsilon_twist = {:?}", r.epsilon_twist)?;
        writeln!(f, "fraction_required = {:?}", r.fraction_required)?;
        writeln!(f, "epsilon_k = {:?}", r.epsilon_k)?;
        writeln!(f, "frame_depth = {}", r.frame_depth)?;

        if let Some(h) = &self.holonomy {
            writeln!(f, "\n[holonomy]")?;
            let dir = match h.direction {
                HolonomyDirection::Stable => "stable",
                HolonomyDirection::Unstable => "unstable",
            };
            writeln!(f, "direction = {dir}")?;
            writeln!(f, "point = {}", join_f(&h.point))?;
            writeln!(f, "radius = {}", h.radius)?;
        }
        if let Some(c) = &self.criterion {
            writeln!(f, "\n[criterion]")?;
            writeln!(f, "p_word = {}", word_string(&c.p_word))?;
            writeln!(f, "z_insert = {}, {}", c.z_insert.0, c.z_insert.1)?;
            writeln!(f, "transition = {}", c.transition)?;
        }
        if let Some(s) = &self.sweep {
            writeln!(f, "\n[sweep]")?;
            writeln!(f, "T_values = {}", join_f(&s.t_values))?;
            writeln!(f, "generator_index = {}", s.generator_index)?;
            writeln!(f, "center = {}", join_f(&s.center))?;
            writeln!(f, "radius = {:?}", s.radius)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[base]\nd = 1\n\n[fiber]\nmaps = toral:2,1,1,1\n\n[run]\nseed = 7\n";

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.generators().unwrap().len(), 1);
        assert_eq!(c.run.seed, 7);
        let sys = c.build_system().unwrap();
        assert_eq!(sys.space().alphabet_size(), 2);
    }

    #[test]
    fn probability_sum_is_checked() {
        let text = "[base]\nd = 2\nprobs = (0.5, 0.6)\n[fiber]\nmaps = identity; identity\n[run]\nseed = 1\n";
        let e = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(e.section.as_deref(), Some("base"));
        assert_eq!(e.key.as_deref(), Some("probs"));
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("[base].probs (line 3): "));
    }

    #[test]
    fn seed_is_required() {
        let e = ExperimentConfig::parse(
            "[base]\nd = 1\n[fiber]\nmaps = identity\n[run]\nn_orbits = 3\n",
        )
        .unwrap_err();
        assert_eq!(e.to_string(), "run.seed required");
    }

    #[test]
    fn unknown_keys_name_their_line() {
        let e = ExperimentConfig::parse("[base]\nd = 1\nflavour = x\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("flavour"), Some(3)));
        let e = ExperimentConfig::parse("[bass]\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn bad_references_are_rejected() {
        let gen = "[base]\nd = 2\nprobs = 0.5,0.5\n[fiber]\nmaps = identity; identity\ngenerators = 0, 5\n[run]\nseed = 1\n";
        let e = ExperimentConfig::parse(gen).unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("generators"), Some(6)));
        let compose = "[base]\nd = 1\n[fiber]\nmaps = compose:0\n[run]\nseed = 1\n";
        assert!(ExperimentConfig::parse(compose).is_err());
        let det = "[base]\nd = 1\n[fiber]\nmaps = toral:2,0,0,2\n[run]\nseed = 1\n";
        assert_eq!(ExperimentConfig::parse(det).unwrap_err().line, Some(4));
        let thr = "[base]\nd = 1\n[fiber]\nmaps = identity\n[run]\nseed = 1\nepsilon_twist = -1\n";
        assert_eq!(
            ExperimentConfig::parse(thr).unwrap_err().key.as_deref(),
            Some("epsilon_twist")
        );
    }

    #[test]
    fn full_config_round_trips() {
        let text = "\
[base]
type = markov
d = 2
P = 0.25, 0.75, 1, 0
lambda = 0.125
[fiber]
maps = toral:2,1,1,1; twist:0.25,0.25,0.2,0.5; compose:0,1; stdmap:0.3; stdmap_inv:1.1
generators = 0, 2, 3
[skew]
depth = 2
table = 0-0:0; 0-1:1; 1-0:2
[run]
seed = 42
tol = 1e-10
[holonomy]
direction = unstable
point = 0.1, 0.2
[criterion]
p_word = 0
z_insert = 1, 1
[sweep]
T_values = 0, 0.1, 0.2
";
        let c = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&c.to_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_string(), again.to_string());
    }

    #[test]
    fn holder_config_round_trips() {
        let text = "[base]\nd = 2\nprobs = 0.3, 0.7\nlambda = 0.0625\n[skew]\nfamily = holder\nk0 = 0.5\neps = 0.05\n[run]\nseed = 3\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert!(c.build_system().unwrap().certificate().is_some());
        assert_eq!(ExperimentConfig::parse(&c.to_string()).unwrap(), c);
    }
}
