//! Command execution: parallel orchestration, CSV emission and verdicts.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use skewlab_core::criterion::{run_criterion, sweep_row, SweepRow};
use skewlab_core::holonomy::{fiber_bunching_margin, holonomy_point, HolonomyQuery};
use skewlab_core::lyapunov::{orbit_exponent, reduce_orbits, ExponentEstimate};
use skewlab_core::{Error as CoreError, SkewSystem, TorusPoint};

use crate::config::{ConfigError, ExperimentConfig, HolonomyDirection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Exponent,
    Bunching,
    Holonomy,
    Criterion,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Exponent,
        Command::Bunching,
        Command::Holonomy,
        Command::Criterion,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Exponent => "exponent",
            Command::Bunching => "bunching",
            Command::Holonomy => "holonomy",
            Command::Criterion => "criterion",
            Command::Sweep => "sweep",
        }
    }

    /// CSV header of the command's output file.
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Command::Exponent => &[
                "seed",
                "n_orbits",
                "n_steps",
                "lambda_plus_mean",
                "lambda_plus_stderr",
                "det_defect_max",
            ],
            Command::Bunching => &["beta", "worst_margin", "satisfied"],
            Command::Holonomy => &["n", "increment", "envelope"],
            Command::Criterion => &[
                "pinching_flag",
                "pinching_integral",
                "nuh_fraction",
                "twisting_flag",
                "min_separation_median",
                "j_t_median",
            ],
            Command::Sweep => &[
                "T",
                "pinching_flag",
                "pinching_integral",
                "twisting_flag",
                "twisting_min_separation_median",
                "L_estimate",
                "L_stderr",
                "error",
            ],
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Domain(CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Domain(e)
    }
}

impl RunError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Domain(e) if e.is_config() => 2,
            _ => 1,
        }
    }
}

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub verdict: String,
    pub csv: PathBuf,
}

/// Worker count from the `WORKERS` environment variable; unset, empty or 0
/// means the machine's parallelism.
pub fn workers_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var("WORKERS") {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(ConfigError {
                section: None,
                key: Some("WORKERS".into()),
                line: None,
                message: format!("`{v}` is not a thread count"),
            }),
        },
    }
}

/// Runs `cmd` with `workers` threads (machine default when `None`) and
/// writes `<out_dir>/<cmd>.csv`.
pub fn run_command(
    cmd: Command,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Outcome, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let sys = cfg.build_system()?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(cmd.file_name());
    let (rows, verdict, failure) = pool.install(|| match cmd {
        Command::Exponent => exponent(cfg, &sys),
        Command::Bunching => bunching(cfg, &sys),
        Command::Holonomy => holonomy(cfg, &sys),
        Command::Criterion => criterion(cfg, &sys),
        Command::Sweep => sweep(cfg, &sys),
    })?;
    write_csv_atomic(&csv, cmd.header(), &rows)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(Outcome { verdict, csv }),
    }
}

type Rows = Vec<Vec<String>>;
/// Rows to write, verdict line, and an error to report after writing.
type CommandOutput = (Rows, String, Option<RunError>);

/// Full-precision (17 significant digits) number.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Parallel integrated exponent; orbits are reduced in index order so the
/// result does not depend on the thread count.
pub fn parallel_exponent(
    sys: &SkewSystem,
    n_orbits: usize,
    n_steps: usize,
    seed: u64,
    renorm_every: usize,
) -> Result<ExponentEstimate, CoreError> {
    if n_orbits == 0 || n_steps == 0 {
        return Err(CoreError::Config(
            "integrated exponent needs n_orbits, n_steps ≥ 1".into(),
        ));
    }
    let samples = (0..n_orbits as u64)
        .into_par_iter()
        .map(|k| orbit_exponent(sys, seed, k, n_steps, renorm_every))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reduce_orbits(&samples, n_steps, seed))
}

fn exponent(cfg: &ExperimentConfig, sys: &SkewSystem) -> Result<CommandOutput, RunError> {
    let r = &cfg.run;
    let est = parallel_exponent(sys, r.n_orbits, r.n_steps, r.seed, r.renorm_every)?;
    let row = vec![
        r.seed.to_string(),
        r.n_orbits.to_string(),
        r.n_steps.to_string(),
        num(est.mean),
        num(est.stderr),
        num(est.det_defect_max),
    ];
    let verdict = format!(
        "lambda_plus={} stderr={} reliable={}",
        num(est.mean),
        num(est.stderr),
        est.reliable()
    );
    Ok((vec![row], verdict, None))
}

fn bunching(cfg: &ExperimentConfig, sys: &SkewSystem) -> Result<CommandOutput, RunError> {
    let r = &cfg.run;
    let rep = fiber_bunching_margin(sys, r.beta, r.n_base, r.n_fiber, r.seed)?;
    let row = vec![
        num(rep.beta),
        num(rep.worst_margin),
        rep.satisfied.to_string(),
    ];
    let verdict = format!(
        "bunching satisfied={} worst_margin={}",
        rep.satisfied,
        num(rep.worst_margin)
    );
    Ok((vec![row], verdict, None))
}

fn holonomy(cfg: &ExperimentConfig, sys: &SkewSystem) -> Result<CommandOutput, RunError> {
    let h = cfg.holonomy.as_ref().ok_or_else(|| ConfigError {
        section: Some("holonomy".into()),
        key: None,
        line: None,
        message: "section required for the holonomy command".into(),
    })?;
    let r = &cfg.run;
    let m = sys.measure();
    let x = m.sample_sequence(r.seed, 0);
    let keep = h.radius as i64;
    let (y, direction) = match h.direction {
        HolonomyDirection::Stable => (
            m.resample_past(&x, -keep, r.seed, 1),
            skewlab_core::holonomy::Direction::Stable,
        ),
        HolonomyDirection::Unstable => (
            m.resample_future(&x, keep, r.seed, 1),
            skewlab_core::holonomy::Direction::Unstable,
        ),
    };
    let dist = sys.space().distance(&x, &y)?;
    let q = HolonomyQuery::new(direction, x, y)
        .with_tol(r.tol)
        .with_n_max(r.n_max);
    let t = TorusPoint::new(h.point[0], h.point[1]);
    let theta = fiber_bunching_margin(sys, r.beta, r.n_base, r.n_fiber, r.seed)?.worst_margin;
    let scale = dist.powf(sys.alpha());
    let (diag, failure) = match holonomy_point(sys, &q, t) {
        Ok((_, d)) => (d, None),
        Err(CoreError::NonConvergence(d)) => (
            d.clone(),
            Some(RunError::Domain(CoreError::NonConvergence(d))),
        ),
        Err(e) => return Err(e.into()),
    };
    let env = diag.envelope(theta, scale);
    let rows = diag
        .increments
        .iter()
        .zip(&env)
        .enumerate()
        .map(|(n, (inc, e))| vec![n.to_string(), num(*inc), num(*e)])
        .collect();
    let verdict = format!(
        "holonomy converged={} steps={} exact={} theta={}",
        failure.is_none(),
        diag.stopped_at,
        diag.exact,
        num(theta)
    );
    Ok((rows, verdict, failure))
}

fn criterion(cfg: &ExperimentConfig, sys: &SkewSystem) -> Result<CommandOutput, RunError> {
    let out = run_criterion(sys, &cfg.sweep_params())?;
    let (sep, jt) = match &out.twisting {
        Ok(t) => (t.min_separation_median(), t.j_t_median()),
        Err(_) => (None, None),
    };
    let row = vec![
        out.pinching.positive.to_string(),
        num(out.pinching.integral),
        num(out.pinching.nuh_fraction),
        out.twisting_flag().to_string(),
        opt_num(sep),
        opt_num(jt),
    ];
    Ok((vec![row], out.verdict(), None))
}

fn sweep(cfg: &ExperimentConfig, sys: &SkewSystem) -> Result<CommandOutput, RunError> {
    let s = cfg.sweep.as_ref().ok_or_else(|| ConfigError {
        section: Some("sweep".into()),
        key: Some("T_values".into()),
        line: None,
        message: "sweep.T_values required".into(),
    })?;
    let params = cfg.sweep_params();
    let seed = cfg.run.seed;
    let rows: Vec<SweepRow> = s
        .t_values
        .par_iter()
        .enumerate()
        .map(|(i, &angle)| sweep_row(sys, &params, angle, i, seed))
        .collect();
    let twisting = rows
        .iter()
        .filter(|r| r.outcome.as_ref().is_some_and(|o| o.twisting_flag()))
        .count();
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let csv_rows = rows
        .iter()
        .map(|r| {
            let o = r.outcome.as_ref();
            let sep = o
                .and_then(|o| o.twisting.as_ref().ok())
                .and_then(|t| t.min_separation_median());
            vec![
                num(r.angle),
                o.map(|o| o.pinching.positive.to_string())
                    .unwrap_or_default(),
                opt_num(o.map(|o| o.pinching.integral)),
                o.map(|o| o.twisting_flag().to_string()).unwrap_or_default(),
                opt_num(sep),
                opt_num(r.exponent.as_ref().map(|e| e.mean)),
                opt_num(r.exponent.as_ref().map(|e| e.stderr)),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let verdict = format!(
        "sweep rows={} twisting={} errors={}",
        rows.len(),
        twisting,
        errors
    );
    Ok((csv_rows, verdict, None))
}

/// Writes the CSV to a temporary file in the target directory, then renames
/// it over `path`.
pub fn write_csv_atomic(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), RunError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn commands_parse_by_name() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let cfg = ConfigError {
            section: None,
            key: None,
            line: None,
            message: String::new(),
        };
        assert_eq!(RunError::from(cfg).exit_code(), 2);
        assert_eq!(RunError::from(CoreError::Config("x".into())).exit_code(), 2);
        assert_eq!(
            RunError::from(CoreError::Precondition("x".into())).exit_code(),
            1
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "old").unwrap();
        write_csv_atomic(&p, &["x", "y"], &[vec!["1".into(), "has, comma".into()]]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "x,y\n1,\"has, comma\"\n"
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
