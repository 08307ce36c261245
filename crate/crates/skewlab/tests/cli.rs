use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skewlab::ExperimentConfig;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn skewlab(args: &[&str], config: &Path, out: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skewlab"));
    cmd.args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out);
    match workers {
        Some(w) => cmd.env("WORKERS", w),
        None => cmd.env_remove("WORKERS"),
    };
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const IDENTITY: &str = "[base]\nd = 2\nprobs = 0.5, 0.5\n[fiber]\nmaps = identity; identity\n[run]\nseed = 5\nn_orbits = 8\nn_steps = 100\n";

const CAT_PAIR: &str = "[base]\nd = 2\nprobs = 0.5, 0.5\n[fiber]\nmaps = toral:2,1,1,1; toral:2,1,1,1\n[run]\nseed = 9\nn_orbits = 16\nn_steps = 400\ngrid = 16\npinching_steps = 300\nn_k = 64\n[criterion]\np_word = 0\nz_insert = 1, 1\ntransition = 2\n";

#[test]
fn exponent_of_identity_generators_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "id.cfg", IDENTITY);
    let o = skewlab(&["exponent"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("exponent.csv")).unwrap();
    assert_eq!(
        csv,
        "seed,n_orbits,n_steps,lambda_plus_mean,lambda_plus_stderr,det_defect_max\n5,8,100,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0\n"
    );
    assert!(stdout(&o).starts_with("lambda_plus=0.0000000000000000e0"));
}

#[test]
fn bunching_fails_for_cat_at_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cat.cfg",
        &CAT_PAIR.replace("[run]\n", "[run]\nbeta = 1\n"),
    );
    let o = skewlab(&["bunching"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bunching.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,worst_margin,satisfied"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let margin: f64 = row[1].parse().unwrap();
    let golden: f64 = (3.0 + 5f64.sqrt()) / 2.0;
    assert!((margin - golden * golden / 2.0).abs() < 1e-9);
    assert_eq!(row[2], "false");
}

#[test]
fn criterion_prints_verdict_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cat.cfg", CAT_PAIR);
    let o = skewlab(&["criterion"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "pinching=true twisting=false");
    let csv = std::fs::read_to_string(dir.path().join("criterion.csv")).unwrap();
    assert!(csv.starts_with("pinching_flag,pinching_integral,nuh_fraction,twisting_flag,min_separation_median,j_t_median\ntrue,"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.cfg",
        &IDENTITY.replace("0.5, 0.5", "(0.5, 0.6)"),
    );
    let o = skewlab(&["exponent"], &bad, dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("[base].probs (line 3)"),
        "{}",
        stderr(&o)
    );

    let no_seed = write_config(
        dir.path(),
        "noseed.cfg",
        &IDENTITY.replace("seed = 5\n", ""),
    );
    let o = skewlab(&["exponent"], &no_seed, dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.seed required"));

    let cfg = write_config(dir.path(), "id.cfg", IDENTITY);
    let o = skewlab(&["holonomy"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(2), "holonomy without its section");
    let o = skewlab(&["exponent"], &cfg, dir.path(), Some("lots"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("exponent.csv").exists());
}

#[test]
fn non_convergence_exits_with_one_and_keeps_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[base]\nd = 2\nprobs = 0.5, 0.5\nlambda = 0.9\n[skew]\nfamily = holder\nk0 = 6\neps = 0.5\nhorizon = 64\n[run]\nseed = 2\nn_max = 8\n[holonomy]\ndirection = stable\npoint = 0.3, 0.3\n";
    let cfg = write_config(dir.path(), "h.cfg", text);
    let o = skewlab(&["holonomy"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("holonomy.csv")).unwrap();
    assert!(csv.starts_with("n,increment,envelope\n"));
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn holonomy_converges_for_bunched_family() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[base]\nd = 2\nprobs = 0.5, 0.5\nlambda = 0.0625\n[skew]\nfamily = holder\nk0 = 0.5\neps = 0.05\n[run]\nseed = 4\ntol = 1e-12\n[holonomy]\ndirection = unstable\npoint = 0.6, 0.2\n";
    let cfg = write_config(dir.path(), "h.cfg", text);
    let o = skewlab(&["holonomy"], &cfg, dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("holonomy converged=true"));
    let csv = std::fs::read_to_string(dir.path().join("holonomy.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(v[1] <= v[2] * (1.0 + 1e-12), "{line}");
    }
}

#[test]
fn sweep_records_row_errors_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CAT_PAIR}[sweep]\nT_values = 0, 0.5, NaN\ngenerator_index = 1\n");
    let cfg = write_config(dir.path(), "s.cfg", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = skewlab(&["sweep"], &cfg, &a, Some("1"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "sweep rows=3 twisting=0 errors=1");
    assert_eq!(
        skewlab(&["sweep"], &cfg, &b, Some("3")).status.code(),
        Some(0)
    );
    let csv_a = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("sweep.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,pinching_flag,pinching_integral,twisting_flag,twisting_min_separation_median,L_estimate,L_stderr,error");
    assert!(lines[1].starts_with("0.0000000000000000e0,true,"));
    assert!(lines[3].starts_with("NaN,,,,,,,") && lines[3].len() > "NaN,,,,,,,".len());
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CAT_PAIR}[sweep]\nT_values = 0, 0.25\ncenter = 0.5, 0.5\nradius = 0.1\n");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let path = write_config(dir.path(), "canon.cfg", &cfg.to_string());
    assert_eq!(ExperimentConfig::from_path(&path).unwrap(), cfg);
}
