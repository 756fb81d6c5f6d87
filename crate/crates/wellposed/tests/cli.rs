//! Black-box tests of the compiled binary: flag handling, exit codes, help
//! drift, and reproducibility of outputs across runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wellposed::config::CONFIG_KEYS;
use wellposed::measures::{discretize, Gaussian1D, Grid1D};
use wellposed::runner::EXPERIMENTS;

const BIN: &str = env!("CARGO_BIN_EXE_wellposed");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_lists_every_experiment_and_config_key() {
    let out = run(&["run", "--help"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    for (name, _) in EXPERIMENTS {
        assert!(text.contains(name), "--help does not mention '{name}'");
    }
    for (key, _) in CONFIG_KEYS {
        assert!(text.contains(key), "--help does not mention '{key}'");
    }
    assert!(text.contains("exit codes"));
}

#[test]
fn named_experiment_rerun_is_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = run(&[
            "run",
            "--experiment",
            "fig1-cubic",
            "--grid-n",
            "201",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        assert!(stdout_of(&out).contains("wrote "));
    }
    for file in [
        "fig1_cubic.csv",
        "fig1_cubic_transformed.csv",
        "fig1_cubic_assumptions.txt",
    ] {
        let a = fs::read(d1.path().join(file)).unwrap();
        let b = fs::read(d2.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn config_run_reproduces_named_sweep() {
    let named = tempfile::tempdir().unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--experiment",
        "fig1-cubic",
        "--grid-n",
        "201",
        "--out",
        named.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let cfg_path = cfg_dir.path().join("fig1.cfg");
    fs::write(
        &cfg_path,
        "prior.family = gaussian\n\
         prior.mean = 0\n\
         prior.stddev = 1\n\
         grid.lower = -8\n\
         grid.upper = 8\n\
         grid.n = 201\n\
         likelihood.kind = gaussian_noise\n\
         likelihood.forward = cube_root_data\n\
         likelihood.noise_variance = 1\n\
         sweep.y_ref = 0\n\
         sweep.y_min = -1\n\
         sweep.y_max = 1\n\
         sweep.y_step = 0.001\n",
    )
    .unwrap();
    let out = run(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        cfg_dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let a = fs::read(named.path().join("fig1_cubic.csv")).unwrap();
    let b = fs::read(cfg_dir.path().join("config_sweep.csv")).unwrap();
    assert_eq!(a, b, "config-driven sweep should match the named experiment");
}

#[test]
fn schema_misuse_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let out_dir = d.path().to_str().unwrap().to_string();

    let out = run(&["run", "--experiment", "fig9-unknown", "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("fig1-cubic"), "error should list names");

    // Misspelled config key with a line number in the message.
    let cfg = d.path().join("typo.cfg");
    fs::write(&cfg, "piror.family = gaussian\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("piror.family"));

    // Neither --experiment nor --config.
    let out = run(&["run", "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2));

    // Both at once.
    let out = run(&[
        "run",
        "--experiment",
        "fig1-cubic",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Out-of-domain flag values.
    let out = run(&["run", "--experiment", "delta-homeo", "--p", "0.5", "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "run",
        "--experiment",
        "fig1-cubic",
        "--metrics",
        "hellinger,nonsense",
        "--out",
        &out_dir,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_gaussian(path: &Path, mean: f64) {
    let grid = Grid1D::new(-8.0, 9.0, 401).unwrap();
    let m = discretize(Gaussian1D::new(mean, 1.0).unwrap(), grid).unwrap();
    m.save(path).unwrap();
}

#[test]
fn numerical_failures_exit_three() {
    let d = tempfile::tempdir().unwrap();

    // Mismatched grids in eval.
    let pa = d.path().join("a.csv");
    let pb = d.path().join("b.csv");
    write_gaussian(&pa, 0.0);
    let narrow = discretize(
        Gaussian1D::new(0.0, 1.0).unwrap(),
        Grid1D::new(-8.0, 8.0, 201).unwrap(),
    )
    .unwrap();
    narrow.save(&pb).unwrap();
    let out = run(&["eval", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));

    // Config whose reference datum has zero evidence.
    let cfg = d.path().join("degenerate.cfg");
    fs::write(
        &cfg,
        "prior.family = uniform\n\
         prior.lower = 0\n\
         prior.upper = 1\n\
         grid.lower = 0\n\
         grid.upper = 1\n\
         grid.n = 101\n\
         likelihood.kind = custom_named\n\
         likelihood.name = window\n\
         likelihood.width = 0.05\n\
         sweep.y_ref = 9\n\
         sweep.y_min = 8\n\
         sweep.y_max = 10\n\
         sweep.y_step = 0.5\n",
    )
    .unwrap();
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn io_failures_exit_four() {
    let d = tempfile::tempdir().unwrap();
    // A regular file used as a directory component.
    let blocker = d.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let bad_out = blocker.join("sub");
    let out = run(&[
        "run",
        "--experiment",
        "delta-homeo",
        "--out",
        bad_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr_of(&out));

    // Missing measure file in eval.
    let pa = d.path().join("a.csv");
    write_gaussian(&pa, 0.0);
    let out = run(&[
        "eval",
        pa.to_str().unwrap(),
        d.path().join("missing.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr_of(&out));
}

#[test]
fn eval_prints_distances_on_stdout() {
    let d = tempfile::tempdir().unwrap();
    let pa = d.path().join("a.csv");
    let pb = d.path().join("b.csv");
    write_gaussian(&pa, 0.0);
    write_gaussian(&pb, 1.0);

    let out = run(&["eval", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "hellinger,tv,prokhorov,wasserstein_p,p,kl"
    );
    let row: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let h: f64 = row[0].parse().unwrap();
    let tv: f64 = row[1].parse().unwrap();
    let w: f64 = row[3].parse().unwrap();
    let kl: f64 = row[5].parse().unwrap();
    assert!((h - 0.34279).abs() < 1e-3, "hellinger {h}");
    assert!((tv - 0.38292).abs() < 1e-3, "tv {tv}");
    assert!((w - 1.0).abs() < 1e-3, "wasserstein(1) between unit shifts {w}");
    assert!((kl - 0.5).abs() < 1e-3, "kl {kl}");
    assert!(row[2].is_empty(), "prokhorov must be opt-in");

    // Identical inputs: every requested distance is exactly zero.
    let out = run(&["eval", pa.to_str().unwrap(), pa.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let row = text.lines().nth(1).unwrap();
    assert_eq!(
        row,
        "0.0000000000000000e0,0.0000000000000000e0,,0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0"
    );

    // Prokhorov on request, on a coarse pair to keep the flow network small.
    let coarse = Grid1D::new(-8.0, 9.0, 61).unwrap();
    let ca = d.path().join("ca.csv");
    let cb = d.path().join("cb.csv");
    discretize(Gaussian1D::new(0.0, 1.0).unwrap(), coarse)
        .unwrap()
        .save(&ca)
        .unwrap();
    discretize(Gaussian1D::new(1.0, 1.0).unwrap(), coarse)
        .unwrap()
        .save(&cb)
        .unwrap();
    let out = run(&[
        "eval",
        ca.to_str().unwrap(),
        cb.to_str().unwrap(),
        "--metrics",
        "prokhorov,tv",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let row: Vec<String> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    let pk: f64 = row[2].parse().unwrap();
    let tv: f64 = row[1].parse().unwrap();
    assert!(pk > 0.0 && pk <= tv + 2e-6, "prokhorov {pk} vs tv {tv}");
}

#[test]
fn emit_svg_writes_charts() {
    let d = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--experiment",
        "delta-homeo",
        "--emit-svg",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let svg = fs::read_to_string(d.path().join("delta_homeo.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
}
