use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pnpgl::signals::{encode_pgm, test_image, PgmFormat};
use pnpgl::Table;

fn pnpgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnpgl"))
        .args(args)
        .env_remove("PNPGL_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pnpgl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn table(path: &Path) -> Table {
    Table::from_csv(&fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest_body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("source=") && !l.starts_with("wall_clock_seconds="))
        .map(str::to_string)
        .collect()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = pnpgl(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_and_key_exit_one() {
    assert_eq!(pnpgl(&["rho-sweep", "--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = pnpgl(&["rho-sweep", "--out", out, "--set", "nonsense=3"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nonsense"));
    let r = pnpgl(&["rho-sweep", "--out", out, "--alpha", "-1"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!dir.path().join("rho-sweep.csv").exists());
}

#[test]
fn help_and_version_exit_zero() {
    assert!(pnpgl(&["--help"]).status.success());
    assert!(pnpgl(&["--version"]).status.success());
    assert!(pnpgl(&["inpaint", "--help"]).status.success());
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_pnpgl"))
        .args([
            "eigvals",
            "--out",
            tempfile::tempdir().unwrap().path().to_str().unwrap(),
        ])
        .env("PNPGL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eigvals_gain_limits() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "eigvals",
        "--out",
        dir.path().to_str().unwrap(),
        "--n",
        "64",
        "--alpha",
        "0.3",
    ]);
    let t = table(&dir.path().join("eigvals.csv"));
    let (s, gl, gp) = (
        t.numbers("s").unwrap(),
        t.numbers("gain_L").unwrap(),
        t.numbers("gain_P").unwrap(),
    );
    assert_eq!(s.len(), 64);
    // s = 1 passes unchanged through both
    assert!((gl[0] - 1.0).abs() < 1e-9 && (gp[0] - 1.0).abs() < 1e-9);
    for i in 0..s.len() {
        assert!((gl[i] - 1.0 / (1.3 - 0.3 * s[i])).abs() < 1e-12);
        assert!((gp[i] - s[i] / (0.7 * s[i] + 0.3)).abs() < 1e-12);
        assert!(gp[i] <= gl[i] + 1e-15);
    }
    let manifest = fs::read_to_string(dir.path().join("eigvals.manifest")).unwrap();
    assert!(manifest.contains("output.0="));
    assert!(manifest.contains("config.alpha=0.3"));
}

#[test]
fn admm_run_reaches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    for rate in ["1", "0.5"] {
        let stdout = ok(&[
            "admm-run",
            "--out",
            dir.path().to_str().unwrap(),
            "--n",
            "32",
            "--seed",
            "3",
            "--rate",
            rate,
        ]);
        let value = |key: &str| -> f64 {
            let line = stdout.lines().find(|l| l.starts_with(key)).unwrap();
            line.rsplit(' ').next().unwrap().parse().unwrap()
        };
        assert!(value("fixed-point residual") < 1e-6);
        assert!(value("distance to closed form") < 1e-6);
    }
    let h = table(&dir.path().join("admm-run.csv"));
    assert!(h.len() > 1);
    assert_eq!(table(&dir.path().join("admm-run-solution.csv")).len(), 32);
}

#[test]
fn admm_iteration_cap_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = pnpgl(&[
        "admm-run",
        "--out",
        dir.path().to_str().unwrap(),
        "--max-iters",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("convergence"));
    assert!(!dir.path().join("admm-run.manifest").exists());
}

#[test]
fn repeat_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in ["rho-sweep", "prefilter", "multi-prior"] {
        for d in [&a, &b] {
            ok(&[
                cmd,
                "--out",
                d.path().to_str().unwrap(),
                "--n",
                "64",
                "--seed",
                "7",
            ]);
        }
        let name = format!("{cmd}.csv");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{cmd}"
        );
        let m = format!("{cmd}.manifest");
        let strip = |d: &Path| -> Vec<String> {
            manifest_body(&d.join(&m))
                .into_iter()
                .filter(|l| !l.starts_with("output."))
                .collect()
        };
        assert_eq!(strip(a.path()), strip(b.path()));
    }
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "# sweep settings\nout = {}\nn = 48\nseed = 4\nh = 0.15\nalpha_points = 9\n",
            out.display()
        ),
    )
    .unwrap();
    ok(&["rho-sweep", "--config", cfg.to_str().unwrap()]);
    let from_file = (
        fs::read(out.join("rho-sweep.csv")).unwrap(),
        manifest_body(&out.join("rho-sweep.manifest")),
    );
    ok(&[
        "rho-sweep",
        "--out",
        out.to_str().unwrap(),
        "--n",
        "48",
        "--seed",
        "4",
        "--h",
        "0.15",
        "--set",
        "alpha_points=9",
    ]);
    let from_flags = (
        fs::read(out.join("rho-sweep.csv")).unwrap(),
        manifest_body(&out.join("rho-sweep.manifest")),
    );
    assert_eq!(from_file, from_flags);
    assert_eq!(table(&out.join("rho-sweep.csv")).len(), 9);

    // named flags override the file
    ok(&["rho-sweep", "--config", cfg.to_str().unwrap(), "--n", "40"]);
    assert!(fs::read_to_string(out.join("rho-sweep.manifest"))
        .unwrap()
        .contains("config.signal=synthetic-1d:40"));
}

#[test]
fn build_filter_on_an_image() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("tile.pgm");
    fs::write(
        &pgm,
        encode_pgm(&test_image(12, 12).unwrap(), PgmFormat::Binary).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&[
        "build-filter",
        "--image",
        pgm.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--patch",
        "3",
        "--h",
        "0.5",
    ]);
    let eig = table(&out.join("build-filter-eigs.csv"))
        .numbers("s")
        .unwrap();
    assert_eq!(eig.len(), 144);
    assert!(eig.iter().all(|&s| (-1e-8..=1.0 + 1e-8).contains(&s)));
    let w = table(&out.join("build-filter.csv"));
    let mut row_sums = vec![0.0; 144];
    for r in w.rows() {
        row_sums[r[0].as_f64().unwrap() as usize] += r[2].as_f64().unwrap();
    }
    assert!(row_sums.iter().all(|s| (s - 1.0).abs() < 1e-8));
    assert!(out.join("build-filter-signal.pgm").exists());
}

#[test]
fn missing_image_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pnpgl(&[
        "eigvals",
        "--image",
        "/nonexistent/x.pgm",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
