//! End-to-end exercises of the command-line surface: output determinism,
//! degenerate-ensemble equivalence, exit codes, and snapshot plumbing.

use std::path::Path;
use std::process::Command;

use chks::grid::{Field, Grid};
use chks::snapshot;

fn chks() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chks"))
}

const BASE_CFG: &str = "\
[grid]
nx = 16
ny = 16
lx = 4.0
ly = 4.0

[model]
chi = 0.4
lambda = 1.5
h = saturating 0.5 1.5 1.0
k = constant 0.4

[time]
dt = 0.02
t_end = 0.5
stride = 5

[init]
mode = sampler
seed = 11
m = 0.1
radius = 5.0
sigma_floor = 0.1
";

#[test]
fn identical_config_and_seed_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, BASE_CFG).unwrap();
    for out in ["a", "b"] {
        let status = chks()
            .arg("run")
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv_a = std::fs::read(dir.path().join("a/report.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/report.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let snap_a = std::fs::read(dir.path().join("a/phi_000001.chks")).unwrap();
    let snap_b = std::fs::read(dir.path().join("b/phi_000001.chks")).unwrap();
    assert_eq!(snap_a, snap_b);

    // a different seed changes the trajectory
    let status = chks()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("c"))
        .arg("--seed")
        .arg("12")
        .status()
        .unwrap();
    assert!(status.success());
    let csv_c = std::fs::read(dir.path().join("c/report.csv")).unwrap();
    assert_ne!(csv_a, csv_c);
}

#[test]
fn singleton_ensemble_reproduces_the_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        format!("{BASE_CFG}\n[ensemble]\nn_samples = 1\n"),
    )
    .unwrap();
    assert!(chks()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("single"))
        .status()
        .unwrap()
        .success());
    assert!(chks()
        .arg("ensemble")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("ens"))
        .status()
        .unwrap()
        .success());
    let a = std::fs::read(dir.path().join("single/report.csv")).unwrap();
    let b = std::fs::read(dir.path().join("ens/traj_00/report.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn equilibrium_file_init_keeps_report_rows_constant() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(16, 16, 4.0, 4.0).unwrap();
    // uniform phi = m and sigma at the logistic fixed point k/h of the
    // constant-coefficient model below
    let phi_path = dir.path().join("phi0.chks");
    let sigma_path = dir.path().join("sigma0.chks");
    snapshot::write_snapshot(&phi_path, &Field::constant(grid, 0.1), 0.0).unwrap();
    snapshot::write_snapshot(&sigma_path, &Field::constant(grid, 0.4), 0.0).unwrap();
    let cfg = format!(
        "[grid]\nnx = 16\nny = 16\nlx = 4.0\nly = 4.0\n\
         [model]\nchi = 0.0\nlambda = 1.0\nh = constant 1.0\nk = constant 0.4\n\
         [time]\ndt = 0.02\nt_end = 0.5\nstride = 5\n\
         [init]\nmode = files\nphi = {}\nsigma = {}\n",
        phi_path.display(),
        sigma_path.display()
    );
    let cfg_path = dir.path().join("eq.cfg");
    std::fs::write(&cfg_path, cfg).unwrap();
    assert!(chks()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("eq"))
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(dir.path().join("eq/report.csv")).unwrap();
    let mut rows = csv.lines();
    let header = rows.next().unwrap();
    let t_col = header.split(',').position(|c| c == "t").unwrap();
    let first: Vec<f64> = rows
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    for row in csv.lines().skip(2) {
        for (i, v) in row.split(',').enumerate() {
            if i == t_col {
                continue;
            }
            let v: f64 = v.parse().unwrap();
            assert!(
                (v - first[i]).abs() <= 1e-10 * first[i].abs().max(1.0),
                "column {i} drifted: {} -> {v}",
                first[i]
            );
        }
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // validation error: bad config
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[model]\nchi = -2\n").unwrap();
    let out = chks().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("chi"), "stderr: {stderr}");

    // unknown verify level is a validation error
    let out = chks().arg("verify").arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // verify succeeds on the operators level
    let out = chks().arg("verify").arg("operators").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 15);
}

#[test]
fn config_errors_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[model]\nchi = -2\nmystery = 1\n[grid]\nnx = 2\n").unwrap();
    let out = chks().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for needle in ["chi", "mystery", "nx"] {
        assert!(stderr.contains(needle), "missing '{needle}' in: {stderr}");
    }
}

#[test]
fn manifest_records_compatibility_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, BASE_CFG).unwrap();
    assert!(chks()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("m"))
        .status()
        .unwrap()
        .success());
    let manifest = std::fs::read_to_string(dir.path().join("m/manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("compatibility = pass"));
    assert!(manifest.contains("status = completed"));

    // snapshots written by the run load back on the same grid
    let (phi, t) =
        snapshot::read_snapshot(Path::new(&dir.path().join("m/phi_000001.chks"))).unwrap();
    assert!(t > 0.0);
    assert_eq!(phi.grid().nx(), 16);
}

#[test]
fn tabulated_potential_loads_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("beta.tab");
    let rows: String = (0..201)
        .map(|i| {
            let r = -0.95 + 1.9 * i as f64 / 200.0;
            format!("{r} {}\n", ((1.0 + r) / (1.0 - r)).ln())
        })
        .collect();
    std::fs::write(&table, rows).unwrap();
    let cfg = format!(
        "[grid]\nnx = 16\nny = 16\nlx = 4.0\nly = 4.0\n\
         [model]\nchi = 0.3\nlambda = 1.0\npotential = tabulated {}\n\
         h = constant 1.0\nk = constant 0.4\n\
         [time]\ndt = 0.02\nt_end = 0.2\nstride = 5\n\
         [init]\nmode = sampler\nseed = 3\nm = 0.1\nradius = 5.0\nsigma_floor = 0.1\n",
        table.display()
    );
    let cfg_path = dir.path().join("tab.cfg");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = chks()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("tab_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("tab_out/report.csv").exists());

    // a non-monotone table is rejected as a validation error
    std::fs::write(&table, "-0.5 0.5\n0.0 0.0\n0.5 1.0\n").unwrap();
    let out = chks().arg("run").arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
