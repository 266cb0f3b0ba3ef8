//! End-to-end checks of the `solve` binary.

use std::path::Path;
use std::process::{Command, Output};

use mmdg::driver::output::{sha256_file, Checkpoint, RunManifest};
use sha2::{Digest, Sha256};

fn solve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solve")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = "[problem]\nname = \"ex3-2d\"\n\
                     [discretization]\ndegree = 1\nt_final = 0.005\n\
                     [mesh]\nelements = 72\nmode = \"moving\"\n\
                     [output]\ncheckpoint_every = 2\n";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_into(cfg: &str, out: &Path, extra: &[&str]) -> RunManifest {
    let o = out.to_string_lossy();
    let mut args = vec!["run", "--config", cfg, "--out", &o];
    args.extend_from_slice(extra);
    ok(&solve(&args));
    RunManifest::load(out).unwrap()
}

#[test]
fn runs_are_deterministic_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = run_into(&cfg, &tmp.path().join("a"), &["--trace-energy"]);
    let b = run_into(&cfg, &tmp.path().join("b"), &["--trace-energy"]);

    assert_eq!(a.steps, b.steps);
    assert_eq!(a.global_errors, b.global_errors);
    assert_eq!(a.init_adapt.len(), 5);
    assert!(a.outputs.iter().any(|f| f.path == "energy.csv"));
    // every file except the config (which names the output directory)
    // is bit-identical
    let strip = |m: &RunManifest| m.outputs.iter().filter(|f| f.path != "config.toml").map(|f| (f.path.clone(), f.sha256.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));

    for f in &a.outputs {
        let p = tmp.path().join("a").join(&f.path);
        assert_eq!(sha256_file(&p).unwrap(), f.sha256, "{}", f.path);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), f.bytes);
    }
    let digest = Sha256::digest(std::fs::read(tmp.path().join("a/diagnostics.csv")).unwrap());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert!(a.outputs.iter().any(|f| f.sha256 == hex));

    // checkpoints at 0, 2, 4 and the final step
    assert_eq!(Checkpoint::steps(&tmp.path().join("a")).unwrap(), vec![0, 2, 4, 5]);
    let (cp, field) = Checkpoint::load(&tmp.path().join("a"), None).unwrap();
    assert_eq!(cp.step, 5);
    assert_eq!(field.mesh.n_elements(), 72);
    assert!(!tmp.path().join("a").join("manifest.json.tmp").exists());
}

#[test]
fn overrides_and_bad_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let m = run_into(&cfg, &tmp.path().join("o"), &["--override", "discretization.t_final=0.002", "--override", "mesh.mode=\"fixed\"", "--init-adapt", "0"]);
    assert_eq!(m.steps.len(), 2);
    assert!(m.init_adapt.is_empty());
    assert_eq!(m.overrides.len(), 4);

    let bad = write_config(tmp.path(), "[problem]\nname = \"ex3-2d\"\n[mesh]\nelements = 8\ncolour = 3\n");
    let out = solve(&["run", "--config", &bad, "--out", &tmp.path().join("x").to_string_lossy()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = solve(&["run", "--config", &cfg, "--override", "nonsense"]);
    assert!(!out.status.success());
}

#[test]
fn cut_and_meshdump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("c");
    run_into(&cfg, &dir, &[]);
    let d = dir.to_string_lossy();

    let text = ok(&solve(&["cut", "--run", &d, "--axis", "y", "--value", "0.495", "--direction", "0"]));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,I_0,exact");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| (r[1] - 0.495).abs() < 1e-12));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    // coarse mesh, discontinuous solution: close on average, not pointwise
    let mean_err: f64 = rows.iter().map(|r| (r[2] - r[3]).abs()).sum::<f64>() / rows.len() as f64;
    assert!(mean_err < 0.1, "{mean_err}");

    let out = solve(&["cut", "--run", &d, "--axis", "y", "--value", "1.5"]);
    assert!(!out.status.success());

    let file = tmp.path().join("diag.csv");
    ok(&solve(&["cut", "--run", &d, "--slope", "1", "--intercept", "0", "--step", "2", "--out", &file.to_string_lossy()]));
    assert_eq!(std::fs::read_to_string(&file).unwrap().lines().count(), 1001);

    let listed = ok(&solve(&["meshdump", "--run", &d, "--step", "4"]));
    assert_eq!(listed.lines().count(), 2);
    for p in listed.lines() {
        assert!(Path::new(p).exists(), "{p}");
    }
    assert!(!solve(&["meshdump", "--run", &d, "--step", "3"]).status.success());
}

#[test]
fn converge_single_rung() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[problem]\nname = \"ex1-1d\"\n[discretization]\nt_final = 0.003\n\
                [output]\ndir = \"ladder\"\n\
                [ladder]\ndegrees = [1]\nelements = [16]\nmodes = [\"fixed\"]\n";
    let cfg = write_config(tmp.path(), text);
    let stdout = ok(&solve(&["converge", "--config", &cfg]));
    assert!(stdout.contains("ex1-1d,1,fixed,16,"));
    let csv = std::fs::read_to_string(tmp.path().join("ladder/convergence.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.contains(",n/a,n/a,"), "{row}");
    assert!(!tmp.path().join("ladder/failures.txt").exists());
}
