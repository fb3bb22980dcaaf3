//! End-to-end tests of the `shallow-rates` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_shallow-rates");

const SMALL: &str = r#"
[experiment]
method = "plain"
m = 1
n_grid = [16, 32, 64]
seeds = [1, 2]
n_quad = 512

[activation]
label = "gaussian"

[target]
d = 1
spec = "gaussian(1.0, 0.3)"
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

#[test]
fn rate_writes_versioned_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run("rate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rate = lines(&out.join("rate.csv"));
    assert_eq!(rate[0], "method,d,m,activation,target,n,seed,error,std_error,wall_ms");
    assert_eq!(rate.len(), 1 + 3 * 2);
    assert!(rate[1].starts_with("plain,1,1,gaussian,\"gaussian(1.0, 0.3)\",16,1,"));
    assert!(rate[1..].iter().all(|l| l.ends_with(",0")));

    let fit = lines(&out.join("fit.csv"));
    assert_eq!(fit[0], "method,slope,intercept,residual,n_min,n_max");
    assert_eq!(fit.len(), 2);
    assert!(fit[1].starts_with("plain,") && fit[1].ends_with(",16,64"));

    let dat = lines(&out.join("fit.dat"));
    assert!(dat[0].starts_with('#'));
    assert_eq!(dat.len(), 1 + 3);

    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["schema_version"].as_integer(), Some(1));
}

#[test]
fn single_n_has_no_fit_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("n_grid = [16, 32, 64]", "n_grid = [16]"));
    let out = dir.path().join("out");
    assert!(run("rate", &cfg, &out, &[]).status.success());
    assert_eq!(lines(&out.join("fit.csv")).len(), 1);
    assert_eq!(lines(&out.join("rate.csv")).len(), 3);
}

#[test]
fn rate_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut seen = Vec::new();
    for (i, t) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        assert!(run("rate", &cfg, &out, &["--threads", t]).status.success());
        seen.push((fs::read(out.join("rate.csv")).unwrap(), fs::read(out.join("fit.csv")).unwrap()));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_offset_changes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run("rate", &cfg, &a, &[]).status.success());
    assert!(run("rate", &cfg, &b, &["--seed-offset", "10"]).status.success());
    let rb = lines(&b.join("rate.csv"));
    assert!(rb[1].contains(",16,11,"));
    assert_ne!(lines(&a.join("rate.csv"))[1], rb[1]);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (body, line, needle) in [
        (SMALL.replace("label = \"gaussian\"", "label = \"cos\""), 10, "decaying"),
        (SMALL.replace("m = 1", "m = 7"), 4, "m = 7"),
        (SMALL.replace("n_quad = 512", "n_quad = 512\nflavour = 1"), 8, "flavour"),
        (SMALL.replace("label = \"gaussian\"", "label = \"nope\""), 10, "nope"),
    ] {
        let cfg = write_config(dir.path(), &body);
        let o = run("rate", &cfg, &out, &[]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(&format!("config:{line}:")) && err.contains(needle), "{err}");
        assert!(err.starts_with("error: Config"), "{err}");
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("rate", &dir.path().join("absent.toml"), dir.path(), &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Io"));
}

#[test]
fn verify_passes_for_a_decaying_setup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    for check in ["envelope_domination", "triangle_bound", "envelope_integral", "normalization", "representation_identity", "smoothness_bound"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(check)), "{check} missing:\n{text}");
    }
    let csv = lines(&out.join("verify.csv"));
    assert_eq!(csv[0], "check,value,threshold,passed");
    assert_eq!(csv.len(), 7);
}

#[test]
fn verify_fails_on_the_approx_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[experiment]
method = "approx"
m = 0
n_grid = [64]
seeds = [1]

[activation]
label = "sinc"

[target]
d = 1
spec = "gaussian(1.0, 0)"
"#;
    let cfg = write_config(dir.path(), body);
    let o = run("verify", &cfg, &dir.path().join("out"), &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL approx_epsilon_ratio"));
}

#[test]
fn norms_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("gaussian(1.0, 0.3)", "gaussian(1.0, 0)"));
    let out = dir.path().join("out");
    assert!(run("norms", &cfg, &out, &[]).status.success());
    let rows = lines(&out.join("norms.csv"));
    assert_eq!(rows[0], "norm,order,value,std_error,status");
    // B^0..B^3 and H^1.
    assert_eq!(rows.len(), 1 + 4 + 1);
    let b0: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    let b1: f64 = rows[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!((b0 - 1.0).abs() < 1e-9);
    assert!((b1 - 1.0 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
    assert!(rows[5].starts_with("sobolev,1,"));
}

#[test]
fn sample_dumps_one_file_per_job() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[experiment]
method = "stratified"
m = 0
n_grid = [16]
seeds = [3, 4]

[activation]
label = "relu-dd"

[target]
d = 1
spec = "gaussian(3.0, 0)"
"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let o = run("sample", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [3, 4] {
        let rows = lines(&out.join(format!("samples_n16_seed{seed}.csv")));
        assert_eq!(rows[0], "index,cell_id,omega_1,b,eta");
        assert!(rows.len() > 16);
        assert!(rows[1..].iter().all(|r| !r.split(',').nth(1).unwrap().is_empty()));
    }
}
