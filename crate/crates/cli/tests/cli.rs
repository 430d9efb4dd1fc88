use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use neutral_cli::{Classification, DepolReport, EffectiveReport, PackReport, VerifyReport};
use serde::de::DeserializeOwned;
use tempfile::TempDir;

const SPHERE_P2: &str = r#"{"geometry": {"sphere": {"r_c": 0.7937005259840998, "r_e": 1.0}},
    "materials": {"sigma1": 10, "sigma2": 1, "p": 2, "E": 1}}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, json: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, json).unwrap();
        p
    }

    fn run(&self, cmd: &str, config: &Path, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_neutral-inclusions"))
            .arg(cmd)
            .arg("--config")
            .arg(config)
            .args(extra)
            .env("NEUTRAL_INCLUSIONS_THREADS", "1")
            .output()
            .unwrap()
    }
}

fn ok<T: DeserializeOwned>(out: &Output) -> T {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn depol_sphere_and_prolate() {
    let ws = Workspace::new();
    let r: DepolReport = ok(&ws.run("depol", &ws.config("s.json", r#"{"geometry": {"axes": [1, 1, 1]}}"#), &[]));
    assert_eq!(r.ellipsoid.d, [1.0 / 3.0; 3]);
    assert!(r.core.is_none());
    let r: DepolReport = ok(&ws.run("depol", &ws.config("p.json", r#"{"geometry": {"axes": [2, 1, 1]}}"#), &[]));
    assert!((r.ellipsoid.d[0] - 0.17356399753396423).abs() < 1e-13);
    let r: DepolReport = ok(&ws.run("depol", &ws.config("c.json", SPHERE_P2), &[]));
    assert!((r.theta1.unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn bad_configs_exit_with_code_2() {
    let ws = Workspace::new();
    let neg = ws.config("neg.json", r#"{"geometry": {"axes": [-1, 1, 1]}}"#);
    let out = ws.run("depol", &neg, &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));

    let singular = ws.config(
        "e0.json",
        r#"{"geometry": {"sphere": {"r_c": 0.5, "r_e": 1}}, "materials": {"sigma1": 10, "sigma2": 1, "p": 1.5, "E": 0}}"#,
    );
    let out = ws.run("effective", &singular, &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("E = 0"));

    let sphere = ws.config("s.json", SPHERE_P2);
    assert_eq!(code(&ws.run("verify", &sphere, &["--grid-n", "8"])), 2);
    assert_eq!(code(&ws.run("effective", &sphere, &["--axis", "4"])), 2);
    assert_eq!(code(&ws.run("effective", &ws.path("missing.json"), &[])), 2);
    assert_eq!(code(&ws.run("effective", &ws.config("junk.json", "{not json"), &[])), 2);
}

#[test]
fn effective_reports() {
    let ws = Workspace::new();
    let r: EffectiveReport = ok(&ws.run("effective", &ws.config("s.json", SPHERE_P2), &[]));
    assert_eq!(r.axes.len(), 3);
    for a in &r.axes {
        assert!((a.sigma_star - 2.8).abs() < 1e-12);
    }
    assert!((r.hashin_shtrikman.unwrap() - 2.8).abs() < 1e-12);

    let cubic = ws.config(
        "p3.json",
        r#"{"geometry": {"sphere": {"r_c": 0.7937005259840998, "r_e": 1.0}},
            "materials": {"sigma1": 10, "sigma2": 1, "p": 3, "E": 1}}"#,
    );
    let r: EffectiveReport = ok(&ws.run("effective", &cubic, &["--axis", "2"]));
    assert_eq!(r.axes.len(), 1);
    assert!(r.axes[0].f_x0.abs() < 1e-12);
    assert!((r.axes[0].sigma_star - 2.308176910585044).abs() < 1e-11);
}

#[test]
fn report_written_to_file_round_trips() {
    let ws = Workspace::new();
    let out_path = ws.path("report.json");
    let out = ws.run("effective", &ws.config("s.json", SPHERE_P2), &["--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let r: EffectiveReport = serde_json::from_str(&text).unwrap();
    let again: EffectiveReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(r, again);
}

#[test]
fn verify_neutral_and_control() {
    let ws = Workspace::new();
    let cfg = ws.config("s.json", SPHERE_P2);
    let csv = ws.path("u.csv");
    let neutral: VerifyReport = ok(&ws.run("verify", &cfg, &["--grid-n", "32", "--axis", "1", "--csv", csv.to_str().unwrap()]));
    assert!(neutral.metrics.converged);
    assert_eq!(neutral.classification, Classification::Neutral);
    assert!(neutral.analytic.max_relative_interface < 1e-8);
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 32 * 32 * 32 + 1);

    let control: VerifyReport = ok(&ws.run("verify", &cfg, &["--grid-n", "32", "--axis", "1", "--control"]));
    assert_eq!(control.classification, Classification::NonNeutral);
    assert_eq!(control.matrix_conductivity, 1.0);
    assert!(control.metrics.uniformity_max_u > 5.0 * neutral.metrics.uniformity_max_u);
}

#[test]
fn verify_cap_exits_with_code_3() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "cap.json",
        r#"{"geometry": {"sphere": {"r_c": 0.7937005259840998, "r_e": 1.0}},
            "materials": {"sigma1": 5, "sigma2": 1, "p": 2.5, "E": 1},
            "run": {"max_iter": 1}}"#,
    );
    let out = ws.run("verify", &cfg, &["--grid-n", "16", "--axis", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn pack_is_seed_deterministic() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "pack.json",
        r#"{"geometry": {"volume_fraction": {"exterior": [0.8, 1.0, 1.25], "theta1": 0.5}},
            "materials": {"sigma1": 10, "sigma2": 1},
            "run": {"target_fill": 0.3, "lambda0": 0.2, "max_inclusions": 200}}"#,
    );
    let a = ws.run("pack", &cfg, &["--seed", "4"]);
    let b = ws.run("pack", &cfg, &["--seed", "4"]);
    let c = ws.run("pack", &cfg, &["--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let r: PackReport = ok(&a);
    r.assemblage.validate().unwrap();
    assert!(r.assemblage.inclusions.len() > 1);
    assert!((r.theta1 - 0.5).abs() < 1e-12);
}

#[test]
fn sweep_writes_csv() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "sweep.json",
        r#"{"geometry": {"sphere": {"r_c": 0.5, "r_e": 1.0}},
            "materials": {"sigma1": 10, "sigma2": 1},
            "run": {"axis": 1, "sweep": {"parameter": "theta1", "values": [0.1, 0.3, 0.5, 0.7, 0.9]}}}"#,
    );
    let csv = ws.path("sweep.csv");
    let out = ws.run("sweep", &cfg, &["--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,axis,theta1,k,x0,a1,sigma_star"));
    let sigma: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(sigma.len(), 5);
    assert!(sigma.windows(2).all(|w| w[1] > w[0]));
    let hs = |t: f64| 1.0 + 3.0 * t * 9.0 / (3.0 + (1.0 - t) * 9.0);
    assert!((sigma[2] - hs(0.5)).abs() < 1e-12);
}
