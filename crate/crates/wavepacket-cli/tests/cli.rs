use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wavepacket_cli::manifest::blob_hash;

struct Scratch(tempfile::TempDir);

impl Scratch {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, f: &str) -> PathBuf {
        self.0.path().join(f)
    }

    fn write(&self, f: &str, text: &str) -> PathBuf {
        let p = self.path(f);
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wavepacket"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

/// A small residual setup: 4 pi slow domain and 64 slow nodes.
const SMALL: &str = "\
envelope = gaussian
slow_length = 4pi
slow_points = 64
points_per_wavelength = 16
eps = 0.1, 0.2, 0.4
";

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn malformed_config_is_rejected() {
    let s = Scratch::new();
    let bad = s.write("bad.cfg", "k = 1\nthis line has no equals sign\n");
    let o = run(&["residuals"], Some(&bad), &s.path("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let unknown = s.write("unknown.cfg", "wavenumber = 1\n");
    assert_eq!(run(&["residuals"], Some(&unknown), &s.path("out")).status.code(), Some(2));

    let junk = s.write("junk.cfg", "eta = lots\n");
    assert_eq!(run(&["residuals"], Some(&junk), &s.path("out")).status.code(), Some(2));
}

#[test]
fn incommensurate_domain_is_rejected() {
    let s = Scratch::new();
    let cfg = s.write("c.cfg", &format!("{SMALL}eps = 0.3\n"));
    let o = run(&["residuals"], Some(&cfg), &s.path("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!s.path("out").join("manifest.json").exists());
}

#[test]
fn zero_envelope_sits_at_the_floor() {
    let s = Scratch::new();
    let cfg = s.write("c.cfg", &format!("{SMALL}eta = 0\n"));
    let out = s.path("out");
    let o = run(&["residuals"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("residuals.csv"));
    assert_eq!(rows.len(), 5 * 3);
    for r in &rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[4], "floor");
    }
}

#[test]
fn single_eps_reports_no_slope() {
    let s = Scratch::new();
    let cfg = s.write("c.cfg", SMALL);
    let out = s.path("out");
    let o = run(&["residuals", "--eps-list", "0.2"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&out.join("slopes.csv"));
    assert!(rows.iter().all(|r| r[1].is_empty()), "{rows:?}");
}

#[test]
fn zero_horizon_evolution_reports_the_initial_row() {
    let s = Scratch::new();
    let out = s.path("out");
    let o = run(&["evolve", "--eps-list", "0.1", "--t-horizon", "0"], None, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("run_eps_0.1.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(csv_rows(&out.join("admissible.csv")).len(), 1);
}

#[test]
fn manifest_hashes_match_the_outputs() {
    let s = Scratch::new();
    let out = s.path("out");
    let o = run(&["nls-check"], None, &out);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["subcommand"], "nls-check");
    let outputs = v["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for f in outputs {
        let bytes = std::fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["blob_sha256"].as_str().unwrap(), blob_hash(&bytes));
    }
    assert!(v["config"].as_str().unwrap().contains("nls_step"));
}

#[test]
fn envelope_file_round_trip() {
    let s = Scratch::new();
    let mut rows = String::from("# re, im\n");
    for j in 0..64 {
        let x = 4.0 * std::f64::consts::PI * j as f64 / 64.0 - 2.0 * std::f64::consts::PI;
        rows.push_str(&format!("{}, 0\n", (-x * x).exp()));
    }
    let env = s.write("env.csv", &rows);
    let from_file = s.write(
        "file.cfg",
        &format!("{SMALL}envelope = file:{}\neps = 0.2\n", env.display()),
    );
    let gaussian = s.write("gauss.cfg", &format!("{SMALL}eps = 0.2\n"));
    let a = run(&["residuals"], Some(&from_file), &s.path("a"));
    let b = run(&["residuals"], Some(&gaussian), &s.path("b"));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let ra = csv_rows(&s.path("a").join("residuals.csv"));
    let rb = csv_rows(&s.path("b").join("residuals.csv"));
    for (x, y) in ra.iter().zip(&rb) {
        let (x, y) = (x[3].parse::<f64>().unwrap(), y[3].parse::<f64>().unwrap());
        assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} vs {y}");
    }
}
