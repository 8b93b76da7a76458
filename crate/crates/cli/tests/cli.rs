//! End-to-end runs of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-modes"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = bin().args(args).arg("--out").arg(out).output().expect("binary runs");
    if !o.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&o.stderr));
    }
    o
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

/// Rows of a CSV as (header, values); empty cells become NaN.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn golden_response_is_reproduced_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("golden_response.json");
    assert!(run(&["response", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let got = std::fs::read(dir.path().join("response.csv")).unwrap();
    assert!(got == std::fs::read(data("golden_response.csv")).unwrap(), "response.csv differs from the committed file");
}

#[test]
fn golden_fits_are_reproduced_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("golden_fit.json");
    assert!(run(&["fit", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let got = std::fs::read(dir.path().join("fits.csv")).unwrap();
    assert!(got == std::fs::read(data("golden_fits.csv")).unwrap(), "fits.csv differs from the committed file");
}

#[test]
fn response_peaks_near_design_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"stack": {"n_pairs": 2, "ell_c": 1.0}, "response": {"points": 801}}"#);
    assert!(run(&["response", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let (h, rows) = table(&dir.path().join("response.csv"));
    let (w, a) = (column(&h, "omega"), column(&h, "abs_T"));
    let top = rows.iter().max_by(|x, y| x[a].total_cmp(&y[a])).unwrap();
    assert!((top[w] / std::f64::consts::PI - 1.0).abs() < 0.01, "peak at {}", top[w]);
    assert!(h.iter().any(|c| c.starts_with("abs_Tm")), "no Lorentzian columns in {h:?}");
}

#[test]
fn no_mirror_means_unit_response() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"stack": {"n_pairs": 0}, "response": {"points": 101}}"#);
    assert!(run(&["response", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let (h, rows) = table(&dir.path().join("response.csv"));
    assert_eq!(h.len(), 4);
    assert!(rows.iter().all(|r| (r[3] - 1.0).abs() < 1e-12));
}

#[test]
fn fit_sweep_trends() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fit", "--sweep", "N=2..12", "--sweep", "ellc=1.75,2,10"], dir.path());
    assert!(o.status.success());
    let (h, rows) = table(&dir.path().join("fits.csv"));
    let (n, l, r, e) = (column(&h, "N"), column(&h, "ell_c"), column(&h, "r_eff"), column(&h, "overlap_error"));
    assert_eq!(rows.len(), 33);
    // rows come in sweep order: N outer, ell_c inner
    assert!(rows.windows(2).all(|w| w[0][n] <= w[1][n]));
    let at = |len: f64| -> Vec<&Vec<f64>> { rows.iter().filter(|row| row[l] == len).collect() };
    let ten = at(10.0);
    assert!(ten.windows(2).all(|w| w[1][r] > w[0][r]), "r_eff not increasing with N");
    for (odd, even) in at(1.75).iter().zip(at(2.0)) {
        assert_eq!(odd[n], even[n]);
        assert!(odd[e] > even[e], "N = {}: overlap {} at 1.75 vs {} at 2", odd[n], odd[e], even[e]);
    }
}

#[test]
fn synthetic_lorentzian_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"fit": {"synthetic": [{"omega_m": 2.9, "kappa_m": 0.02, "L_N": 7.5}]}, "sweep": {"n_pairs": [8]}}"#,
    );
    assert!(run(&["fit", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("fits.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("synthetic"))
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap_or(f64::NAN))
        .collect();
    assert!((row[2] - 2.9).abs() < 1e-9 && (row[3] / 0.02 - 1.0).abs() < 1e-6 && (row[4] / 7.5 - 1.0).abs() < 1e-6, "{row:?}");
}

#[test]
fn failed_fits_are_tagged_rows() {
    let dir = tempfile::tempdir().unwrap();
    // N = 0 has no resonance; N = 8 does
    let o = run(&["fit", "--sweep", "N=0,8"], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("fits.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[1].ends_with('"') && lines[1].contains("error"), "{}", lines[1]);
    assert!(lines[2].starts_with("8,") && lines[2].ends_with(','));
    // every point failing is a numerical failure
    let o = run(&["fit", "--sweep", "N=0"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", "/nonexistent/config.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));

    let cfg = write_config(dir.path(), r#"{"atom": {"x_a": -12.0}}"#);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("atom.x_a"));

    let cfg = write_config(dir.path(), r#"{"stack": {"n_pairs": 4, "ell_c": 1.0}, "integrator": {"t_max": 1e9}}"#);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["fit", "--sweep", "M=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["fit", "--out"]).arg(dir.path()).env("CAVITY_MODES_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    // output path blocked by a file
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let o = run(&["response"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn uncoupled_emitter_gives_flat_populations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"stack": {"n_pairs": 4, "ell_c": 1.0}, "atom": {"dipole_scale": 0.0, "x_a": -0.5},
            "integrator": {"t_max": 100.0}, "outputs": ["populations"]}"#,
    );
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--representation", "inout"], dir.path());
    assert!(o.status.success());
    let (h, rows) = table(&dir.path().join("populations.csv"));
    assert_eq!(h, ["t", "P_g", "P_e", "P_f10", "P_f01", "P_sum"]);
    assert!(rows.len() > 10);
    for r in &rows {
        assert_eq!(&r[1..], &[0.0, 1.0, 0.0, 0.0, 1.0]);
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["atom"]["dipole_scale"], 0.0);
    assert!(summary["true_mode"].is_null());
}

#[test]
fn low_reflectivity_run_in_both_pictures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"stack": {"n_pairs": 4, "ell_c": 1.0}, "atom": {"dipole_scale": 0.01, "x_a": -0.5}}"#);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());

    let (h, rows) = table(&dir.path().join("populations.csv"));
    let (f10, f01, f1) = (column(&h, "P_f10"), column(&h, "P_f01"), column(&h, "Pt_f1"));
    let worst = rows.iter().map(|r| (r[f1] - r[f10] - r[f01]).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "photon populations disagree by {worst}");

    let (h, rows) = table(&dir.path().join("spectrum.csv"));
    assert_eq!(h, ["omega", "P_outs", "P_outs_fourier", "P_outs_true"]);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())));

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let l2 = summary["l2_inout_vs_true"].as_f64().unwrap();
    assert!(l2 > 0.01, "expected a visible mismatch, got {l2}");
    assert!(summary["inout"]["norm_drift"].as_f64().unwrap() < 1e-8);
    assert!((summary["photon_number"].as_f64().unwrap() - 1.0).abs() < 0.02);
    assert_eq!(summary["spectrum_stale"], false);

    let (h, rows) = table(&dir.path().join("spatial.csv"));
    assert_eq!(h[0], "x");
    assert_eq!(h.len(), 4);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| *v >= 0.0)));
}

#[test]
fn calibration_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["calibrate-index"], dir.path());
    assert!(o.status.success());
    let c: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("calibration.json")).unwrap()).unwrap();
    assert!((c["r_eff"].as_f64().unwrap() - 0.953).abs() < 1e-6);
    assert!((c["n_high"].as_f64().unwrap() - 1.2487822906).abs() < 1e-6);
}
