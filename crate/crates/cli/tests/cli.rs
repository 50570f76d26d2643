use std::path::Path;
use std::process::Command;

use invmed_cli::config::{resolve, ConfigPatch, ExperimentName, LayoutName, RunConfig};
use invmed_cli::heatmap::{encode_pgm, select_part, write_heatmap, Part, Sidecar};
use invmed_core::fld::FieldData;
use invmed_core::phantoms::two_gauss_test;
use invmed_core::{ComplexField, Grid, RealField};

fn invmed(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_invmed")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn error_kind(stderr: &str) -> String {
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    v["error"].as_str().unwrap().to_string()
}

fn small(name: ExperimentName) -> ConfigPatch {
    ConfigPatch::from_toml(&format!(
        "experiment = \"{}\"\nseed = 4\nn = 33\nfine_n = 65\nM = 4\nN = 8\n[lbfgs]\nmax_iter = 2\n",
        serde_json::to_value(name).unwrap().as_str().unwrap()
    ))
    .unwrap()
}

#[test]
fn presets_follow_the_scenarios() {
    let simple = RunConfig::preset(ExperimentName::Simple);
    assert_eq!((simple.phantom.as_str(), simple.magnitude, simple.k), ("two_gauss", 0.1, 40.0));
    assert_eq!((simple.n, simple.fine_n, simple.sources, simple.receivers), (129, 1025, 64, 64));
    assert!(simple.is_noiseless());
    assert_eq!(simple.lbfgs.max_iter, 15);
    assert_eq!(simple.lbfgs.max_linesearch, 20);
    assert_eq!(RunConfig::preset(ExperimentName::Magnitude).magnitude, 0.4);
    let geometry = RunConfig::preset(ExperimentName::Geometry);
    assert_eq!(geometry.magnitude, 0.6);
    let noise = RunConfig::preset(ExperimentName::Noise);
    assert_eq!((noise.phantom.as_str(), noise.magnitude, noise.snr_db), ("austria", 0.5, 5.0));
    assert_eq!(RunConfig::preset(ExperimentName::Layout).layout, LayoutName::Arc);
    let wave = RunConfig::preset(ExperimentName::Wavenumber);
    assert_eq!((wave.phantom.as_str(), wave.snr_db), ("small_cluster", 5.0));
}

#[test]
fn flags_override_the_file_which_overrides_the_preset() {
    let file = ConfigPatch::from_toml("k = 20.0\nn = 65\nfine_n = 129\nseed = 1\n").unwrap();
    let flags = ConfigPatch { n: Some(33), ..Default::default() };
    let c = resolve(Some(ExperimentName::Noise), Some(file), flags).unwrap();
    assert_eq!((c.k, c.n, c.fine_n, c.magnitude), (20.0, 33, 129, 0.5));
}

#[test]
fn config_errors_are_caught_before_any_work() {
    assert!(ConfigPatch::from_toml("wavenumber = 3.0\n").is_err());
    let e = resolve(Some(ExperimentName::Noise), None, ConfigPatch::default()).unwrap_err();
    assert_eq!(e.kind, "usage");
    let bad = ConfigPatch { fine_n: Some(130), ..Default::default() };
    assert_eq!(resolve(Some(ExperimentName::Simple), None, bad).unwrap_err().kind, "validation");
    let file = ConfigPatch::from_toml("experiment = \"noise\"\n").unwrap();
    assert!(resolve(Some(ExperimentName::Simple), Some(file), ConfigPatch::default()).is_err());
    let bad = ConfigPatch { phantom: Some("teapot".into()), ..Default::default() };
    assert!(resolve(Some(ExperimentName::Simple), None, bad).is_err());
}

#[test]
fn snapshot_round_trips_including_noiseless_data() {
    for name in ExperimentName::ALL {
        let c = resolve(Some(name), Some(small(name)), ConfigPatch::default()).unwrap();
        let text = c.to_toml().unwrap();
        let back = resolve(None, Some(ConfigPatch::from_toml(&text).unwrap()), ConfigPatch::default())
            .unwrap();
        assert_eq!(back, c);
    }
    let simple = RunConfig::preset(ExperimentName::Simple);
    assert!(simple.to_toml().unwrap().contains("snr_db = inf"));
}

#[test]
fn heatmap_examples() {
    let grid = Grid::unit(5).unwrap();
    let (bytes, min, max) = encode_pgm(&RealField::from_fn(grid, |_, _| 0.3));
    assert!(bytes.starts_with(b"P5\n5 5\n255\n"));
    assert!(bytes[11..].iter().all(|&b| b == 128));
    assert_eq!((min, max), (0.3, 0.3));
    let (bytes, min, max) = encode_pgm(&RealField::zeros(grid));
    assert!(bytes[11..].iter().all(|&b| b == 0));
    assert_eq!((min, max), (0.0, 0.0));
    // Top image row is y = 1.
    let (bytes, _, _) = encode_pgm(&RealField::from_fn(grid, |_, y| y));
    assert_eq!(&bytes[11..16], &[255; 5]);
    assert_eq!(&bytes[31..36], &[0; 5]);

    let dir = tempfile::tempdir().unwrap();
    let q = two_gauss_test(Grid::unit(33).unwrap(), 0.1).unwrap();
    write_heatmap(&q, Part::Real, dir.path(), "q").unwrap();
    let side: Sidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("q.json")).unwrap()).unwrap();
    let lo = q.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = q.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((side.min, side.max, side.part), (lo, hi, Part::Real));

    let c = FieldData::Complex(ComplexField::zeros(grid));
    assert_eq!(select_part(c.clone(), None).unwrap_err().kind, "usage");
    assert_eq!(select_part(c, Some(Part::Imag)).unwrap().1, Part::Imag);
}

#[test]
fn randomized_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, err) = invmed(&["phantom", "--name", "gaussian_mixture", "--out", out]);
    assert_eq!((code, error_kind(&err).as_str()), (2, "usage"));
    let (code, _, err) = invmed(&["experiment", "noise", "--out", out]);
    assert_eq!((code, error_kind(&err).as_str()), (2, "usage"));
    let (code, _, err) = invmed(&["phantom", "--bogus"]);
    assert_eq!((code, error_kind(&err).as_str()), (2, "usage"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let (code, _, err) = invmed(&["phantom", "--name", "two_gauss", "--n", "33", "--out", &p("q")]);
    assert_eq!(code, 0, "{err}");
    let q = p("q/q.fld");
    let (code, stdout, _) =
        invmed(&["forward", "--q", &q, "--k", "10", "--solver", "neumann", "--L", "3", "--out", &p("f")]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["diagnostics"]["order"], 3);
    let (code, _, err) = invmed(&["heatmap", "--field", &p("f/us.fld"), "--out", &p("img")]);
    assert_eq!((code, error_kind(&err).as_str()), (2, "usage"));
    let (code, _, _) =
        invmed(&["heatmap", "--field", &p("f/us.fld"), "--part", "abs", "--out", &p("img")]);
    assert_eq!(code, 0);
    assert!(Path::new(&p("img/us.pgm")).exists());

    let common = ["--k", "10", "--fine-n", "65", "--M", "4", "--N", "8"];
    let m_dir = p("m");
    let mut args = vec!["measure", "--q", &q, "--out", &m_dir];
    args.extend(common);
    assert_eq!(invmed(&args).0, 0);
    let data = p("m/data.msr");
    let (code, _, err) = invmed(&["invert", "--data", &data, "--n", "33", "--k", "12", "--out", &p("i")]);
    assert_eq!((code, error_kind(&err).as_str()), (1, "validation"));
    assert!(!Path::new(&p("i")).exists());
    let (code, stdout, err) = invmed(&[
        "invert", "--data", &data, "--n", "33", "--truth", &q, "--max-iter", "3", "--out", &p("i"),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(v["final_j"].as_f64().unwrap() < v["initial_j"].as_f64().unwrap());
    let (code, stdout, _) = invmed(&["metrics", "--rec", &p("i/q_rec.fld"), "--truth", &q]);
    assert_eq!(code, 0);
    let m: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(m["rel_err"], v["metrics"]["rel_err"]);
}

#[test]
fn experiment_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = resolve(None, Some(small(ExperimentName::Layout)), ConfigPatch::default()).unwrap();
    let report = invmed_cli::experiment::run(&config, dir.path()).unwrap();
    for f in [
        "config.toml", "q_true.fld", "data.msr", "q_rec.fld", "history.csv", "q_true.pgm",
        "q_true.json", "q_rec.pgm", "q_rec.json", "summary.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    for key in ["phantom", "k", "snr_db", "rel_err", "ssim", "n_fev", "elapsed_s"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["phantom"], "austria");
    assert_eq!(report.state.history.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(csv.starts_with("iter,J,grad_norm,rel_err,n_fev,elapsed_s\n"));
}
