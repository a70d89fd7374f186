use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn jumpsas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpsas")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

fn outputs(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn divergence_table_from_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = jumpsas(&["fig-divergence", "--out", dir.path().to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs = outputs(dir.path(), "csv");
    assert_eq!(csvs.len(), 1);
    let name = csvs[0].file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.starts_with("fig-divergence_") && name.len() == "fig-divergence_".len() + 16 + 4, "{name}");
    let text = std::fs::read_to_string(&csvs[0]).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next(), Some("n_g,estimate"));
    for line in lines {
        let (n, e) = line.split_once(',').unwrap();
        assert_eq!(n.parse::<f64>().unwrap() - 1.0, e.parse::<f64>().unwrap());
    }
}

#[test]
fn plot_data_flag_adds_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.json"), r#"{"grid": [2, 3, 4], "constant": true}"#);
    let out_dir = dir.path().join("out");
    let out = jumpsas(&[
        "fig-divergence",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--plot-data",
    ]);
    assert!(out.status.success());
    let csvs = outputs(&out_dir, "csv");
    assert_eq!(csvs.len(), 2);
    let plot = std::fs::read_to_string(csvs.iter().find(|p| p.to_str().unwrap().ends_with("_plot.csv")).unwrap()).unwrap();
    assert!(plot.contains("series,x,y,lo,hi"));
    assert!(plot.contains("estimate,4,0,0,0"));
}

#[test]
fn malformed_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.json"), r#"{"replicates": "many"}"#);
    let out = jumpsas(&["fig-crossover", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let missing = jumpsas(&["fig-crossover", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_flag = jumpsas(&["no-such-command"]);
    assert_eq!(bad_flag.status.code(), Some(1));
}

#[test]
fn analyze_without_input_is_an_input_error() {
    let out = jumpsas(&["analyze"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir.path().join("d.csv"), "x1,x2,y\n0.1,0.2,1\n0.3,oops,2\n");
    let cfg = write(&dir.path().join("c.json"), &format!(r#"{{"input": {:?}}}"#, csv.to_str().unwrap()));
    let out = jumpsas(&["analyze", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn out_of_range_raw_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir.path().join("d.csv"), "a,b,y\n10,0.5,1\n50,0.2,2\n30,0.9,0\n");
    let ranges = write(
        &dir.path().join("r.json"),
        r#"[{"name": "a", "min": 0, "max": 40}, {"name": "b", "min": 0, "max": 1}]"#,
    );
    let cfg = write(
        &dir.path().join("c.json"),
        &format!(r#"{{"input": {:?}, "ranges": {:?}}}"#, csv.to_str().unwrap(), ranges.to_str().unwrap()),
    );
    let out = jumpsas(&["analyze", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
}

#[test]
fn constant_response_skips_bakeoff() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x1,x2,y\n");
    for i in 0..30 {
        let a = (i as f64 * 0.37) % 1.0;
        let b = (i as f64 * 0.61 + 0.1) % 1.0;
        text.push_str(&format!("{a},{b},2.5\n"));
    }
    let csv = write(&dir.path().join("d.csv"), &text);
    let cfg = write(
        &dir.path().join("c.json"),
        &format!(r#"{{"input": {:?}, "mc_samples": 500}}"#, csv.to_str().unwrap()),
    );
    let out_dir = dir.path().join("out");
    let out = jumpsas(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&outputs(&out_dir, "json")[0]);
    assert_eq!(report["subspace"]["degenerate"], true);
    assert!(report["bakeoff"]["status"].as_str().unwrap().starts_with("skipped"));
    assert!(outputs(&out_dir, "csv").iter().all(|p| !p.to_str().unwrap().contains("bakeoff")));
}

#[test]
fn analyze_recovers_generator_direction() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let gen = jumpsas(&["generate", "--seed", "17", "--out", data_dir.to_str().unwrap()]);
    assert!(gen.status.success());
    let truth = read_json(&outputs(&data_dir, "json")[0]);
    let u: Vec<f64> = truth["direction"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(truth["function"], "f3");
    assert_eq!(u.len(), 5);

    let csv = &outputs(&data_dir, "csv")[0];
    let cfg = write(&dir.path().join("c.json"), &format!(r#"{{"input": {:?}}}"#, csv.to_str().unwrap()));
    let out_dir = dir.path().join("out");
    let out = jumpsas(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--paper-mode"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&outputs(&out_dir, "json")[0]);
    let dim = report["subspace"]["selected_dim"].as_u64().unwrap();
    assert!((1..5).contains(&dim));
    let v: Vec<f64> = report["subspace"]["eigenvectors"][0]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let cos = v.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>().abs();
    assert!(cos >= 0.9, "cosine {cos}");
    assert_eq!(report["bakeoff"]["paper_mode"], true);
    assert!(report["bakeoff"]["full_data_dim"].as_u64().is_some());

    let csvs = outputs(&out_dir, "csv");
    let suffixes: Vec<&str> = csvs.iter().map(|p| p.file_stem().unwrap().to_str().unwrap().rsplit('_').next().unwrap()).collect();
    assert_eq!(suffixes, vec!["bakeoff", "loadings", "projection"]);
    let bake = std::fs::read_to_string(&csvs[0]).unwrap();
    assert_eq!(bake.lines().count(), 2 + 4 * 10 + 4);
    for m in ["Ident", "ASM", "ASMt", "SIR"] {
        assert!(bake.contains(&format!("\n{m},mean,")), "{m}");
    }
}

#[test]
fn verify_theory_reports_failures_without_crashing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.json"), r#"{"radii": [0.5]}"#);
    let out_dir = dir.path().join("out");
    let out = jumpsas(&["verify-theory", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&outputs(&out_dir, "json")[0]);
    assert_eq!(report["all_passed"], false);
    let checks = report["checks"].as_array().unwrap();
    let slope = checks.iter().find(|c| c["name"] == "r=0.5/slope_to_gradient").unwrap();
    assert_eq!(slope["passed"], false);
    let a1 = checks.iter().find(|c| c["name"] == "r=0.5/a_p_1").unwrap();
    assert_eq!(a1["passed"], true);
}

#[test]
fn verify_theory_defaults_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = jumpsas(&["verify-theory", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report = read_json(&outputs(dir.path(), "json")[0]);
    assert_eq!(report["all_passed"], true, "{}", String::from_utf8_lossy(&out.stdout));
}
