use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mpdse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpdse"))
        .args(args)
        .current_dir(dir)
        .env_remove("MPDSE_CALIB")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TOY: &str = r#"{
  "name": "toy",
  "layers": [
    {"name": "c1", "ih": 14, "iw": 16, "od": 24, "k": 3, "s": 1,
     "wq": [{"channels": 8, "bits": 1}, {"channels": 16, "bits": 4}]}
  ]
}"#;

#[test]
fn help_documents_flags() {
    let dir = tempfile::tempdir().unwrap();
    let expected: &[(&str, &[&str])] = &[
        ("pe-dse", &["--wq", "--styles", "--k"]),
        ("explore", &["--net", "--wq", "--k"]),
        ("simulate", &["--exhaustive", "--k", "--layer", "--channelwise"]),
        ("footprint", &["--net", "--wq", "--baseline", "--unit"]),
        ("report", &["<DESIGN>"]),
    ];
    for (cmd, flags) in expected {
        let o = mpdse(dir.path(), &[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        let text = stdout(&o);
        for flag in flags.iter().chain(&["--calib", "--constraints", "--out", "--format", "--jobs", "--seed"]) {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

fn ranking_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("pe_ranking.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,w_q,rank,style,k,bits_per_s_per_lut,luts,f_mhz"
    );
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn pe_dse_winners() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mpdse(dir.path(), &["pe-dse", "--wq", "1,2,4"]).status.success());
    let rows = ranking_rows(dir.path());
    for wq in ["1", "2", "4"] {
        let winner = rows.iter().find(|r| r[1] == wq && r[2] == "1").unwrap();
        assert_eq!(winner[3], "bp-st-1d", "w_q={wq}");
    }
}

#[test]
fn pe_dse_single_style() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpdse(dir.path(), &["pe-dse", "--styles", "bp-st-1d", "--k", "2", "--wq", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(ranking_rows(dir.path()).len(), 1);
}

#[test]
fn missing_calibration_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut calib: Value = serde_json::from_str(&fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/default_calibration.json"),
    ).unwrap())
    .unwrap();
    calib["entries"]
        .as_array_mut()
        .unwrap()
        .retain(|e| !(e["style"] == "bp-st-1d" && e["k"] == 2));
    fs::write(dir.path().join("calib.json"), calib.to_string()).unwrap();
    let o = mpdse(dir.path(), &["--calib", "calib.json", "pe-dse"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bp-st-1d/k2"), "{}", stderr(&o));
}

#[test]
fn calibration_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mpdse"))
        .args(["pe-dse"])
        .current_dir(dir.path())
        .env("MPDSE_CALIB", "absent.json")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn explore_eight_bit_on_four_bit_slices() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpdse(dir.path(), &["explore", "--net", "resnet18", "--wq", "8", "--k", "4", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let fps = report["report"]["frames_per_s"].as_f64().unwrap();
    assert!((fps / 97.25 - 1.0).abs() <= 0.10, "{fps}");
    assert_eq!(report["report"]["pe_style"], "bp-st-1d");
    for f in ["design.json", "mapping.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(report["calibration"]["entries"].is_array());
    assert!(report["tool_version"].is_string());
}

#[test]
fn explore_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.json"), TOY).unwrap();
    let run = |out: &str, jobs: &str| {
        let o = mpdse(dir.path(), &["explore", "--net", "toy.json", "--out", out, "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        ["design.json", "mapping.csv", "report.json"]
            .map(|f| fs::read(dir.path().join(out).join(f)).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    assert_eq!(a, b);
}

#[test]
fn infeasible_constraints_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("hw.json"), r#"{"lut_budget": 50}"#).unwrap();
    let o = mpdse(dir.path(), &["--constraints", "hw.json", "explore", "--net", "resnet18"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no feasible design"), "{}", stderr(&o));
}

#[test]
fn report_rerenders_saved_design() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.json"), TOY).unwrap();
    assert!(mpdse(dir.path(), &["explore", "--net", "toy.json", "--out", "first"]).status.success());
    let o = mpdse(dir.path(), &["report", "first/design.json", "--out", "second"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.json", "mapping.csv", "design.json"] {
        assert_eq!(
            fs::read(dir.path().join("first").join(f)).unwrap(),
            fs::read(dir.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn simulate_exhaustive_slice_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpdse(dir.path(), &["simulate", "--exhaustive", "--k", "2", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["mismatches"], 0);
    assert_eq!(summary["cases"], 8 * 256 * (2 + 4 + 16 + 256));
}

#[test]
fn simulate_channelwise_layer() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.json"), TOY).unwrap();
    let o = mpdse(
        dir.path(),
        &["simulate", "--layer", "toy.json", "--channelwise", "--format", "json", "--out", "."],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["cases"], 24 * 24);
    assert!(dir.path().join("simulation.json").exists());
}

#[test]
fn simulate_random_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpdse(dir.path(), &["simulate", "--trials", "20", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("random: 480 cases, 0 mismatches"));
}

#[test]
fn simulate_rejects_non_dividing_slice() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpdse(dir.path(), &["simulate", "--k", "3", "--styles", "bp-st-1d"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("must divide"), "{}", stderr(&o));
}

#[test]
fn footprint_units_agree() {
    let dir = tempfile::tempdir().unwrap();
    let get = |unit: &str| -> Value {
        let o = mpdse(
            dir.path(),
            &["footprint", "--net", "resnet18", "--wq", "2", "--baseline", "fp32", "--unit", unit, "--format", "json"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str(&stdout(&o)).unwrap()
    };
    let mbit = get("Mbit");
    let mb = get("MB");
    let q = |v: &Value, k: &str| v[k].as_f64().unwrap();
    assert!((q(&mbit, "quantized") / 8.0 - q(&mb, "quantized")).abs() < 1e-9);
    assert!((q(&mbit, "baseline") / 8.0 - q(&mb, "baseline")).abs() < 1e-9);
    assert_eq!(q(&mbit, "compression"), q(&mb, "compression"));
    assert_eq!(mbit["policy"]["include_projection_convs"], false);
}
