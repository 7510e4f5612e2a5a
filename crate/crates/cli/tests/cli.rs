use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthosfm"))
        .args(args)
        .env_remove("ORTHOSFM_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn simulate(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out", out];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), &["--points", "5", "--frames", "3", "--seed", "4", "--noise", "0.01"]);
    simulate(b.path(), &["--points", "5", "--frames", "3", "--seed", "4", "--noise", "0.01"]);
    for f in ["scene.json", "frames.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let csv = fs::read_to_string(a.path().join("frames.csv")).unwrap();
    assert!(csv.starts_with("frame_index,label,x,y\n1,P,"));
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
}

#[test]
fn recover_golden_triangle() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--points", "3", "--frames", "4", "--seed", "1", "--triangle-sq", "4,9,12.6878"]);
    let frames = dir.path().join("frames.csv");
    let o = run(&["recover", frames.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let report = stdout_json(&o);
    assert_eq!(report["solver"], "p3f4");
    assert_eq!(report["seed"], 1);
    let lengths = report["candidates"][0]["lengths"].as_array().unwrap();
    for (entry, want) in lengths.iter().zip([4.0, 9.0, 12.6878]) {
        let got = entry["squared"].as_f64().unwrap();
        assert!(((got - want) / want).abs() < 1e-6, "{got}");
    }
}

#[test]
fn recover_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--points", "4", "--frames", "3", "--seed", "2"]);
    let out = dir.path().join("report.json");
    let o = run(&[
        "recover",
        dir.path().join("frames.csv").to_str().unwrap(),
        "--mode",
        "p4f3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["candidates"][0]["lengths"].as_array().unwrap().len(), 6);
}

#[test]
fn identical_frames_exit_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("frame_index,label,x,y\n");
    for j in 1..=4 {
        text.push_str(&format!("{j},P,0,0\n{j},Q,1,0.2\n{j},R,0.3,1\n"));
    }
    let path = dir.path().join("frames.csv");
    fs::write(&path, text).unwrap();
    let o = run(&["recover", path.to_str().unwrap(), "--mode", "p3f4"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn match_shuffled_unrelated_and_labeled() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--points", "4", "--frames", "2", "--seed", "3", "--shuffle"]);
    let frames = dir.path().join("frames.csv");
    let o = run(&["match", frames.to_str().unwrap(), "--unlabeled", "--top", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout_json(&o);
    assert_eq!(out["report"]["assignments_scored"], 24);
    assert_eq!(out["report"]["ranking"].as_array().unwrap().len(), 3);
    for pair in out["report"]["bijection"].as_array().unwrap() {
        assert_eq!(pair[0], pair[1]);
    }

    let o = run(&["match", frames.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["rigidity"]["verdict"], "consistent");

    // first frame of one body, second frame of another
    let other = tempfile::tempdir().unwrap();
    simulate(other.path(), &["--points", "4", "--frames", "2", "--seed", "99"]);
    let a = fs::read_to_string(&frames).unwrap();
    let b = fs::read_to_string(other.path().join("frames.csv")).unwrap();
    let mixed: String = std::iter::once("frame_index,label,x,y")
        .chain(a.lines().filter(|l| l.starts_with("1,")))
        .chain(b.lines().filter(|l| l.starts_with("2,")))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = dir.path().join("mixed.csv");
    fs::write(&path, mixed).unwrap();
    let o = run(&["match", path.to_str().unwrap(), "--unlabeled"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn noise_study_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.csv");
    let o = run(&[
        "noise-study",
        "--trials",
        "100",
        "--levels",
        "0,0.001,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("level,"));
    let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&row[..3], &[0.0, 100.0, 0.0]);
    assert!(row[5] < 1e-9);
}

#[test]
fn ambiguity_from_scene_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--points", "4", "--frames", "2", "--seed", "5"]);
    let o = run(&[
        "ambiguity",
        dir.path().join("frames.csv").to_str().unwrap(),
        "--scene",
        dir.path().join("scene.json").to_str().unwrap(),
        "--angles",
        "-0.5,0,0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].ends_with("T_x,T_y,T_z"));
    assert!(lines[1].starts_with("-0.5,ok,"));
}

#[test]
fn dof_reports_recoverability() {
    let o = run(&["dof", "--points", "2", "--frames", "2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["recoverable"], false);
    let o = run(&["dof", "--points", "3", "--frames", "3"]);
    let v = stdout_json(&o);
    assert_eq!((v["unknowns"].as_i64(), v["information"].as_i64()), (Some(18), Some(18)));
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "frame_index,label,x,y\n1,P,0,0\n1,Q,x,1\n").unwrap();
    let o = run(&["recover", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(code(&run(&["recover", "/nonexistent/frames.csv"])), 1);
    assert_eq!(code(&run(&["recover"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}
