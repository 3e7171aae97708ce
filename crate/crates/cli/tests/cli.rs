use std::path::Path;
use std::process::{Command, Output};

fn flowstyle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowstyle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = flowstyle(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn speedup_prints_rows_and_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["speedup", "--td", "1.51", "--ti", "0.02", "--out", s(tmp.path())]);
    let lines: Vec<_> = stdout.lines().collect();
    assert_eq!(lines[0], "t_d,t_i,per_frame_speedup");
    let value: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 75.5).abs() < 1e-9);
    let curve = std::fs::read_to_string(tmp.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 6);
    assert!(tmp.path().join("per_frame.csv").exists());
}

#[test]
fn speedup_rejects_mismatched_lists() {
    let out = flowstyle(&["speedup", "--td", "1,2", "--ti", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = flowstyle(&[
        "run",
        "--input",
        s(&tmp.path().join("nope")),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = flowstyle(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn synth_run_compare_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("clip");
    let out = tmp.path().join("out");
    ok(&["synth", "--out", s(&clip), "--frames", "6", "--width", "24", "--height", "16"]);
    let report = ok(&["run", "--input", s(&clip), "--out", s(&out), "--key-interval", "3", "--save-flows"]);
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["key_frames"], serde_json::json!([0, 3]));
    assert_eq!(json["interpolated"], 4);
    assert!(out.join("flows").join("0001.flo").exists());

    let cmp = ok(&["compare", s(&clip), s(&clip), "--out", s(&tmp.path().join("cmp.csv"))]);
    assert!(cmp.contains("mean ms-ssim 1.000000"), "{cmp}");
}

#[test]
fn stylize_flow_interp_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("clip");
    ok(&["synth", "--out", s(&clip), "--frames", "2", "--width", "16", "--height", "16"]);
    let key = clip.join("0000.png");
    let next = clip.join("0001.png");
    let styled = tmp.path().join("styled.png");
    let flo = tmp.path().join("f.flo");
    let warped = tmp.path().join("warped.png");
    ok(&["stylize", s(&key), "--out", s(&styled), "--scale", "2"]);
    ok(&["flow", s(&next), s(&key), "--out", s(&flo)]);
    ok(&["interp", s(&styled), s(&flo), "--out", s(&warped)]);
    assert!(warped.exists());
}

#[test]
fn train_and_fedsim_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let train_cfg = tmp.path().join("train.json");
    std::fs::write(
        &train_cfg,
        r#"{"steps": 2, "stylizer": {"working_height": 8, "working_width": 8}}"#,
    )
    .unwrap();
    let tout = tmp.path().join("train");
    ok(&["train", "--config", s(&train_cfg), "--pairs", "2", "--out", s(&tout)]);
    assert!(tout.join("checkpoint.bin").exists());
    assert_eq!(std::fs::read_to_string(tout.join("loss.csv")).unwrap().lines().count(), 3);

    let sim_cfg = tmp.path().join("sim.json");
    std::fs::write(
        &sim_cfg,
        r#"{"edge_dataset_size": 2, "held_out_size": 2,
            "train": {"stylizer": {"working_height": 8, "working_width": 8}}}"#,
    )
    .unwrap();
    let fout = tmp.path().join("fed");
    ok(&[
        "fedsim",
        "--config",
        s(&sim_cfg),
        "--participants",
        "1,2",
        "--rounds",
        "1",
        "--images-per-round",
        "2",
        "--out",
        s(&fout),
    ]);
    for n in [1, 2] {
        let curve = std::fs::read_to_string(fout.join(format!("curve_n{n}.csv"))).unwrap();
        assert_eq!(curve.lines().count(), 3);
        assert!(fout.join(format!("events_n{n}.jsonl")).exists());
    }
}
