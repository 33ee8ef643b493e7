use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seglink::output::read_jsonl;

fn seglink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seglink")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SPEC: &str = r#"{
  "width": 120, "height": 90, "background": 60, "seed": 3,
  "bars": [{"x0": 15, "y0": 45, "x1": 105, "y1": 45, "width": 3, "contrast": 100}],
  "textures": [],
  "noise": null
}"#;

/// Writes the scene above and renders it; returns the image path.
fn render(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("scene.json");
    fs::write(&spec, SPEC).unwrap();
    let img = dir.join("scene.png");
    let truth = dir.join("truth.json");
    let out = seglink(&["synth", p(&spec), "--out", p(&img), "--truth", p(&truth)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gt: serde_json::Value = serde_json::from_str(&fs::read_to_string(truth).unwrap()).unwrap();
    assert_eq!(gt["bars"].as_array().unwrap().len(), 1);
    img
}

#[test]
fn synth_then_detect_finds_the_twin_pair() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    let res = dir.path().join("res.jsonl");
    let svg = dir.path().join("overlay.svg");
    let out = seglink(&["detect", p(&img), "--out", p(&res), "--overlay", p(&svg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rects) = read_jsonl(fs::read(&res).unwrap().as_slice()).unwrap();
    assert_eq!((header.width, header.height), (120, 90));
    assert_eq!(rects.len(), 2);
    assert_eq!(rects.iter().map(|r| r.sign as i32).sum::<i32>(), 0);
    assert_eq!(fs::read_to_string(svg).unwrap().matches("<polygon").count(), 2);
}

#[test]
fn detect_writes_to_stdout_and_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    let out = seglink(&["detect", p(&img), "--directions", "16", "--min-length", "1000", "--threads", "1"]);
    assert!(out.status.success());
    let (header, rects) = read_jsonl(out.stdout.as_slice()).unwrap();
    assert_eq!(header.directions, 16);
    assert!(rects.is_empty());
}

#[test]
fn config_file_is_read_and_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"directions": 8, "dedup": false}"#).unwrap();
    let out = seglink(&["detect", p(&img), "--config", p(&cfg)]);
    assert!(out.status.success());
    assert_eq!(read_jsonl(out.stdout.as_slice()).unwrap().0.directions, 8);
    let out = seglink(&["detect", p(&img), "--config", p(&cfg), "--directions", "12"]);
    assert_eq!(read_jsonl(out.stdout.as_slice()).unwrap().0.directions, 12);
}

#[test]
fn debug_dumps_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    let edges = dir.path().join("edges");
    let lut = dir.path().join("lut.csv");
    let out = seglink(&["detect", p(&img), "--directions", "4", "--dump-edges", p(&edges), "--dump-lut", p(&lut)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for n in 1..=4 {
        for suffix in ["edges.png", "mu.pfm", "sigma2.pfm"] {
            assert!(edges.join(format!("dir{n:02}_{suffix}")).is_file());
        }
    }
    let csv = fs::read_to_string(lut).unwrap();
    assert!(csv.lines().count() > 1000);
}

#[test]
fn bench_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    let out = seglink(&["bench", p(&img), "--synthetic", "64", "--reps", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().starts_with("synthetic-64,64,64,"));
}

#[test]
fn exit_codes_distinguish_input_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let img = render(dir.path());
    // Missing input file.
    assert_eq!(seglink(&["detect", p(&dir.path().join("nope.png"))]).status.code(), Some(1));
    // Not an image.
    let junk = dir.path().join("junk.png");
    fs::write(&junk, b"not an image").unwrap();
    assert_eq!(seglink(&["detect", p(&junk)]).status.code(), Some(1));
    // Bad parameter values.
    assert_eq!(seglink(&["detect", p(&img), "--ctx-threshold", "1.5"]).status.code(), Some(2));
    assert_eq!(seglink(&["detect", p(&img), "--directions", "0"]).status.code(), Some(2));
    // Unknown config key and unparsable flag.
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"colour": 1}"#).unwrap();
    assert_eq!(seglink(&["detect", p(&img), "--config", p(&cfg)]).status.code(), Some(2));
    assert_eq!(seglink(&["detect", p(&img), "--gap", "many"]).status.code(), Some(2));
    // Invalid scene description.
    let spec = dir.path().join("bad_scene.json");
    fs::write(&spec, r#"{"width": 0, "height": 5, "background": 0, "seed": 0, "bars": [], "textures": [], "noise": null}"#).unwrap();
    assert_eq!(seglink(&["synth", p(&spec), "--out", p(&dir.path().join("x.png"))]).status.code(), Some(1));
}
