use std::path::Path;
use std::process::{Command, Output};

use maskforge::image::read_rgba;

fn maskforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskforge"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> serde_json::Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = maskforge(&all);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn faces(dir: &Path, count: usize) -> std::path::PathBuf {
    let out = dir.join("faces");
    ok(&[
        "faces",
        "--out",
        p(&out),
        "--count",
        &count.to_string(),
        "--seed",
        "5",
    ]);
    out
}

#[test]
fn extract_writes_a_canonical_rgba_mask() {
    let dir = tempfile::tempdir().unwrap();
    let f = faces(dir.path(), 1);
    let out = dir.path().join("m/mask.png");
    let stats = dir.path().join("m/stats.json");
    let summary = ok(&[
        "extract",
        "--photo",
        p(&f.join("face_000.png")),
        "--landmarks",
        p(&f.join("face_000.json")),
        "--parsing",
        p(&f.join("face_000_parsing.png")),
        "--out",
        p(&out),
        "--stats",
        p(&stats),
    ]);
    let mask = read_rgba(&out).unwrap();
    assert_eq!((mask.width(), mask.height()), (1024, 1024));
    let eyes: serde_json::Value = serde_json::from_slice(&std::fs::read(&stats).unwrap()).unwrap();
    assert_eq!(eyes.as_array().unwrap().len(), 2);
    assert_eq!(eyes[0]["cluster_counts"].as_array().unwrap().len(), 6);
    assert_eq!(summary["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn synth_is_repeatable_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["synth", "--seed", seed, "--out", p(&out)])["outputs"][0]["sha256"].clone()
    };
    assert_eq!(run("a.png", "9"), run("b.png", "9"));
    assert_ne!(run("a.png", "9"), run("c.png", "10"));
}

#[test]
fn video_writes_every_frame_and_a_timing_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = faces(dir.path(), 2);
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for i in 0..100 {
        for (suffix, ext) in [("", "png"), ("", "json"), ("_parsing", "png")] {
            std::fs::copy(
                f.join(format!("face_00{}{suffix}.{ext}", i % 2)),
                frames.join(format!("f{i:03}{suffix}.{ext}")),
            )
            .unwrap();
        }
    }
    let mask = dir.path().join("mask.png");
    ok(&["synth", "--seed", "1", "--out", p(&mask)]);
    let out = dir.path().join("out");
    let s = ok(&[
        "video",
        "--mask",
        p(&mask),
        "--frames",
        p(&frames),
        "--out",
        p(&out),
    ]);
    assert_eq!(s["timing"]["frames"], 100);
    assert_eq!(s["outputs"].as_array().unwrap().len(), 100);
    let timing: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["frames"], 100);
    assert!(timing["fps"].as_f64().unwrap() > 0.0);
}

#[test]
fn apply_honours_alpha_scale_and_areas() {
    let dir = tempfile::tempdir().unwrap();
    let f = faces(dir.path(), 1);
    let mask = dir.path().join("mask.png");
    ok(&["synth", "--seed", "2", "--out", p(&mask)]);
    let frame = f.join("face_000.png");
    let apply = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "apply",
            "--mask",
            p(&mask),
            "--frame",
            p(&frame),
            "--landmarks",
        ];
        let lm = f.join("face_000.json");
        args.push(p(&lm));
        args.extend_from_slice(&["--out", p(&out)]);
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(&out).unwrap()
    };
    let bare = maskforge::image::encode_rgb(&maskforge::image::read_rgb(&frame).unwrap()).unwrap();
    assert_eq!(apply("zero.png", &["--alpha-scale", "0"]), bare);
    assert_ne!(apply("full.png", &[]), bare);
    assert_eq!(apply("none.png", &["--regions", ""]), bare);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.png");
    assert_eq!(maskforge(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(maskforge(&[]).status.code(), Some(1));
    assert_eq!(maskforge(&["--help"]).status.code(), Some(0));
    assert_eq!(
        maskforge(&["synth", "--regions", "nails", "--out", p(&out)])
            .status
            .code(),
        Some(1)
    );
    let missing = maskforge(&[
        "extract",
        "--photo",
        "nope.png",
        "--landmarks",
        "nope.json",
        "--parsing",
        "nope.png",
        "--out",
        p(&out),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!out.exists());

    let corrupt = dir.path().join("corrupt.png");
    std::fs::write(&corrupt, b"not a png").unwrap();
    let bad = maskforge(&[
        "--json",
        "apply",
        "--mask",
        p(&corrupt),
        "--frame",
        p(&corrupt),
        "--landmarks",
        p(&corrupt),
        "--out",
        p(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(err["kind"], "data");
}

#[test]
fn missing_eye_labels_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = faces(dir.path(), 1);
    let blank = dir.path().join("blank_parsing.png");
    let parsing = maskforge::parsing::read_parsing(f.join("face_000_parsing.png")).unwrap();
    let zero = parsing.map(|_| 0u8);
    maskforge::parsing::write_parsing(&zero, &blank).unwrap();
    let out = maskforge(&[
        "extract",
        "--photo",
        p(&f.join("face_000.png")),
        "--landmarks",
        p(&f.join("face_000.json")),
        "--parsing",
        p(&blank),
        "--out",
        p(&dir.path().join("m.png")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eye"));
}

#[test]
fn worker_count_does_not_change_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let f = faces(dir.path(), 4);
    let manifest = f.join("faces.jsonl");
    let run = |workers: &str| {
        let out = dir.path().join(format!("pairs{workers}"));
        ok(&[
            "pair",
            "--faces",
            p(&manifest),
            "--out",
            p(&out),
            "--n-styles",
            "2",
            "--workers",
            workers,
        ])["outputs"]
            .clone()
    };
    let one = run("1");
    let eight = run("8");
    let hashes = |v: &serde_json::Value| {
        v.as_array()
            .unwrap()
            .iter()
            .map(|o| o["sha256"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(hashes(&one).len(), 16);
    assert_eq!(hashes(&one), hashes(&eight));
}

#[test]
fn losses_check_passes() {
    let s = ok(&["losses-check"]);
    assert_eq!(s["checks"], 120);
    assert!(s["worst_rel_error"].as_f64().unwrap() <= 1e-4);
}
