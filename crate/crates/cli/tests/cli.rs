use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deform-mvs"))
}

fn run(args: &[&str]) -> Output {
    bin().arg("--quiet").args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic textured plane written to `<tmp>/scene`.
fn small_scene(tmp: &TempDir) -> PathBuf {
    let dir = tmp.path().join("scene");
    let out = run(&["synth", "textured-plane", "--out", s(&dir), "--width", "96", "--height", "72", "--seed", "3"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    dir
}

#[test]
fn synth_reconstruct_eval_round_trip() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "reconstruct",
        "--scene",
        s(&scene),
        "--out",
        s(&out_dir),
        "--iterations",
        "3",
        "--dump-visibility",
        "--dump-regions",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for i in 0..5 {
        assert!(out_dir.join(format!("depth/view_{i:03}.pfm")).is_file());
        assert!(out_dir.join(format!("normal/view_{i:03}.pfm")).is_file());
        assert!(out_dir.join(format!("regions/view_{i:03}.png")).is_file());
    }
    assert!(out_dir.join("visibility/view_000_view_004.pfm").is_file());
    for f in ["fused.ply", "manifest.toml", "config.toml"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 0"));
    assert!(manifest.contains("core_version"));
    assert!(manifest.contains("iterations = 3"));

    let ev = run(&["eval", "--cloud", s(&out_dir.join("fused.ply")), "--scene", s(&scene)]);
    assert!(ev.status.success(), "{}", text(&ev.stderr));
    let report = text(&ev.stdout);
    assert!(report.contains("accuracy") && report.contains("F1"), "{report}");
}

#[test]
fn rerun_from_written_config_is_identical() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = run(&["reconstruct", "--scene", s(&scene), "--out", s(&a), "--iterations", "2", "--seed", "9"]);
    assert!(first.status.success(), "{}", text(&first.stderr));
    let second = run(&["reconstruct", "--scene", s(&scene), "--out", s(&b), "--config", s(&a.join("config.toml"))]);
    assert!(second.status.success(), "{}", text(&second.stderr));
    for f in ["depth/view_002.pfm", "normal/view_002.pfm", "fused.ply"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn missing_mono_depth_names_the_view() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    std::fs::remove_file(scene.join("mono_depth/view_003.pfm")).unwrap();
    let out = run(&["reconstruct", "--scene", s(&scene), "--out", s(&tmp.path().join("out")), "--iterations", "1"]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("view 3") && err.contains("view_003"), "{err}");
}

#[test]
fn dry_run_prints_config_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[engine]\niterations = 4\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "reconstruct",
        "--scene",
        s(&scene),
        "--out",
        s(&out_dir),
        "--config",
        s(&cfg),
        "--seed",
        "7",
        "--dry-run",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let printed = text(&out.stdout);
    // The flag beats the file, the file beats the default.
    assert!(printed.contains("seed = 7"), "{printed}");
    assert!(printed.contains("iterations = 4"), "{printed}");
    assert!(printed.contains("depth_range"), "{printed}");
    assert!(!out_dir.exists());
}

#[test]
fn bad_config_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[engine]\nlambda = 3.0\n").unwrap();
    let out = run(&["reconstruct", "--scene", s(&scene), "--out", s(&tmp.path().join("o")), "--config", s(&cfg), "--dry-run"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("lambda"));
}

#[test]
fn eval_identical_clouds_scores_full() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let gt = scene.join("gt_points.ply");
    let kv = tmp.path().join("report.txt");
    let out = run(&["eval", "--cloud", s(&gt), "--gt", s(&gt), "--report", s(&kv)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = std::fs::read_to_string(kv).unwrap();
    for key in ["accuracy = 100\n", "completeness = 100\n", "f1 = 100\n"] {
        assert!(report.contains(key), "{report}");
    }
}

#[test]
fn eval_rejects_non_positive_threshold() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let gt = scene.join("gt_points.ply");
    for tau in ["0", "-0.5"] {
        let out = run(&["eval", "--cloud", s(&gt), "--scene", s(&scene), &format!("--tau={tau}")]);
        assert_eq!(out.status.code(), Some(2), "tau {tau}: {}", text(&out.stderr));
    }
}

#[test]
fn dump_prior_writes_one_map_per_view() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(&tmp);
    let out_dir = tmp.path().join("prior");
    let out = run(&["dump-prior", "--scene", s(&scene), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for i in 0..5 {
        assert!(out_dir.join(format!("view_{i:03}.png")).is_file());
        assert!(out_dir.join(format!("view_{i:03}.txt")).is_file());
    }
}

#[test]
fn unknown_scene_kind_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["synth", "sphere", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}
