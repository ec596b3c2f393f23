//! End-to-end runs of the `mogan` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mogan_core::controller::{reward, RewardConfig};
use mogan_core::model::Model;
use mogan_core::motion::{compute_template, normalize_template};
use mogan_core::{GrayImage, TemplateConfig};

const SPRITES: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../specs/three_sprites.json"
);
const SMALL: &str =
    r#"{"random": {"count": 8, "frame_count": 5, "directions": ["left", "right"]}}"#;

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mogan"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("mogan runs")
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = run(cwd, args);
    assert!(
        out.status.success(),
        "mogan {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(cwd: &Path, args: &[&str]) -> (i32, String) {
    let out = run(cwd, args);
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

/// A small dataset in `dir/data`.
fn dataset(dir: &Path) {
    fs::write(dir.join("spec.json"), SMALL).unwrap();
    ok(
        dir,
        &[
            "make-dataset",
            "--spec",
            "spec.json",
            "--seed",
            "3",
            "--out",
            "data",
        ],
    );
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> String {
    let mut args = vec![
        "train",
        "--data",
        "data",
        "--base-channels",
        "2",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    ok(dir, &args)
}

#[test]
fn three_fifty_frame_videos_give_thirty_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["make-dataset", "--spec", SPRITES, "--out", "data"],
    );
    assert!(stdout.lines().any(|l| l == "30 pairs"), "{stdout}");
    assert_eq!(
        fs::read_dir(dir.path().join("data/inputs"))
            .unwrap()
            .count(),
        30
    );
    assert!(dir.path().join("data/run.json").exists());
}

#[test]
fn short_videos_give_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"random": {"count": 3, "frame_count": 4, "directions": ["up"]}}"#,
    )
    .unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "make-dataset",
            "--spec",
            "spec.json",
            "--n",
            "5",
            "--out",
            "data",
        ],
    );
    assert!(stdout.lines().any(|l| l == "0 pairs"), "{stdout}");
    let (c, err) = code(dir.path(), &["train", "--data", "data", "--out", "t"]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn frames_directory_becomes_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("clip");
    fs::create_dir(&frames).unwrap();
    for i in 0..11u8 {
        let mut img = GrayImage::filled(16, 16, 10);
        img.set(i as usize, 4, 250);
        img.write_pgm(frames.join(format!("f{i:02}.pgm"))).unwrap();
    }
    let stdout = ok(
        dir.path(),
        &[
            "make-dataset",
            "--frames",
            "clip",
            "--n",
            "5",
            "--out",
            "data",
        ],
    );
    assert!(stdout.lines().any(|l| l == "2 pairs"), "{stdout}");
}

#[test]
fn training_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "a", &["--epochs", "1", "--seed", "3"]);
    train(dir.path(), "b", &["--epochs", "1", "--seed", "3"]);
    train(dir.path(), "c", &["--epochs", "1", "--seed", "4"]);
    let a = tree(&dir.path().join("a"));
    assert_eq!(a, tree(&dir.path().join("b")));
    let metrics = |run: &str| fs::read_to_string(dir.path().join(run).join("metrics.csv")).unwrap();
    assert_ne!(metrics("a"), metrics("c"));

    let header: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/run.json")).unwrap()).unwrap();
    assert_eq!(header["tool"], "mogan");
    assert_eq!(header["command"], "train");
    assert_eq!(header["seed"], 3);
    assert_eq!(header["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "full", &["--epochs", "2", "--seed", "1"]);
    train(dir.path(), "split", &["--epochs", "1", "--seed", "1"]);
    ok(
        dir.path(),
        &[
            "train", "--data", "data", "--resume", "--epochs", "2", "--out", "split",
        ],
    );
    assert_eq!(
        tree(&dir.path().join("full")),
        tree(&dir.path().join("split"))
    );
}

#[test]
fn zero_epochs_writes_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0"]);
    let metrics = fs::read_to_string(dir.path().join("t/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(Model::load(dir.path().join("t/model.ckpt")).is_ok());
}

#[test]
fn generate_writes_one_template_per_head_and_a_panel() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0", "--k", "3"]);
    let input = fs::read_dir(dir.path().join("data/inputs"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let input = input.to_str().unwrap();
    for out in ["g1", "g2"] {
        ok(
            dir.path(),
            &[
                "generate",
                "--ckpt",
                "t/model.ckpt",
                "--input",
                input,
                "--out",
                out,
            ],
        );
    }
    let g = dir.path().join("g1");
    for k in 0..3 {
        let t = GrayImage::read_pgm(g.join(format!("template_{k}.pgm"))).unwrap();
        assert_eq!(t.dims(), (64, 64));
    }
    assert_eq!(
        GrayImage::read_pgm(g.join("panel.pgm")).unwrap().dims(),
        (4 * 64, 64)
    );
    assert_eq!(tree(&g), tree(&dir.path().join("g2")));

    ok(
        dir.path(),
        &[
            "generate",
            "--ckpt",
            "t/model.ckpt",
            "--input",
            input,
            "--format",
            "png",
            "--out",
            "p",
        ],
    );
    assert_eq!(
        GrayImage::read_png(dir.path().join("p/panel.png")).unwrap(),
        GrayImage::read_pgm(g.join("panel.pgm")).unwrap()
    );
}

#[test]
fn generate_rejects_a_frame_of_the_wrong_size() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0"]);
    GrayImage::filled(32, 32, 0)
        .write_pgm(dir.path().join("small.pgm"))
        .unwrap();
    let (c, err) = code(
        dir.path(),
        &[
            "generate",
            "--ckpt",
            "t/model.ckpt",
            "--input",
            "small.pgm",
            "--out",
            "g",
        ],
    );
    assert_eq!(c, 2, "{err}");
    assert!(err.contains("64"), "{err}");
}

fn moving_frames(dir: &Path) -> Vec<GrayImage> {
    fs::create_dir(dir).unwrap();
    (0..5)
        .map(|i| {
            let mut img = GrayImage::filled(64, 64, 40);
            for y in 20..26 {
                for x in 0..6 {
                    img.set(10 + 2 * i + x, y, 200);
                }
            }
            img.write_pgm(dir.join(format!("f{i}.pgm"))).unwrap();
            img
        })
        .collect()
}

fn parse(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn score_agrees_with_the_library() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0"]);
    let frames = moving_frames(&dir.path().join("clip"));
    let progress =
        normalize_template(&compute_template(&frames, &TemplateConfig::for_clip(5)).unwrap())
            .unwrap();
    progress.write_pgm(dir.path().join("same.pgm")).unwrap();
    GrayImage::filled(64, 64, 255)
        .write_pgm(dir.path().join("white.pgm"))
        .unwrap();
    let model = Model::load(dir.path().join("t/model.ckpt")).unwrap();

    for distance in ["feature", "template"] {
        let same = ok(
            dir.path(),
            &[
                "score",
                "--ckpt",
                "t/model.ckpt",
                "--frames",
                "clip",
                "--goal",
                "same.pgm",
                "--distance",
                distance,
            ],
        );
        assert_eq!(parse(&same, "distance"), 0.0);
    }

    let stdout = ok(
        dir.path(),
        &[
            "score",
            "--ckpt",
            "t/model.ckpt",
            "--frames",
            "clip",
            "--goal",
            "white.pgm",
            "--out",
            "s",
        ],
    );
    let want = reward(
        &model.discriminator,
        &frames[4],
        &GrayImage::filled(64, 64, 255),
        &progress,
        &RewardConfig::default(),
    )
    .unwrap();
    assert_eq!(parse(&stdout, "distance"), want.distance);
    assert_eq!(parse(&stdout, "realism"), want.realism);
    assert_eq!(parse(&stdout, "reward"), want.reward);
    assert!(want.distance > 0.0);
    assert!(dir.path().join("s/score.json").exists());
}

#[test]
fn score_needs_two_frames() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0"]);
    fs::create_dir(dir.path().join("one")).unwrap();
    GrayImage::filled(64, 64, 0)
        .write_pgm(dir.path().join("one/f.pgm"))
        .unwrap();
    let (c, err) = code(
        dir.path(),
        &[
            "score",
            "--ckpt",
            "t/model.ckpt",
            "--frames",
            "one",
            "--goal",
            "one/f.pgm",
        ],
    );
    assert_eq!(c, 2, "{err}");
}

#[test]
fn rl_run_writes_one_row_per_episode_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    train(dir.path(), "t", &["--epochs", "0", "--k", "2"]);
    for out in ["r1", "r2"] {
        ok(
            dir.path(),
            &[
                "rl-run",
                "--ckpt",
                "t/model.ckpt",
                "--episodes",
                "1",
                "--seed",
                "9",
                "--export-frames",
                "--out",
                out,
            ],
        );
    }
    let r = dir.path().join("r1");
    let returns = fs::read_to_string(r.join("returns.csv")).unwrap();
    assert_eq!(returns.lines().count(), 2);
    for f in ["qtable.csv", "trajectory.csv", "summary.json", "run.json"] {
        assert!(r.join(f).exists(), "{f}");
    }
    assert!(fs::read_dir(r.join("frames")).unwrap().count() > 1);
    assert_eq!(tree(&r), tree(&dir.path().join("r2")));
}

#[test]
fn exit_codes_follow_error_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(
            p,
            &[
                "generate",
                "--ckpt",
                "missing.ckpt",
                "--input",
                "x.pgm",
                "--out",
                "g"
            ]
        )
        .0,
        3
    );
    fs::write(p.join("bad.ckpt"), b"MOGANCKP garbage").unwrap();
    assert_eq!(
        code(p, &["rl-run", "--ckpt", "bad.ckpt", "--out", "r"]).0,
        3
    );
    fs::write(p.join("bad.json"), b"{\"videos\": 3}").unwrap();
    assert_eq!(
        code(p, &["make-dataset", "--spec", "bad.json", "--out", "d"]).0,
        2
    );
    assert_eq!(
        code(
            p,
            &["train", "--data", "d", "--resume", "--k", "2", "--out", "t"]
        )
        .0,
        2
    );
    assert_eq!(code(p, &["make-dataset", "--out", "d"]).0, 2);
    dataset(p);
    assert_eq!(
        code(p, &["train", "--data", "data", "--lr", "-1", "--out", "t"]).0,
        2
    );
    assert_eq!(code(p, &["selfcheck", "--cases", "20"]).0, 0);
}
