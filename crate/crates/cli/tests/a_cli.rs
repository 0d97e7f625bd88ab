use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use warpdiff::training::{Architecture, TinyDenoiser};

fn warpdiff(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpdiff"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn warpdiff")
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = warpdiff(cwd, args);
    assert!(
        out.status.success(),
        "warpdiff {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Every file under `root` keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn scenes(cwd: &Path, count: usize, extra: &[&str]) {
    let count = count.to_string();
    let mut args = vec![
        "make-scenes",
        "--count",
        &count,
        "--seed",
        "7",
        "--out",
        "data",
    ];
    args.extend_from_slice(extra);
    ok(cwd, &args);
}

const SMALL: &[&str] = &["--resolution", "12", "--frames", "3"];

#[test]
fn zero_scenes_give_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 0, &[]);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["scenes"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("data/run_config.json").exists());
}

#[test]
fn five_scenes_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 5, SMALL);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/manifest.json")).unwrap())
            .unwrap();
    let listed = m["scenes"].as_array().unwrap();
    assert_eq!(listed.len(), 5);
    for (i, e) in listed.iter().enumerate() {
        let spec = e["spec"].as_str().unwrap();
        assert_eq!(spec, format!("scene_{i}.json"));
        assert!(dir.path().join("data").join(spec).exists());
        for j in 0..3 {
            for f in [
                format!("frames/{j}.png"),
                format!("frames/{j}.fimg"),
                format!("depth/{j}.fimg"),
            ] {
                assert!(
                    dir.path().join(format!("data/scene_{i}")).join(&f).exists(),
                    "missing {f}"
                );
            }
        }
        assert!(dir
            .path()
            .join(format!("data/scene_{i}/cameras.json"))
            .exists());
    }
}

#[test]
fn make_scenes_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    scenes(a.path(), 1, SMALL);
    scenes(b.path(), 1, SMALL);
    let sa = snapshot(a.path());
    assert!(sa.len() > 5);
    assert_eq!(sa, snapshot(b.path()));
}

#[test]
fn zero_step_checkpoint_is_seeded_init() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 1, SMALL);
    ok(
        dir.path(),
        &[
            "train",
            "--data",
            "data",
            "--steps",
            "0",
            "--seed",
            "11",
            "--out",
            "ck/model.tdnz",
        ],
    );
    let arch = Architecture::default();
    let init = TinyDenoiser::<f32>::seeded(&arch, 11).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("ck/model.tdnz")).unwrap(),
        init.to_bytes()
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("ck/loss.csv")).unwrap(),
        "step,loss,val_loss\n"
    );
}

#[test]
fn training_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 2, SMALL);
    let args = |out: &'static str| {
        [
            "train",
            "--data",
            "data",
            "--mode",
            "warp-feat",
            "--steps",
            "15",
            "--seed",
            "3",
            "--out",
            out,
            "--feature-channels",
            "8",
            "--projected-dim",
            "4",
            "--diffusion-steps",
            "10",
        ]
    };
    ok(dir.path(), &args("a/m.tdnz"));
    ok(dir.path(), &args("b/m.tdnz"));
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/m.tdnz"), read("b/m.tdnz"));
    assert_eq!(read("a/loss.csv"), read("b/loss.csv"));
}

#[test]
fn training_loss_decreases_on_default_scenes() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 4, &[]);
    ok(
        dir.path(),
        &[
            "train",
            "--data",
            "data",
            "--steps",
            "2000",
            "--out",
            "ck/m.tdnz",
        ],
    );
    let csv = std::fs::read_to_string(dir.path().join("ck/loss.csv")).unwrap();
    let losses: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 41);
    let (first, last) = (losses[0], *losses.last().unwrap());
    assert!(last < first, "loss went from {first} to {last}");
}

#[test]
fn sampling_is_deterministic_and_dumps_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    scenes(dir.path(), 1, SMALL);
    let p = dir.path();
    ok(
        p,
        &[
            "train",
            "--data",
            "data",
            "--steps",
            "0",
            "--out",
            "ck/m.tdnz",
            "--feature-channels",
            "8",
            "--projected-dim",
            "4",
        ],
    );
    let args = |out: &'static str| {
        [
            "sample",
            "--checkpoint",
            "ck/m.tdnz",
            "--scene",
            "data/scene_0.json",
            "--mode",
            "iter-feat",
            "--seed",
            "5",
            "--out",
            out,
            "--steps",
            "25",
            "--dump-intermediates",
            "--resolution",
            "12",
            "--frames",
            "3",
        ]
    };
    ok(p, &args("s1"));
    ok(p, &args("s2"));
    let (a, b) = (snapshot(&p.join("s1")), snapshot(&p.join("s2")));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        if k != Path::new("run_config.json") {
            assert_eq!(v, &b[k], "{} differs", k.display());
        }
    }
    for j in 0..3 {
        assert!(p.join(format!("s1/frames/{j}.png")).exists());
        assert!(p.join(format!("s1/masks/{j}.png")).exists());
    }
    for step in [0, 10, 20] {
        assert!(p.join(format!("s1/intermediates/1/{step}.fimg")).exists());
    }
    assert!(!p.join("s1/intermediates/1/5.fimg").exists());
    assert!(p.join("s1/cameras.json").exists());
}

#[test]
fn oracle_sampling_matches_ground_truth_closely() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    scenes(p, 1, SMALL);
    ok(
        p,
        &[
            "sample",
            "--oracle",
            "--oracle-variance",
            "1e-6",
            "--scene",
            "data/scene_0.json",
            "--out",
            "s",
            "--resolution",
            "12",
            "--frames",
            "3",
        ],
    );
    ok(
        p,
        &[
            "evaluate",
            "--gen",
            "s",
            "--gt",
            "data/scene_0",
            "--poses-gen",
            "s/cameras.json",
            "--poses-gt",
            "data/scene_0/cameras.json",
            "--out",
            "ev/m.csv",
        ],
    );
    let csv = std::fs::read_to_string(p.join("ev/m.csv")).unwrap();
    for line in csv.lines().skip(1).filter(|l| !l.contains(",mean,")) {
        let psnr: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(psnr > 40.0, "{line}");
    }
}

#[test]
fn evaluate_identical_static_video() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    scenes(
        p,
        1,
        &[
            "--resolution",
            "12",
            "--frames",
            "4",
            "--trajectory",
            "lateral",
            "--extent",
            "0",
        ],
    );
    ok(
        p,
        &[
            "evaluate",
            "--gen",
            "data/scene_0",
            "--gt",
            "data/scene_0",
            "--poses-gen",
            "data/scene_0/cameras.json",
            "--poses-gt",
            "data/scene_0/cameras.json",
            "--out",
            "ev/m.csv",
        ],
    );
    let csv = std::fs::read_to_string(p.join("ev/m.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "video,frame,psnr,ssim,imq,drift,re_deg,te"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for (j, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 8);
        assert_eq!(r[0], "scene_0");
        assert_eq!(r[1], if j < 4 { j.to_string() } else { "mean".into() });
        assert_eq!(r[2].parse::<f64>().unwrap(), 100.0);
        assert_eq!(r[3].parse::<f64>().unwrap(), 1.0);
        assert_eq!(r[6].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[7].parse::<f64>().unwrap(), 0.0);
        if j < 4 {
            assert_eq!(r[5], "");
        } else {
            assert_eq!(r[5].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn missing_pose_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    scenes(p, 1, SMALL);
    let out = warpdiff(
        p,
        &[
            "evaluate",
            "--gen",
            "data/scene_0",
            "--gt",
            "data/scene_0",
            "--poses-gen",
            "nowhere.json",
            "--poses-gt",
            "data/scene_0/cameras.json",
            "--out",
            "m.csv",
        ],
    );
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("pose file not found") && err.contains("nowhere.json"),
        "{err}"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(&warpdiff(
            p,
            &["make-scenes", "--count", "1", "--out", "d", "--bogus"]
        )),
        2
    );
    assert_eq!(
        code(&warpdiff(
            p,
            &["train", "--data", "d", "--mode", "warp-x", "--out", "m"]
        )),
        2
    );
    assert_eq!(
        code(&warpdiff(
            p,
            &["make-scenes", "--count", "1", "--out", "d", "--frames", "1"]
        )),
        2
    );

    std::fs::write(p.join("blocker"), b"x").unwrap();
    assert_eq!(
        code(&warpdiff(
            p,
            &["make-scenes", "--count", "1", "--out", "blocker/sub"]
        )),
        3
    );
    assert_eq!(
        code(&warpdiff(
            p,
            &["train", "--data", "absent", "--out", "ck/m.tdnz"]
        )),
        3
    );

    scenes(p, 1, SMALL);
    let diverge = warpdiff(
        p,
        &[
            "train",
            "--data",
            "data",
            "--steps",
            "50",
            "--lr",
            "1e12",
            "--out",
            "ck/m.tdnz",
            "--feature-channels",
            "8",
            "--projected-dim",
            "4",
        ],
    );
    assert_eq!(
        code(&diverge),
        4,
        "{}",
        String::from_utf8_lossy(&diverge.stderr)
    );
}

#[test]
fn replay_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    scenes(p, 0, &[]);
    let path = p.join("data/run_config.json");
    let mut cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let mut top = cfg.clone();
    top["surprise"] = serde_json::json!(1);
    std::fs::write(p.join("top.json"), serde_json::to_vec(&top).unwrap()).unwrap();
    assert_eq!(code(&warpdiff(p, &["replay", "top.json"])), 2);
    cfg["command"]["make-scenes"]["surprise"] = serde_json::json!(1);
    std::fs::write(p.join("nested.json"), serde_json::to_vec(&cfg).unwrap()).unwrap();
    assert_eq!(code(&warpdiff(p, &["replay", "nested.json"])), 2);
    ok(p, &["replay", "data/run_config.json"]);
}

#[test]
fn single_mode_ablation_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "ablate",
            "--modes",
            "ray",
            "--budget",
            "5",
            "--out",
            "abl/table.csv",
            "--train-scenes",
            "2",
            "--heldout-scenes",
            "1",
            "--resolution",
            "8",
            "--frames",
            "2",
            "--eval-steps",
            "3",
            "--feature-channels",
            "8",
            "--projected-dim",
            "4",
        ],
    );
    let csv = std::fs::read_to_string(p.join("abl/table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mode,mse,psnr,ssim,drift,final_loss");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ray,"));
}

#[test]
fn sequential_and_parallel_sampling_agree() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    scenes(p, 1, SMALL);
    let run = |threads: &str, out: &str| {
        let st = Command::new(env!("CARGO_BIN_EXE_warpdiff"))
            .current_dir(p)
            .env("WARPDIFF_THREADS", threads)
            .args([
                "sample",
                "--oracle",
                "--scene",
                "data/scene_0.json",
                "--out",
                out,
                "--resolution",
                "12",
                "--frames",
                "3",
                "--steps",
                "10",
            ])
            .status()
            .unwrap();
        assert!(st.success());
    };
    run("0", "seq");
    run("2", "par");
    let (a, b) = (snapshot(&p.join("seq")), snapshot(&p.join("par")));
    for (k, v) in &a {
        if k != Path::new("run_config.json") {
            assert_eq!(v, &b[k], "{} differs", k.display());
        }
    }
}
