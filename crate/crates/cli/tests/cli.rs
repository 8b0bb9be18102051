use std::path::Path;
use std::process::{Command, Output};

use sdl_mri::SliceFile;
use sdl_net::{param_count, ModelConfig};
use sdl_train::{load_model, Checkpoint};

const TINY: &str = "[model]
embed_dim = 4
n_heads = 2
window = 4
leff_ratio = 2
n_sab = 1
n_dab = 1
kcnn_channels = 4
kcnn_layers = 3

[train]
epochs = 2
";

fn sdlformer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdlformer"))
        .current_dir(dir)
        .env_remove("SDLF_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sdlformer(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the single stderr line of a failing command.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = sdlformer(dir, args);
    assert!(!out.status.success(), "{args:?} succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "multi-line error: {err}");
    (out.status.code().unwrap(), err.trim_end().to_string())
}

fn setup(slices: &str, size: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    ok(
        dir.path(),
        &[
            "synth", "--out", "data", "--slices", slices, "--size", size, "--coils", "2", "--seed", "4",
        ],
    );
    dir
}

#[test]
fn synth_writes_files_and_manifest_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth", "--out", "a", "--slices", "8", "--size", "16x12", "--coils", "3", "--seed", "9",
        ],
    );
    ok(
        d,
        &[
            "synth", "--out", "b", "--slices", "8", "--size", "16x12", "--coils", "3", "--seed", "9",
        ],
    );
    let files: Vec<_> = std::fs::read_dir(d.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 9);
    let manifest = std::fs::read_to_string(d.join("a/manifest.csv")).unwrap();
    assert!(manifest.starts_with("file,seed,split\n"));
    assert_eq!(manifest.lines().count(), 9);
    assert_eq!(manifest.lines().filter(|l| l.ends_with(",val")).count(), 2);
    for f in files {
        assert_eq!(
            std::fs::read(d.join("a").join(&f)).unwrap(),
            std::fs::read(d.join("b").join(&f)).unwrap()
        );
    }
    let s = SliceFile::load(d.join("a/slice_000.sdlk")).unwrap();
    assert_eq!((s.n_coils(), s.h(), s.w()), (3, 16, 12));
}

#[test]
fn synth_accepts_a_single_coil() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["synth", "--out", "d", "--slices", "2", "--size", "8x8", "--coils", "1"],
    );
    let s = SliceFile::load(dir.path().join("d/slice_001.sdlk")).unwrap();
    assert_eq!(s.n_coils(), 1);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = |name: &str| std::fs::read_to_string(d.join(name).join("manifest.csv")).unwrap();
    let env = |seed: &str, extra: &[&str], out: &str| {
        let mut args = vec!["synth", "--out", out, "--slices", "1", "--size", "8x8"];
        args.extend(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_sdlformer"))
            .current_dir(d)
            .env("SDLF_SEED", seed)
            .args(&args)
            .output()
            .unwrap();
        assert!(o.status.success());
    };
    ok(d, &["synth", "--out", "s7", "--slices", "1", "--size", "8x8", "--seed", "7"]);
    env("7", &[], "e7");
    env("8", &["--seed", "7"], "f7");
    assert_eq!(manifest("s7"), manifest("e7"));
    assert_eq!(manifest("s7"), manifest("f7"));

    // for training the config file sits between the flag and the environment
    ok(
        d,
        &[
            "synth", "--out", "data", "--slices", "3", "--size", "16x16", "--coils", "1", "--val", "1",
        ],
    );
    std::fs::write(d.join("c.toml"), format!("{TINY}seed = 21\n").replace("epochs = 2", "epochs = 1")).unwrap();
    let seed_of = |ck: &str| load_model::<f32>(&Checkpoint::load(&d.join(ck)).unwrap()).unwrap().0.train.seed;
    let train = |env_seed: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sdlformer"));
        cmd.current_dir(d).env_remove("SDLF_SEED");
        if let Some(s) = env_seed {
            cmd.env("SDLF_SEED", s);
        }
        let mut args = vec!["train", "--data", "data", "--out", out];
        args.extend(extra);
        assert!(cmd.args(&args).output().unwrap().status.success());
    };
    train(Some("5"), &["--config", "c.toml", "--seed", "3"], "a.sdlc");
    train(Some("5"), &["--config", "c.toml"], "b.sdlc");
    train(Some("5"), &["--epochs", "1"], "c.sdlc");
    train(None, &["--epochs", "1"], "d.sdlc");
    assert_eq!(
        [seed_of("a.sdlc"), seed_of("b.sdlc"), seed_of("c.sdlc"), seed_of("d.sdlc")],
        [3, 21, 5, 0]
    );
}

#[test]
fn cnn_only_ablation_and_reporting() {
    let dir = setup("4", "16x16");
    let out = ok(
        dir.path(),
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "cnn.sdlc",
            "--no-sab",
            "--no-dab",
        ],
    );
    let cfg = ModelConfig {
        kcnn_channels: 4,
        kcnn_layers: 3,
        n_coils: 2,
        enable_sab: false,
        enable_dab: false,
        ..Default::default()
    };
    assert!(out.contains(&format!("parameters: {}\n", param_count(&cfg))), "{out}");
    assert!(out.contains("final validation loss: "));
    let (meta, params) = load_model::<f32>(&Checkpoint::load(&dir.path().join("cnn.sdlc")).unwrap()).unwrap();
    assert!(!meta.model.has_transformer());
    assert!(params.names().iter().all(|n| n.starts_with("kcnn.")));
    let log = std::fs::read_to_string(dir.path().join("cnn.sdlc.log.csv")).unwrap();
    assert!(log.starts_with("epoch,split,loss,lr\n"));
    assert_eq!(log.lines().count(), 1 + 2 * 2);
}

#[test]
fn no_locality_flag_removes_depthwise_convs() {
    let dir = setup("4", "16x16");
    ok(
        dir.path(),
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "nl.sdlc",
            "--no-locality",
            "--epochs",
            "1",
        ],
    );
    let (meta, params) = load_model::<f32>(&Checkpoint::load(&dir.path().join("nl.sdlc")).unwrap()).unwrap();
    assert!(!meta.model.enable_locality);
    assert!(!params.names().iter().any(|n| n.contains("lcm") || n.contains("dwconv")));
}

#[test]
fn resume_reproduces_an_uninterrupted_run() {
    let dir = setup("4", "16x16");
    let d = dir.path();
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "full.sdlc",
            "--epochs",
            "3",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "part.sdlc",
            "--epochs",
            "3",
        ],
    );
    // rewind the second run to its state after one epoch and continue
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "part.sdlc",
            "--epochs",
            "1",
        ],
    );
    let out = ok(d, &["train", "--data", "data", "--out", "part.sdlc", "--resume", "--epochs", "3"]);
    assert!(out.contains("epoch 2/3") && !out.contains("epoch 1/3"), "{out}");
    for suffix in ["", ".log.csv", ".last"] {
        let a = std::fs::read(d.join(format!("full.sdlc{suffix}"))).unwrap();
        let b = std::fs::read(d.join(format!("part.sdlc{suffix}"))).unwrap();
        assert!(a == b, "{suffix} differs");
    }
}

#[test]
fn eval_rows_and_full_sampling_sentinel() {
    let dir = setup("4", "16x16");
    let d = dir.path();
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "m.sdlc",
            "--epochs",
            "1",
        ],
    );
    ok(d, &["eval", "--data", "data", "--ckpt", "m.sdlc", "--out", "e.csv"]);
    let csv = std::fs::read_to_string(d.join("e.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "slice_id,method,psnr_db,ssim");
    assert_eq!(lines.iter().filter(|l| l.contains(",ZF,")).count(), 4 + 1);
    assert_eq!(lines.iter().filter(|l| l.contains(",model,")).count(), 4 + 1);
    let out = ok(
        d,
        &[
            "eval", "--data", "data", "--ckpt", "m.sdlc", "--out", "full.csv", "--accel", "1", "--split", "val",
        ],
    );
    assert!(out.contains("ZF: mean PSNR inf dB, mean SSIM 1.0000"), "{out}");
    let full = std::fs::read_to_string(d.join("full.csv")).unwrap();
    assert!(full.lines().skip(1).all(|l| l.ends_with(",inf,1.0")), "{full}");
    ok(d, &["eval", "--data", "data", "--ckpt", "m.sdlc", "--out", "again.csv"]);
    assert_eq!(csv, std::fs::read_to_string(d.join("again.csv")).unwrap());
}

#[test]
fn recon_writes_images_and_sidecar() {
    let dir = setup("4", "16x16");
    let d = dir.path();
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--config",
            "tiny.toml",
            "--out",
            "m.sdlc",
            "--epochs",
            "1",
        ],
    );
    ok(
        d,
        &["recon", "--slice", "data/slice_003.sdlk", "--ckpt", "m.sdlc", "--out", "r.png"],
    );
    ok(
        d,
        &["recon", "--slice", "data/slice_003.sdlk", "--ckpt", "m.sdlc", "--out", "r2.png"],
    );
    assert_eq!(std::fs::read(d.join("r.png")).unwrap(), std::fs::read(d.join("r2.png")).unwrap());
    assert_eq!(
        std::fs::read(d.join("r_residual.png")).unwrap(),
        std::fs::read(d.join("r2_residual.png")).unwrap()
    );
    let side = std::fs::read_to_string(d.join("r.txt")).unwrap();
    assert!(
        side.starts_with("image r.png min ") && side.contains("residual r_residual.png"),
        "{side}"
    );

    // the sidecar's metrics agree with the evaluation table
    ok(d, &["eval", "--data", "data", "--ckpt", "m.sdlc", "--out", "e.csv"]);
    let csv = std::fs::read_to_string(d.join("e.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("slice_003,model,")).unwrap();
    let psnr = row.split(',').nth(2).unwrap();
    assert!(side.contains(&format!("psnr_db {psnr}\n")), "{side} vs {row}");

    let mut s = SliceFile::load(d.join("data/slice_003.sdlk")).unwrap();
    s.gt = None;
    s.save(d.join("nogt.sdlk")).unwrap();
    let out = sdlformer(d, &["recon", "--slice", "nogt.sdlk", "--ckpt", "m.sdlc", "--out", "n.pgm"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no ground truth"));
    assert!(d.join("n.pgm").exists() && !d.join("n_residual.pgm").exists());
    assert!(std::fs::read(d.join("n.pgm")).unwrap().starts_with(b"P5\n16 16 255\n"));
}

#[test]
fn error_paths_are_single_prefixed_lines() {
    let dir = setup("4", "16x16");
    let d = dir.path();
    let (code, line) = fails(d, &["train", "--data", "data", "--out", "x.sdlc", "--accel", "3"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error[usage]: "), "{line}");
    let (code, line) = fails(d, &["eval", "--data", "data", "--ckpt", "missing.sdlc", "--out", "e.csv"]);
    assert_eq!(code, 3);
    assert!(line.starts_with("error[io]: "), "{line}");
    std::fs::write(d.join("bad.toml"), "[model]\nembed_dims = 8\n").unwrap();
    let (code, line) = fails(d, &["train", "--data", "data", "--config", "bad.toml", "--out", "x.sdlc"]);
    assert_eq!(code, 5);
    assert!(line.starts_with("error[config]: ") && line.contains("embed_dims"), "{line}");
    std::fs::write(d.join("junk.sdlc"), b"SDLC\x01\x00").unwrap();
    let (code, line) = fails(d, &["eval", "--data", "data", "--ckpt", "junk.sdlc", "--out", "e.csv"]);
    assert_eq!(code, 4);
    assert!(line.starts_with("error[format]: "), "{line}");
    let (code, _) = fails(d, &["train", "--data", "data", "--out", "x.sdlc", "--resume"]);
    assert_eq!(code, 3);
    let (code, _) = fails(d, &["synth", "--out", "z", "--slices", "2", "--size", "4x4"]);
    assert_eq!(code, 2);
    let (code, line) = fails(d, &["nonsense"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error[usage]: "));
    let (code, line) = fails(d, &["recon", "--slice", "data/slice_000.sdlk", "--ckpt", "x", "--out", "r.jpg"]);
    assert_eq!(code, 2);
    assert!(line.contains(".png or .pgm"));
}
