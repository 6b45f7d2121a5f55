mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srtgan::checkpoint::save_weights;
use srtgan::image_io::{load_image, save_png, BitDepth};
use srtgan::qa_data::{write_manifest, ManifestRow};
use srtgan_core::imaging::{bicubic_resize_to, gaussian_blur};
use srtgan_core::metrics::LpipsCalibration;
use srtgan_core::synthetic::scene;
use srtgan_core::{ImageTensor, Vgg, VggConfig};

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn data(&self) -> std::path::PathBuf {
        self.dir.path().join("data")
    }
    fn out(&self) -> std::path::PathBuf {
        self.dir.path().join("out")
    }
}

fn trained(extra: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let r = Run { dir };
    write_dataset(&r.data(), 4, 12, 1);
    let cfg = write_config(r.dir.path(), extra);
    let o = run(&[
        "train",
        "--config",
        s(&cfg),
        "--data-root",
        s(&r.data()),
        "--out-dir",
        s(&r.out()),
        "--seed",
        "5",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    r
}

#[test]
fn tiny_training_run_writes_checkpoints_and_log() {
    let r = trained("");
    assert!(r.out().join("ckpt_00000010.srtg").exists());
    assert!(r.out().join("ckpt_00000020.srtg").exists());
    let log = std::fs::read_to_string(r.out().join("train.log")).unwrap();
    let steps: Vec<&str> = log.lines().filter(|l| l.starts_with("step=")).collect();
    assert_eq!(steps.len(), 20);
    for l in steps {
        for key in ["loss_g=", "loss_d=", "content=", "perceptual=", "qa=", "gan_g=", "gan_d="] {
            assert!(l.contains(key), "{l}");
        }
    }
}

#[test]
fn validation_reports_are_written_at_cadence() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("data"), 4, 12, 1);
    write_dataset(&dir.path().join("val"), 2, 10, 2);
    let cfg = write_config(dir.path(), "[paths]\nval_root = \"val\"\n");
    let out = dir.path().join("out");
    let o = run(&[
        "train", "--config", s(&cfg), "--data-root", s(&dir.path().join("data")), "--out-dir", s(&out), "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for step in [10, 20] {
        let p = out.join(format!("val_{step:08}.json"));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 2);
    }
    assert!(stdout(&o).contains("validate step=10"));
}

#[test]
fn data_root_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("data"), 4, 12, 1);
    let cfg = write_config(dir.path(), "");
    let o = bin()
        .env("SRTGAN_DATA_ROOT", dir.path().join("data"))
        .args(["train", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o")), "--total-steps", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // No --seed and no train.seed: one is drawn and printed.
    assert!(stdout(&o).lines().any(|l| l.starts_with("seed=")), "{}", stdout(&o));
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = run(&["train", "--data-root", "x", "--out-dir", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn bad_config_key_exits_two_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[loss]\nlamda_gan = 0.3\n");
    let o = run(&["train", "--config", s(&cfg), "--data-root", "x", "--out-dir", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda_gan"), "{}", stderr(&o));
}

#[test]
fn resume_with_a_different_config_is_refused() {
    let r = trained("");
    let cfg = write_config(r.dir.path(), "[loss]\ngan = 0.2\n");
    let o = run(&[
        "train",
        "--config",
        s(&cfg),
        "--data-root",
        s(&r.data()),
        "--out-dir",
        s(&r.dir.path().join("again")),
        "--resume",
        s(&r.out().join("ckpt_00000010.srtg")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config hash"), "{}", stderr(&o));
}

#[test]
fn infer_scales_by_four_and_handles_directories() {
    let r = trained("");
    let ckpt = r.out().join("ckpt_00000020.srtg");
    let inputs = r.dir.path().join("inputs");
    std::fs::create_dir(&inputs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in ["a", "b", "c"] {
        save_png(&inputs.join(format!("{name}.png")), &scene(&mut rng, 48, 48), 0, BitDepth::Eight).unwrap();
    }
    let single = r.dir.path().join("single");
    let o = run(&["infer", "--checkpoint", s(&ckpt), "--input", s(&inputs.join("a.png")), "--output", s(&single)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sr = load_image(&single.join("a_SR.png")).unwrap();
    assert_eq!((sr.height(), sr.width()), (192, 192));

    let many = r.dir.path().join("many");
    let o = run(&["infer", "--checkpoint", s(&ckpt), "--input", s(&inputs), "--output", s(&many)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(&many).unwrap().count(), 3);

    // Same checkpoint and input give the same bytes.
    let again = r.dir.path().join("again");
    run(&["infer", "--checkpoint", s(&ckpt), "--input", s(&inputs.join("a.png")), "--output", s(&again)]);
    assert_eq!(std::fs::read(single.join("a_SR.png")).unwrap(), std::fs::read(again.join("a_SR.png")).unwrap());
}

#[test]
fn infer_with_missing_checkpoint_names_it() {
    let o = run(&["infer", "--checkpoint", "/no/such/model.srtg", "--input", "x.png", "--output", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/model.srtg"));
}

#[test]
fn infer_rejects_a_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.srtg");
    std::fs::write(&p, b"SRTGARCH\x01\x00\x00\x00garbage").unwrap();
    let o = run(&["infer", "--checkpoint", s(&p), "--input", "x.png", "--output", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.srtg"));
}

#[test]
fn eval_writes_report_with_one_record_per_pair() {
    let r = trained("");
    let ckpt = r.out().join("ckpt_00000020.srtg");
    let report = r.dir.path().join("report.json");
    let o = run(&["eval", "--checkpoint", s(&ckpt), "--dataset", s(&r.data()), "--report", s(&report), "--convention", "y"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("PSNR ↑") && table.contains("SSIM ↑") && table.contains("LPIPS ↓"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    assert_eq!(v["meta"]["convention"], "y");
    assert!(stderr(&o).contains("--lpips-calibration"));
}

#[test]
fn eval_bicubic_with_lpips() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("data"), 3, 12, 9);
    let vgg = Vgg::new(VggConfig::default()).unwrap();
    let weights = dir.path().join("vgg.srtg");
    save_weights(&weights, "vgg", vgg.config(), &vgg.init(&mut ChaCha8Rng::seed_from_u64(0))).unwrap();
    let cal = dir.path().join("lpips.bin");
    std::fs::write(&cal, LpipsCalibration::uniform(&[64, 128, 256, 512]).to_bytes()).unwrap();
    let report = dir.path().join("r.json");
    let o = run(&[
        "eval",
        "--bicubic",
        "--dataset",
        s(&dir.path().join("data")),
        "--report",
        s(&report),
        "--lpips-calibration",
        s(&cal),
        "--vgg-weights",
        s(&weights),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["mean"]["lpips"].as_f64().unwrap() > 0.0);
    assert_eq!(v["meta"]["checkpoint"], "bicubic");
}

#[test]
fn eval_lpips_without_vgg_weights_explains_what_to_pass() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("data"), 1, 12, 9);
    let cal = dir.path().join("lpips.bin");
    std::fs::write(&cal, LpipsCalibration::uniform(&[64, 128, 256, 512]).to_bytes()).unwrap();
    let o = run(&[
        "eval", "--bicubic", "--dataset", s(&dir.path().join("data")), "--report", "r.json", "--lpips-calibration", s(&cal),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--vgg-weights"));
}

fn qa_corpus(dir: &std::path::Path, refs: usize) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    for r in 0..refs {
        let img = scene(&mut rng, 16, 16);
        let rp = format!("ref{r}.png");
        save_png(&dir.join(&rp), &img, 0, BitDepth::Eight).unwrap();
        for level in 0..5 {
            let d = gaussian_blur(&img, 0.5 * level as f64).unwrap();
            let dp = format!("ref{r}_d{level}.png");
            save_png(&dir.join(&dp), &d, 0, BitDepth::Eight).unwrap();
            rows.push(ManifestRow {
                reference_path: rp.clone(),
                distorted_path: dp,
                mos: 5.0 - level as f64,
            });
        }
    }
    let m = dir.join("manifest.csv");
    write_manifest(&m, &rows).unwrap();
    m
}

#[test]
fn qa_train_writes_weights_and_split_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = qa_corpus(dir.path(), 20);
    let cfg = dir.path().join("qa.toml");
    std::fs::write(&cfg, "[qa]\nblock_channels = [4, 4, 8]\nfc_hidden = 4\n[train]\nbatch_size = 10\ncrop = 16\n").unwrap();
    let out = dir.path().join("qa.srtg");
    let o = run(&[
        "qa-train", "--manifest", s(&manifest), "--out", s(&out), "--seed", "3", "--config", s(&cfg), "--epochs", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.exists());
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("qa.report.json")).unwrap()).unwrap();
    assert_eq!(rep["result"]["train_size"], 70);
    assert_eq!(rep["result"]["val_size"], 10);
    assert_eq!(rep["result"]["test_size"], 20);
    assert_eq!(rep["result"]["epoch_loss"].as_array().unwrap().len(), 2);
    srtgan::checkpoint::load_weights(&out, "qa").unwrap();
}

#[test]
fn qa_train_lists_malformed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "reference_path,distorted_path,mos\na.png,b.png,2\na.png,c.png,0.2\na.png,d.png,\n").unwrap();
    let o = run(&["qa-train", "--manifest", s(&m), "--out", s(&dir.path().join("q.srtg")), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("row 2") && e.contains("row 3") && !e.contains("row 1:"), "{e}");
}

#[test]
fn compare_degradation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let hr = scene(&mut rng, 64, 64);
    let hr_p = dir.path().join("hr.png");
    save_png(&hr_p, &hr, 0, BitDepth::Eight).unwrap();
    let hr = load_image(&hr_p).unwrap();

    // A camera-like LR: blurred and box-downsampled, not bicubic.
    let true_lr = srtgan_core::synthetic::degrade(&hr, 4, 1.6).unwrap();
    let lr_p = dir.path().join("lr.png");
    save_png(&lr_p, &true_lr, 0, BitDepth::Eight).unwrap();
    let plot = dir.path().join("plot.png");
    let o = run(&["compare-degradation", "--hr", s(&hr_p), "--lr", s(&lr_p), "--out", s(&plot), "--patch", "2,2,12,12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.contains("psnr=") && !line.contains("psnr=inf"), "{line}");
    let img = load_image(&plot).unwrap();
    assert_eq!(img.height(), 120);

    // A flat HR downsamples to exactly its LR under any kernel.
    let flat = ImageTensor::constant(1, 32, 32, 0.4).unwrap();
    let flat_lr = bicubic_resize_to(&flat, 8, 8).unwrap();
    let (fh, fl) = (dir.path().join("fh.png"), dir.path().join("fl.png"));
    save_png(&fh, &flat, 0, BitDepth::Eight).unwrap();
    save_png(&fl, &flat_lr, 0, BitDepth::Eight).unwrap();
    let o = run(&["compare-degradation", "--hr", s(&fh), "--lr", s(&fl), "--out", s(&plot), "--patch", "0,0,8,8"]);
    assert!(stdout(&o).contains("psnr=inf"), "{}", stdout(&o));

    let o = run(&["compare-degradation", "--hr", s(&fh), "--lr", s(&fl), "--out", s(&plot), "--patch", "4,4,8,8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kadid_manifest_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("dmos.csv"), "dist_img,ref_img,dmos,var\nI01_01_01.png,I01.png,4.57,0.5\n").unwrap();
    let o = run(&["kadid-manifest", "--root", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert!(text.starts_with("reference_path,distorted_path,mos"));
    assert!(text.contains("images/I01.png,images/I01_01_01.png,4.57"));
}

#[test]
fn every_command_documents_its_flags() {
    let cases: [(&str, &[&str]); 6] = [
        ("train", &["--config", "--data-root", "--out-dir", "--seed", "--resume", "--total-steps", "--quiet"]),
        ("infer", &["--checkpoint", "--input", "--output"]),
        ("eval", &["--checkpoint", "--bicubic", "--dataset", "--report", "--convention", "--border", "--lpips-calibration", "--vgg-weights"]),
        ("qa-train", &["--manifest", "--out", "--seed", "--config", "--epochs"]),
        ("compare-degradation", &["--hr", "--lr", "--out", "--patch"]),
        ("kadid-manifest", &["--root", "--out"]),
    ];
    for (cmd, flags) in cases {
        let o = run(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let h = stdout(&o);
        for f in flags {
            assert!(h.contains(f), "{cmd} --help lacks {f}");
        }
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
