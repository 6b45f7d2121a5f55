mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srtgan::archive::Archive;
use srtgan::checkpoint::{load_weights, save_weights, Checkpoint};
use srtgan::config::parse_config;
use srtgan_core::synthetic::dataset;
use srtgan_core::trainer::{Frozen, Trainer};

fn stepped(steps: usize) -> Checkpoint {
    let cfg = parse_config(TINY_TOML).unwrap();
    let tr = Trainer::new(cfg.clone()).unwrap();
    let data = dataset(&mut ChaCha8Rng::seed_from_u64(1), 3, 8, 8, 4).unwrap();
    let mut st = tr.init_state(21, data.len());
    let frozen = Frozen::random(tr.models(), 21);
    for _ in 0..steps {
        tr.step(&mut st, &frozen, &data).unwrap();
    }
    Checkpoint::new(cfg, st)
}

#[test]
fn round_trip_restores_parameters_optimiser_and_rng_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ck = stepped(3);
    let p = dir.path().join("c.srtg");
    ck.save(&p).unwrap();
    let back = Checkpoint::load(&p).unwrap();
    assert_eq!(back.state, ck.state);
    assert_eq!(back.config, ck.config);
    assert_eq!(back.config_hash, ck.config_hash);
    // Re-saving the loaded checkpoint reproduces the file byte for byte.
    let q = dir.path().join("d.srtg");
    back.save(&q).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    assert!(!dir.path().join("c.srtg.partial").exists());
}

#[test]
fn resumed_state_continues_the_same_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY_TOML).unwrap();
    let tr = Trainer::new(cfg).unwrap();
    let data = dataset(&mut ChaCha8Rng::seed_from_u64(1), 3, 8, 8, 4).unwrap();
    let frozen = Frozen::random(tr.models(), 21);

    let mut straight = stepped(2).state;
    let tail: Vec<_> = (0..3).map(|_| tr.step(&mut straight, &frozen, &data).unwrap()).collect();

    let p = dir.path().join("mid.srtg");
    stepped(2).save(&p).unwrap();
    let mut resumed = Checkpoint::load(&p).unwrap().state;
    let again: Vec<_> = (0..3).map(|_| tr.step(&mut resumed, &frozen, &data).unwrap()).collect();
    assert_eq!(tail, again);
    assert_eq!(straight, resumed);
}

#[test]
fn tampered_hash_and_layout_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ck = stepped(1);

    let mut a = ck.to_archive();
    a.header["config_hash"] = serde_json::Value::String("00".repeat(32));
    let p = dir.path().join("hash.srtg");
    a.save(&p).unwrap();
    assert!(Checkpoint::load(&p).unwrap_err().to_string().contains("hash"));

    let mut a = ck.to_archive();
    a.arrays.remove("g/llie.conv.weight");
    let p = dir.path().join("layout.srtg");
    a.save(&p).unwrap();
    let e = Checkpoint::load(&p).unwrap_err().to_string();
    assert!(e.contains("llie.conv.weight"), "{e}");

    let mut a = ck.to_archive();
    a.header["kind"] = serde_json::Value::String("weights".into());
    let p = dir.path().join("kind.srtg");
    a.save(&p).unwrap();
    assert!(Checkpoint::load(&p).is_err());
}

#[test]
fn truncated_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = stepped(0).to_archive().to_bytes();
    for cut in [0, 7, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(Archive::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        let p = dir.path().join(format!("t{cut}.srtg"));
        std::fs::write(&p, &bytes[..cut]).unwrap();
        let e = Checkpoint::load(&p).unwrap_err().to_string();
        assert!(e.contains(&format!("t{cut}.srtg")), "{e}");
    }
}

#[test]
fn weight_files_check_the_network_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(TINY_TOML).unwrap();
    let tr = Trainer::new(cfg.clone()).unwrap();
    let frozen = Frozen::random(tr.models(), 2);
    let p = dir.path().join("qa.srtg");
    save_weights(&p, "qa", &cfg.qa, &frozen.qa).unwrap();
    assert_eq!(load_weights(&p, "qa").unwrap(), frozen.qa);
    assert!(load_weights(&p, "vgg").unwrap_err().to_string().contains("qa"));
}

#[test]
fn cli_resume_log_matches_an_unbroken_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data, 4, 12, 3);
    let cfg = write_config(dir.path(), "");
    let train = |out: &str, steps: &str, resume: Option<&std::path::Path>| {
        let out = dir.path().join(out);
        let mut args = vec!["train", "--config", s(&cfg), "--data-root", s(&data), "--out-dir", s(&out)];
        args.extend(["--total-steps", steps, "--seed", "4", "--quiet"]);
        if let Some(r) = resume {
            args.extend(["--resume", s(r)]);
        }
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let log = std::fs::read_to_string(out.join("train.log")).unwrap();
        log.lines().filter(|l| l.starts_with("step=")).map(String::from).collect::<Vec<_>>()
    };
    let full = train("full", "20", None);
    let first = train("part", "10", None);
    let ckpt = dir.path().join("part").join("ckpt_00000010.srtg");
    let rest = train("part", "20", Some(&ckpt));
    assert_eq!(first.len(), 10);
    assert_eq!(rest.len(), 20, "log is appended across the resume");
    assert_eq!(full, rest);
}
