#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srtgan::dataset::save_pairs;
use srtgan_core::synthetic::dataset;

/// Small enough that a step takes milliseconds.
pub const TINY_TOML: &str = r#"
[generator]
base_channels = 4
n_rir = 1
resblocks_per_rir = 1
convs_per_resblock = 2
ca_reduction = 2

[discriminator]
base_channels = 4
strides = [2, 2, 1]
max_doublings = 1

[qa]
block_channels = [4, 4, 8]
fc_hidden = 4

[vgg]
widths = [4, 4, 8, 8]

[train]
batch_size = 2
lr_crop = 6
total_steps = 20
checkpoint_every = 10
validate_every = 10
log_every = 1
"#;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srtgan"));
    c.env_remove("SRTGAN_DATA_ROOT");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn srtgan")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `count` synthetic pairs with `lr × lr` LR images.
pub fn write_dataset(root: &Path, count: usize, lr: usize, seed: u64) {
    let pairs = dataset(&mut ChaCha8Rng::seed_from_u64(seed), count, lr, lr, 4).unwrap();
    save_pairs(root, &pairs).unwrap();
}

pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, format!("{TINY_TOML}\n{extra}")).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
