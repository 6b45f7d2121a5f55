//! Training checkpoints and frozen-network weight files, both stored as an
//! [`Archive`].
//!
//! Checkpoint arrays are namespaced: `g/…` generator parameters, `d/…`
//! discriminator parameters, `d.buffer/…` batch-norm running statistics,
//! and `opt_g.m/…`, `opt_g.v/…`, `opt_d.m/…`, `opt_d.v/…` Adam moments.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srtgan_core::optim::{Adam, Moments};
use srtgan_core::trainer::{EpochSampler, TrainConfig, TrainState};
use srtgan_core::{ParamStore, Tensor};

use crate::archive::Archive;
use crate::config::config_hash;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    kind: String,
    step: u64,
    seed: u64,
    config: TrainConfig,
    config_hash: String,
    rng: ChaCha8Rng,
    sampler: EpochSampler,
    opt_g_t: u64,
    opt_d_t: u64,
}

/// A restorable training snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub config_hash: String,
    pub state: TrainState,
}

fn put_store(arrays: &mut BTreeMap<String, Tensor<f32>>, prefix: &str, store: &ParamStore<f32>) {
    for (k, v) in store.iter() {
        arrays.insert(format!("{prefix}/{k}"), v.clone());
    }
}

fn put_adam(arrays: &mut BTreeMap<String, Tensor<f32>>, prefix: &str, opt: &Adam<f32>) {
    for (k, m) in &opt.state {
        arrays.insert(format!("{prefix}.m/{k}"), m.m.clone());
        arrays.insert(format!("{prefix}.v/{k}"), m.v.clone());
    }
}

fn take_prefix(arrays: &mut BTreeMap<String, Tensor<f32>>, prefix: &str) -> BTreeMap<String, Tensor<f32>> {
    let p = format!("{prefix}/");
    let keys: Vec<String> = arrays.keys().filter(|k| k.starts_with(&p)).cloned().collect();
    keys.into_iter()
        .map(|k| {
            let v = arrays.remove(&k).unwrap();
            (k[p.len()..].to_string(), v)
        })
        .collect()
}

fn take_adam(
    arrays: &mut BTreeMap<String, Tensor<f32>>,
    prefix: &str,
    opt: &mut Adam<f32>,
    path: &Path,
) -> Result<()> {
    let ms = take_prefix(arrays, &format!("{prefix}.m"));
    let mut vs = take_prefix(arrays, &format!("{prefix}.v"));
    for (k, m) in ms {
        let v = vs
            .remove(&k)
            .ok_or_else(|| Error::format(path, format!("{prefix}: second moment of `{k}` missing")))?;
        opt.state.insert(k, Moments { m, v });
    }
    if let Some(k) = vs.keys().next() {
        return Err(Error::format(path, format!("{prefix}: first moment of `{k}` missing")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(config: TrainConfig, state: TrainState) -> Self {
        Checkpoint {
            config_hash: config_hash(&config),
            config,
            state,
        }
    }

    pub fn to_archive(&self) -> Archive {
        let s = &self.state;
        let header = CheckpointHeader {
            kind: "checkpoint".into(),
            step: s.step,
            seed: s.seed,
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            rng: s.rng.clone(),
            sampler: s.sampler.clone(),
            opt_g_t: s.opt_g.t,
            opt_d_t: s.opt_d.t,
        };
        let mut arrays = BTreeMap::new();
        put_store(&mut arrays, "g", &s.generator);
        put_store(&mut arrays, "d", &s.discriminator);
        for (k, v) in s.discriminator.buffers() {
            arrays.insert(format!("d.buffer/{k}"), v.clone());
        }
        put_adam(&mut arrays, "opt_g", &s.opt_g);
        put_adam(&mut arrays, "opt_d", &s.opt_d);
        Archive {
            header: serde_json::to_value(header).expect("header serialises"),
            arrays,
        }
    }

    pub fn from_archive(mut a: Archive, path: &Path) -> Result<Self> {
        let h: CheckpointHeader = serde_json::from_value(a.header.clone())
            .map_err(|e| Error::format(path, format!("checkpoint header: {e}")))?;
        if h.kind != "checkpoint" {
            return Err(Error::format(path, format!("expected a checkpoint, found a `{}` file", h.kind)));
        }
        let recomputed = config_hash(&h.config);
        if recomputed != h.config_hash {
            return Err(Error::format(path, "stored config hash does not match the stored config"));
        }
        let mut generator = ParamStore::new();
        for (k, v) in take_prefix(&mut a.arrays, "g") {
            generator.insert(k, v);
        }
        let mut discriminator = ParamStore::new();
        for (k, v) in take_prefix(&mut a.arrays, "d") {
            discriminator.insert(k, v);
        }
        for (k, v) in take_prefix(&mut a.arrays, "d.buffer") {
            discriminator.insert_buffer(k, v);
        }
        let mut opt_g = Adam::new(h.config.optimizer);
        opt_g.t = h.opt_g_t;
        take_adam(&mut a.arrays, "opt_g", &mut opt_g, path)?;
        let mut opt_d = Adam::new(h.config.optimizer);
        opt_d.t = h.opt_d_t;
        take_adam(&mut a.arrays, "opt_d", &mut opt_d, path)?;
        if let Some(k) = a.arrays.keys().next() {
            return Err(Error::format(path, format!("unexpected array `{k}`")));
        }
        let ckpt = Checkpoint {
            config: h.config,
            config_hash: h.config_hash,
            state: TrainState {
                seed: h.seed,
                step: h.step,
                generator,
                discriminator,
                opt_g,
                opt_d,
                rng: h.rng,
                sampler: h.sampler,
            },
        };
        ckpt.check_layout(path)?;
        Ok(ckpt)
    }

    /// Parameter names and shapes must match what the stored configuration
    /// builds.
    fn check_layout(&self, path: &Path) -> Result<()> {
        let models = srtgan_core::trainer::Models::new(&self.config)?;
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let g = models.generator.init::<f32, _>(&mut rng);
        let d = models.discriminator.init::<f32, _>(&mut rng);
        g.check_layout(&self.state.generator)
            .map_err(|e| Error::format(path, format!("generator parameters: {e}")))?;
        d.check_layout(&self.state.discriminator)
            .map_err(|e| Error::format(path, format!("discriminator parameters: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_archive(Archive::load(path)?, path)
    }
}

/// Save a frozen network's parameters. `network` names what they belong to
/// (`qa`, `vgg`, `generator`) and `config` is stored alongside for
/// inspection.
pub fn save_weights(path: &Path, network: &str, config: &impl Serialize, params: &ParamStore<f32>) -> Result<()> {
    let mut arrays = BTreeMap::new();
    for (k, v) in params.iter() {
        arrays.insert(k.to_string(), v.clone());
    }
    for (k, v) in params.buffers() {
        arrays.insert(format!("buffer/{k}"), v.clone());
    }
    let header = serde_json::json!({
        "kind": "weights",
        "network": network,
        "config": serde_json::to_value(config).expect("config serialises"),
    });
    Archive { header, arrays }.save(path)
}

/// Load a weight file written by [`save_weights`] or a converter, checking
/// that it holds `network` parameters.
pub fn load_weights(path: &Path, network: &str) -> Result<ParamStore<f32>> {
    let a = Archive::load(path)?;
    let kind = a.header.get("kind").and_then(|v| v.as_str());
    let net = a.header.get("network").and_then(|v| v.as_str());
    if kind != Some("weights") || net != Some(network) {
        return Err(Error::format(
            path,
            format!("expected `{network}` weights, found kind={kind:?} network={net:?}"),
        ));
    }
    let mut p = ParamStore::new();
    for (k, v) in a.arrays {
        match k.strip_prefix("buffer/") {
            Some(b) => p.insert_buffer(b, v),
            None => p.insert(k, v),
        }
    }
    Ok(p)
}
