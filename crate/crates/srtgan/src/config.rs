//! TOML run configuration.
//!
//! Sections mirror [`TrainConfig`]: `[generator]`, `[discriminator]`, `[qa]`,
//! `[vgg]`, `[loss]`, `[optimizer]`, `[train]` and `[paths]`. Every key is
//! optional; unknown keys are errors.

use std::path::Path;

use sha2::{Digest, Sha256};
use srtgan_core::trainer::TrainConfig;

use crate::error::{Error, Result};

/// Keys that change how long or how often a run does things but not what
/// it computes. They may differ between a checkpoint and its resume.
const HASH_EXEMPT: [(&str, &str); 5] = [
    ("train", "total_steps"),
    ("train", "checkpoint_every"),
    ("train", "validate_every"),
    ("train", "log_every"),
    ("train", "seed"),
];

/// Parse and validate. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: TrainConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message();
        if path == "." || path.is_empty() {
            Error::Config(format!("config: {msg}"))
        } else {
            Error::Config(format!("config key `{path}`: {msg}"))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        Error::Core(srtgan_core::Error::Config(m)) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// SHA-256 over the canonical JSON of everything that affects the
/// computation: architectures, loss weights, optimiser and batch
/// settings. Cadences, the step budget, the seed and file paths are
/// excluded.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    let obj = v.as_object_mut().expect("config is a table");
    obj.remove("paths");
    for (section, key) in HASH_EXEMPT {
        if let Some(s) = obj.get_mut(section).and_then(|s| s.as_object_mut()) {
            s.remove(key);
        }
    }
    let canonical = serde_json::to_string(&v).expect("json");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), TrainConfig::default());
    }

    #[test]
    fn shipped_default_config_matches_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(parse_config(text).unwrap(), TrainConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        assert!(err("[loss]\nlamda = 1.0\n").contains("lamda"));
        assert!(err("[train]\nbatch_size = \"x\"\n").contains("`train.batch_size`"));
        assert!(err("[generator]\nscale = -1\n").contains("`generator.scale`"));
        assert!(err("[train]\ntotal_steps = 0\n").contains("train.total_steps"));
        assert!(err("[nonsense]\n").contains("nonsense"));
    }

    #[test]
    fn config_errors_map_to_exit_code_two() {
        assert_eq!(parse_config("[train]\ntotal_steps = 0\n").unwrap_err().exit_code(), 2);
        assert_eq!(parse_config("[loss]\nx = 1\n").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn hash_ignores_cadence_and_paths_only() {
        let base = TrainConfig::default();
        let h = config_hash(&base);
        let mut c = base.clone();
        c.train.total_steps = 7;
        c.train.checkpoint_every = 3;
        c.train.seed = Some(9);
        c.paths.val_root = Some("v".into());
        assert_eq!(config_hash(&c), h);
        let mut c = base.clone();
        c.loss.gan = 0.2;
        assert_ne!(config_hash(&c), h);
        let mut c = base;
        c.train.batch_size = 8;
        assert_ne!(config_hash(&c), h);
        assert_eq!(h.len(), 64);
    }
}
