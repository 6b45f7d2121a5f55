//! File-backed training runs: data loading, frozen critics, logs,
//! checkpoints, validation and resume.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use srtgan_core::metrics::{evaluate, Convention, Lpips, LpipsCalibration, MetricOptions, MetricsReport, ReportMeta};
use srtgan_core::trainer::{infer, Frozen, Models, StepRecord, TrainConfig, Trainer};
use srtgan_core::ImagePair;

use crate::checkpoint::{load_weights, Checkpoint};
use crate::config::config_hash;
use crate::dataset::load_pairs;
use crate::error::{Error, Result};

pub const LOG_FILE: &str = "train.log";

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub data_root: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides `train.seed`.
    pub seed: Option<u64>,
    pub resume: Option<PathBuf>,
    /// Relative `[paths]` entries are resolved against this directory.
    pub base_dir: Option<PathBuf>,
    /// Mirror log lines to stdout.
    pub echo: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    /// Whether the seed was drawn rather than configured.
    pub drawn_seed: bool,
    pub records: Vec<StepRecord>,
    pub checkpoints: Vec<PathBuf>,
    pub reports: Vec<(u64, MetricsReport)>,
}

impl RunOutcome {
    pub fn final_checkpoint(&self) -> Option<&Path> {
        self.checkpoints.last().map(|p| p.as_path())
    }
}

pub fn checkpoint_path(out_dir: &Path, step: u64) -> PathBuf {
    out_dir.join(format!("ckpt_{step:08}.srtg"))
}

pub fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let p = Path::new(p);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// Frozen critic parameters: weight files where configured, otherwise
/// random initialisation from `seed`.
pub fn load_frozen(cfg: &TrainConfig, models: &Models, seed: u64, base: Option<&Path>) -> Result<Frozen> {
    let mut frozen = Frozen::random(models, seed);
    if let Some(p) = &cfg.paths.qa_weights {
        frozen.qa = load_weights(&resolve(base, p), "qa")?;
    }
    if let Some(p) = &cfg.paths.vgg_weights {
        frozen.vgg = load_weights(&resolve(base, p), "vgg")?;
    }
    Ok(frozen)
}

pub fn load_calibration(path: &Path) -> Result<LpipsCalibration> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    LpipsCalibration::parse(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

struct Log {
    file: std::fs::File,
    path: PathBuf,
    echo: bool,
}

impl Log {
    fn line(&mut self, s: &str) -> Result<()> {
        if self.echo {
            println!("{s}");
        }
        writeln!(self.file, "{s}").map_err(|e| Error::io(&self.path, e))
    }
}

/// Train until `train.total_steps`, starting fresh or from `opts.resume`.
pub fn train(cfg: TrainConfig, opts: &TrainOptions) -> Result<RunOutcome> {
    let base = opts.base_dir.as_deref();
    let trainer = Trainer::new(cfg.clone())?;
    let resumed = match &opts.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let want = config_hash(&cfg);
            if ck.config_hash != want {
                return Err(Error::Config(format!(
                    "refusing to resume from {}: it was written with config hash {} but the current \
                     configuration hashes to {want}; only total_steps, cadences, seed and paths may change",
                    p.display(),
                    ck.config_hash
                )));
            }
            if let Some(s) = opts.seed.or(cfg.train.seed) {
                if s != ck.state.seed {
                    return Err(Error::Config(format!(
                        "seed {s} differs from the checkpoint's seed {}; drop --seed to resume",
                        ck.state.seed
                    )));
                }
            }
            Some(ck.state)
        }
        None => None,
    };
    let configured = opts.seed.or(cfg.train.seed);
    let (seed, drawn_seed) = match (&resumed, configured) {
        (Some(s), _) => (s.seed, false),
        (None, Some(s)) => (s, false),
        (None, None) => (rand::random::<u64>(), true),
    };

    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let log_path = opts.out_dir.join(LOG_FILE);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let mut log = Log {
        file,
        path: log_path,
        echo: opts.echo,
    };

    let data = load_pairs(&opts.data_root, cfg.generator.scale)?;
    if data.is_empty() {
        return Err(srtgan_core::Error::Empty("training dataset").into());
    }
    let val: Option<Vec<ImagePair>> = match &cfg.paths.val_root {
        Some(p) => Some(load_pairs(&resolve(base, p), cfg.generator.scale)?),
        None => None,
    };
    let frozen = load_frozen(&cfg, trainer.models(), seed, base)?;
    trainer.check_frozen(&frozen)?;
    let lpips = match &cfg.paths.lpips_calibration {
        Some(p) => Some(Lpips::new(
            trainer.models().vgg.clone(),
            frozen.vgg.clone(),
            load_calibration(&resolve(base, p))?,
        )?),
        None => None,
    };

    let mut state = match resumed {
        Some(s) => {
            if s.sampler.len != data.len() {
                return Err(Error::Config(format!(
                    "checkpoint was trained on {} pairs but {} has {}",
                    s.sampler.len,
                    opts.data_root.display(),
                    data.len()
                )));
            }
            s
        }
        None => trainer.init_state(seed, data.len()),
    };
    log.line(&format!(
        "run seed={seed}{} start_step={} total_steps={} pairs={} config_hash={}",
        if drawn_seed { " (drawn)" } else { "" },
        state.step,
        cfg.train.total_steps,
        data.len(),
        config_hash(&cfg)
    ))?;

    let t = &cfg.train;
    let mut out = RunOutcome {
        seed,
        drawn_seed,
        records: Vec::new(),
        checkpoints: Vec::new(),
        reports: Vec::new(),
    };
    while state.step < t.total_steps {
        let rec = trainer.step(&mut state, &frozen, &data)?;
        if t.log_every > 0 && rec.step % t.log_every == 0 {
            log.line(&rec.log_line())?;
        }
        out.records.push(rec);
        let last = state.step == t.total_steps;
        if (t.checkpoint_every > 0 && state.step % t.checkpoint_every == 0) || last {
            let p = checkpoint_path(&opts.out_dir, state.step);
            Checkpoint::new(cfg.clone(), state.clone()).save(&p)?;
            log.line(&format!("checkpoint step={} path={}", state.step, p.display()))?;
            out.checkpoints.push(p);
        }
        if let Some(val) = &val {
            if (t.validate_every > 0 && state.step % t.validate_every == 0) || last {
                let meta = ReportMeta {
                    checkpoint: format!("step {}", state.step),
                    dataset: cfg.paths.val_root.clone().unwrap_or_default(),
                    value_range: "[0,1]".into(),
                    convention: Convention::Rgb,
                    border: 0,
                };
                let g = &trainer.models().generator;
                let report = evaluate(
                    val,
                    |p| infer(g, &state.generator, &p.lr),
                    lpips.as_ref(),
                    &MetricOptions::default(),
                    meta,
                )?;
                let path = opts.out_dir.join(format!("val_{:08}.json", state.step));
                let json = serde_json::to_string_pretty(&report).expect("report serialises");
                std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
                let l = report.mean.lpips.map_or(String::from("-"), |v| format!("{v}"));
                log.line(&format!(
                    "validate step={} psnr={} ssim={} lpips={l}",
                    state.step, report.mean.psnr, report.mean.ssim
                ))?;
                out.reports.push((state.step, report));
            }
        }
    }
    Ok(out)
}
