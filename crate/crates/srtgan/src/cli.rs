//! The `srtgan` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use srtgan_core::metrics::{bicubic_baseline, evaluate, Convention, Lpips, MetricOptions, ReportMeta};
use srtgan_core::qa_train::{split_by_reference, train_qa, QaTrainConfig, QaTrainReport, Splits};
use srtgan_core::trainer::{infer, seeded, Models};
use srtgan_core::{QaConfig, QaNetwork};

use crate::checkpoint::{load_weights, save_weights, Checkpoint};
use crate::compare::{compare_degradation, side_by_side, Patch};
use crate::config::load_config;
use crate::dataset::load_pairs;
use crate::error::{Error, Result};
use crate::image_io::{load_image, load_image_with_depth, save_png, BitDepth};
use crate::qa_data::{kadid_manifest, load_samples, read_manifest, write_manifest};
use crate::training::{load_calibration, train, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "srtgan", version, about = "Triplet-loss GAN for x4 super-resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train generator and discriminator from a TOML configuration.
    Train(TrainArgs),
    /// Super-resolve one image or every image in a directory.
    Infer(InferArgs),
    /// Score a checkpoint (or bicubic upsampling) on a paired dataset.
    Eval(EvalArgs),
    /// Fit the quality network to a MOS manifest.
    QaTrain(QaTrainArgs),
    /// Compare a true LR patch against the bicubic-downsampled HR patch.
    CompareDegradation(CompareArgs),
    /// Write a QA manifest for a KADID-10K directory.
    KadidManifest(KadidArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory of `{id}_LR.png` / `{id}_HR.png` pairs.
    #[arg(long, env = "SRTGAN_DATA_ROOT")]
    pub data_root: PathBuf,
    /// Receives `train.log`, checkpoints and validation reports.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed for all randomness; drawn and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from a checkpoint written with the same configuration.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override `train.total_steps`.
    #[arg(long)]
    pub total_steps: Option<u64>,
    /// Do not echo log lines to stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// An image file or a directory of PNG / JPEG images.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; results are written as `{name}_SR.png`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("method").required(true).args(["checkpoint", "bicubic"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate bicubic upsampling of the LR images instead of a model.
    #[arg(long)]
    pub bicubic: bool,
    /// Paired dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON report destination.
    #[arg(long)]
    pub report: PathBuf,
    /// Channel convention for PSNR/SSIM.
    #[arg(long, default_value = "rgb", value_parser = ["rgb", "y"])]
    pub convention: String,
    /// Pixels cropped from each border before PSNR/SSIM.
    #[arg(long, default_value_t = 0)]
    pub border: usize,
    /// LPIPS calibration file; LPIPS is reported only when given.
    #[arg(long)]
    pub lpips_calibration: Option<PathBuf>,
    /// VGG weights for LPIPS (defaults to the checkpoint's `paths.vgg_weights`).
    #[arg(long)]
    pub vgg_weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QaTrainArgs {
    /// CSV with columns reference_path, distorted_path, mos.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Weight file destination; the split report goes next to it as `.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML with optional `[qa]` and `[train]` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `train.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub hr: PathBuf,
    #[arg(long)]
    pub lr: PathBuf,
    /// Side-by-side PNG destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Patch in LR pixels as x,y,w,h.
    #[arg(long)]
    pub patch: Patch,
}

#[derive(Debug, Args)]
pub struct KadidArgs {
    /// KADID-10K root containing `dmos.csv` and `images/`.
    #[arg(long)]
    pub root: PathBuf,
    /// Manifest destination (defaults to `{root}/manifest.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// QA training configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaRunConfig {
    pub qa: QaConfig,
    pub train: QaTrainConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QaRunReport {
    pub seed: u64,
    pub manifest: String,
    pub splits: Splits,
    pub result: QaTrainReport,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::QaTrain(a) => cmd_qa_train(a),
        Command::CompareDegradation(a) => cmd_compare(a),
        Command::KadidManifest(a) => cmd_kadid(a),
    }
}

fn draw_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        println!("seed={s}");
        s
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(n) = a.total_steps {
        cfg.train.total_steps = n;
        cfg.validate()?;
    }
    for (name, path, weight) in [
        ("qa", &cfg.paths.qa_weights, cfg.loss.qa),
        ("vgg", &cfg.paths.vgg_weights, cfg.loss.perceptual),
    ] {
        if path.is_none() && weight > 0.0 {
            eprintln!("note: paths.{name}_weights is not set; using a randomly initialised {name} critic (see docs/weights.md)");
        }
    }
    let opts = TrainOptions {
        data_root: a.data_root,
        out_dir: a.out_dir,
        seed: a.seed,
        resume: a.resume,
        base_dir: a.config.parent().map(Path::to_path_buf),
        echo: !a.quiet,
    };
    let out = train(cfg, &opts)?;
    if out.drawn_seed {
        println!("seed={}", out.seed);
    }
    if let Some(p) = out.final_checkpoint() {
        println!("final checkpoint: {}", p.display());
    }
    Ok(())
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let models = Models::new(&ck.config)?;
    let inputs: Vec<PathBuf> = if a.input.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(&a.input)
            .map_err(|e| Error::io(&a.input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect();
        v.sort();
        if v.is_empty() {
            return Err(Error::format(&a.input, "no PNG or JPEG images found"));
        }
        v
    } else {
        vec![a.input.clone()]
    };
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    for p in inputs {
        let (lr, depth) = load_image_with_depth(&p)?;
        let sr = infer(&models.generator, &ck.state.generator, &lr)?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let dst = a.output.join(format!("{stem}_SR.png"));
        save_png(&dst, &sr, 0, depth)?;
        println!("{} -> {} ({}x{})", p.display(), dst.display(), sr.width(), sr.height());
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let convention: Convention = a.convention.parse().map_err(|e: srtgan_core::Error| Error::Config(e.to_string()))?;
    let ck = a.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let scale = ck.as_ref().map_or(4, |c| c.config.generator.scale);
    let pairs = load_pairs(&a.dataset, scale)?;
    let lpips = match &a.lpips_calibration {
        None => {
            eprintln!(
                "note: LPIPS not computed; pass --lpips-calibration FILE (see docs/lpips_calibration.md) \
                 together with --vgg-weights FILE"
            );
            None
        }
        Some(cal) => {
            let vgg_path = a
                .vgg_weights
                .clone()
                .or_else(|| ck.as_ref().and_then(|c| c.config.paths.vgg_weights.as_ref().map(PathBuf::from)))
                .ok_or_else(|| {
                    Error::Config(String::from(
                        "LPIPS needs pretrained VGG weights: pass --vgg-weights FILE (see docs/weights.md)",
                    ))
                })?;
            let vgg_cfg = ck.as_ref().map(|c| c.config.vgg.clone()).unwrap_or_default();
            Some(Lpips::new(
                srtgan_core::Vgg::new(vgg_cfg)?,
                load_weights(&vgg_path, "vgg")?,
                load_calibration(cal)?,
            )?)
        }
    };
    let meta = ReportMeta {
        checkpoint: match &a.checkpoint {
            Some(p) => p.display().to_string(),
            None => String::from("bicubic"),
        },
        dataset: a.dataset.display().to_string(),
        value_range: String::from("[0,1]"),
        convention,
        border: a.border,
    };
    let opts = MetricOptions {
        convention,
        border: a.border,
    };
    let report = match &ck {
        Some(c) => {
            let models = Models::new(&c.config)?;
            evaluate(
                &pairs,
                |p| infer(&models.generator, &c.state.generator, &p.lr),
                lpips.as_ref(),
                &opts,
                meta,
            )?
        }
        None => evaluate(&pairs, bicubic_baseline, lpips.as_ref(), &opts, meta)?,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    std::fs::write(&a.report, json).map_err(|e| Error::io(&a.report, e))?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_qa_train(a: QaTrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let de = toml::Deserializer::new(&text);
            serde_path_to_error::deserialize::<_, QaRunConfig>(de)
                .map_err(|e| Error::Config(format!("{}: config key `{}`: {}", p.display(), e.path(), e.inner().message())))?
        }
        None => QaRunConfig::default(),
    };
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    cfg.qa.validate()?;
    cfg.train.optimizer.validate()?;
    let rows = read_manifest(&a.manifest)?;
    let seed = draw_seed(a.seed);
    let refs: Vec<&str> = rows.iter().map(|r| r.reference_path.as_str()).collect();
    let splits = split_by_reference(&refs, &mut seeded(seed, 0));
    let samples = load_samples(&a.manifest, &rows)?;
    let pick = |idx: &[usize]| -> Vec<_> { idx.iter().map(|&i| samples[i].clone()).collect() };
    let (tr, va, te) = (pick(&splits.train), pick(&splits.val), pick(&splits.test));
    let net = QaNetwork::new(cfg.qa.clone())?;
    let mut params = net.init::<f32, _>(&mut seeded(seed, 1));
    let result = train_qa(&net, &mut params, &tr, &va, &te, &cfg.train, &mut seeded(seed, 2))?;
    save_weights(&a.out, "qa", &cfg.qa, &params)?;
    let report = QaRunReport {
        seed,
        manifest: a.manifest.display().to_string(),
        splits,
        result,
    };
    let rp = report_path(&a.out);
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    std::fs::write(&rp, json).map_err(|e| Error::io(&rp, e))?;
    let r = &report.result;
    println!(
        "train={} val={} test={} val_mse={:.4} test_mse={:.4} mean_predictor_test_mse={:.4}",
        r.train_size, r.val_size, r.test_size, r.val_mse, r.test_mse, r.baseline_test_mse
    );
    Ok(())
}

/// `qa.srtg` → `qa.report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let hr = load_image(&a.hr)?;
    let lr = load_image(&a.lr)?;
    let c = compare_degradation(&hr, &lr, a.patch)?;
    save_png(&a.out, &side_by_side(&c)?, 0, BitDepth::Eight)?;
    let psnr = if c.psnr.is_infinite() {
        String::from("inf")
    } else {
        format!("{:.4}", c.psnr)
    };
    let ssim = c.ssim.map_or(String::from("-"), |s| format!("{s:.6}"));
    println!("scale={} psnr={psnr} ssim={ssim}", c.scale);
    Ok(())
}

fn cmd_kadid(a: KadidArgs) -> Result<()> {
    let rows = kadid_manifest(&a.root)?;
    let out = a.out.unwrap_or_else(|| a.root.join("manifest.csv"));
    write_manifest(&out, &rows)?;
    println!("{} rows -> {}", rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_required_flag_exits_two() {
        assert_eq!(run(["srtgan", "train", "--data-root", "d", "--out-dir", "o"]), 2);
        assert_eq!(run(["srtgan", "eval", "--dataset", "d", "--report", "r"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["srtgan", "--help"]), 0);
        assert_eq!(run(["srtgan", "infer", "--help"]), 0);
    }
}
