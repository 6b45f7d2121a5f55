//! Alternating discriminator / generator optimisation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discriminator::{DiscMode, Discriminator, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::generator::{Generator, GeneratorConfig};
use crate::imaging::{augment, bicubic_resize_to, AugmentationSpec, CropSpec, ImagePair, ImageTensor, OffsetPolicy, Rotation};
use crate::losses::{
    content_loss, embed_triplet, fused_discriminator_loss, fused_generator_loss, gan_loss_discriminator,
    gan_loss_generator, merge_stats, perceptual_loss, qa_loss, vanilla_gan_discriminator, vanilla_gan_generator,
    GanKind, GeneratorTerms, LossWeights, Triplet,
};
use crate::optim::{Adam, AdamConfig};
use crate::params::ParamStore;
use crate::qa::{QaConfig, QaNetwork};
use crate::tape::{Eager, Graph, Tape};
use crate::tensor::Tensor;
use crate::vgg::{Vgg, VggConfig};

/// RNG stream ids derived from the run seed.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const GENERATOR: u64 = 1;
    pub const DISCRIMINATOR: u64 = 2;
    pub const QA: u64 = 3;
    pub const VGG: u64 = 4;
}

/// A ChaCha8 generator seeded with `seed` on stream `stream`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub batch_size: usize,
    /// Square LR crop side; the HR crop is `scale ×` larger.
    pub lr_crop: usize,
    pub total_steps: u64,
    pub d_steps_per_g: usize,
    pub seed: Option<u64>,
    pub checkpoint_every: u64,
    pub validate_every: u64,
    pub log_every: u64,
    /// Random flips and 90° rotations.
    pub augment: bool,
    pub gan_kind: GanKind,
    /// Feature taps used by the perceptual loss (1..=4).
    pub perceptual_layers: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            batch_size: 4,
            lr_crop: 48,
            total_steps: 100_000,
            d_steps_per_g: 1,
            seed: None,
            checkpoint_every: 5_000,
            validate_every: 5_000,
            log_every: 1,
            augment: true,
            gan_kind: GanKind::Triplet,
            perceptual_layers: 4,
        }
    }
}

/// External files of a run. Without a weight file the frozen network is
/// randomly initialised from the run seed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPaths {
    pub qa_weights: Option<String>,
    pub vgg_weights: Option<String>,
    pub lpips_calibration: Option<String>,
    /// Held-out pairs scored every `validate_every` steps.
    pub val_root: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub qa: QaConfig,
    pub vgg: VggConfig,
    pub loss: LossWeights,
    pub optimizer: AdamConfig,
    pub train: Schedule,
    pub paths: RunPaths,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.qa.validate()?;
        self.loss.validate()?;
        self.optimizer.validate()?;
        let t = &self.train;
        let bad = |m: String| Err(Error::Config(m));
        if t.batch_size == 0 {
            return bad(String::from("train.batch_size must be >= 1"));
        }
        if t.d_steps_per_g == 0 {
            return bad(String::from("train.d_steps_per_g must be >= 1"));
        }
        if t.total_steps == 0 {
            return bad(String::from("train.total_steps must be >= 1"));
        }
        if t.lr_crop == 0 {
            return bad(String::from("train.lr_crop must be >= 1"));
        }
        if !(1..=4).contains(&t.perceptual_layers) {
            return bad(format!("train.perceptual_layers = {} must be in 1..=4", t.perceptual_layers));
        }
        if self.loss.named().iter().all(|(_, w)| *w == 0.0) {
            return bad(String::from("at least one loss weight must be positive"));
        }
        let hr = t.lr_crop * self.generator.scale;
        if self.loss.gan > 0.0 && hr < self.discriminator.min_input_size() {
            return bad(format!(
                "train.lr_crop = {} gives {hr}px HR crops, below the discriminator minimum of {}",
                t.lr_crop,
                self.discriminator.min_input_size()
            ));
        }
        if self.loss.perceptual > 0.0 && hr < Vgg::MIN_INPUT {
            return bad(format!("train.lr_crop = {} is too small for the perceptual extractor", t.lr_crop));
        }
        Ok(())
    }
}

/// The four networks built from a configuration.
#[derive(Clone, Debug)]
pub struct Models {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub qa: QaNetwork,
    pub vgg: Vgg,
}

impl Models {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        Ok(Models {
            generator: Generator::new(cfg.generator.clone())?,
            discriminator: Discriminator::new(cfg.discriminator.clone())?,
            qa: QaNetwork::new(cfg.qa.clone())?,
            vgg: Vgg::new(cfg.vgg.clone())?,
        })
    }
}

/// Parameters of the frozen critics; never modified by training.
#[derive(Clone, Debug, PartialEq)]
pub struct Frozen {
    pub qa: ParamStore<f32>,
    pub vgg: ParamStore<f32>,
}

impl Frozen {
    pub fn random(models: &Models, seed: u64) -> Self {
        Frozen {
            qa: models.qa.init(&mut seeded(seed, streams::QA)),
            vgg: models.vgg.init(&mut seeded(seed, streams::VGG)),
        }
    }
}

/// Visits every index once per epoch in a freshly shuffled order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSampler {
    pub len: usize,
    pub order: Vec<usize>,
    pub pos: usize,
    pub epoch: u64,
}

impl EpochSampler {
    pub fn new(len: usize) -> Self {
        EpochSampler {
            len,
            order: Vec::new(),
            pos: 0,
            epoch: 0,
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.pos >= self.order.len() {
            self.order = (0..self.len).collect();
            self.order.shuffle(rng);
            self.pos = 0;
            self.epoch += 1;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub seed: u64,
    /// Completed steps.
    pub step: u64,
    pub generator: ParamStore<f32>,
    pub discriminator: ParamStore<f32>,
    pub opt_g: Adam<f32>,
    pub opt_d: Adam<f32>,
    pub rng: ChaCha8Rng,
    pub sampler: EpochSampler,
}

/// Losses of one step. Disabled terms are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based index of the step.
    pub step: u64,
    pub content: Option<f64>,
    pub perceptual: Option<f64>,
    pub qa: Option<f64>,
    pub gan_g: Option<f64>,
    /// Discriminator loss of the last D update of the step.
    pub gan_d: Option<f64>,
    pub loss_g: f64,
    pub loss_d: Option<f64>,
}

impl StepRecord {
    /// `key=value` pairs; disabled terms print as `-`.
    pub fn log_line(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::from("-"), |v| format!("{v}"));
        format!(
            "step={} loss_g={} loss_d={} content={} perceptual={} qa={} gan_g={} gan_d={}",
            self.step,
            self.loss_g,
            f(self.loss_d),
            f(self.content),
            f(self.perceptual),
            f(self.qa),
            f(self.gan_g),
            f(self.gan_d)
        )
    }
}

fn finite(v: f64, term: &'static str, step: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term, step })
    }
}

pub struct Trainer {
    config: TrainConfig,
    models: Models,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let models = Models::new(&config)?;
        Ok(Trainer { config, models })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    /// Fresh parameters and optimiser state for a dataset of `len` pairs.
    pub fn init_state(&self, seed: u64, len: usize) -> TrainState {
        TrainState {
            seed,
            step: 0,
            generator: self.models.generator.init(&mut seeded(seed, streams::GENERATOR)),
            discriminator: self.models.discriminator.init(&mut seeded(seed, streams::DISCRIMINATOR)),
            opt_g: Adam::new(self.config.optimizer),
            opt_d: Adam::new(self.config.optimizer),
            rng: seeded(seed, streams::DATA),
            sampler: EpochSampler::new(len),
        }
    }

    /// Check frozen parameter layouts against the configured networks.
    pub fn check_frozen(&self, frozen: &Frozen) -> Result<()> {
        let reference = Frozen::random(&self.models, 0);
        reference
            .qa
            .check_layout(&frozen.qa)
            .map_err(|e| Error::Format(format!("QA weights do not match the [qa] configuration: {e}")))?;
        reference
            .vgg
            .check_layout(&frozen.vgg)
            .map_err(|e| Error::Format(format!("VGG weights do not match the [vgg] configuration: {e}")))
    }

    /// Draw and augment the next batch, stacked into one pair.
    pub fn next_batch(&self, state: &mut TrainState, data: &[ImagePair]) -> Result<ImagePair> {
        if data.is_empty() {
            return Err(Error::Empty("training dataset"));
        }
        if state.sampler.len != data.len() {
            return Err(Error::InvalidArgument(format!(
                "sampler was built for {} pairs, dataset has {}",
                state.sampler.len,
                data.len()
            )));
        }
        let t = &self.config.train;
        let mut lrs = Vec::with_capacity(t.batch_size);
        let mut hrs = Vec::with_capacity(t.batch_size);
        for _ in 0..t.batch_size {
            let idx = state.sampler.next(&mut state.rng);
            let spec = if t.augment {
                AugmentationSpec::sample(&mut state.rng, Some(t.lr_crop))
            } else {
                AugmentationSpec {
                    hflip: false,
                    rotation: Rotation::R0,
                    crop: Some(CropSpec {
                        lr_size: t.lr_crop,
                        offset: OffsetPolicy::Random,
                    }),
                }
            };
            let p = augment(&data[idx], &spec, &mut state.rng)?;
            lrs.push(p.lr);
            hrs.push(p.hr);
        }
        let lr = ImageTensor::stack(&lrs.iter().collect::<Vec<_>>())?;
        let hr = ImageTensor::stack(&hrs.iter().collect::<Vec<_>>())?;
        ImagePair::new(lr, hr, self.config.generator.scale, "batch")
    }

    /// Sample a batch and run [`Trainer::train_step`].
    pub fn step(&self, state: &mut TrainState, frozen: &Frozen, data: &[ImagePair]) -> Result<StepRecord> {
        let batch = self.next_batch(state, data)?;
        self.train_step(state, frozen, &batch)
    }

    fn d_update(&self, disc: &ParamStore<f32>, sr: &Tensor<f32>, hr: &Tensor<f32>, neg: &Tensor<f32>) -> Result<DUpdate> {
        let d = &self.models.discriminator;
        let mut g = Graph::new();
        g.bind(disc, true);
        let (loss, stats) = match self.config.train.gan_kind {
            GanKind::Triplet => {
                let tri = Triplet {
                    anchor: g.constant(sr.clone()),
                    positive: g.constant(hr.clone()),
                    negative: g.constant(neg.clone()),
                };
                let (maps, stats) = embed_triplet(&mut g, d, disc, &tri, DiscMode::Train)?;
                (gan_loss_discriminator(&mut g, &maps)?, stats)
            }
            GanKind::Vanilla => {
                let (s, h) = (g.constant(sr.clone()), g.constant(hr.clone()));
                let (ds, st_s) = d.forward(&mut g, disc, &s, DiscMode::Train)?;
                let (dh, st_h) = d.forward(&mut g, disc, &h, DiscMode::Train)?;
                (vanilla_gan_discriminator(&mut g, &ds, &dh)?, merge_stats(alloc::vec![st_s, st_h]))
            }
        };
        let value = g.value(&loss).data()[0] as f64;
        let scaled = g.weighted_sum(&[(loss, self.config.loss.gan as f32)], 0.0)?;
        let grads = g.backward(scaled)?.into_params();
        Ok(DUpdate { value, grads, stats })
    }

    /// One discriminator phase (skipped when the adversarial weight is
    /// zero) followed by one generator update, on a prepared batch.
    pub fn train_step(&self, state: &mut TrainState, frozen: &Frozen, batch: &ImagePair) -> Result<StepRecord> {
        let step = state.step + 1;
        let w = self.config.loss;
        let kind = self.config.train.gan_kind;
        let lr = batch.lr.tensor().clone();
        let hr = batch.hr.tensor().clone();
        let use_gan = w.gan > 0.0;
        let neg = if use_gan && kind == GanKind::Triplet {
            Some(bicubic_resize_to(&batch.lr, batch.hr.height(), batch.hr.width())?.into_tensor())
        } else {
            None
        };
        let TrainState {
            generator,
            discriminator,
            opt_g,
            opt_d,
            ..
        } = state;

        let mut g = Graph::new();
        g.bind(&*generator, true);
        let x = g.constant(lr);
        let sr = self.models.generator.forward(&mut g, &x)?;

        let mut gan_d = None;
        if use_gan {
            let sr_val = g.value(&sr).clone();
            let neg_ref = neg.as_ref().unwrap_or(&hr);
            for _ in 0..self.config.train.d_steps_per_g {
                let up = self.d_update(discriminator, &sr_val, &hr, neg_ref)?;
                finite(up.value, "gan_d", step)?;
                opt_d.step(discriminator, &up.grads)?;
                self.models.discriminator.update_running_stats(discriminator, &up.stats)?;
                gan_d = Some(up.value);
            }
        }

        g.bind(&*discriminator, false);
        g.bind(&frozen.qa, false);
        g.bind(&frozen.vgg, false);
        let hv = g.constant(hr.clone());
        let mut weighted = Vec::new();
        let mut terms = GeneratorTerms::default();
        let scalar = |g: &Graph<'_, f32>, v: &crate::tape::Var| g.value(v).data()[0] as f64;
        if w.content > 0.0 {
            let v = content_loss(&mut g, &sr, &hv)?;
            terms.content = Some(finite(scalar(&g, &v), "content", step)?);
            weighted.push((v, w.content as f32));
        }
        if w.qa > 0.0 {
            let v = qa_loss(&mut g, &self.models.qa, &sr, &hv)?;
            terms.qa = Some(finite(scalar(&g, &v), "qa", step)?);
            weighted.push((v, w.qa as f32));
        }
        if use_gan {
            let d = &self.models.discriminator;
            let v = match kind {
                GanKind::Triplet => {
                    let tri = Triplet {
                        anchor: sr,
                        positive: hv,
                        negative: g.constant(neg.clone().expect("negative sample computed for the triplet loss")),
                    };
                    let (maps, _) = embed_triplet(&mut g, d, discriminator, &tri, DiscMode::Train)?;
                    gan_loss_generator(&mut g, &maps)?
                }
                GanKind::Vanilla => {
                    let (ds, _) = d.forward(&mut g, discriminator, &sr, DiscMode::Train)?;
                    vanilla_gan_generator(&mut g, &ds)?
                }
            };
            terms.gan = Some(finite(scalar(&g, &v), "gan_g", step)?);
            weighted.push((v, w.gan as f32));
        }
        if w.perceptual > 0.0 {
            let v = perceptual_loss(&mut g, &self.models.vgg, self.config.train.perceptual_layers, &sr, &hv)?;
            terms.perceptual = Some(finite(scalar(&g, &v), "perceptual", step)?);
            weighted.push((v, w.perceptual as f32));
        }
        let total = g.weighted_sum(&weighted, 0.0)?;
        let loss_g = fused_generator_loss(&w, &terms, step)?;
        let grads = g.backward(total)?.into_params();
        drop(g);
        opt_g.step(generator, &grads)?;
        state.step = step;

        Ok(StepRecord {
            step,
            content: terms.content,
            perceptual: terms.perceptual,
            qa: terms.qa,
            gan_g: terms.gan,
            gan_d,
            loss_g,
            loss_d: gan_d.map(|v| fused_discriminator_loss(&w, v, step)).transpose()?,
        })
    }
}

struct DUpdate {
    value: f64,
    grads: BTreeMap<String, Tensor<f32>>,
    stats: crate::discriminator::LayerStats<f32>,
}

/// Super-resolve `lr` and clamp to `[0, 1]`.
pub fn infer(generator: &Generator, params: &ParamStore<f32>, lr: &ImageTensor) -> Result<ImageTensor> {
    let mut t = Eager::with(params);
    let x = t.constant(lr.tensor().clone());
    let y = generator.forward(&mut t, &x)?;
    ImageTensor::from_clamped(Tensor::clone(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    pub(crate) fn tiny_config() -> TrainConfig {
        TrainConfig {
            generator: GeneratorConfig {
                base_channels: 4,
                n_rir: 1,
                resblocks_per_rir: 1,
                convs_per_resblock: 2,
                ca_reduction: 2,
                scale: 4,
                kernel: 3,
            },
            discriminator: DiscriminatorConfig {
                base_channels: 4,
                strides: alloc::vec![2, 2, 1],
                max_doublings: 1,
                ..Default::default()
            },
            qa: QaConfig {
                block_channels: alloc::vec![4, 4, 8],
                fc_hidden: 4,
                ..Default::default()
            },
            vgg: VggConfig {
                widths: [4, 4, 8, 8],
                imagenet_normalize: true,
            },
            loss: LossWeights::default(),
            optimizer: AdamConfig::default(),
            train: Schedule {
                batch_size: 2,
                lr_crop: 6,
                total_steps: 10,
                ..Default::default()
            },
            paths: RunPaths::default(),
        }
    }

    fn data() -> Vec<ImagePair> {
        synthetic::dataset(&mut ChaCha8Rng::seed_from_u64(5), 3, 8, 8, 4).unwrap()
    }

    #[test]
    fn sampler_visits_each_index_once_per_epoch() {
        let mut s = EpochSampler::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut first: Vec<_> = (0..5).map(|_| s.next(&mut rng)).collect();
        first.sort();
        assert_eq!(first, [0, 1, 2, 3, 4]);
        assert_eq!(s.epoch, 1);
        s.next(&mut rng);
        assert_eq!(s.epoch, 2);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = tiny_config();
        c.train.total_steps = 0;
        assert!(matches!(Trainer::new(c), Err(Error::Config(_))));
        let mut c = tiny_config();
        c.train.lr_crop = 2;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.loss = LossWeights {
            content: 0.0,
            qa: 0.0,
            gan: 0.0,
            perceptual: 0.0,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn full_step_records_all_terms_and_freezes_critics() {
        let tr = Trainer::new(tiny_config()).unwrap();
        let data = data();
        let mut st = tr.init_state(3, data.len());
        let frozen = Frozen::random(tr.models(), 3);
        let before = frozen.clone();
        let g0 = st.generator.clone();
        let d0 = st.discriminator.clone();
        let r = tr.step(&mut st, &frozen, &data).unwrap();
        assert_eq!(r.step, 1);
        for v in [r.content, r.perceptual, r.qa, r.gan_g, r.gan_d] {
            assert!(v.unwrap().is_finite());
        }
        assert_ne!(st.generator, g0);
        assert_ne!(st.discriminator, d0);
        assert_eq!(frozen, before);
        assert!(r.log_line().starts_with("step=1 loss_g="));
    }

    #[test]
    fn content_only_skips_discriminator() {
        let mut c = tiny_config();
        c.loss = LossWeights {
            content: 1.0,
            qa: 0.0,
            gan: 0.0,
            perceptual: 0.0,
        };
        let tr = Trainer::new(c).unwrap();
        let data = data();
        let mut st = tr.init_state(4, data.len());
        let frozen = Frozen::random(tr.models(), 4);
        let d0 = st.discriminator.clone();
        let r = tr.step(&mut st, &frozen, &data).unwrap();
        assert_eq!(st.discriminator, d0);
        assert_eq!((r.gan_d, r.gan_g, r.qa, r.perceptual), (None, None, None, None));
        assert_eq!(r.loss_g, r.content.unwrap());
    }

    #[test]
    fn vanilla_gan_step_runs() {
        let mut c = tiny_config();
        c.train.gan_kind = GanKind::Vanilla;
        let tr = Trainer::new(c).unwrap();
        let data = data();
        let mut st = tr.init_state(4, data.len());
        let frozen = Frozen::random(tr.models(), 4);
        let r = tr.step(&mut st, &frozen, &data).unwrap();
        assert!(r.gan_d.unwrap() > 0.0 && r.gan_g.unwrap() > 0.0);
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let tr = Trainer::new(tiny_config()).unwrap();
        let data = data();
        let run = || {
            let mut st = tr.init_state(11, data.len());
            let frozen = Frozen::random(tr.models(), 11);
            (0..3).map(|_| tr.step(&mut st, &frozen, &data).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_input_aborts_with_term() {
        let mut c = tiny_config();
        c.loss = LossWeights {
            content: 1.0,
            qa: 0.0,
            gan: 0.0,
            perceptual: 0.0,
        };
        let tr = Trainer::new(c).unwrap();
        let mut st = tr.init_state(1, 1);
        st.generator.get_mut("rec.out_conv.bias").unwrap().data_mut()[0] = f32::NAN;
        let frozen = Frozen::random(tr.models(), 1);
        let batch = data().remove(0);
        let batch = augment(&batch, &AugmentationSpec::IDENTITY, &mut st.rng.clone()).unwrap();
        match tr.train_step(&mut st, &frozen, &batch) {
            Err(Error::NonFinite { term: "content", step: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infer_is_pure_and_clamped() {
        let tr = Trainer::new(tiny_config()).unwrap();
        let st = tr.init_state(2, 1);
        let lr = synthetic::scene(&mut ChaCha8Rng::seed_from_u64(3), 12, 12);
        let a = infer(&tr.models().generator, &st.generator, &lr).unwrap();
        let b = infer(&tr.models().generator, &st.generator, &lr).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.height(), a.width()), (48, 48));
        assert!(a.tensor().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
