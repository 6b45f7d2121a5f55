//! Training objectives.
//!
//! Every loss is built on a [`Tape`], so the same code yields plain values
//! (on [`crate::Eager`]) and gradients (on [`crate::Graph`]).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::discriminator::{DiscMode, Discriminator, LayerStats};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::qa::{QaNetwork, SCORE_MAX};
use crate::real::{lit, Real};
use crate::tape::Tape;
use crate::vgg::Vgg;

/// Feature normalisation guard for the perceptual loss and LPIPS.
pub const FEATURE_EPS: f64 = 1e-10;

/// Weights of the fused generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub content: f64,
    pub qa: f64,
    pub gan: f64,
    pub perceptual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            content: 5.0,
            qa: 2e-7,
            gan: 0.1,
            perceptual: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(alloc::format!("loss.{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("content", self.content),
            ("qa", self.qa),
            ("gan", self.gan),
            ("perceptual", self.perceptual),
        ]
    }
}

/// Adversarial formulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanKind {
    /// Patch-map triplet distances with HR as positive and upsampled LR
    /// as negative.
    #[default]
    Triplet,
    /// Binary cross-entropy on logits, for ablations.
    Vanilla,
}

/// Mean absolute error.
pub fn content_loss<T: Real, C: Tape<T>>(t: &mut C, sr: &C::Value, hr: &C::Value) -> Result<C::Value> {
    t.l1(sr, hr)
}

/// `Σ_layers mse(unit(φ(sr)), unit(φ(hr)))` with channel-wise unit
/// normalisation of each feature vector.
pub fn perceptual_loss<T: Real, C: Tape<T>>(
    t: &mut C,
    vgg: &Vgg,
    layers: usize,
    sr: &C::Value,
    hr: &C::Value,
) -> Result<C::Value> {
    let terms = perceptual_terms(t, vgg, layers, sr, hr)?;
    let weighted: Vec<_> = terms.into_iter().map(|v| (v, T::one())).collect();
    t.weighted_sum(&weighted, T::zero())
}

/// Per-layer terms of [`perceptual_loss`].
pub fn perceptual_terms<T: Real, C: Tape<T>>(
    t: &mut C,
    vgg: &Vgg,
    layers: usize,
    sr: &C::Value,
    hr: &C::Value,
) -> Result<Vec<C::Value>> {
    t.value(sr).expect_same_shape(t.value(hr), "perceptual_loss")?;
    let fs = vgg.features(t, sr, layers)?;
    let fh = vgg.features(t, hr, layers)?;
    let eps: T = lit(FEATURE_EPS);
    let mut out = Vec::with_capacity(layers);
    for (a, b) in fs.iter().zip(&fh) {
        let na = t.channel_unit_norm(a, eps)?;
        let nb = t.channel_unit_norm(b, eps)?;
        out.push(t.mse(&na, &nb)?);
    }
    Ok(out)
}

/// `mean(5 - Q(sr, hr))`; the QA network must be bound frozen.
pub fn qa_loss<T: Real, C: Tape<T>>(t: &mut C, qa: &QaNetwork, sr: &C::Value, hr: &C::Value) -> Result<C::Value> {
    let q = qa.score(t, sr, hr)?;
    let m = t.mean(&q);
    Ok(t.scale_shift(&m, -T::one(), lit(SCORE_MAX)))
}

/// Anchor (SR), positive (HR) and negative (upsampled LR) images.
#[derive(Clone, Debug)]
pub struct Triplet<V> {
    pub anchor: V,
    pub positive: V,
    pub negative: V,
}

/// Discriminator score maps of a [`Triplet`].
#[derive(Clone, Debug)]
pub struct TripletMaps<V> {
    pub anchor: V,
    pub positive: V,
    pub negative: V,
}

/// Run the discriminator on each image separately. In training mode each
/// group is normalised with its own batch statistics; the returned
/// statistics are their average, for the running-average update.
pub fn embed_triplet<T: Real, C: Tape<T>>(
    t: &mut C,
    disc: &Discriminator,
    params: &ParamStore<T>,
    triplet: &Triplet<C::Value>,
    mode: DiscMode,
) -> Result<(TripletMaps<C::Value>, LayerStats<T>)> {
    let a = t.value(&triplet.anchor);
    a.expect_same_shape(t.value(&triplet.positive), "triplet")?;
    a.expect_same_shape(t.value(&triplet.negative), "triplet")?;
    let mut maps = Vec::with_capacity(3);
    let mut stats = Vec::with_capacity(3);
    for x in [&triplet.anchor, &triplet.positive, &triplet.negative] {
        let (m, s) = disc.forward(t, params, x, mode)?;
        maps.push(m);
        stats.push(s);
    }
    let mut it = maps.into_iter();
    let (anchor, positive, negative) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok((
        TripletMaps {
            anchor,
            positive,
            negative,
        },
        merge_stats(stats),
    ))
}

/// Average per-group statistics of equal batch size.
pub fn merge_stats<T: Real>(groups: Vec<LayerStats<T>>) -> LayerStats<T> {
    let mut it = groups.into_iter();
    let Some(first) = it.next() else {
        return Vec::new();
    };
    let rest: Vec<_> = it.collect();
    let k: T = lit(1.0 + rest.len() as f64);
    first
        .into_iter()
        .enumerate()
        .map(|(li, (layer, mut st))| {
            for other in &rest {
                let o = &other[li].1;
                for (m, v) in st.mean.iter_mut().zip(&o.mean) {
                    *m += *v;
                }
                for (m, v) in st.var_unbiased.iter_mut().zip(&o.var_unbiased) {
                    *m += *v;
                }
            }
            st.mean.iter_mut().for_each(|m| *m /= k);
            st.var_unbiased.iter_mut().for_each(|m| *m /= k);
            (layer, st)
        })
        .collect()
}

/// `mse(D(sr), D(hr)) - mse(D(sr), D(lr)) + 1`.
pub fn gan_loss_generator<T: Real, C: Tape<T>>(t: &mut C, maps: &TripletMaps<C::Value>) -> Result<C::Value> {
    let pos = t.mse(&maps.anchor, &maps.positive)?;
    let neg = t.mse(&maps.anchor, &maps.negative)?;
    t.weighted_sum(&[(pos, T::one()), (neg, -T::one())], T::one())
}

/// `mse(D(sr), D(lr)) - mse(D(sr), D(hr)) + 1`.
pub fn gan_loss_discriminator<T: Real, C: Tape<T>>(t: &mut C, maps: &TripletMaps<C::Value>) -> Result<C::Value> {
    let pos = t.mse(&maps.anchor, &maps.positive)?;
    let neg = t.mse(&maps.anchor, &maps.negative)?;
    t.weighted_sum(&[(neg, T::one()), (pos, -T::one())], T::one())
}

/// `mean(softplus(-d_sr))`, i.e. BCE of fake logits against "real".
pub fn vanilla_gan_generator<T: Real, C: Tape<T>>(t: &mut C, d_sr: &C::Value) -> Result<C::Value> {
    let n = t.scale_shift(d_sr, -T::one(), T::zero());
    let sp = t.softplus(&n);
    Ok(t.mean(&sp))
}

/// `mean(softplus(d_sr)) + mean(softplus(-d_hr))`.
pub fn vanilla_gan_discriminator<T: Real, C: Tape<T>>(t: &mut C, d_sr: &C::Value, d_hr: &C::Value) -> Result<C::Value> {
    let fake = t.softplus(d_sr);
    let fake = t.mean(&fake);
    let real = vanilla_gan_generator(t, d_hr)?;
    t.weighted_sum(&[(fake, T::one()), (real, T::one())], T::zero())
}

/// Scalar values of the generator terms; `None` marks a disabled term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    pub content: Option<f64>,
    pub qa: Option<f64>,
    pub gan: Option<f64>,
    pub perceptual: Option<f64>,
}

impl GeneratorTerms {
    pub fn named(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("content", self.content),
            ("qa", self.qa),
            ("gan", self.gan),
            ("perceptual", self.perceptual),
        ]
    }
}

/// `λ1·content + λ2·qa + λ3·gan + λ4·perceptual`. Disabled terms count as
/// zero; a non-finite term is reported by name.
pub fn fused_generator_loss(weights: &LossWeights, terms: &GeneratorTerms, step: u64) -> Result<f64> {
    let mut total = 0.0;
    for ((name, w), (_, v)) in weights.named().into_iter().zip(terms.named()) {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(Error::NonFinite { term: name, step });
            }
            total += w * v;
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite { term: "generator_total", step });
    }
    Ok(total)
}

/// `λ3·gan_d`.
pub fn fused_discriminator_loss(weights: &LossWeights, gan_d: f64, step: u64) -> Result<f64> {
    if !gan_d.is_finite() {
        return Err(Error::NonFinite { term: "gan_d", step });
    }
    Ok(weights.gan * gan_d)
}
