//! VGG-16 feature extractor (first four stages) used by the perceptual loss
//! and LPIPS.
//!
//! Parameter names follow the torchvision `features` indices so converted
//! ImageNet weights load directly: `vgg.features.{0,2,5,7,10,12,14,17,19,21}`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{conv, expect_channels};
use crate::ops::ConvSpec;
use crate::params::{init_conv, ParamStore};
use crate::real::{lit, Real};
use crate::tape::Tape;

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Convolutions per stage in VGG-16.
const STAGE_CONVS: [usize; 4] = [2, 2, 3, 3];

/// Taps: `relu1_2`, `relu2_2`, `relu3_3`, `relu4_3`.
pub const LAYER_NAMES: [&str; 4] = ["relu1_2", "relu2_2", "relu3_3", "relu4_3"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VggConfig {
    /// Channel width of each stage.
    pub widths: [usize; 4],
    /// Apply ImageNet mean/std normalisation to `[0, 1]` inputs.
    pub imagenet_normalize: bool,
}

impl Default for VggConfig {
    fn default() -> Self {
        VggConfig {
            widths: [64, 128, 256, 512],
            imagenet_normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vgg {
    config: VggConfig,
}

impl Vgg {
    pub const MIN_INPUT: usize = 8;

    pub fn new(config: VggConfig) -> Result<Self> {
        if config.widths.contains(&0) {
            return Err(Error::Config(String::from("vgg widths must be positive")));
        }
        Ok(Vgg { config })
    }

    pub fn config(&self) -> &VggConfig {
        &self.config
    }

    /// `(name, in, out)` for every convolution in order.
    pub fn conv_layers(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut idx = 0;
        let mut in_ch = 3;
        for (stage, &n) in STAGE_CONVS.iter().enumerate() {
            let w = self.config.widths[stage];
            for _ in 0..n {
                out.push((format!("vgg.features.{idx}"), in_ch, w));
                in_ch = w;
                idx += 2;
            }
            idx += 1; // max pool
        }
        out
    }

    /// Random weights. The perceptual loss is only meaningful with
    /// pretrained weights; this exists for tests and smoke runs.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<T> {
        let mut p = ParamStore::new();
        for (name, i, o) in self.conv_layers() {
            init_conv(&mut p, &name, i, o, 3, false, rng);
        }
        p
    }

    fn normalize<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        if !self.config.imagenet_normalize {
            return Ok(x.clone());
        }
        let scale: Vec<T> = IMAGENET_STD.iter().map(|s| lit(1.0 / s)).collect();
        let shift: Vec<T> = IMAGENET_MEAN
            .iter()
            .zip(IMAGENET_STD)
            .map(|(m, s)| lit(-m / s))
            .collect();
        t.channel_affine(x, &scale, &shift)
    }

    /// Feature maps after each of the first `stages` taps (1..=4).
    pub fn features<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value, stages: usize) -> Result<Vec<C::Value>> {
        if !(1..=4).contains(&stages) {
            return Err(Error::InvalidArgument(format!("vgg stages must be 1..=4, got {stages}")));
        }
        expect_channels(t, x, "vgg.features.0", 3)?;
        let (_, _, h, w) = t.value(x).dims4()?;
        if h < Self::MIN_INPUT || w < Self::MIN_INPUT {
            return Err(Error::InputTooSmall {
                what: "vgg feature extractor",
                min: Self::MIN_INPUT,
                got_h: h,
                got_w: w,
            });
        }
        let layers = self.conv_layers();
        let mut h = self.normalize(t, x)?;
        let mut taps = Vec::with_capacity(stages);
        let mut li = 0;
        for (stage, &n) in STAGE_CONVS.iter().enumerate().take(stages) {
            if stage > 0 {
                h = t.max_pool2(&h)?;
            }
            for _ in 0..n {
                h = conv(t, &h, &layers[li].0, ConvSpec::same(3))?;
                h = t.relu(&h);
                li += 1;
            }
            taps.push(h.clone());
        }
        Ok(taps)
    }
}
