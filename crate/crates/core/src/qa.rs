//! Full-reference quality network.
//!
//! A Siamese feature extractor with shared weights encodes the distorted
//! and reference images; their features are subtracted after
//! `diff_after` blocks, the remaining blocks process the difference, and a
//! pooled two-layer head regresses a score in `[1, 5]`.

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
use crate::tensor::Tensor;

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub block_channels: Vec<usize>,
    /// Number of shared blocks before the feature subtraction.
    pub diff_after: usize,
    pub fc_hidden: usize,
    pub dropout_rate: f64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            block_channels: alloc::vec![32, 64, 128, 256],
            diff_after: 2,
            fc_hidden: 128,
            dropout_rate: 0.5,
        }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_channels.is_empty() || self.block_channels.contains(&0) || self.fc_hidden == 0 {
            return Err(Error::Config(String::from("qa widths must be positive")));
        }
        if self.diff_after > self.block_channels.len() {
            return Err(Error::Config(format!(
                "qa.diff_after = {} exceeds the {} blocks",
                self.diff_after,
                self.block_channels.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("qa.dropout_rate = {} must be in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QaNetwork {
    config: QaConfig,
}

impl QaNetwork {
    pub fn new(config: QaConfig) -> Result<Self> {
        config.validate()?;
        Ok(QaNetwork { config })
    }

    pub fn config(&self) -> &QaConfig {
        &self.config
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<T> {
        let c = &self.config;
        let mut p = ParamStore::new();
        let mut in_ch = 3;
        for (b, &w) in c.block_channels.iter().enumerate() {
            init_conv(&mut p, &format!("qa.block{b}.conv0"), in_ch, w, 3, false, rng);
            init_conv(&mut p, &format!("qa.block{b}.conv1"), w, w, 3, false, rng);
            in_ch = w;
        }
        init_conv(&mut p, "qa.fc0", in_ch, c.fc_hidden, 1, false, rng);
        init_conv(&mut p, "qa.fc1", c.fc_hidden, 1, 1, false, rng);
        p
    }

    fn block<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value, b: usize) -> Result<C::Value> {
        let h = conv(t, x, &format!("qa.block{b}.conv0"), ConvSpec::same(3))?;
        let h = t.relu(&h);
        let h = conv(t, &h, &format!("qa.block{b}.conv1"), ConvSpec::new(2, 1))?;
        Ok(t.relu(&h))
    }

    fn encode<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        expect_channels(t, x, "qa.block0.conv0", 3)?;
        let mut h = x.clone();
        for b in 0..self.config.diff_after {
            h = self.block(t, &h, b)?;
        }
        Ok(h)
    }

    /// Predicted scores `[N, 1, 1, 1]`. Dropout is active iff `dropout_rng`
    /// is given.
    pub fn forward<T: Real, C: Tape<T>, R: Rng + ?Sized>(
        &self,
        t: &mut C,
        distorted: &C::Value,
        reference: &C::Value,
        dropout_rng: Option<&mut R>,
    ) -> Result<C::Value> {
        t.value(distorted).expect_same_shape(t.value(reference), "qa")?;
        let fd = self.encode(t, distorted)?;
        let fr = self.encode(t, reference)?;
        let mut h = t.sub(&fd, &fr)?;
        for b in self.config.diff_after..self.config.block_channels.len() {
            h = self.block(t, &h, b)?;
        }
        let h = t.global_avg_pool(&h)?;
        let h = conv(t, &h, "qa.fc0", ConvSpec::new(1, 0))?;
        let mut h = t.relu(&h);
        if let Some(rng) = dropout_rng {
            let p = self.config.dropout_rate;
            if p > 0.0 {
                let keep: T = lit(1.0 / (1.0 - p));
                let shape = t.value(&h).shape().to_vec();
                let mask = Tensor::from_fn(&shape, |_| if rng.random::<f64>() < p { T::zero() } else { keep });
                let m = t.constant(mask);
                h = t.mul(&h, &m)?;
            }
        }
        let z = conv(t, &h, "qa.fc1", ConvSpec::new(1, 0))?;
        let s = t.sigmoid(&z);
        Ok(t.scale_shift(&s, lit(SCORE_MAX - SCORE_MIN), lit(SCORE_MIN)))
    }

    /// Deterministic scores (dropout off).
    pub fn score<T: Real, C: Tape<T>>(&self, t: &mut C, distorted: &C::Value, reference: &C::Value) -> Result<C::Value> {
        self.forward::<T, C, rand_chacha::ChaCha8Rng>(t, distorted, reference, None)
    }
}
