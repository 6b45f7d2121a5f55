//! Patch discriminator producing an unbounded score map.
//!
//! Each layer is a 4×4 convolution; all but the first and last are followed
//! by batch norm, and all but the last by LeakyReLU. With the default
//! strides `[2, 2, 2, 1, 1]` every output cell sees a 70×70 input patch.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{conv, expect_channels};
use crate::ops::{BatchStats, BnMode, ConvSpec};
use crate::params::{init_batch_norm, init_conv, ParamStore};
use crate::real::{lit, Real};
use crate::tape::Tape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub kernel: usize,
    pub strides: Vec<usize>,
    pub padding: usize,
    /// Channel growth stops at `base_channels * 2^max_doublings`.
    pub max_doublings: usize,
    pub leaky_slope: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            base_channels: 64,
            kernel: 4,
            strides: alloc::vec![2, 2, 2, 1, 1],
            padding: 1,
            max_doublings: 3,
            leaky_slope: 0.2,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strides.len() < 2 {
            return Err(Error::Config(String::from("discriminator needs at least two layers")));
        }
        if self.base_channels == 0 || self.kernel == 0 || self.strides.contains(&0) {
            return Err(Error::Config(String::from(
                "discriminator widths, kernel and strides must be positive",
            )));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            return Err(Error::Config(String::from("discriminator batch-norm settings out of range")));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.strides.len()
    }

    /// Output channels of layer `i`.
    pub fn layer_channels(&self, i: usize) -> usize {
        if i + 1 == self.n_layers() {
            1
        } else {
            self.base_channels << i.min(self.max_doublings)
        }
    }

    pub fn has_batch_norm(&self, i: usize) -> bool {
        i > 0 && i + 1 < self.n_layers()
    }

    /// Side of the square input patch seen by one output cell.
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1;
        for s in self.strides.iter().rev() {
            rf = (rf - 1) * s + self.kernel;
        }
        rf
    }

    /// Distance in input pixels between neighbouring output cells.
    pub fn jump(&self) -> usize {
        self.strides.iter().product()
    }

    /// First input coordinate (possibly negative, in the zero padding) of
    /// the field of output cell `i`.
    pub fn field_start(&self, i: usize) -> isize {
        let mut offset = 0isize;
        let mut jump = 1isize;
        for &s in &self.strides {
            offset += self.padding as isize * jump;
            jump *= s as isize;
        }
        i as isize * jump - offset
    }

    /// Output map side for an input side, or `None` if too small.
    pub fn output_size(&self, input: usize) -> Option<usize> {
        let mut n = input;
        for &s in &self.strides {
            n = crate::ops::conv_out_size(n, self.kernel, s, self.padding)?;
        }
        Some(n)
    }

    pub fn min_input_size(&self) -> usize {
        self.receptive_field()
    }
}

/// Batch-norm behaviour for one forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscMode {
    /// Normalise with batch statistics and report them.
    Train,
    /// Normalise with the running statistics.
    Eval,
}

/// Batch statistics per batch-norm layer, in layer order.
pub type LayerStats<T> = Vec<(usize, BatchStats<T>)>;

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    config: DiscriminatorConfig,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Discriminator { config })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<T> {
        let c = &self.config;
        let mut p = ParamStore::new();
        let mut in_ch = 3;
        for i in 0..c.n_layers() {
            let out = c.layer_channels(i);
            init_conv(&mut p, &format!("disc.layer{i}.conv"), in_ch, out, c.kernel, false, rng);
            if c.has_batch_norm(i) {
                init_batch_norm(&mut p, &format!("disc.layer{i}.bn"), out);
            }
            in_ch = out;
        }
        p
    }

    pub fn param_count(&self) -> usize {
        let c = &self.config;
        let mut in_ch = 3;
        let mut n = 0;
        for i in 0..c.n_layers() {
            let out = c.layer_channels(i);
            n += in_ch * out * c.kernel * c.kernel + out;
            if c.has_batch_norm(i) {
                n += 2 * out;
            }
            in_ch = out;
        }
        n
    }

    /// Score map `[N, 1, H', W']`. The store bound to the tape must also be
    /// passed in `params` for evaluation-mode running statistics.
    pub fn forward<T: Real, C: Tape<T>>(
        &self,
        t: &mut C,
        params: &ParamStore<T>,
        x: &C::Value,
        mode: DiscMode,
    ) -> Result<(C::Value, LayerStats<T>)> {
        let c = &self.config;
        expect_channels(t, x, "disc.layer0.conv", 3)?;
        let (_, _, h, w) = t.value(x).dims4()?;
        let min = c.min_input_size();
        if h < min || w < min {
            return Err(Error::InputTooSmall {
                what: "discriminator",
                min,
                got_h: h,
                got_w: w,
            });
        }
        let eps: T = lit(c.bn_eps);
        let slope: T = lit(c.leaky_slope);
        let mut stats = Vec::new();
        let mut hcur = x.clone();
        for (i, &s) in c.strides.iter().enumerate() {
            hcur = conv(t, &hcur, &format!("disc.layer{i}.conv"), ConvSpec::new(s, c.padding))?;
            if c.has_batch_norm(i) {
                let pre = format!("disc.layer{i}.bn");
                let gamma = t.param(&format!("{pre}.weight"))?;
                let beta = t.param(&format!("{pre}.bias"))?;
                let (y, st) = match mode {
                    DiscMode::Train => t.batch_norm(&hcur, &gamma, &beta, BnMode::Train { eps })?,
                    DiscMode::Eval => {
                        let mean = params.buffer(&format!("{pre}.running_mean"))?;
                        let var = params.buffer(&format!("{pre}.running_var"))?;
                        t.batch_norm(
                            &hcur,
                            &gamma,
                            &beta,
                            BnMode::Eval {
                                mean: mean.data(),
                                var: var.data(),
                                eps,
                            },
                        )?
                    }
                };
                if let Some(st) = st {
                    stats.push((i, st));
                }
                hcur = y;
            }
            if i + 1 < c.n_layers() {
                hcur = t.leaky_relu(&hcur, slope);
            }
        }
        Ok((hcur, stats))
    }

    /// Fold batch statistics into the running averages.
    pub fn update_running_stats<T: Real>(&self, params: &mut ParamStore<T>, stats: &LayerStats<T>) -> Result<()> {
        let m: T = lit(self.config.bn_momentum);
        for (i, st) in stats {
            let pre = format!("disc.layer{i}.bn");
            for (name, batch) in [("running_mean", &st.mean), ("running_var", &st.var_unbiased)] {
                let buf = params.buffer_mut(&format!("{pre}.{name}"))?;
                for (r, b) in buf.data_mut().iter_mut().zip(batch) {
                    *r = (T::one() - m) * *r + m * *b;
                }
            }
        }
        Ok(())
    }
}
