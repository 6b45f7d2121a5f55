//! The ×4 super-resolution generator.
//!
//! ```text
//! I_l  = conv3x3(I_LR)                              [llie]
//! I_h  = I_l + conv3x3(RIR_n(… RIR_1(I_l)))         [hlie]
//! RIR  = x + conv1x1(Res(Res(Res(x))))
//! Res  = x + CA(conv(relu(conv(relu(conv(relu(conv(x))))))))
//! I_SR = conv3x3(up2(… up2(I_h)))                   [rec]
//! up2  = relu(conv3x3(nearest2x(x)))
//! ```

use alloc::format;
use alloc::string::String;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{conv, expect_channels};
use crate::ops::ConvSpec;
use crate::params::{init_conv, ParamStore};
use crate::real::Real;
use crate::tape::Tape;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub base_channels: usize,
    pub n_rir: usize,
    pub resblocks_per_rir: usize,
    pub convs_per_resblock: usize,
    pub ca_reduction: usize,
    pub scale: usize,
    pub kernel: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            base_channels: 32,
            n_rir: 32,
            resblocks_per_rir: 3,
            convs_per_resblock: 4,
            ca_reduction: 8,
            scale: 4,
            kernel: 3,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.base_channels == 0 || self.n_rir == 0 || self.resblocks_per_rir == 0 || self.convs_per_resblock == 0 {
            return bad(String::from("generator widths and depths must be positive"));
        }
        if self.scale < 2 || !self.scale.is_power_of_two() {
            return bad(format!("generator.scale = {} is not a power of two >= 2", self.scale));
        }
        if self.ca_reduction == 0 || self.base_channels % self.ca_reduction != 0 {
            return bad(format!(
                "generator.base_channels = {} is not divisible by generator.ca_reduction = {}",
                self.base_channels, self.ca_reduction
            ));
        }
        if self.kernel % 2 == 0 {
            return bad(format!("generator.kernel = {} must be odd", self.kernel));
        }
        Ok(())
    }

    pub fn upsample_stages(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    config: GeneratorConfig,
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Generator { config })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<T> {
        let c = &self.config;
        let (f, k) = (c.base_channels, c.kernel);
        let mut p = ParamStore::new();
        init_conv(&mut p, "llie.conv", 3, f, k, false, rng);
        for i in 0..c.n_rir {
            for j in 0..c.resblocks_per_rir {
                let pre = format!("hlie.rir{i}.res{j}");
                for n in 0..c.convs_per_resblock {
                    init_conv(&mut p, &format!("{pre}.conv{n}"), f, f, k, false, rng);
                }
                init_conv(&mut p, &format!("{pre}.ca.reduce"), f, f / c.ca_reduction, 1, false, rng);
                init_conv(&mut p, &format!("{pre}.ca.expand"), f / c.ca_reduction, f, 1, false, rng);
            }
            init_conv(&mut p, &format!("hlie.rir{i}.skip1x1"), f, f, 1, false, rng);
        }
        init_conv(&mut p, "hlie.tail_conv", f, f, k, false, rng);
        for s in 0..c.upsample_stages() {
            init_conv(&mut p, &format!("rec.up{s}.conv"), f, f, k, false, rng);
        }
        init_conv(&mut p, "rec.out_conv", f, 3, k, true, rng);
        p
    }

    /// Learnable parameter count without materialising the weights.
    pub fn param_count(&self) -> usize {
        let c = &self.config;
        let (f, k) = (c.base_channels, c.kernel);
        let conv = |i: usize, o: usize, k: usize| i * o * k * k + o;
        let r = f / c.ca_reduction;
        let res = c.convs_per_resblock * conv(f, f, k) + conv(f, r, 1) + conv(r, f, 1);
        let rir = c.resblocks_per_rir * res + conv(f, f, 1);
        conv(3, f, k)
            + c.n_rir * rir
            + conv(f, f, k)
            + c.upsample_stages() * conv(f, f, k)
            + conv(f, 3, k)
    }

    fn same(&self) -> ConvSpec {
        ConvSpec::same(self.config.kernel)
    }

    pub fn llie<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        expect_channels(t, x, "llie.conv", 3)?;
        conv(t, x, "llie.conv", self.same())
    }

    /// Channel attention: `x * sigmoid(expand(relu(reduce(mean_hw(x)))))`.
    pub fn channel_attention<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value, prefix: &str) -> Result<C::Value> {
        expect_channels(t, x, prefix, self.config.base_channels)?;
        let pooled = t.global_avg_pool(x)?;
        let z = conv(t, &pooled, &format!("{prefix}.reduce"), ConvSpec::new(1, 0))?;
        let z = t.relu(&z);
        let z = conv(t, &z, &format!("{prefix}.expand"), ConvSpec::new(1, 0))?;
        let gate = t.sigmoid(&z);
        t.mul_channel(x, &gate)
    }

    pub fn resblock<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value, rir: usize, res: usize) -> Result<C::Value> {
        let pre = format!("hlie.rir{rir}.res{res}");
        expect_channels(t, x, &pre, self.config.base_channels)?;
        let n = self.config.convs_per_resblock;
        let mut h = x.clone();
        for k in 0..n {
            h = conv(t, &h, &format!("{pre}.conv{k}"), self.same())?;
            if k + 1 < n {
                h = t.relu(&h);
            }
        }
        let h = self.channel_attention(t, &h, &format!("{pre}.ca"))?;
        t.add(x, &h)
    }

    pub fn rir<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value, i: usize) -> Result<C::Value> {
        let mut h = x.clone();
        for j in 0..self.config.resblocks_per_rir {
            h = self.resblock(t, &h, i, j)?;
        }
        let h = conv(t, &h, &format!("hlie.rir{i}.skip1x1"), ConvSpec::new(1, 0))?;
        t.add(x, &h)
    }

    pub fn hlie<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        expect_channels(t, x, "hlie", self.config.base_channels)?;
        let mut h = x.clone();
        for i in 0..self.config.n_rir {
            h = self.rir(t, &h, i)?;
        }
        let h = conv(t, &h, "hlie.tail_conv", self.same())?;
        t.add(x, &h)
    }

    pub fn srrec<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        expect_channels(t, x, "rec", self.config.base_channels)?;
        let mut h = x.clone();
        for s in 0..self.config.upsample_stages() {
            h = t.upsample_nearest(&h, 2)?;
            h = conv(t, &h, &format!("rec.up{s}.conv"), self.same())?;
            h = t.relu(&h);
        }
        conv(t, &h, "rec.out_conv", self.same())
    }

    /// `srrec(hlie(llie(x)))`; output is not clamped.
    pub fn forward<T: Real, C: Tape<T>>(&self, t: &mut C, x: &C::Value) -> Result<C::Value> {
        let l = self.llie(t, x)?;
        let h = self.hlie(t, &l)?;
        self.srrec(t, &h)
    }
}
