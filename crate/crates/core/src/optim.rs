//! Adam with per-parameter moment buffers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::real::{lit, Real};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            kind: OptimizerKind::Adam,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("optimizer settings out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Moment estimates of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    /// Number of updates applied so far.
    pub t: u64,
    pub state: BTreeMap<String, Moments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            state: BTreeMap::new(),
        }
    }

    /// One update. Parameters without a gradient are left untouched and
    /// keep their moments.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &BTreeMap<String, Tensor<T>>) -> Result<()> {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - Float::powi(c.beta1, self.t as i32);
        let bc2 = 1.0 - Float::powi(c.beta2, self.t as i32);
        let (b1, b2): (T, T) = (lit(c.beta1), lit(c.beta2));
        let step_size: T = lit(c.lr / bc1);
        let inv_sqrt_bc2: T = lit(1.0 / Float::sqrt(bc2));
        let eps: T = lit(c.eps);
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            g.expect_same_shape(p, "adam")?;
            let mom = self.state.entry(name.clone()).or_insert_with(|| Moments {
                m: Tensor::zeros(g.shape()),
                v: Tensor::zeros(g.shape()),
            });
            let (m, v) = (mom.m.data_mut(), mom.v.data_mut());
            for (((pv, gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mv = b1 * *mv + (T::one() - b1) * *gv;
                *vv = b2 * *vv + (T::one() - b2) * *gv * *gv;
                let denom = vv.sqrt() * inv_sqrt_bc2 + eps;
                *pv -= step_size * *mv / denom;
            }
        }
        Ok(())
    }
}
