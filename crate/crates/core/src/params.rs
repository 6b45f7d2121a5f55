//! Named parameter storage and initialisation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Learnable tensors keyed by hierarchical name (`hlie.rir0.res1.conv2.weight`),
/// plus non-learnable buffers such as batch-norm running statistics.
///
/// Tensors are reference counted so a recording graph can borrow them
/// without copying; mutation goes through [`ParamStore::get_mut`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Arc<Tensor<T>>>,
    buffers: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: BTreeMap::new(),
            buffers: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.params.insert(name.into(), Arc::new(t));
    }

    pub fn insert_buffer(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.buffers.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .get(name)
            .map(|a| a.as_ref())
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub(crate) fn get_shared(&self, name: &str) -> Option<&Arc<Tensor<T>>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.params
            .get_mut(name)
            .map(Arc::make_mut)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn buffer(&self, name: &str) -> Result<&Tensor<T>> {
        self.buffers
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.buffers
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v.as_ref()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.params
            .iter_mut()
            .map(|(k, v)| (k.as_str(), Arc::make_mut(v)))
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.buffers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of learnable scalars (buffers excluded).
    pub fn count(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), Arc::new(v.cast())))
                .collect(),
            buffers: self.buffers.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Check that `other` holds exactly the same names and shapes; the
    /// error names the first difference.
    pub fn check_layout(&self, other: &Self) -> Result<()> {
        fn diff<'a, U: Real + 'a>(
            kind: &str,
            want: impl Iterator<Item = (&'a String, &'a Tensor<U>)>,
            got: &BTreeMap<String, &'a Tensor<U>>,
        ) -> Option<String> {
            let mut seen = 0;
            for (k, w) in want {
                match got.get(k) {
                    None => return Some(alloc::format!("{kind} `{k}` is missing")),
                    Some(g) if g.shape() != w.shape() => {
                        return Some(alloc::format!(
                            "{kind} `{k}` has shape {:?}, expected {:?}",
                            g.shape(),
                            w.shape()
                        ))
                    }
                    Some(_) => seen += 1,
                }
            }
            if seen != got.len() {
                let extra = got.keys().next().map(|k| k.as_str()).unwrap_or("");
                return Some(alloc::format!("unexpected {kind}s, e.g. `{extra}`"));
            }
            None
        }
        let got_p: BTreeMap<String, &Tensor<T>> = other.params.iter().map(|(k, v)| (k.clone(), v.as_ref())).collect();
        let got_b: BTreeMap<String, &Tensor<T>> = other.buffers.iter().map(|(k, v)| (k.clone(), v)).collect();
        let problem = diff("parameter", self.params.iter().map(|(k, v)| (k, v.as_ref())), &got_p)
            .or_else(|| diff("buffer", self.buffers.iter(), &got_b));
        match problem {
            Some(m) => Err(Error::Format(m)),
            None => Ok(()),
        }
    }
}

/// PyTorch-default convolution init: weights and biases uniform in
/// `±1/sqrt(fan_in)` (Kaiming-uniform with `a = sqrt(5)`).
pub fn init_conv<T: Real, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    zero_bias: bool,
    rng: &mut R,
) {
    let fan_in = (in_ch * kernel * kernel) as f64;
    let bound = 1.0 / fan_in.sqrt();
    let mut uniform = |_| T::from_f64_lossy(rng.random_range(-bound..bound));
    let w = Tensor::from_fn(&[out_ch, in_ch, kernel, kernel], &mut uniform);
    let b = if zero_bias {
        Tensor::zeros(&[out_ch])
    } else {
        Tensor::from_fn(&[out_ch], &mut uniform)
    };
    store.insert(alloc::format!("{prefix}.weight"), w);
    store.insert(alloc::format!("{prefix}.bias"), b);
}

/// Batch norm with unit scale, zero shift and fresh running statistics.
pub fn init_batch_norm<T: Real>(store: &mut ParamStore<T>, prefix: &str, ch: usize) {
    store.insert(alloc::format!("{prefix}.weight"), Tensor::full(&[ch], T::one()));
    store.insert(alloc::format!("{prefix}.bias"), Tensor::zeros(&[ch]));
    store.insert_buffer(alloc::format!("{prefix}.running_mean"), Tensor::zeros(&[ch]));
    store.insert_buffer(alloc::format!("{prefix}.running_var"), Tensor::full(&[ch], T::one()));
}
