//! Differentiable operation recording.
//!
//! Network code is written once against [`Tape`]. [`Eager`] evaluates
//! immediately and drops intermediates as soon as they go out of scope,
//! which keeps inference memory bounded. [`Graph`] records every value and
//! can replay the computation backwards to produce gradients.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{self, BatchStats, BnMode, BnSaved, ConvSpec};
use crate::params::ParamStore;
use crate::real::Real;
use crate::tensor::Tensor;

pub trait Tape<T: Real> {
    type Value: Clone;

    /// A non-differentiable input.
    fn constant(&mut self, t: Tensor<T>) -> Self::Value;

    fn param(&mut self, name: &str) -> Result<Self::Value>;

    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T>;

    fn conv2d(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: Option<&Self::Value>,
        spec: ConvSpec,
    ) -> Result<Self::Value>;

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// Elementwise product.
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// `x * scale + shift` with scalar constants.
    fn scale_shift(&mut self, x: &Self::Value, scale: T, shift: T) -> Self::Value;

    fn channel_affine(&mut self, x: &Self::Value, scale: &[T], shift: &[T]) -> Result<Self::Value>;

    fn relu(&mut self, x: &Self::Value) -> Self::Value;

    fn leaky_relu(&mut self, x: &Self::Value, slope: T) -> Self::Value;

    fn sigmoid(&mut self, x: &Self::Value) -> Self::Value;

    fn softplus(&mut self, x: &Self::Value) -> Self::Value;

    fn upsample_nearest(&mut self, x: &Self::Value, factor: usize) -> Result<Self::Value>;

    fn max_pool2(&mut self, x: &Self::Value) -> Result<Self::Value>;

    /// `[N, C, H, W] -> [N, C, 1, 1]`.
    fn global_avg_pool(&mut self, x: &Self::Value) -> Result<Self::Value>;

    /// Rescale each channel of `x` by `gate[n, c, 0, 0]`.
    fn mul_channel(&mut self, x: &Self::Value, gate: &Self::Value) -> Result<Self::Value>;

    fn batch_norm(
        &mut self,
        x: &Self::Value,
        gamma: &Self::Value,
        beta: &Self::Value,
        mode: BnMode<'_, T>,
    ) -> Result<(Self::Value, Option<BatchStats<T>>)>;

    fn channel_unit_norm(&mut self, x: &Self::Value, eps: T) -> Result<Self::Value>;

    /// Mean of all elements, as a one-element tensor.
    fn mean(&mut self, x: &Self::Value) -> Self::Value;

    fn mse(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn l1(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// `bias + Σ weight_i * term_i` over one-element terms.
    fn weighted_sum(&mut self, terms: &[(Self::Value, T)], bias: T) -> Result<Self::Value>;
}

fn scalar_of<T: Real>(t: &Tensor<T>, op: &'static str) -> Result<T> {
    if t.len() != 1 {
        return Err(Error::ShapeMismatch {
            op,
            left: vec![1],
            right: t.shape().to_vec(),
        });
    }
    Ok(t.data()[0])
}

fn weighted<T: Real>(vals: &[(&Tensor<T>, T)], bias: T) -> Result<Tensor<T>> {
    let mut acc = bias;
    for (t, w) in vals {
        acc += *w * scalar_of(t, "weighted_sum")?;
    }
    Ok(Tensor::scalar(acc))
}

fn lookup<'p, T: Real>(stores: &[&'p ParamStore<T>], name: &str) -> Result<(usize, &'p Arc<Tensor<T>>)> {
    stores
        .iter()
        .enumerate()
        .find_map(|(i, s)| s.get_shared(name).map(|t| (i, t)))
        .ok_or_else(|| Error::MissingParam(name.to_string()))
}

/// Immediate evaluation without gradient bookkeeping.
pub struct Eager<'p, T> {
    stores: Vec<&'p ParamStore<T>>,
}

impl<'p, T: Real> Eager<'p, T> {
    pub fn new() -> Self {
        Eager { stores: Vec::new() }
    }

    pub fn with(store: &'p ParamStore<T>) -> Self {
        Eager { stores: vec![store] }
    }

    pub fn bind(&mut self, store: &'p ParamStore<T>) -> &mut Self {
        self.stores.push(store);
        self
    }
}

impl<T: Real> Default for Eager<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> for Eager<'_, T> {
    type Value = Arc<Tensor<T>>;

    fn constant(&mut self, t: Tensor<T>) -> Self::Value {
        Arc::new(t)
    }

    fn param(&mut self, name: &str) -> Result<Self::Value> {
        lookup(&self.stores, name).map(|(_, t)| t.clone())
    }

    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T> {
        v
    }

    fn conv2d(&mut self, x: &Self::Value, w: &Self::Value, b: Option<&Self::Value>, spec: ConvSpec) -> Result<Self::Value> {
        ops::conv2d_forward(x, w, b.map(|b| b.as_ref()), spec).map(Arc::new)
    }

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        a.zip_map(b, "add", |x, y| x + y).map(Arc::new)
    }

    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        a.zip_map(b, "sub", |x, y| x - y).map(Arc::new)
    }

    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        a.zip_map(b, "mul", |x, y| x * y).map(Arc::new)
    }

    fn scale_shift(&mut self, x: &Self::Value, scale: T, shift: T) -> Self::Value {
        Arc::new(x.map(|v| v * scale + shift))
    }

    fn channel_affine(&mut self, x: &Self::Value, scale: &[T], shift: &[T]) -> Result<Self::Value> {
        ops::channel_affine(x, scale, shift).map(Arc::new)
    }

    fn relu(&mut self, x: &Self::Value) -> Self::Value {
        Arc::new(x.map(|v| v.max(T::zero())))
    }

    fn leaky_relu(&mut self, x: &Self::Value, slope: T) -> Self::Value {
        Arc::new(x.map(|v| ops::leaky(v, slope)))
    }

    fn sigmoid(&mut self, x: &Self::Value) -> Self::Value {
        Arc::new(x.map(ops::sigmoid))
    }

    fn softplus(&mut self, x: &Self::Value) -> Self::Value {
        Arc::new(x.map(ops::softplus))
    }

    fn upsample_nearest(&mut self, x: &Self::Value, factor: usize) -> Result<Self::Value> {
        ops::upsample_nearest(x, factor).map(Arc::new)
    }

    fn max_pool2(&mut self, x: &Self::Value) -> Result<Self::Value> {
        ops::max_pool2(x).map(|(y, _)| Arc::new(y))
    }

    fn global_avg_pool(&mut self, x: &Self::Value) -> Result<Self::Value> {
        ops::global_avg_pool(x).map(Arc::new)
    }

    fn mul_channel(&mut self, x: &Self::Value, gate: &Self::Value) -> Result<Self::Value> {
        ops::mul_channel(x, gate).map(Arc::new)
    }

    fn batch_norm(
        &mut self,
        x: &Self::Value,
        gamma: &Self::Value,
        beta: &Self::Value,
        mode: BnMode<'_, T>,
    ) -> Result<(Self::Value, Option<BatchStats<T>>)> {
        let (y, _, stats) = ops::batch_norm_forward(x, gamma, beta, mode)?;
        Ok((Arc::new(y), stats))
    }

    fn channel_unit_norm(&mut self, x: &Self::Value, eps: T) -> Result<Self::Value> {
        ops::channel_unit_norm(x, eps).map(|(y, _)| Arc::new(y))
    }

    fn mean(&mut self, x: &Self::Value) -> Self::Value {
        Arc::new(Tensor::scalar(x.mean()))
    }

    fn mse(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        ops::mse(a, b).map(|v| Arc::new(Tensor::scalar(v)))
    }

    fn l1(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        ops::l1(a, b).map(|v| Arc::new(Tensor::scalar(v)))
    }

    fn weighted_sum(&mut self, terms: &[(Self::Value, T)], bias: T) -> Result<Self::Value> {
        let vals: Vec<_> = terms.iter().map(|(t, w)| (t.as_ref(), *w)).collect();
        weighted(&vals, bias).map(Arc::new)
    }
}

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param(String),
    Conv2d { x: Var, w: Var, b: Option<Var>, spec: ConvSpec },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleShift(Var, T),
    ChannelAffine(Var, Vec<T>),
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    Softplus(Var),
    Upsample(Var, usize),
    MaxPool2(Var, Vec<u32>),
    GlobalAvgPool(Var),
    MulChannel(Var, Var),
    BatchNorm { x: Var, gamma: Var, beta: Var, saved: BnSaved<T> },
    ChannelUnitNorm { x: Var, norms: Vec<T>, eps: T },
    Mean(Var),
    Mse(Var, Var),
    L1(Var, Var),
    WeightedSum(Vec<(Var, T)>),
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// A recording tape over borrowed parameter stores.
pub struct Graph<'p, T> {
    nodes: Vec<Node<T>>,
    stores: Vec<(&'p ParamStore<T>, bool)>,
    bound: BTreeMap<String, Var>,
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            stores: Vec::new(),
            bound: BTreeMap::new(),
        }
    }

    /// Make `store`'s parameters available; gradients are produced for them
    /// only when `trainable` is set.
    pub fn bind(&mut self, store: &'p ParamStore<T>, trainable: bool) -> &mut Self {
        self.stores.push((store, trainable));
        self
    }

    /// A leaf input that receives a gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Arc::new(t), Op::Leaf, true)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Arc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn val(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn unary(&mut self, x: Var, value: Tensor<T>, op: Op<T>) -> Var {
        let rg = self.rg(x);
        self.push(Arc::new(value), op, rg)
    }

    /// Reverse-mode sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        scalar_of(self.val(loss), "backward")?;
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.val(loss).shape(), T::one()));
        let mut out = Grads {
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
        };
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else { continue };
            if !node.requires_grad {
                continue;
            }
            let acc = |v: Var, d: Tensor<T>, grads: &mut Vec<Option<Tensor<T>>>| {
                if !self.rg(v) {
                    return;
                }
                match &mut grads[v.0] {
                    Some(e) => {
                        for (a, b) in e.data_mut().iter_mut().zip(d.data()) {
                            *a += *b;
                        }
                    }
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {
                    out.inputs.insert(Var(i), g);
                }
                Op::Param(name) => {
                    out.params.insert(name.clone(), g);
                }
                Op::Conv2d { x, w, b, spec } => {
                    let (dx, dw, db) = ops::conv2d_backward(
                        self.val(*x),
                        self.val(*w),
                        *spec,
                        &g,
                        self.rg(*x),
                        self.rg(*w),
                    )?;
                    if let Some(dx) = dx {
                        acc(*x, dx, &mut grads);
                    }
                    if let Some(dw) = dw {
                        acc(*w, dw, &mut grads);
                    }
                    if let Some(b) = b {
                        acc(*b, db, &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone(), &mut grads);
                    acc(*b, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v), &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.val(*b), "mul", |d, y| d * y)?;
                    let db = g.zip_map(self.val(*a), "mul", |d, x| d * x)?;
                    acc(*a, da, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::ScaleShift(x, s) => {
                    let s = *s;
                    acc(*x, g.map(|v| v * s), &mut grads);
                }
                Op::ChannelAffine(x, scale) => {
                    acc(*x, ops::channel_scale_backward(&g, scale), &mut grads);
                }
                Op::Relu(x) => {
                    let d = g.zip_map(self.val(*x), "relu", |d, v| if v > T::zero() { d } else { T::zero() })?;
                    acc(*x, d, &mut grads);
                }
                Op::LeakyRelu(x, slope) => {
                    let s = *slope;
                    let d = g.zip_map(self.val(*x), "leaky_relu", |d, v| if v > T::zero() { d } else { d * s })?;
                    acc(*x, d, &mut grads);
                }
                Op::Sigmoid(x) => {
                    let d = g.zip_map(&node.value, "sigmoid", |d, y| d * y * (T::one() - y))?;
                    acc(*x, d, &mut grads);
                }
                Op::Softplus(x) => {
                    let d = g.zip_map(self.val(*x), "softplus", |d, v| d * ops::sigmoid(v))?;
                    acc(*x, d, &mut grads);
                }
                Op::Upsample(x, f) => {
                    let d = ops::upsample_nearest_backward(&g, self.val(*x).shape(), *f);
                    acc(*x, d, &mut grads);
                }
                Op::MaxPool2(x, arg) => {
                    let d = ops::max_pool2_backward(&g, self.val(*x).shape(), arg);
                    acc(*x, d, &mut grads);
                }
                Op::GlobalAvgPool(x) => {
                    let d = ops::global_avg_pool_backward(&g, self.val(*x).shape());
                    acc(*x, d, &mut grads);
                }
                Op::MulChannel(x, gate) => {
                    let (dx, dg) = ops::mul_channel_backward(self.val(*x), self.val(*gate), &g);
                    acc(*x, dx, &mut grads);
                    acc(*gate, dg, &mut grads);
                }
                Op::BatchNorm { x, gamma, beta, saved } => {
                    let (dx, dgamma, dbeta) = ops::batch_norm_backward(saved, self.val(*gamma), &g);
                    acc(*x, dx, &mut grads);
                    acc(*gamma, dgamma, &mut grads);
                    acc(*beta, dbeta, &mut grads);
                }
                Op::ChannelUnitNorm { x, norms, eps } => {
                    let d = ops::channel_unit_norm_backward(self.val(*x), norms, *eps, &g);
                    acc(*x, d, &mut grads);
                }
                Op::Mean(x) => {
                    let xv = self.val(*x);
                    let k = g.data()[0] / T::from_usize(xv.len()).unwrap();
                    acc(*x, Tensor::full(xv.shape(), k), &mut grads);
                }
                Op::Mse(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let k = g.data()[0] * T::from_f64_lossy(2.0) / T::from_usize(av.len()).unwrap();
                    let da = av.zip_map(bv, "mse", |x, y| k * (x - y))?;
                    acc(*b, da.map(|v| -v), &mut grads);
                    acc(*a, da, &mut grads);
                }
                Op::L1(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let k = g.data()[0] / T::from_usize(av.len()).unwrap();
                    let sign = |d: T| {
                        if d > T::zero() {
                            k
                        } else if d < T::zero() {
                            -k
                        } else {
                            T::zero()
                        }
                    };
                    let da = av.zip_map(bv, "l1", |x, y| sign(x - y))?;
                    acc(*b, da.map(|v| -v), &mut grads);
                    acc(*a, da, &mut grads);
                }
                Op::WeightedSum(terms) => {
                    for (v, w) in terms {
                        acc(*v, Tensor::scalar(g.data()[0] * *w), &mut grads);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<T: Real> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> for Graph<'_, T> {
    type Value = Var;

    fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Arc::new(t), Op::Leaf, false)
    }

    fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let stores: Vec<_> = self.stores.iter().map(|(s, _)| *s).collect();
        let (i, t) = lookup(&stores, name)?;
        let trainable = self.stores[i].1;
        let v = self.push(t.clone(), Op::Param(name.to_string()), trainable);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        self.val(*v)
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, spec: ConvSpec) -> Result<Var> {
        let y = ops::conv2d_forward(self.val(*x), self.val(*w), b.map(|b| self.val(*b)), spec)?;
        let rg = self.rg(*x) || self.rg(*w) || b.is_some_and(|b| self.rg(*b));
        Ok(self.push(
            Arc::new(y),
            Op::Conv2d {
                x: *x,
                w: *w,
                b: b.copied(),
                spec,
            },
            rg,
        ))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(*a).zip_map(self.val(*b), "add", |x, y| x + y)?;
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(Arc::new(y), Op::Add(*a, *b), rg))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(*a).zip_map(self.val(*b), "sub", |x, y| x - y)?;
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(Arc::new(y), Op::Sub(*a, *b), rg))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(*a).zip_map(self.val(*b), "mul", |x, y| x * y)?;
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(Arc::new(y), Op::Mul(*a, *b), rg))
    }

    fn scale_shift(&mut self, x: &Var, scale: T, shift: T) -> Var {
        let y = self.val(*x).map(|v| v * scale + shift);
        self.unary(*x, y, Op::ScaleShift(*x, scale))
    }

    fn channel_affine(&mut self, x: &Var, scale: &[T], shift: &[T]) -> Result<Var> {
        let y = ops::channel_affine(self.val(*x), scale, shift)?;
        Ok(self.unary(*x, y, Op::ChannelAffine(*x, scale.to_vec())))
    }

    fn relu(&mut self, x: &Var) -> Var {
        let y = self.val(*x).map(|v| v.max(T::zero()));
        self.unary(*x, y, Op::Relu(*x))
    }

    fn leaky_relu(&mut self, x: &Var, slope: T) -> Var {
        let y = self.val(*x).map(|v| ops::leaky(v, slope));
        self.unary(*x, y, Op::LeakyRelu(*x, slope))
    }

    fn sigmoid(&mut self, x: &Var) -> Var {
        let y = self.val(*x).map(ops::sigmoid);
        self.unary(*x, y, Op::Sigmoid(*x))
    }

    fn softplus(&mut self, x: &Var) -> Var {
        let y = self.val(*x).map(ops::softplus);
        self.unary(*x, y, Op::Softplus(*x))
    }

    fn upsample_nearest(&mut self, x: &Var, factor: usize) -> Result<Var> {
        let y = ops::upsample_nearest(self.val(*x), factor)?;
        Ok(self.unary(*x, y, Op::Upsample(*x, factor)))
    }

    fn max_pool2(&mut self, x: &Var) -> Result<Var> {
        let (y, arg) = ops::max_pool2(self.val(*x))?;
        Ok(self.unary(*x, y, Op::MaxPool2(*x, arg)))
    }

    fn global_avg_pool(&mut self, x: &Var) -> Result<Var> {
        let y = ops::global_avg_pool(self.val(*x))?;
        Ok(self.unary(*x, y, Op::GlobalAvgPool(*x)))
    }

    fn mul_channel(&mut self, x: &Var, gate: &Var) -> Result<Var> {
        let y = ops::mul_channel(self.val(*x), self.val(*gate))?;
        let rg = self.rg(*x) || self.rg(*gate);
        Ok(self.push(Arc::new(y), Op::MulChannel(*x, *gate), rg))
    }

    fn batch_norm(
        &mut self,
        x: &Var,
        gamma: &Var,
        beta: &Var,
        mode: BnMode<'_, T>,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let (y, saved, stats) = ops::batch_norm_forward(self.val(*x), self.val(*gamma), self.val(*beta), mode)?;
        let rg = self.rg(*x) || self.rg(*gamma) || self.rg(*beta);
        let v = self.push(
            Arc::new(y),
            Op::BatchNorm {
                x: *x,
                gamma: *gamma,
                beta: *beta,
                saved,
            },
            rg,
        );
        Ok((v, stats))
    }

    fn channel_unit_norm(&mut self, x: &Var, eps: T) -> Result<Var> {
        let (y, norms) = ops::channel_unit_norm(self.val(*x), eps)?;
        Ok(self.unary(*x, y, Op::ChannelUnitNorm { x: *x, norms, eps }))
    }

    fn mean(&mut self, x: &Var) -> Var {
        let y = Tensor::scalar(self.val(*x).mean());
        self.unary(*x, y, Op::Mean(*x))
    }

    fn mse(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = Tensor::scalar(ops::mse(self.val(*a), self.val(*b))?);
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(Arc::new(y), Op::Mse(*a, *b), rg))
    }

    fn l1(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = Tensor::scalar(ops::l1(self.val(*a), self.val(*b))?);
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(Arc::new(y), Op::L1(*a, *b), rg))
    }

    fn weighted_sum(&mut self, terms: &[(Var, T)], bias: T) -> Result<Var> {
        let vals: Vec<_> = terms.iter().map(|(v, w)| (self.val(*v), *w)).collect();
        let y = weighted(&vals, bias)?;
        let rg = terms.iter().any(|(v, _)| self.rg(*v));
        Ok(self.push(Arc::new(y), Op::WeightedSum(terms.to_vec()), rg))
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Grads<T> {
    params: BTreeMap<String, Tensor<T>>,
    inputs: BTreeMap<Var, Tensor<T>>,
}

impl<T: Real> Grads<T> {
    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn input(&self, v: Var) -> Option<&Tensor<T>> {
        self.inputs.get(&v)
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor<T>> {
        self.params
    }
}
