//! Forward and backward kernels shared by the eager and recording tapes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Stride and zero padding of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn new(stride: usize, padding: usize) -> Self {
        ConvSpec { stride, padding }
    }

    /// "Same" padding for an odd kernel at stride 1.
    pub const fn same(kernel: usize) -> Self {
        ConvSpec {
            stride: 1,
            padding: kernel / 2,
        }
    }
}

/// Output extent of a convolution along one axis, `None` if the kernel does
/// not fit.
pub fn conv_out_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (size + 2 * padding)
        .checked_sub(kernel)
        .map(|v| v / stride + 1)
}

/// Element budget of one forward im2col buffer.
/// Unit tests use a tiny budget so the banded path is exercised.
const COL_BUDGET: usize = if cfg!(test) { 256 } else { 1 << 22 };

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oc: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn new<T: Real>(x: &Tensor<T>, w: &Tensor<T>, spec: ConvSpec) -> Result<Self> {
        let (n, c, h, wd) = x.dims4()?;
        let (oc, ic, kh, kw) = w.dims4()?;
        if ic != c {
            return Err(Error::ChannelMismatch {
                layer: alloc::string::String::from("conv2d"),
                expected: ic,
                got: c,
            });
        }
        if spec.stride == 0 {
            return Err(invalid("conv2d stride must be positive"));
        }
        let (ho, wo) = match (
            conv_out_size(h, kh, spec.stride, spec.padding),
            conv_out_size(wd, kw, spec.stride, spec.padding),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InputTooSmall {
                    what: "conv2d",
                    min: kh.max(kw).saturating_sub(2 * spec.padding),
                    got_h: h,
                    got_w: wd,
                })
            }
        };
        Ok(ConvGeom {
            n,
            c,
            h,
            w: wd,
            oc,
            kh,
            kw,
            ho,
            wo,
            stride: spec.stride,
            pad: spec.padding,
        })
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn col_rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<T: Real>(g: &ConvGeom, x: &[T], col: &mut [T]) {
    im2col_rows(g, x, col, 0, g.ho);
}

/// Columns for output rows `oy0..oy1` only; `col` is `[k, (oy1 - oy0) * wo]`.
fn im2col_rows<T: Real>(g: &ConvGeom, x: &[T], col: &mut [T], oy0: usize, oy1: usize) {
    let p = (oy1 - oy0) * g.wo;
    let mut row = 0;
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let dst = &mut col[row * p..(row + 1) * p];
                for oy in oy0..oy1 {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let out_row = &mut dst[(oy - oy0) * g.wo..(oy - oy0 + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *o = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im<T: Real>(g: &ConvGeom, col: &[T], dx: &mut [T]) {
    let p = g.col_cols();
    let mut row = 0;
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let src = &col[row * p..(row + 1) * p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    spec: ConvSpec,
) -> Result<Tensor<T>> {
    let g = ConvGeom::new(x, w, spec)?;
    if let Some(b) = b {
        if b.len() != g.oc {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                left: vec![g.oc],
                right: b.shape().to_vec(),
            });
        }
    }
    let (k, p) = (g.col_rows(), g.col_cols());
    let mut out = Tensor::zeros(&[g.n, g.oc, g.ho, g.wo]);
    // Output rows per im2col band, bounding the column buffer.
    let band = (COL_BUDGET / (k * g.wo).max(1)).clamp(1, g.ho.max(1));
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); k * band * g.wo]
    };
    let in_item = g.c * g.h * g.w;
    let out_item = g.oc * p;
    let xd = x.data();
    let od = out.data_mut();
    let beta = if b.is_some() { T::one() } else { T::zero() };
    for n in 0..g.n {
        let xi = &xd[n * in_item..(n + 1) * in_item];
        let oi = &mut od[n * out_item..(n + 1) * out_item];
        if let Some(b) = b {
            for (o, &bv) in oi.chunks_exact_mut(p).zip(b.data()) {
                o.fill(bv);
            }
        }
        if g.is_pointwise() {
            T::gemm(g.oc, k, p, T::one(), w.data(), k as isize, 1, xi, p as isize, 1, beta, oi, p as isize, 1);
            continue;
        }
        let mut oy0 = 0;
        while oy0 < g.ho {
            let oy1 = (oy0 + band).min(g.ho);
            let pb = (oy1 - oy0) * g.wo;
            im2col_rows(&g, xi, &mut col[..k * pb], oy0, oy1);
            T::gemm(
                g.oc,
                k,
                pb,
                T::one(),
                w.data(),
                k as isize,
                1,
                &col[..k * pb],
                pb as isize,
                1,
                beta,
                &mut oi[oy0 * g.wo..],
                p as isize,
                1,
            );
            oy0 = oy1;
        }
    }
    Ok(out)
}

/// Gradients of a convolution. `dx`/`dw` are computed only when requested;
/// the bias gradient is always returned.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    spec: ConvSpec,
    dy: &Tensor<T>,
    want_dx: bool,
    want_dw: bool,
) -> Result<(Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>)> {
    let g = ConvGeom::new(x, w, spec)?;
    let (k, p) = (g.col_rows(), g.col_cols());
    let in_item = g.c * g.h * g.w;
    let out_item = g.oc * p;
    let mut dx = want_dx.then(|| Tensor::zeros(x.shape()));
    let mut dw = want_dw.then(|| Tensor::zeros(w.shape()));
    let mut db = Tensor::zeros(&[g.oc]);
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { k * p }];
    let mut dcol = vec![T::zero(); if want_dx && !g.is_pointwise() { k * p } else { 0 }];
    let xd = x.data();
    let dyd = dy.data();
    for n in 0..g.n {
        let xi = &xd[n * in_item..(n + 1) * in_item];
        let dyi = &dyd[n * out_item..(n + 1) * out_item];
        for (acc, row) in db.data_mut().iter_mut().zip(dyi.chunks_exact(p)) {
            *acc += row.iter().copied().sum::<T>();
        }
        if let Some(dw) = dw.as_mut() {
            let cols: &[T] = if g.is_pointwise() {
                xi
            } else {
                im2col(&g, xi, &mut col);
                &col
            };
            // dW[oc, k] += dY[oc, p] · col[k, p]^T
            T::gemm(
                g.oc,
                p,
                k,
                T::one(),
                dyi,
                p as isize,
                1,
                cols,
                1,
                p as isize,
                T::one(),
                dw.data_mut(),
                k as isize,
                1,
            );
        }
        if let Some(dx) = dx.as_mut() {
            let dxi = &mut dx.data_mut()[n * in_item..(n + 1) * in_item];
            // dcol[k, p] = W[oc, k]^T · dY[oc, p]
            if g.is_pointwise() {
                T::gemm(
                    k,
                    g.oc,
                    p,
                    T::one(),
                    w.data(),
                    1,
                    k as isize,
                    dyi,
                    p as isize,
                    1,
                    T::one(),
                    dxi,
                    p as isize,
                    1,
                );
            } else {
                T::gemm(
                    k,
                    g.oc,
                    p,
                    T::one(),
                    w.data(),
                    1,
                    k as isize,
                    dyi,
                    p as isize,
                    1,
                    T::zero(),
                    &mut dcol,
                    p as isize,
                    1,
                );
                col2im(&g, &dcol, dxi);
            }
        }
    }
    Ok((dx, dw, db))
}

pub fn upsample_nearest<T: Real>(x: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if factor == 0 {
        return Err(invalid("upsample factor must be positive"));
    }
    let (ho, wo) = (h * factor, w * factor);
    let mut out = Tensor::zeros(&[n, c, ho, wo]);
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let s = &src[plane * h * w..(plane + 1) * h * w];
        let d = &mut dst[plane * ho * wo..(plane + 1) * ho * wo];
        for oy in 0..ho {
            let srow = &s[(oy / factor) * w..(oy / factor + 1) * w];
            for (ox, v) in d[oy * wo..(oy + 1) * wo].iter_mut().enumerate() {
                *v = srow[ox / factor];
            }
        }
    }
    Ok(out)
}

pub fn upsample_nearest_backward<T: Real>(
    dy: &Tensor<T>,
    in_shape: &[usize],
    factor: usize,
) -> Tensor<T> {
    let (h, w) = (in_shape[2], in_shape[3]);
    let (ho, wo) = (h * factor, w * factor);
    let mut dx = Tensor::zeros(in_shape);
    let planes = in_shape[0] * in_shape[1];
    let src = dy.data();
    let dst = dx.data_mut();
    for plane in 0..planes {
        let s = &src[plane * ho * wo..(plane + 1) * ho * wo];
        let d = &mut dst[plane * h * w..(plane + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                d[(oy / factor) * w + ox / factor] += s[oy * wo + ox];
            }
        }
    }
    dx
}

/// 2×2 max pooling with stride 2 (odd trailing rows/columns dropped).
/// Returns the output and the flat argmax index for each output element.
pub fn max_pool2<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let (n, c, h, w) = x.dims4()?;
    let (ho, wo) = (h / 2, w / 2);
    if ho == 0 || wo == 0 {
        return Err(Error::InputTooSmall {
            what: "max_pool2",
            min: 2,
            got_h: h,
            got_w: w,
        });
    }
    let mut out = Tensor::zeros(&[n, c, ho, wo]);
    let mut arg = vec![0u32; n * c * ho * wo];
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                let o = plane * ho * wo + oy * wo + ox;
                dst[o] = src[best];
                arg[o] = best as u32;
            }
        }
    }
    Ok((out, arg))
}

pub fn max_pool2_backward<T: Real>(dy: &Tensor<T>, in_shape: &[usize], arg: &[u32]) -> Tensor<T> {
    let mut dx = Tensor::zeros(in_shape);
    let d = dx.data_mut();
    for (&g, &i) in dy.data().iter().zip(arg) {
        d[i as usize] += g;
    }
    dx
}

pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    let hw = h * w;
    let inv = T::one() / T::from_usize(hw).unwrap();
    let data = x
        .data()
        .chunks_exact(hw)
        .map(|p| p.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::from_vec(&[n, c, 1, 1], data)
}

pub fn global_avg_pool_backward<T: Real>(dy: &Tensor<T>, in_shape: &[usize]) -> Tensor<T> {
    let hw = in_shape[2] * in_shape[3];
    let inv = T::one() / T::from_usize(hw).unwrap();
    let mut dx = Tensor::zeros(in_shape);
    for (p, &g) in dx.data_mut().chunks_exact_mut(hw).zip(dy.data()) {
        p.fill(g * inv);
    }
    dx
}

/// `x[n, c, :, :] * gate[n, c]`.
pub fn mul_channel<T: Real>(x: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if gate.shape() != [n, c, 1, 1] {
        return Err(Error::ShapeMismatch {
            op: "mul_channel",
            left: x.shape().to_vec(),
            right: gate.shape().to_vec(),
        });
    }
    let hw = h * w;
    let mut out = x.clone();
    for (p, &g) in out.data_mut().chunks_exact_mut(hw).zip(gate.data()) {
        for v in p {
            *v *= g;
        }
    }
    Ok(out)
}

pub fn mul_channel_backward<T: Real>(
    x: &Tensor<T>,
    gate: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let hw = x.shape()[2] * x.shape()[3];
    let mut dx = dy.clone();
    for (p, &g) in dx.data_mut().chunks_exact_mut(hw).zip(gate.data()) {
        for v in p {
            *v *= g;
        }
    }
    let dg_data = x
        .data()
        .chunks_exact(hw)
        .zip(dy.data().chunks_exact(hw))
        .map(|(xp, gp)| xp.iter().zip(gp).map(|(&a, &b)| a * b).sum::<T>())
        .collect();
    let dg = Tensor::from_vec(gate.shape(), dg_data).expect("gate shape");
    (dx, dg)
}

/// Per-channel affine `x * scale[c] + shift[c]` with constant coefficients.
pub fn channel_affine<T: Real>(x: &Tensor<T>, scale: &[T], shift: &[T]) -> Result<Tensor<T>> {
    let (_, c, h, w) = x.dims4()?;
    if scale.len() != c || shift.len() != c {
        return Err(Error::ChannelMismatch {
            layer: alloc::string::String::from("channel_affine"),
            expected: scale.len(),
            got: c,
        });
    }
    let hw = h * w;
    let mut out = x.clone();
    for (i, p) in out.data_mut().chunks_exact_mut(hw).enumerate() {
        let (s, t) = (scale[i % c], shift[i % c]);
        for v in p {
            *v = *v * s + t;
        }
    }
    Ok(out)
}

pub fn channel_scale_backward<T: Real>(dy: &Tensor<T>, scale: &[T]) -> Tensor<T> {
    let c = scale.len();
    let hw = dy.shape()[2] * dy.shape()[3];
    let mut dx = dy.clone();
    for (i, p) in dx.data_mut().chunks_exact_mut(hw).enumerate() {
        let s = scale[i % c];
        for v in p {
            *v *= s;
        }
    }
    dx
}

/// Batch statistics produced by a training-mode batch norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Unbiased variance, used for running-average updates.
    pub var_unbiased: Vec<T>,
}

/// Saved state of a batch-norm forward for its backward pass.
#[derive(Clone, Debug)]
pub struct BnSaved<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub train: bool,
}

/// Running statistics for evaluation-mode normalisation.
#[derive(Clone, Copy, Debug)]
pub enum BnMode<'a, T> {
    Train { eps: T },
    Eval { mean: &'a [T], var: &'a [T], eps: T },
}

fn bn_channel_iter(
    shape: &[usize],
) -> impl Iterator<Item = (usize, core::ops::Range<usize>)> + '_ {
    let (n, c, hw) = (shape[0], shape[1], shape[2] * shape[3]);
    (0..n * c).map(move |i| (i % c, i * hw..(i + 1) * hw))
}

pub fn batch_norm_forward<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: BnMode<'_, T>,
) -> Result<(Tensor<T>, BnSaved<T>, Option<BatchStats<T>>)> {
    let (n, c, h, w) = x.dims4()?;
    if gamma.len() != c || beta.len() != c {
        return Err(Error::ChannelMismatch {
            layer: alloc::string::String::from("batch_norm"),
            expected: gamma.len(),
            got: c,
        });
    }
    let m = n * h * w;
    let (mean, var, eps, stats) = match mode {
        BnMode::Train { eps } => {
            if m < 2 {
                return Err(invalid("batch_norm in training mode needs more than one value per channel"));
            }
            let mut sum = vec![T::zero(); c];
            let mut sq = vec![T::zero(); c];
            for (ch, r) in bn_channel_iter(x.shape()) {
                for &v in &x.data()[r] {
                    sum[ch] += v;
                }
            }
            let mf = T::from_usize(m).unwrap();
            let mean: Vec<T> = sum.iter().map(|&s| s / mf).collect();
            for (ch, r) in bn_channel_iter(x.shape()) {
                for &v in &x.data()[r] {
                    let d = v - mean[ch];
                    sq[ch] += d * d;
                }
            }
            let var: Vec<T> = sq.iter().map(|&s| s / mf).collect();
            let unbiased = sq.iter().map(|&s| s / (mf - T::one())).collect();
            let stats = BatchStats {
                mean: mean.clone(),
                var_unbiased: unbiased,
            };
            (mean, var, eps, Some(stats))
        }
        BnMode::Eval { mean, var, eps } => {
            if mean.len() != c || var.len() != c {
                return Err(Error::ChannelMismatch {
                    layer: alloc::string::String::from("batch_norm running stats"),
                    expected: mean.len(),
                    got: c,
                });
            }
            (mean.to_vec(), var.to_vec(), eps, None)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = x.clone();
    let mut y = x.clone();
    for (ch, r) in bn_channel_iter(x.shape()) {
        let (mu, is, g, b) = (mean[ch], inv_std[ch], gamma.data()[ch], beta.data()[ch]);
        for (xh, yv) in xhat.data_mut()[r.clone()].iter_mut().zip(&mut y.data_mut()[r]) {
            *xh = (*xh - mu) * is;
            *yv = *xh * g + b;
        }
    }
    let saved = BnSaved {
        xhat,
        inv_std,
        train: matches!(mode, BnMode::Train { .. }),
    };
    Ok((y, saved, stats))
}

pub fn batch_norm_backward<T: Real>(
    saved: &BnSaved<T>,
    gamma: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let shape = dy.shape();
    let c = shape[1];
    let m = T::from_usize(shape[0] * shape[2] * shape[3]).unwrap();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (ch, r) in bn_channel_iter(shape) {
        for (&g, &xh) in dy.data()[r.clone()].iter().zip(&saved.xhat.data()[r]) {
            dbeta[ch] += g;
            dgamma[ch] += g * xh;
        }
    }
    let mut dx = dy.clone();
    for (ch, r) in bn_channel_iter(shape) {
        let k = gamma.data()[ch] * saved.inv_std[ch];
        let xh = &saved.xhat.data()[r.clone()];
        for (d, &x) in dx.data_mut()[r].iter_mut().zip(xh) {
            *d = if saved.train {
                k * (*d - dbeta[ch] / m - x * dgamma[ch] / m)
            } else {
                k * *d
            };
        }
    }
    (
        dx,
        Tensor::from_vec(&[c], dgamma).unwrap(),
        Tensor::from_vec(&[c], dbeta).unwrap(),
    )
}

/// Divide every spatial location's channel vector by its L2 norm (+ eps).
/// Returns the output and the per-location norms.
pub fn channel_unit_norm<T: Real>(x: &Tensor<T>, eps: T) -> Result<(Tensor<T>, Vec<T>)> {
    let (n, c, h, w) = x.dims4()?;
    let hw = h * w;
    let mut norms = vec![T::zero(); n * hw];
    let d = x.data();
    for b in 0..n {
        for ch in 0..c {
            let p = &d[(b * c + ch) * hw..(b * c + ch + 1) * hw];
            for (acc, &v) in norms[b * hw..(b + 1) * hw].iter_mut().zip(p) {
                *acc += v * v;
            }
        }
    }
    for v in &mut norms {
        *v = v.sqrt();
    }
    let mut out = x.clone();
    let o = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            let p = &mut o[(b * c + ch) * hw..(b * c + ch + 1) * hw];
            for (v, &s) in p.iter_mut().zip(&norms[b * hw..(b + 1) * hw]) {
                *v /= s + eps;
            }
        }
    }
    Ok((out, norms))
}

pub fn channel_unit_norm_backward<T: Real>(
    x: &Tensor<T>,
    norms: &[T],
    eps: T,
    dy: &Tensor<T>,
) -> Tensor<T> {
    let s = x.shape();
    let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
    let xd = x.data();
    let gd = dy.data();
    // dot[b, p] = sum_c dy * x
    let mut dot = vec![T::zero(); n * hw];
    for b in 0..n {
        for ch in 0..c {
            let r = (b * c + ch) * hw..(b * c + ch + 1) * hw;
            for ((acc, &xv), &gv) in dot[b * hw..(b + 1) * hw].iter_mut().zip(&xd[r.clone()]).zip(&gd[r]) {
                *acc += xv * gv;
            }
        }
    }
    let mut dx = dy.clone();
    let o = dx.data_mut();
    for b in 0..n {
        for ch in 0..c {
            let r = (b * c + ch) * hw..(b * c + ch + 1) * hw;
            for (i, v) in o[r.clone()].iter_mut().enumerate() {
                let p = b * hw + i;
                let norm = norms[p];
                let den = norm + eps;
                let xv = xd[r.start + i];
                let radial = if norm > T::zero() {
                    xv * dot[p] / (den * den * norm)
                } else {
                    T::zero()
                };
                *v = *v / den - radial;
            }
        }
    }
    dx
}

#[inline]
pub fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn softplus<T: Real>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

#[inline]
pub fn leaky<T: Real>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

/// Per-element mean squared error.
pub fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    a.expect_same_shape(b, "mse")?;
    let s: T = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(s / T::from_usize(a.len().max(1)).unwrap())
}

pub fn l1<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    a.expect_same_shape(b, "l1")?;
    let s: T = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs())
        .sum();
    Ok(s / T::from_usize(a.len().max(1)).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], s: ConvSpec) -> Tensor<f64> {
        let (n, c, h, wd) = x.dims4().unwrap();
        let (oc, _, kh, kw) = w.dims4().unwrap();
        let ho = conv_out_size(h, kh, s.stride, s.padding).unwrap();
        let wo = conv_out_size(wd, kw, s.stride, s.padding).unwrap();
        let mut out = Tensor::zeros(&[n, oc, ho, wo]);
        for bi in 0..n {
            for o in 0..oc {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = b[o];
                        for ci in 0..c {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                                    let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        acc += x.at4(bi, ci, iy as usize, ix as usize)
                                            * w.at4(o, ci, ky, kx);
                                    }
                                }
                            }
                        }
                        out.data_mut()[((bi * oc + o) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn pseudo(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Tensor::from_fn(shape, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        })
    }

    #[test]
    fn conv_matches_direct_summation() {
        for (k, spec) in [
            (3, ConvSpec::new(1, 1)),
            (4, ConvSpec::new(2, 1)),
            (1, ConvSpec::new(1, 0)),
            (4, ConvSpec::new(1, 1)),
        ] {
            let x = pseudo(&[2, 3, 9, 7], 1);
            let w = pseudo(&[5, 3, k, k], 2);
            let b = [0.1, -0.2, 0.3, 0.0, 0.5];
            let bt = Tensor::from_vec(&[5], b.to_vec()).unwrap();
            let got = conv2d_forward(&x, &w, Some(&bt), spec).unwrap();
            let want = naive_conv(&x, &w, &b, spec);
            assert!(got.max_abs_diff(&want).unwrap() < 1e-12, "k={k} {spec:?}");
        }
    }

    #[test]
    fn hand_set_kernel_on_two_by_two_input() {
        // x = [[1, 2], [3, 4]], 3x3 kernel with values 1..9, pad 1.
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let y = conv2d_forward(&x, &w, None, ConvSpec::same(3)).unwrap();
        // out(0,0) = 5*1 + 6*2 + 8*3 + 9*4 = 77
        // out(0,1) = 4*1 + 5*2 + 7*3 + 8*4 = 67
        // out(1,0) = 2*1 + 3*2 + 5*3 + 6*4 = 47
        // out(1,1) = 1*1 + 2*2 + 4*3 + 5*4 = 37
        assert_eq!(y.data(), &[77.0, 67.0, 47.0, 37.0]);
    }

    #[test]
    fn conv_backward_matches_adjoint_identity() {
        // <conv(x), dy> is bilinear; check dx and dw against definitions via
        // <dx, e> = <conv(e), dy> for random directions e.
        let spec = ConvSpec::new(2, 1);
        let x = pseudo(&[2, 2, 8, 6], 3);
        let w = pseudo(&[3, 2, 4, 4], 4);
        let y = conv2d_forward(&x, &w, None, spec).unwrap();
        let dy = pseudo(y.shape(), 5);
        let (dx, dw, _) = conv2d_backward(&x, &w, spec, &dy, true, true).unwrap();
        let ex = pseudo(x.shape(), 6);
        let ew = pseudo(w.shape(), 7);
        let dot = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            a.data().iter().zip(b.data()).map(|(p, q)| p * q).sum()
        };
        let lhs = dot(&dx.unwrap(), &ex);
        let rhs = dot(&conv2d_forward(&ex, &w, None, spec).unwrap(), &dy);
        assert!((lhs - rhs).abs() < 1e-10);
        let lhs = dot(&dw.unwrap(), &ew);
        let rhs = dot(&conv2d_forward(&x, &ew, None, spec).unwrap(), &dy);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::<f64>::zeros(&[1, 4, 5, 5]);
        let w = Tensor::<f64>::zeros(&[2, 3, 3, 3]);
        assert!(matches!(
            conv2d_forward(&x, &w, None, ConvSpec::same(3)),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn max_pool_picks_maximum() {
        let x = Tensor::from_vec(&[1, 1, 2, 3], vec![1.0, 5.0, 9.0, 2.0, 3.0, 9.0]).unwrap();
        let (y, arg) = max_pool2(&x).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(arg, vec![1]);
    }
}
