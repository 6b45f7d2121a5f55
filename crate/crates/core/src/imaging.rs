//! Images as `[N, 3, H, W]` tensors in `[0, 1]`, paired LR/HR samples,
//! bicubic resampling and geometric augmentation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::{lit, Real};
use crate::tensor::Tensor;

/// An RGB image batch with every value finite and within `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T = f32> {
    data: Tensor<T>,
}

impl<T: Real> ImageTensor<T> {
    /// Validate a tensor without altering it.
    pub fn new(data: Tensor<T>) -> Result<Self> {
        let (_, c, _, _) = data.dims4()?;
        if c != 3 {
            return Err(Error::ChannelMismatch {
                layer: String::from("image"),
                expected: 3,
                got: c,
            });
        }
        if let Some(v) = data
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v < T::zero() || **v > T::one())
        {
            return Err(invalid(format!("image value {v} outside [0, 1]")));
        }
        Ok(ImageTensor { data })
    }

    /// Clamp into range; non-finite values are rejected.
    pub fn from_clamped(data: Tensor<T>) -> Result<Self> {
        if !data.is_finite() {
            return Err(invalid("image contains non-finite values"));
        }
        Self::new(data.clamp(T::zero(), T::one()))
    }

    pub fn constant(n: usize, h: usize, w: usize, value: T) -> Result<Self> {
        Self::new(Tensor::full(&[n, 3, h, w], value))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    pub fn batch(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn cast<U: Real>(&self) -> ImageTensor<U> {
        ImageTensor {
            data: self.data.cast(),
        }
    }

    pub fn item(&self, i: usize) -> Result<Self> {
        Ok(ImageTensor {
            data: self.data.narrow_batch(i, 1)?,
        })
    }

    pub fn stack(items: &[&Self]) -> Result<Self> {
        let ts: Vec<_> = items.iter().map(|i| &i.data).collect();
        Ok(ImageTensor {
            data: Tensor::stack_batch(&ts)?,
        })
    }

    /// Spatial crop `[y, y + h) × [x, x + w)` of every batch item.
    pub fn crop(&self, y: usize, x: usize, h: usize, w: usize) -> Result<Self> {
        let (n, c, ih, iw) = self.data.dims4()?;
        if h == 0 || w == 0 || y + h > ih || x + w > iw {
            return Err(invalid(format!(
                "crop {h}x{w} at ({y}, {x}) exceeds image {ih}x{iw}"
            )));
        }
        let src = self.data.data();
        let mut out = Vec::with_capacity(n * c * h * w);
        for plane in 0..n * c {
            for row in y..y + h {
                let start = (plane * ih + row) * iw + x;
                out.extend_from_slice(&src[start..start + w]);
            }
        }
        Ok(ImageTensor {
            data: Tensor::from_vec(&[n, c, h, w], out)?,
        })
    }

    pub fn hflip(&self) -> Self {
        let (n, c, h, w) = self.data.dims4().expect("rank 4");
        let src = self.data.data();
        let data = Tensor::from_fn(&[n, c, h, w], |i| {
            let x = i % w;
            src[i - x + (w - 1 - x)]
        });
        ImageTensor { data }
    }

    /// Rotate 90° counter-clockwise: `out[y][x] = in[x][w - 1 - y]`.
    pub fn rot90(&self) -> Self {
        let (n, c, h, w) = self.data.dims4().expect("rank 4");
        let src = self.data.data();
        let data = Tensor::from_fn(&[n, c, w, h], |i| {
            let plane = i / (w * h);
            let (y, x) = ((i % (w * h)) / h, i % h);
            src[plane * h * w + x * w + (w - 1 - y)]
        });
        ImageTensor { data }
    }

    /// ITU-R BT.601 luma in `[16/255, 235/255]`, replicated over three
    /// channels so it stays a valid image.
    pub fn luma(&self) -> Self {
        let (n, _, h, w) = self.data.dims4().expect("rank 4");
        let hw = h * w;
        let src = self.data.data();
        let mut out = Vec::with_capacity(n * 3 * hw);
        for b in 0..n {
            let base = b * 3 * hw;
            let y: Vec<T> = (0..hw)
                .map(|p| {
                    let (r, g, bl) = (src[base + p], src[base + hw + p], src[base + 2 * hw + p]);
                    lit::<T>(16.0 / 255.0)
                        + (lit::<T>(65.481) * r + lit::<T>(128.553) * g + lit::<T>(24.966) * bl)
                            / lit(255.0)
                })
                .collect();
            for _ in 0..3 {
                out.extend_from_slice(&y);
            }
        }
        ImageTensor {
            data: Tensor::from_vec(&[n, 3, h, w], out).unwrap(),
        }
    }
}

/// Positive rational resampling factor `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const fn new(num: u32, den: u32) -> Self {
        Ratio { num, den }
    }

    pub const fn integer(v: u32) -> Self {
        Ratio { num: v, den: 1 }
    }

    /// `round(self × size)`, halves rounded up.
    pub fn apply(self, size: usize) -> usize {
        let (n, d) = (self.num as u64, self.den as u64);
        ((2 * n * size as u64 + d) / (2 * d)) as usize
    }
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * A
    } else {
        0.0
    }
}

/// Per-output-sample tap window and normalised weights for one axis.
/// Downsampling widens the kernel by the scale (antialiasing); taps falling
/// outside the image are dropped and the rest renormalised.
fn resample_weights(in_size: usize, out_size: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = in_size as f64 / out_size as f64;
    let filter_scale = scale.max(1.0);
    let support = 2.0 * filter_scale;
    (0..out_size)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = Float::floor(center - support + 0.5).max(0.0) as usize;
            let hi = (Float::floor(center + support + 0.5) as usize).min(in_size);
            let mut w: Vec<f64> = (lo..hi)
                .map(|j| cubic((j as f64 - center + 0.5) / filter_scale))
                .collect();
            let total: f64 = w.iter().sum();
            if total != 0.0 {
                for v in &mut w {
                    *v /= total;
                }
            }
            (lo, w)
        })
        .collect()
}

/// Separable bicubic (`a = -0.5`) resampling of every plane to `out_h × out_w`.
/// Values are not clamped.
pub fn resize_bicubic<T: Real>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(invalid("bicubic output size must be at least 1x1"));
    }
    let wx = resample_weights(w, out_w);
    let wy = resample_weights(h, out_h);
    let src = x.data();
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    let mut tmp = alloc::vec![0.0f64; h * out_w];
    for plane in 0..n * c {
        let p = &src[plane * h * w..(plane + 1) * h * w];
        for y in 0..h {
            let row = &p[y * w..(y + 1) * w];
            for (ox, (lo, ws)) in wx.iter().enumerate() {
                tmp[y * out_w + ox] = ws
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * row[lo + k].as_f64())
                    .sum();
            }
        }
        for (lo, ws) in &wy {
            for ox in 0..out_w {
                let v: f64 = ws
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * tmp[(lo + k) * out_w + ox])
                    .sum();
                out.push(T::from_f64_lossy(v));
            }
        }
    }
    Tensor::from_vec(&[n, c, out_h, out_w], out)
}

/// Bicubic resize by a rational factor; output dims are `round(factor × dims)`
/// and values are clamped back into `[0, 1]`.
pub fn bicubic_resize<T: Real>(img: &ImageTensor<T>, factor: Ratio) -> Result<ImageTensor<T>> {
    if factor.num == 0 || factor.den == 0 {
        return Err(invalid(format!(
            "resize factor {}/{} must be positive",
            factor.num, factor.den
        )));
    }
    let (oh, ow) = (factor.apply(img.height()), factor.apply(img.width()));
    if oh == 0 || ow == 0 {
        return Err(invalid(format!(
            "resizing {}x{} by {}/{} leaves no pixels",
            img.height(),
            img.width(),
            factor.num,
            factor.den
        )));
    }
    bicubic_resize_to(img, oh, ow)
}

pub fn bicubic_resize_to<T: Real>(img: &ImageTensor<T>, out_h: usize, out_w: usize) -> Result<ImageTensor<T>> {
    ImageTensor::from_clamped(resize_bicubic(img.tensor(), out_h, out_w)?)
}

/// An aligned low/high-resolution pair of the same scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair<T = f32> {
    pub lr: ImageTensor<T>,
    pub hr: ImageTensor<T>,
    pub scale: usize,
    pub id: String,
}

impl<T: Real> ImagePair<T> {
    pub fn new(lr: ImageTensor<T>, hr: ImageTensor<T>, scale: usize, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if scale == 0 {
            return Err(invalid("pair scale must be positive"));
        }
        if hr.height() != scale * lr.height()
            || hr.width() != scale * lr.width()
            || hr.batch() != lr.batch()
        {
            return Err(invalid(format!(
                "pair `{id}`: HR {}x{} is not {scale}x LR {}x{}",
                hr.height(),
                hr.width(),
                lr.height(),
                lr.width()
            )));
        }
        Ok(ImagePair { lr, hr, scale, id })
    }

    /// The triplet negative: the LR image bicubic-upsampled to HR size.
    pub fn upsampled_lr(&self) -> Result<ImageTensor<T>> {
        bicubic_resize_to(&self.lr, self.hr.height(), self.hr.width())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rotation {
    R0,
    R90,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetPolicy {
    Random,
    Center,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    /// Square crop side in LR pixels.
    pub lr_size: usize,
    pub offset: OffsetPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub hflip: bool,
    pub rotation: Rotation,
    pub crop: Option<CropSpec>,
}

impl AugmentationSpec {
    pub const IDENTITY: AugmentationSpec = AugmentationSpec {
        hflip: false,
        rotation: Rotation::R0,
        crop: None,
    };

    /// Random flip and rotation (each with probability one half) around a
    /// random-offset crop.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, lr_crop: Option<usize>) -> Self {
        AugmentationSpec {
            hflip: rng.random_bool(0.5),
            rotation: if rng.random_bool(0.5) {
                Rotation::R90
            } else {
                Rotation::R0
            },
            crop: lr_crop.map(|lr_size| CropSpec {
                lr_size,
                offset: OffsetPolicy::Random,
            }),
        }
    }
}

/// Crop, then flip, then rotate both members of a pair identically. HR crop
/// offsets are `scale ×` the LR offsets.
pub fn augment<T: Real, R: Rng + ?Sized>(
    pair: &ImagePair<T>,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<ImagePair<T>> {
    let s = pair.scale;
    let (mut lr, mut hr) = match spec.crop {
        None => (pair.lr.clone(), pair.hr.clone()),
        Some(crop) => {
            let (h, w) = (pair.lr.height(), pair.lr.width());
            let size = crop.lr_size;
            if size == 0 || size > h || size > w {
                return Err(invalid(format!(
                    "crop {size}x{size} larger than LR image {h}x{w} of pair `{}`",
                    pair.id
                )));
            }
            let (y, x) = match crop.offset {
                OffsetPolicy::Center => ((h - size) / 2, (w - size) / 2),
                OffsetPolicy::Random => (rng.random_range(0..=h - size), rng.random_range(0..=w - size)),
            };
            (
                pair.lr.crop(y, x, size, size)?,
                pair.hr.crop(s * y, s * x, s * size, s * size)?,
            )
        }
    };
    if spec.hflip {
        lr = lr.hflip();
        hr = hr.hflip();
    }
    if spec.rotation == Rotation::R90 {
        lr = lr.rot90();
        hr = hr.rot90();
    }
    ImagePair::new(lr, hr, s, pair.id.clone())
}

/// Separable Gaussian blur with a `2⌈3σ⌉ + 1` kernel and replicated borders.
pub fn gaussian_blur<T: Real>(img: &ImageTensor<T>, sigma: f64) -> Result<ImageTensor<T>> {
    if sigma <= 0.0 {
        return Ok(img.clone());
    }
    let r = Float::ceil(3.0 * sigma) as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| Float::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|v| v / total).collect();
    let (n, c, h, w) = img.tensor().dims4()?;
    let src = img.tensor().data();
    let mut tmp = alloc::vec![0.0f64; n * c * h * w];
    let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..h {
            for x in 0..w {
                tmp[base + y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * src[base + y * w + clampi(x as isize + i as isize - r, w)].as_f64())
                    .sum();
            }
        }
    }
    let mut out = alloc::vec![T::zero(); n * c * h * w];
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..h {
            for x in 0..w {
                let v: f64 = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * tmp[base + clampi(y as isize + i as isize - r, h) * w + x])
                    .sum();
                out[base + y * w + x] = T::from_f64_lossy(v);
            }
        }
    }
    ImageTensor::from_clamped(Tensor::from_vec(&[n, c, h, w], out)?)
}
