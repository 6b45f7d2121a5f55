//! Procedural scenes and a camera-like degradation, for tests and smoke
//! runs without a real paired dataset.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize_to, gaussian_blur, ImagePair, ImageTensor};
use crate::tensor::Tensor;

/// A smooth background with rectangles, discs and stripe patches.
pub fn scene<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize) -> ImageTensor {
    let mut img = alloc::vec![0.0f32; 3 * h * w];
    let base: [f32; 3] = core::array::from_fn(|_| rng.random_range(0.2..0.8));
    let grad: [f32; 3] = core::array::from_fn(|_| rng.random_range(-0.2..0.2));
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                img[(c * h + y) * w + x] = base[c] + grad[c] * (x as f32 / w as f32 - y as f32 / h as f32);
            }
        }
    }
    let shapes = rng.random_range(4..9);
    for _ in 0..shapes {
        let color: [f32; 3] = core::array::from_fn(|_| rng.random_range(0.0..1.0));
        let (cy, cx) = (rng.random_range(0..h) as f32, rng.random_range(0..w) as f32);
        let r = rng.random_range(2.0..(h.min(w) as f32 / 3.0).max(3.0));
        let kind = rng.random_range(0..3);
        let period = rng.random_range(2.0f32..6.0);
        let angle = rng.random_range(0.0f32..core::f32::consts::PI);
        let (sa, ca) = (Float::sin(angle), Float::cos(angle));
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = (y as f32 - cy, x as f32 - cx);
                let inside = match kind {
                    0 => dy.abs() < r && dx.abs() < r * 0.7,
                    1 => dy * dy + dx * dx < r * r,
                    _ => dy.abs() < r && dx.abs() < r && Float::sin((dx * ca + dy * sa) * 2.0 * core::f32::consts::PI / period) > 0.0,
                };
                if inside {
                    for c in 0..3 {
                        img[(c * h + y) * w + x] = color[c];
                    }
                }
            }
        }
    }
    let t = Tensor::from_vec(&[1, 3, h, w], img).expect("scene shape");
    ImageTensor::from_clamped(t).expect("finite scene")
}

/// Mean over non-overlapping `factor × factor` blocks.
pub fn area_downsample(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    let (n, c, h, w) = img.tensor().dims4()?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::InvalidArgument(format!("{h}x{w} is not divisible by {factor}")));
    }
    let (oh, ow) = (h / factor, w / factor);
    let src = img.tensor().data();
    let inv = 1.0 / (factor * factor) as f32;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for p in 0..n * c {
        for y in 0..oh {
            for x in 0..ow {
                let mut s = 0.0;
                for dy in 0..factor {
                    let row = &src[(p * h + y * factor + dy) * w + x * factor..][..factor];
                    s += row.iter().sum::<f32>();
                }
                out.push(s * inv);
            }
        }
    }
    ImageTensor::new(Tensor::from_vec(&[n, c, oh, ow], out)?)
}

/// Round to the nearest multiple of `1/255`.
pub fn quantize8(img: &ImageTensor) -> ImageTensor {
    ImageTensor::from_clamped(img.tensor().map(|v| Float::round(v * 255.0) / 255.0)).expect("finite")
}

/// Gaussian blur, area downsampling and 8-bit quantisation. Unlike bicubic
/// downsampling this leaves the pair misaligned with the bicubic model.
pub fn degrade(hr: &ImageTensor, scale: usize, blur_sigma: f64) -> Result<ImageTensor> {
    let blurred = gaussian_blur(hr, blur_sigma)?;
    Ok(quantize8(&area_downsample(&blurred, scale)?))
}

/// One synthetic pair with an LR side of `lr_h × lr_w`.
pub fn pair<R: Rng + ?Sized>(rng: &mut R, lr_h: usize, lr_w: usize, scale: usize, id: &str) -> Result<ImagePair> {
    let hr = quantize8(&scene(rng, lr_h * scale, lr_w * scale));
    let lr = degrade(&hr, scale, 0.8 * scale as f64 / 2.0)?;
    ImagePair::new(lr, hr, scale, id)
}

/// `count` pairs named `syn000`, `syn001`, ...
pub fn dataset<R: Rng + ?Sized>(rng: &mut R, count: usize, lr_h: usize, lr_w: usize, scale: usize) -> Result<Vec<ImagePair>> {
    (0..count)
        .map(|i| pair(rng, lr_h, lr_w, scale, &format!("syn{i:03}")))
        .collect()
}

/// Like [`pair`], but the scene is drawn at half the HR resolution and
/// bicubic-upsampled, so the HR image carries no detail beyond what a 4×
/// model could plausibly recover. Suited to overfitting probes.
pub fn band_limited_pair<R: Rng + ?Sized>(rng: &mut R, lr_h: usize, lr_w: usize, scale: usize, id: &str) -> Result<ImagePair> {
    let (hh, hw) = (lr_h * scale, lr_w * scale);
    let coarse = scene(rng, hh.div_ceil(2), hw.div_ceil(2));
    let hr = quantize8(&bicubic_resize_to(&coarse, hh, hw)?);
    let lr = degrade(&hr, scale, 0.8 * scale as f64 / 2.0)?;
    ImagePair::new(lr, hr, scale, id)
}

/// `count` band-limited pairs named `bl000`, `bl001`, ...
pub fn band_limited_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    lr_h: usize,
    lr_w: usize,
    scale: usize,
) -> Result<Vec<ImagePair>> {
    (0..count)
        .map(|i| band_limited_pair(rng, lr_h, lr_w, scale, &format!("bl{i:03}")))
        .collect()
}
