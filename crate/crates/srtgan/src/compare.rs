//! True LR versus bicubic-downsampled HR, patch by patch.

use std::str::FromStr;

use srtgan_core::imaging::bicubic_resize_to;
use srtgan_core::metrics::{psnr, ssim};
use srtgan_core::{ImageTensor, Tensor};

use crate::error::{Error, Result};

/// A rectangle in LR pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl FromStr for Patch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("patch `{s}` must be x,y,w,h with non-negative integers"))?;
        match v[..] {
            [x, y, w, h] if w > 0 && h > 0 => Ok(Patch { x, y, w, h }),
            [_, _, _, _] => Err(format!("patch `{s}` must have positive width and height")),
            _ => Err(format!("patch `{s}` must have exactly four fields x,y,w,h")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub scale: usize,
    pub true_lr: ImageTensor,
    pub bicubic_lr: ImageTensor,
    pub psnr: f64,
    /// `None` when the patch is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

/// Downsample `hr` to `lr`'s size with bicubic and compare both inside
/// `patch`. Out-of-bounds patches are [`Error::Config`].
pub fn compare_degradation(hr: &ImageTensor, lr: &ImageTensor, patch: Patch) -> Result<Comparison> {
    let (lh, lw) = (lr.height(), lr.width());
    if hr.height() % lh != 0 || hr.width() % lw != 0 || hr.height() / lh != hr.width() / lw {
        return Err(Error::Config(format!(
            "HR {}x{} is not an integer multiple of LR {lh}x{lw}",
            hr.height(),
            hr.width()
        )));
    }
    let scale = hr.height() / lh;
    if patch.x + patch.w > lw || patch.y + patch.h > lh {
        return Err(Error::Config(format!(
            "patch {},{},{},{} exceeds the {lw}x{lh} LR image",
            patch.x, patch.y, patch.w, patch.h
        )));
    }
    let down = bicubic_resize_to(hr, lh, lw)?;
    let a = lr.crop(patch.y, patch.x, patch.h, patch.w)?;
    let b = down.crop(patch.y, patch.x, patch.h, patch.w)?;
    let p = psnr(&a, &b, 1.0)?;
    let s = ssim(&a, &b).ok();
    Ok(Comparison {
        scale,
        true_lr: a,
        bicubic_lr: b,
        psnr: p,
        ssim: s,
    })
}

/// Both patches side by side, nearest-neighbour enlarged so the shorter
/// side is at least 128 px, separated by a white bar.
pub fn side_by_side(c: &Comparison) -> Result<ImageTensor> {
    let (h, w) = (c.true_lr.height(), c.true_lr.width());
    let zoom = (128 / h.min(w)).max(1);
    let gap = 4;
    let (oh, ow) = (h * zoom, 2 * w * zoom + gap);
    let mut out = vec![1.0f32; 3 * oh * ow];
    for (k, img) in [&c.true_lr, &c.bicubic_lr].into_iter().enumerate() {
        let x0 = k * (w * zoom + gap);
        for ch in 0..3 {
            for y in 0..oh {
                for x in 0..w * zoom {
                    out[(ch * oh + y) * ow + x0 + x] = img.tensor().at4(0, ch, y / zoom, x / zoom);
                }
            }
        }
    }
    Ok(ImageTensor::new(Tensor::from_vec(&[1, 3, oh, ow], out)?)?)
}
