//! PNG / JPEG decoding into [`ImageTensor`] and PNG encoding back.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Rgb};
use srtgan_core::{ImageTensor, Tensor};

use crate::error::{Error, Result};

/// Sample depth of a decoded file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

fn planar<P: Copy + Into<f32>>(raw: &[P], w: usize, h: usize, max: f32) -> Vec<f32> {
    let mut out = vec![0.0; 3 * h * w];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * h * w + i] = px[c].into() / max;
        }
    }
    out
}

/// Decode an 8- or 16-bit RGB image to `[1, 3, H, W]` in `[0, 1]`.
/// Grey, alpha and float images are rejected rather than converted.
pub fn load_image_with_depth(path: &Path) -> Result<(ImageTensor, BitDepth)> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, depth) = match &img {
        DynamicImage::ImageRgb8(b) => (planar(b.as_raw(), w, h, 255.0), BitDepth::Eight),
        DynamicImage::ImageRgb16(b) => (planar(b.as_raw(), w, h, 65535.0), BitDepth::Sixteen),
        other => {
            return Err(Error::format(
                path,
                format!("expected an 8- or 16-bit RGB image, found {:?}", other.color()),
            ))
        }
    };
    let t = Tensor::from_vec(&[1, 3, h, w], data)?;
    Ok((ImageTensor::new(t)?, depth))
}

pub fn load_image(path: &Path) -> Result<ImageTensor> {
    load_image_with_depth(path).map(|(img, _)| img)
}

fn interleaved(img: &ImageTensor, index: usize, max: f32) -> Result<(u32, u32, Vec<f32>)> {
    let item = img.item(index)?;
    let (h, w) = (item.height(), item.width());
    let src = item.tensor().data();
    let mut out = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        for c in 0..3 {
            out.push((src[c * h * w + i] * max).round());
        }
    }
    Ok((w as u32, h as u32, out))
}

/// Write batch item `index` as a PNG at the given depth.
pub fn save_png(path: &Path, img: &ImageTensor, index: usize, depth: BitDepth) -> Result<()> {
    let (w, h, px) = interleaved(img, index, depth.max_value())?;
    let res = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = px.into_iter().map(|v| v as u8).collect();
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
                .expect("buffer size")
                .save(path)
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = px.into_iter().map(|v| v as u16).collect();
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw)
                .expect("buffer size")
                .save(path)
        }
    };
    res.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
