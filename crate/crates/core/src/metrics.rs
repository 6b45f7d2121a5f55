//! Image quality metrics: PSNR, SSIM and an LPIPS-style perceptual
//! distance, plus dataset-level aggregation.
//!
//! All metrics take images in `[0, 1]`. PSNR of identical images is
//! reported as `f64::INFINITY`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ImagePair, ImageTensor};
use crate::losses::FEATURE_EPS;
use crate::ops;
use crate::params::ParamStore;
use crate::real::Real;
use crate::tape::{Eager, Tape};
use crate::tensor::Tensor;
use crate::vgg::Vgg;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Colour space the fidelity metrics are computed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Rgb,
    /// BT.601 luma.
    Y,
}

impl core::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Convention::Rgb),
            "y" => Ok(Convention::Y),
            _ => Err(Error::InvalidArgument(format!("unknown convention {s:?}, expected rgb or y"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub convention: Convention,
    /// Pixels removed from every side before PSNR/SSIM.
    pub border: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            convention: Convention::Rgb,
            border: 0,
        }
    }
}

fn as_f64<T: Real>(img: &ImageTensor<T>) -> Tensor<f64> {
    img.tensor().cast()
}

/// `10 log10(max_val² / mse)`, or `+inf` when the images are identical.
pub fn psnr<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>, max_val: f64) -> Result<f64> {
    let (a, b) = (as_f64(a), as_f64(b));
    let mse = ops::mse(&a, &b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * Float::log10(max_val * max_val / mse))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = Float::exp(-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-mode filter of a `h × w` plane.
fn filter_valid(p: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = alloc::vec![0.0; h * ow];
    for y in 0..h {
        let src = &p[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = alloc::vec![0.0; oh * ow];
    for y in 0..oh {
        for (j, kv) in k.iter().enumerate() {
            let src = &rows[(y + j) * ow..(y + j + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM of one plane over the valid window positions.
fn ssim_plane(x: &[f64], y: &[f64], h: usize, w: usize, data_range: f64) -> f64 {
    let k = gaussian_window();
    let c1 = (SSIM_K1 * data_range) * (SSIM_K1 * data_range);
    let c2 = (SSIM_K2 * data_range) * (SSIM_K2 * data_range);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| f(*a, *b)).collect() };
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let mxx = filter_valid(&prod(&|a, _| a * a), h, w, &k);
    let myy = filter_valid(&prod(&|_, b| b * b), h, w, &k);
    let mxy = filter_valid(&prod(&|a, b| a * b), h, w, &k);
    let n = mx.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    total / n as f64
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// computed per channel over window positions fully inside the image and
/// averaged over channels and batch items.
pub fn ssim<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<f64> {
    let (a, b) = (as_f64(a), as_f64(b));
    a.expect_same_shape(&b, "ssim")?;
    let (n, c, h, w) = a.dims4()?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InputTooSmall {
            what: "ssim",
            min: SSIM_WINDOW,
            got_h: h,
            got_w: w,
        });
    }
    let hw = h * w;
    let mut total = 0.0;
    for i in 0..n * c {
        let r = i * hw..(i + 1) * hw;
        total += ssim_plane(&a.data()[r.clone()], &b.data()[r], h, w, 1.0);
    }
    Ok(total / (n * c) as f64)
}

/// Per-layer channel weights of the LPIPS linear heads.
///
/// Binary layout, little endian:
///
/// ```text
/// magic     8 bytes  "SRTLPIPS"
/// version   u32      1
/// n_layers  u32
/// repeat n_layers:
///   channels u32
///   weights  channels × f32 (non-negative)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LpipsCalibration {
    pub layers: Vec<Vec<f32>>,
}

impl LpipsCalibration {
    pub const MAGIC: &'static [u8; 8] = b"SRTLPIPS";
    pub const VERSION: u32 = 1;

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("lpips calibration: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| fmt("truncated file"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != Self::MAGIC {
            return Err(fmt("bad magic"));
        }
        let read_u32 = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]);
        let version = read_u32(take(4)?);
        if version != Self::VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let n_layers = read_u32(take(4)?) as usize;
        let mut layers = Vec::with_capacity(n_layers.min(16));
        for l in 0..n_layers {
            let ch = read_u32(take(4)?) as usize;
            let raw = take(ch.checked_mul(4).ok_or_else(|| fmt("channel count overflow"))?)?;
            let w: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(fmt(&format!("layer {l} has negative or non-finite weights")));
            }
            layers.push(w);
        }
        if pos != bytes.len() {
            return Err(fmt("trailing bytes"));
        }
        Ok(LpipsCalibration { layers })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.len() as u32).to_le_bytes());
            for v in l {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Equal weights `1 / channels` per layer.
    pub fn uniform(channels: &[usize]) -> Self {
        LpipsCalibration {
            layers: channels.iter().map(|&c| alloc::vec![1.0 / c as f32; c]).collect(),
        }
    }
}

/// Perceptual distance from a feature extractor and calibrated weights.
#[derive(Clone, Debug)]
pub struct Lpips {
    vgg: Vgg,
    params: ParamStore<f32>,
    calibration: LpipsCalibration,
}

impl Lpips {
    pub fn new(vgg: Vgg, params: ParamStore<f32>, calibration: LpipsCalibration) -> Result<Self> {
        let widths = vgg.config().widths;
        if calibration.layers.len() != widths.len() {
            return Err(Error::Format(format!(
                "lpips calibration has {} layers, extractor has {}",
                calibration.layers.len(),
                widths.len()
            )));
        }
        for (l, (w, &c)) in calibration.layers.iter().zip(&widths).enumerate() {
            if w.len() != c {
                return Err(Error::ChannelMismatch {
                    layer: format!("lpips layer {l}"),
                    expected: c,
                    got: w.len(),
                });
            }
        }
        Ok(Lpips {
            vgg,
            params,
            calibration,
        })
    }

    /// Distance per batch item:
    /// `Σ_l mean_hw Σ_c w_lc (unit(φ_l(a)) - unit(φ_l(b)))²`.
    pub fn distances<T: Real>(&self, a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<Vec<f64>> {
        a.tensor().expect_same_shape(b.tensor(), "lpips")?;
        let mut t = Eager::with(&self.params);
        let xa = t.constant(a.tensor().cast());
        let xb = t.constant(b.tensor().cast());
        let fa = self.vgg.features(&mut t, &xa, 4)?;
        let fb = self.vgg.features(&mut t, &xb, 4)?;
        let mut out = alloc::vec![0.0; a.batch()];
        for ((pa, pb), w) in fa.iter().zip(&fb).zip(&self.calibration.layers) {
            let (na, _) = ops::channel_unit_norm(pa, FEATURE_EPS as f32)?;
            let (nb, _) = ops::channel_unit_norm(pb, FEATURE_EPS as f32)?;
            let (n, c, h, ww) = na.dims4()?;
            let hw = h * ww;
            for (item, o) in out.iter_mut().enumerate().take(n) {
                let mut acc = 0.0f64;
                for (ch, &wc) in w.iter().enumerate().take(c) {
                    let off = (item * c + ch) * hw;
                    let d2: f64 = na.data()[off..off + hw]
                        .iter()
                        .zip(&nb.data()[off..off + hw])
                        .map(|(x, y)| {
                            let d = (*x - *y) as f64;
                            d * d
                        })
                        .sum();
                    acc += wc as f64 * d2;
                }
                *o += acc / hw as f64;
            }
        }
        Ok(out)
    }

    pub fn distance<T: Real>(&self, a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<f64> {
        let d = self.distances(a, b)?;
        Ok(d.iter().sum::<f64>() / d.len() as f64)
    }
}

/// `f64` that serialises `±inf` as strings so reports stay valid JSON.
mod finite_or_tag {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr<'a> {
        Num(f64),
        Tag(&'a str),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            Repr::Tag(if *v > 0.0 { "inf" } else { "-inf" }).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag("inf") => Ok(f64::INFINITY),
            Repr::Tag("-inf") => Ok(f64::NEG_INFINITY),
            Repr::Tag(t) => Err(serde::de::Error::custom(alloc::format!("bad number tag {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    #[serde(with = "finite_or_tag")]
    pub psnr: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(with = "finite_or_tag")]
    pub psnr: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub checkpoint: String,
    pub dataset: String,
    pub value_range: String,
    pub convention: Convention,
    pub border: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    pub records: Vec<ImageRecord>,
    pub mean: Aggregate,
}

impl MetricsReport {
    pub fn from_records(meta: ReportMeta, records: Vec<ImageRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("metrics records"));
        }
        let n = records.len() as f64;
        let lpips = if records.iter().all(|r| r.lpips.is_some()) {
            Some(records.iter().filter_map(|r| r.lpips).sum::<f64>() / n)
        } else {
            None
        };
        let mean = Aggregate {
            psnr: records.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: records.iter().map(|r| r.ssim).sum::<f64>() / n,
            lpips,
        };
        Ok(MetricsReport { meta, records, mean })
    }

    /// Plain-text table with one row per image and a mean row.
    pub fn table(&self) -> String {
        let fmt_l = |v: Option<f64>| v.map_or(String::from("-"), |v| format!("{v:.4}"));
        let mut s = format!(
            "{:<24} {:>9} {:>8} {:>8}\n",
            "image", "PSNR ↑", "SSIM ↑", "LPIPS ↓"
        );
        for r in &self.records {
            s += &format!("{:<24} {:>9.3} {:>8.4} {:>8}\n", r.id, r.psnr, r.ssim, fmt_l(r.lpips));
        }
        s += &format!(
            "{:<24} {:>9.3} {:>8.4} {:>8}\n",
            "mean",
            self.mean.psnr,
            self.mean.ssim,
            fmt_l(self.mean.lpips)
        );
        s
    }
}

/// Fidelity metrics of one `(prediction, target)` pair under `opts`.
pub fn fidelity<T: Real>(pred: &ImageTensor<T>, target: &ImageTensor<T>, opts: &MetricOptions) -> Result<(f64, f64)> {
    pred.tensor().expect_same_shape(target.tensor(), "metrics")?;
    let (mut p, mut t) = (pred.clone(), target.clone());
    if opts.border > 0 {
        let (h, w) = (p.height(), p.width());
        if 2 * opts.border >= h.min(w) {
            return Err(Error::InvalidArgument(format!("border {} too large for {h}x{w}", opts.border)));
        }
        let (ch, cw) = (h - 2 * opts.border, w - 2 * opts.border);
        p = p.crop(opts.border, opts.border, ch, cw)?;
        t = t.crop(opts.border, opts.border, ch, cw)?;
    }
    if opts.convention == Convention::Y {
        p = p.luma();
        t = t.luma();
    }
    Ok((psnr(&p, &t, 1.0)?, ssim(&p, &t)?))
}

/// Score `upscale(pair)` against each HR image. Any failure aborts the
/// whole evaluation.
pub fn evaluate<F>(
    pairs: &[ImagePair],
    mut upscale: F,
    lpips: Option<&Lpips>,
    opts: &MetricOptions,
    meta: ReportMeta,
) -> Result<MetricsReport>
where
    F: FnMut(&ImagePair) -> Result<ImageTensor>,
{
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let mut records = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let sr = upscale(pair)?;
        if sr.tensor().shape() != pair.hr.tensor().shape() {
            return Err(Error::ShapeMismatch {
                op: "evaluate",
                left: sr.tensor().shape().to_vec(),
                right: pair.hr.tensor().shape().to_vec(),
            });
        }
        let (p, s) = fidelity(&sr, &pair.hr, opts)?;
        let l = match lpips {
            Some(m) => Some(m.distance(&sr, &pair.hr)?),
            None => None,
        };
        records.push(ImageRecord {
            id: pair.id.clone(),
            psnr: p,
            ssim: s,
            lpips: l,
        });
    }
    MetricsReport::from_records(meta, records)
}

/// Bicubic-upsampled LR, the reference baseline.
pub fn bicubic_baseline(pair: &ImagePair) -> Result<ImageTensor> {
    pair.upsampled_lr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::gaussian_blur;
    use crate::vgg::VggConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(seed: u64, h: usize, w: usize) -> ImageTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::new(Tensor::from_fn(&[1, 3, h, w], |_| rng.random_range(0.0..1.0))).unwrap()
    }

    fn plus(img: &ImageTensor<f64>, d: f64) -> ImageTensor<f64> {
        ImageTensor::from_clamped(img.tensor().map(|v| v + d)).unwrap()
    }

    #[test]
    fn psnr_closed_form_and_identity() {
        let a = ImageTensor::constant(1, 16, 16, 0.5f64).unwrap();
        let b = plus(&a, 1.0 / 255.0);
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((p - 48.131).abs() < 1e-3);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = ImageTensor::constant(1, 12, 12, 0.5f64).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let amp = 0.02 * k as f64;
            let noise: Vec<f64> = (0..base.tensor().len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = ImageTensor::from_clamped(Tensor::from_fn(&[1, 3, 12, 12], |i| 0.5 + amp * noise[i])).unwrap();
            let p = psnr(&base, &n, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_identity_symmetry_and_size() {
        let a = noisy(1, 24, 20);
        let b = noisy(2, 24, 20);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..1.0).contains(&ab));
        assert!(matches!(ssim(&noisy(3, 10, 20), &noisy(4, 10, 20)), Err(Error::InputTooSmall { min: 11, .. })));
    }

    #[test]
    fn gaussian_window_is_normalised() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], w[10]);
        assert!(w[5] > w[4]);
    }

    #[test]
    fn metrics_are_batch_permutation_invariant() {
        let a = ImageTensor::stack(&[&noisy(1, 16, 16), &noisy(2, 16, 16)]).unwrap();
        let b = ImageTensor::stack(&[&noisy(3, 16, 16), &noisy(4, 16, 16)]).unwrap();
        let ap = ImageTensor::stack(&[&a.item(1).unwrap(), &a.item(0).unwrap()]).unwrap();
        let bp = ImageTensor::stack(&[&b.item(1).unwrap(), &b.item(0).unwrap()]).unwrap();
        assert!((psnr(&a, &b, 1.0).unwrap() - psnr(&ap, &bp, 1.0).unwrap()).abs() < 1e-12);
        assert!((ssim(&a, &b).unwrap() - ssim(&ap, &bp).unwrap()).abs() < 1e-12);
    }

    fn tiny_lpips() -> Lpips {
        let vgg = Vgg::new(VggConfig {
            widths: [4, 6, 8, 8],
            imagenet_normalize: true,
        })
        .unwrap();
        let p = vgg.init(&mut ChaCha8Rng::seed_from_u64(0));
        Lpips::new(vgg, p, LpipsCalibration::uniform(&[4, 6, 8, 8])).unwrap()
    }

    #[test]
    fn lpips_identity_and_nonnegative() {
        let l = tiny_lpips();
        let a = noisy(5, 32, 32);
        assert_eq!(l.distance(&a, &a).unwrap(), 0.0);
        assert!(l.distance(&a, &noisy(6, 32, 32)).unwrap() > 0.0);
    }

    #[test]
    fn lpips_grows_with_blur() {
        let l = tiny_lpips();
        let a = noisy(7, 32, 32);
        let mild = gaussian_blur(&a, 0.6).unwrap();
        let heavy = gaussian_blur(&a, 3.0).unwrap();
        assert!(l.distance(&a, &heavy).unwrap() > l.distance(&a, &mild).unwrap());
    }

    #[test]
    fn calibration_roundtrip_and_rejects_bad_files() {
        let c = LpipsCalibration {
            layers: alloc::vec![alloc::vec![0.5, 1.0], alloc::vec![0.0, 2.0, 3.0]],
        };
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..8], b"SRTLPIPS");
        assert_eq!(LpipsCalibration::parse(&bytes).unwrap(), c);
        assert!(LpipsCalibration::parse(&bytes[..bytes.len() - 1]).is_err());
        let mut neg = c.clone();
        neg.layers[1][0] = -1.0;
        assert!(LpipsCalibration::parse(&neg.to_bytes()).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(LpipsCalibration::parse(&bad).is_err());
    }

    #[test]
    fn report_aggregates_and_serialises_infinity() {
        let meta = ReportMeta {
            checkpoint: "ck".into(),
            dataset: "ds".into(),
            value_range: "[0,1]".into(),
            convention: Convention::Rgb,
            border: 0,
        };
        let recs = alloc::vec![
            ImageRecord { id: "a".into(), psnr: 30.0, ssim: 0.9, lpips: Some(0.1) },
            ImageRecord { id: "b".into(), psnr: 20.0, ssim: 0.7, lpips: Some(0.3) },
        ];
        let r = MetricsReport::from_records(meta.clone(), recs).unwrap();
        assert_eq!(r.mean.psnr, 25.0);
        assert!((r.mean.ssim - 0.8).abs() < 1e-12);
        assert!((r.mean.lpips.unwrap() - 0.2).abs() < 1e-12);
        assert!(r.table().contains("PSNR"));
        assert!(MetricsReport::from_records(meta, Vec::new()).is_err());
    }

    #[test]
    fn evaluate_identity_dataset() {
        let hr = noisy(8, 16, 16).cast::<f32>();
        let lr = crate::imaging::bicubic_resize(&hr, crate::Ratio::new(1, 4)).unwrap();
        let pairs = [ImagePair::new(lr, hr, 4, "p0").unwrap()];
        let meta = ReportMeta {
            checkpoint: "hr".into(),
            dataset: "toy".into(),
            value_range: "[0,1]".into(),
            convention: Convention::Rgb,
            border: 0,
        };
        let lp = tiny_lpips();
        let r = evaluate(&pairs, |p| Ok(p.hr.clone()), Some(&lp), &MetricOptions::default(), meta.clone()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].psnr, f64::INFINITY);
        assert!((r.records[0].ssim - 1.0).abs() < 1e-9);
        assert_eq!(r.records[0].lpips, Some(0.0));
        let wrong = evaluate(&pairs, |p| Ok(p.lr.clone()), None, &MetricOptions::default(), meta);
        assert!(wrong.is_err());
    }
}
