//! The feature extractor against torchvision's VGG `features` stack and a
//! torch perceptual distance, with weights and images defined by closed
//! formulas both sides evaluate. Checks layer naming, weight layout,
//! ImageNet normalisation, floor pooling on odd sizes and the taps.

use srtgan_core::losses::perceptual_terms;
use srtgan_core::{Eager, ParamStore, Tape, Tensor, Vgg, VggConfig};

/// `(shape, sum, sum of squares)` per tap, from torch at float64.
const TAPS: [([usize; 4], f64, f64); 4] = [
    ([1, 4, 26, 22], 1052.4058036189892, 1826.8131542611154),
    ([1, 6, 13, 11], 129.22725790388398, 60.71462097738053),
    ([1, 8, 6, 5], 3.591870287082075, 0.13316386154022392),
    ([1, 8, 3, 2], 1.259997092956009, 0.06255044848185168),
];

const PERCEPTUAL: [f64; 4] = [0.10931206785465299, 0.04513736671931364, 0.0021001254019178506, 7.491659347959889e-05];

fn extractor() -> (Vgg, ParamStore<f64>) {
    let vgg = Vgg::new(VggConfig {
        widths: [4, 6, 8, 8],
        imagenet_normalize: true,
    })
    .unwrap();
    let mut p = ParamStore::new();
    for (l, (name, i, o)) in vgg.conv_layers().into_iter().enumerate() {
        let fan = (i * 9) as f64;
        let w = Tensor::from_fn(&[o, i, 3, 3], |k| (0.37 * k as f64 + 1.3 * l as f64).sin() * 1.5 / fan.sqrt());
        let b = Tensor::from_fn(&[o], |k| 0.05 * (k as f64 + 0.7 * l as f64).cos());
        p.insert(&format!("{name}.weight"), w);
        p.insert(&format!("{name}.bias"), b);
    }
    (vgg, p)
}

fn image(h: usize, w: usize, phase: f64) -> Tensor<f64> {
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let (c, r) = (i / (h * w), i % (h * w));
        let (y, x, c) = ((r / w) as f64, (r % w) as f64, c as f64);
        0.5 + 0.4 * (0.3 * x + 0.2 * y + c + phase).sin() * (0.11 * x * (c + 1.0) - 0.17 * y).cos()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn torchvision_parameter_names() {
    let (vgg, _) = extractor();
    let idx: Vec<String> = vgg.conv_layers().into_iter().map(|(n, _, _)| n).collect();
    let want: Vec<String> = [0, 2, 5, 7, 10, 12, 14, 17, 19, 21]
        .iter()
        .map(|i| format!("vgg.features.{i}"))
        .collect();
    assert_eq!(idx, want);
}

#[test]
fn taps_match_torchvision() {
    let (vgg, p) = extractor();
    let mut t = Eager::with(&p);
    let x = t.constant(image(26, 22, 0.0));
    let taps = vgg.features(&mut t, &x, 4).unwrap();
    for (k, (tap, (shape, sum, sq))) in taps.iter().zip(TAPS).enumerate() {
        assert_eq!(tap.shape(), shape, "tap {k}");
        let s: f64 = tap.data().iter().sum();
        let q: f64 = tap.data().iter().map(|v| v * v).sum();
        assert!(rel(s, sum) < 1e-9, "tap {k} sum {s} vs {sum}");
        assert!(rel(q, sq) < 1e-9, "tap {k} sumsq {q} vs {sq}");
    }
}

#[test]
fn perceptual_terms_match_torch() {
    let (vgg, p) = extractor();
    let mut t = Eager::with(&p);
    let a = t.constant(image(26, 22, 0.0));
    let b = t.constant(image(26, 22, 0.9));
    let terms = perceptual_terms(&mut t, &vgg, 4, &a, &b).unwrap();
    for (k, (v, want)) in terms.iter().zip(PERCEPTUAL).enumerate() {
        let got = v.data()[0];
        assert!(rel(got, want) < 1e-8, "layer {k}: {got} vs {want}");
    }
}
