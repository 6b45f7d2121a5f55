//! Bicubic resampling checked against values frozen from Pillow's float
//! (`"F"` mode) `BICUBIC` resize, which uses the same a = -0.5 kernel with
//! support widened by the scale when shrinking.

use srtgan_core::imaging::{bicubic_resize, Ratio};
use srtgan_core::{ImageTensor, Tensor};

/// Pillow: 16x16 ramp `0.1 + 0.8 (3x + 5y) / 120` resized to 4x4.
const PIL_DOWN: [f64; 16] = [
    0.1848677, 0.2613789, 0.3447058, 0.4212169,
    0.3123863, 0.3888975, 0.4722244, 0.5487355,
    0.4512645, 0.5277756, 0.6111026, 0.6876137,
    0.5787831, 0.6552942, 0.7386211, 0.8151323
];

/// Pillow: `PIL_DOWN` resized back to 16x16.
const PIL_UP: [f64; 256] = [
    0.1620286, 0.1665964, 0.176182, 0.1918264, 0.2127008, 0.2362426, 0.2572407, 0.2781523, 0.2993834, 0.320295, 0.3412932, 0.3648349, 0.3857093, 0.4013538, 0.4109393, 0.4155072,
    0.1696416, 0.1742095, 0.183795, 0.1994395, 0.2203138, 0.2438556, 0.2648538, 0.2857654, 0.3069965, 0.3279081, 0.3489062, 0.372448, 0.3933224, 0.4089668, 0.4185524, 0.4231202,
    0.1856175, 0.1901854, 0.1997709, 0.2154154, 0.2362898, 0.2598315, 0.2808297, 0.3017413, 0.3229724, 0.343884, 0.3648821, 0.3884239, 0.4092983, 0.4249427, 0.4345283, 0.4390961,
    0.2116916, 0.2162595, 0.225845, 0.2414895, 0.2623639, 0.2859056, 0.3069038, 0.3278154, 0.3490465, 0.3699581, 0.3909562, 0.414498, 0.4353724, 0.4510168, 0.4606024, 0.4651702,
    0.2464823, 0.2510501, 0.2606356, 0.2762801, 0.2971545, 0.3206963, 0.3416944, 0.362606, 0.3838371, 0.4047487, 0.4257469, 0.4492886, 0.470163, 0.4858074, 0.495393, 0.4999608,
    0.2857186, 0.2902864, 0.299872, 0.3155164, 0.3363908, 0.3599326, 0.3809307, 0.4018423, 0.4230734, 0.443985, 0.4649832, 0.4885249, 0.5093993, 0.5250437, 0.5346293, 0.5391971,
    0.3207155, 0.3252833, 0.3348689, 0.3505133, 0.3713877, 0.3949295, 0.4159276, 0.4368393, 0.4580703, 0.4789819, 0.4999801, 0.5235218, 0.5443962, 0.5600407, 0.5696262, 0.574194,
    0.3555681, 0.360136, 0.3697215, 0.385366, 0.4062404, 0.4297822, 0.4507803, 0.4716919, 0.492923, 0.5138346, 0.5348327, 0.5583745, 0.5792488, 0.5948933, 0.6044788, 0.6090466,
    0.3909533, 0.3955211, 0.4051067, 0.4207511, 0.4416255, 0.4651673, 0.4861654, 0.507077, 0.5283082, 0.5492197, 0.5702179, 0.5937597, 0.614634, 0.6302785, 0.639864, 0.6444318,
    0.425806, 0.4303738, 0.4399593, 0.4556038, 0.4764782, 0.50002, 0.5210181, 0.5419297, 0.5631608, 0.5840724, 0.6050705, 0.6286123, 0.6494867, 0.6651311, 0.6747167, 0.6792845,
    0.4608029, 0.4653707, 0.4749562, 0.4906007, 0.5114751, 0.5350169, 0.556015, 0.5769266, 0.5981577, 0.6190693, 0.6400675, 0.6636093, 0.6844836, 0.700128, 0.7097136, 0.7142814,
    0.5000392, 0.504607, 0.5141926, 0.529837, 0.5507114, 0.5742532, 0.5952513, 0.616163, 0.637394, 0.6583056, 0.6793038, 0.7028456, 0.7237199, 0.7393643, 0.7489499, 0.7535177,
    0.5348299, 0.5393977, 0.5489832, 0.5646276, 0.585502, 0.6090438, 0.630042, 0.6509535, 0.6721846, 0.6930962, 0.7140943, 0.7376361, 0.7585105, 0.774155, 0.7837405, 0.7883083,
    0.560904, 0.5654718, 0.5750573, 0.5907018, 0.6115761, 0.6351179, 0.6561161, 0.6770276, 0.6982588, 0.7191703, 0.7401685, 0.7637103, 0.7845846, 0.8002291, 0.8098146, 0.8143824,
    0.5768799, 0.5814477, 0.5910332, 0.6066777, 0.627552, 0.6510938, 0.672092, 0.6930035, 0.7142347, 0.7351462, 0.7561443, 0.7796862, 0.8005605, 0.816205, 0.8257905, 0.8303583,
    0.5844929, 0.5890607, 0.5986463, 0.6142907, 0.6351651, 0.6587069, 0.679705, 0.7006166, 0.7218477, 0.7427593, 0.7637574, 0.7872992, 0.8081736, 0.823818, 0.8334036, 0.8379714
];

fn ramp() -> ImageTensor<f64> {
    let t = Tensor::from_fn(&[1, 3, 16, 16], |i| {
        let (y, x) = ((i % 256) / 16, i % 16);
        0.1 + 0.8 * (3 * x + 5 * y) as f64 / 120.0
    });
    ImageTensor::new(t).unwrap()
}

fn max_diff(img: &ImageTensor<f64>, want: &[f64]) -> f64 {
    let plane = want.len();
    (0..3)
        .flat_map(|c| {
            let d = &img.tensor().data()[c * plane..(c + 1) * plane];
            d.iter().zip(want).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn downsample_matches_reference_resampler() {
    let down = bicubic_resize(&ramp(), Ratio::new(1, 4)).unwrap();
    assert_eq!(down.tensor().shape(), &[1, 3, 4, 4]);
    let d = max_diff(&down, &PIL_DOWN);
    assert!(d < 1e-3, "max abs diff {d}");
}

#[test]
fn down_then_up_matches_reference_resampler() {
    let down = bicubic_resize(&ramp(), Ratio::new(1, 4)).unwrap();
    let up = bicubic_resize(&down, Ratio::integer(4)).unwrap();
    assert_eq!(up.tensor().shape(), &[1, 3, 16, 16]);
    let d = max_diff(&up, &PIL_UP);
    assert!(d < 1e-3, "max abs diff {d}");
}
