//! Toy full-reference corpus: blur and noise at graded strengths, with an
//! opinion score that falls linearly with strength.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use srtgan_core::imaging::gaussian_blur;
use srtgan_core::optim::AdamConfig;
use srtgan_core::qa_train::{predict, split_by_reference, train_qa, QaSample, QaTrainConfig};
use srtgan_core::synthetic::{quantize8, scene};
use srtgan_core::{ImageTensor, QaConfig, QaNetwork};

const SIDE: usize = 24;
const LEVELS: usize = 5;

fn noisy(img: &ImageTensor, sigma: f32, rng: &mut ChaCha8Rng) -> ImageTensor {
    let normal = Normal::new(0.0f32, sigma).unwrap();
    let noise: Vec<f32> = (0..img.tensor().len()).map(|_| normal.sample(rng)).collect();
    let mut t = img.tensor().clone();
    t.data_mut().iter_mut().zip(noise).for_each(|(v, n)| *v += n);
    ImageTensor::from_clamped(t).unwrap()
}

fn distort(reference: &ImageTensor, level: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
    if level == 0 {
        return reference.clone();
    }
    let blurred = gaussian_blur(reference, 0.6 * level as f64).unwrap();
    noisy(&blurred, 0.01 * level as f32, rng)
}

/// 40 references × 5 strengths = 200 records.
fn corpus(seed: u64) -> (Vec<QaSample>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut refs = Vec::new();
    for r in 0..40 {
        let reference = quantize8(&scene(&mut rng, SIDE, SIDE));
        for level in 0..LEVELS {
            samples.push(QaSample {
                distorted: distort(&reference, level, &mut rng),
                reference: reference.clone(),
                mos: 5.0 - 4.0 * level as f32 / (LEVELS - 1) as f32,
            });
            refs.push(format!("ref{r:02}"));
        }
    }
    (samples, refs)
}

fn net() -> QaNetwork {
    QaNetwork::new(QaConfig {
        block_channels: vec![8, 12, 16],
        fc_hidden: 16,
        dropout_rate: 0.1,
        ..Default::default()
    })
    .unwrap()
}

fn cfg(epochs: usize) -> QaTrainConfig {
    QaTrainConfig {
        epochs,
        batch_size: 8,
        crop: SIDE,
        optimizer: AdamConfig {
            lr: 2e-3,
            ..Default::default()
        },
    }
}

fn select(samples: &[QaSample], idx: &[usize]) -> Vec<QaSample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

#[test]
fn trained_scorer_beats_mean_predictor_and_ranks_blur_below_clean() {
    let (samples, refs) = corpus(7);
    let names: Vec<&str> = refs.iter().map(|s| s.as_str()).collect();
    let split = split_by_reference(&names, &mut ChaCha8Rng::seed_from_u64(8));
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (140, 20, 40));
    let (train, val, test) = (
        select(&samples, &split.train),
        select(&samples, &split.val),
        select(&samples, &split.test),
    );
    let qa = net();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut params = qa.init::<f32, _>(&mut rng);
    let report = train_qa(&qa, &mut params, &train, &val, &test, &cfg(40), &mut rng).unwrap();
    assert!(
        report.test_mse < report.baseline_test_mse,
        "test {} vs mean predictor {}",
        report.test_mse,
        report.baseline_test_mse
    );

    let clean: Vec<QaSample> = test.iter().filter(|s| s.mos == 5.0).cloned().collect();
    let heavy: Vec<QaSample> = test.iter().filter(|s| s.mos == 1.0).cloned().collect();
    let (ps, ph) = (predict(&qa, &params, &clean).unwrap(), predict(&qa, &params, &heavy).unwrap());
    for (s, h) in ps.iter().zip(&ph) {
        assert!(h < s, "heavy blur {h} scored above self-pair {s}");
    }
}

#[test]
fn same_seed_gives_identical_first_epoch_loss() {
    let (samples, _) = corpus(10);
    let (train, rest) = samples.split_at(20);
    let run = || {
        let qa = net();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = qa.init::<f32, _>(&mut rng);
        train_qa(&qa, &mut params, train, &rest[..5], &rest[5..10], &cfg(1), &mut rng).unwrap()
    };
    assert_eq!(run().epoch_loss, run().epoch_loss);
}

#[test]
fn empty_split_is_rejected() {
    let (samples, _) = corpus(12);
    let qa = net();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut params = qa.init::<f32, _>(&mut rng);
    let err = train_qa(&qa, &mut params, &samples[..4], &[], &samples[4..6], &cfg(1), &mut rng).unwrap_err();
    assert!(err.to_string().contains("validation"));
}
