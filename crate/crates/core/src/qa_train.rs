//! Fitting the quality network to mean opinion scores.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::optim::{Adam, AdamConfig};
use crate::params::ParamStore;
use crate::qa::{QaNetwork, SCORE_MAX, SCORE_MIN};
use crate::tape::{Eager, Graph, Tape};
use crate::tensor::Tensor;

/// Train / validation / test fractions.
pub const SPLIT: [f64; 3] = [0.7, 0.1, 0.2];

/// Record indices for each split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split records 70/10/20 so that all distortions of one reference land in
/// the same split. Groups are visited in shuffled order and fill train,
/// then validation, then test.
pub fn split_by_reference<R: Rng + ?Sized>(references: &[&str], rng: &mut R) -> Splits {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in references.iter().enumerate() {
        groups.entry(r).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.shuffle(rng);
    let n = references.len() as f64;
    let target_train = Float::round(SPLIT[0] * n) as usize;
    let target_val = Float::round(SPLIT[1] * n) as usize;
    let mut s = Splits::default();
    for g in groups {
        let dst = if s.train.len() < target_train {
            &mut s.train
        } else if s.val.len() < target_val {
            &mut s.val
        } else {
            &mut s.test
        };
        dst.extend(g);
    }
    s
}

pub fn check_mos(mos: f64, row: usize) -> Result<()> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&mos) {
        return Err(Error::InvalidArgument(format!(
            "row {row}: MOS {mos} outside [{SCORE_MIN}, {SCORE_MAX}]"
        )));
    }
    Ok(())
}

/// A distorted image, its pristine reference and the opinion score.
#[derive(Clone, Debug, PartialEq)]
pub struct QaSample {
    pub distorted: ImageTensor,
    pub reference: ImageTensor,
    pub mos: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Square training crop, shared by both images of a pair.
    pub crop: usize,
    pub optimizer: AdamConfig,
}

impl Default for QaTrainConfig {
    fn default() -> Self {
        QaTrainConfig {
            epochs: 20,
            batch_size: 8,
            crop: 64,
            optimizer: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaTrainReport {
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    pub val_mse: f64,
    pub test_mse: f64,
    /// Test MSE of always predicting the training-split mean.
    pub baseline_test_mse: f64,
}

/// Deterministic scores of full-size samples.
pub fn predict(net: &QaNetwork, params: &ParamStore<f32>, samples: &[QaSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let mut t = Eager::with(params);
            let (d, r) = (t.constant(s.distorted.tensor().clone()), t.constant(s.reference.tensor().clone()));
            let q = net.score(&mut t, &d, &r)?;
            Ok(q.data()[0] as f64)
        })
        .collect()
}

fn mse_against(pred: &[f64], samples: &[QaSample]) -> f64 {
    pred.iter()
        .zip(samples)
        .map(|(p, s)| (p - s.mos as f64) * (p - s.mos as f64))
        .sum::<f64>()
        / samples.len() as f64
}

fn random_crop<R: Rng + ?Sized>(s: &QaSample, size: usize, rng: &mut R) -> Result<(ImageTensor, ImageTensor)> {
    let (h, w) = (s.distorted.height(), s.distorted.width());
    if s.reference.height() != h || s.reference.width() != w {
        return Err(Error::ShapeMismatch {
            op: "qa sample",
            left: s.distorted.tensor().shape().to_vec(),
            right: s.reference.tensor().shape().to_vec(),
        });
    }
    let size = size.min(h).min(w);
    let (y, x) = (rng.random_range(0..=h - size), rng.random_range(0..=w - size));
    Ok((s.distorted.crop(y, x, size, size)?, s.reference.crop(y, x, size, size)?))
}

/// Minimise squared error to the MOS with dropout active, then report
/// validation and test error. `params` is updated in place.
pub fn train_qa<R: Rng + ?Sized>(
    net: &QaNetwork,
    params: &mut ParamStore<f32>,
    train: &[QaSample],
    val: &[QaSample],
    test: &[QaSample],
    cfg: &QaTrainConfig,
    rng: &mut R,
) -> Result<QaTrainReport> {
    for (name, split) in [("train", train), ("validation", val), ("test", test)] {
        if split.is_empty() {
            return Err(Error::InvalidArgument(format!("QA {name} split is empty")));
        }
    }
    for (i, s) in train.iter().chain(val).chain(test).enumerate() {
        check_mos(s.mos as f64, i)?;
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || cfg.crop == 0 {
        return Err(Error::Config(String::from("qa training epochs, batch_size and crop must be positive")));
    }
    let mut opt = Adam::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let crop = train
        .iter()
        .map(|s| s.distorted.height().min(s.distorted.width()))
        .min()
        .unwrap_or(cfg.crop)
        .min(cfg.crop);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut ds = Vec::with_capacity(chunk.len());
            let mut rs = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (d, r) = random_crop(&train[i], crop, rng)?;
                ds.push(d);
                rs.push(r);
            }
            let d = ImageTensor::stack(&ds.iter().collect::<Vec<_>>())?.into_tensor();
            let r = ImageTensor::stack(&rs.iter().collect::<Vec<_>>())?.into_tensor();
            let target = Tensor::from_vec(&[chunk.len(), 1, 1, 1], chunk.iter().map(|&i| train[i].mos).collect())?;
            let grads = {
                let mut g = Graph::new();
                g.bind(params, true);
                let (dv, rv, tv) = (g.constant(d), g.constant(r), g.constant(target));
                let q = net.forward(&mut g, &dv, &rv, Some(&mut *rng))?;
                let loss = g.mse(&q, &tv)?;
                let lv = g.value(&loss).data()[0] as f64;
                if !lv.is_finite() {
                    return Err(Error::NonFinite { term: "qa_mse", step: epoch_loss.len() as u64 });
                }
                total += lv * chunk.len() as f64;
                g.backward(loss)?.into_params()
            };
            opt.step(params, &grads)?;
        }
        epoch_loss.push(total / train.len() as f64);
    }
    let mean = train.iter().map(|s| s.mos as f64).sum::<f64>() / train.len() as f64;
    let baseline_test_mse = test
        .iter()
        .map(|s| (s.mos as f64 - mean) * (s.mos as f64 - mean))
        .sum::<f64>()
        / test.len() as f64;
    Ok(QaTrainReport {
        train_size: train.len(),
        val_size: val.len(),
        test_size: test.len(),
        epoch_loss,
        val_mse: mse_against(&predict(net, params, val)?, val),
        test_mse: mse_against(&predict(net, params, test)?, test),
        baseline_test_mse,
    })
}
