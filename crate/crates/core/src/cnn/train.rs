use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{batch_hinge, check_margin, PatchTriple};
use super::network::FeatureNetwork;
use crate::error::{Error, Result};

/// Triples per gradient work unit. Fixed so the summation order, and hence
/// the trained weights, do not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f32,
    pub learning_rate: f32,
    pub momentum: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            learning_rate: 0.002,
            momentum: 0.9,
            epochs: 20,
            batch_size: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the whole set before the first update.
    pub initial_loss: f64,
    /// Running mean of the batch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss over the whole set after the last update.
    pub final_loss: f64,
}

/// Mean hinge loss of `net` over `data`.
pub fn mean_loss(net: &FeatureNetwork<f32>, data: &[PatchTriple], margin: f32) -> Result<f64> {
    check_margin(margin)?;
    if data.is_empty() {
        return Err(Error::Param("no training triples".into()));
    }
    let sums: Vec<f64> = data
        .par_chunks(CHUNK)
        .map(|chunk| {
            batch_hinge(net, chunk, margin, None)
                .iter()
                .map(|l| f64::from(l.loss))
                .sum()
        })
        .collect();
    Ok(sums.iter().sum::<f64>() / data.len() as f64)
}

pub fn train(
    net: &FeatureNetwork<f32>,
    data: &[PatchTriple],
    cfg: &TrainConfig,
) -> Result<(FeatureNetwork<f32>, TrainReport)> {
    train_with_progress(net, data, cfg, |_, _| {})
}

/// Mini-batch SGD with momentum on the hinge loss. `on_epoch(epoch, mean_loss)`
/// fires after every epoch.
pub fn train_with_progress(
    net: &FeatureNetwork<f32>,
    data: &[PatchTriple],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(FeatureNetwork<f32>, TrainReport)> {
    check_margin(cfg.margin)?;
    if data.is_empty() {
        return Err(Error::Param("no training triples".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Param("batch size must be positive".into()));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Param(format!(
            "bad learning rate {}",
            cfg.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::Param(format!(
            "momentum {} outside [0, 1)",
            cfg.momentum
        )));
    }

    let mut net = net.clone();
    let mut velocity = net.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let initial_loss = mean_loss(&net, data, cfg.margin)?;
    if !initial_loss.is_finite() {
        return Err(Error::Numeric(format!("initial loss is {initial_loss}")));
    }
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0f64;
        for (step, batch_idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<PatchTriple> = batch_idx.iter().map(|&i| data[i].clone()).collect();
            let parts: Vec<(f64, FeatureNetwork<f32>)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = net.zeros_like();
                    let losses = batch_hinge(&net, chunk, cfg.margin, Some(&mut g));
                    (losses.iter().map(|l| f64::from(l.loss)).sum(), g)
                })
                .collect();
            let mut grad = net.zeros_like();
            let mut batch_sum = 0.0;
            for (loss, g) in &parts {
                batch_sum += loss;
                grad.add_scaled(g, 1.0);
            }
            if !batch_sum.is_finite() || !grad.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient at epoch {} batch {} (batch loss {batch_sum})",
                    epoch + 1,
                    step + 1
                )));
            }
            epoch_sum += batch_sum;

            let scale = 1.0 / batch.len() as f32;
            // v = momentum * v - lr * g / n;  w += v
            let mut decayed = velocity.zeros_like();
            decayed.add_scaled(&velocity, cfg.momentum);
            decayed.add_scaled(&grad, -cfg.learning_rate * scale);
            velocity = decayed;
            net.add_scaled(&velocity, 1.0);
            if !net.is_finite() {
                return Err(Error::Numeric(format!(
                    "parameters overflowed at epoch {} batch {}",
                    epoch + 1,
                    step + 1
                )));
            }
        }
        let mean = epoch_sum / data.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch + 1, mean);
    }

    let final_loss = mean_loss(&net, data, cfg.margin)?;
    if !final_loss.is_finite() || !net.is_finite() {
        return Err(Error::Numeric(format!(
            "training diverged (final loss {final_loss})"
        )));
    }
    Ok((
        net,
        TrainReport {
            initial_loss,
            epoch_losses,
            final_loss,
        },
    ))
}
