//! NBM training: minimize mean squared reconstruction error with RAdam,
//! shuffled epochs, and validation-based early stopping; keep the best
//! validation checkpoint. Fine-tuning runs the same loop from pretrained
//! parameters.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::window::WindowSample;
use crate::nn::Adam;
use crate::rng::stream_rng;
use crate::scalar::{sc, Scalar};
use crate::stats::{percentile, StatsError};
use crate::tensor::{mae, mse, Tensor};

use super::autoencoder::{AeGrads, Autoencoder, ModelError};

#[derive(Debug, Error)]
pub enum NbmError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty validation set")]
    EmptyValidationSet,
    #[error("threshold needs at least 4 validation scores, got {0}")]
    TooFewScores(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("non-finite training loss at epoch {0}")]
    NonFinite(usize),
}

/// Published training regime: RAdam at lr 0.003, batches of 128, MSE loss,
/// scarcity-dependent early-stopping patience.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NbmTrainRegime {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Early-stopping patience in epochs (see [`patience_for`]).
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Fixed chunk count for deterministic parallel gradient reduction.
    pub grad_chunks: usize,
}

impl Default for NbmTrainRegime {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 128,
            patience: 25,
            max_epochs: 1000,
            seed: 0,
            grad_chunks: 4,
        }
    }
}

/// Early-stopping patience between the published anchors: 250 epochs at the
/// 2-week scale (2016 records) down to 25 at the full training-set size,
/// log-linearly interpolated in record count and clamped to [25, 250].
pub fn patience_for(n_records: usize, n_full_records: usize) -> usize {
    const P_SCARCE: f64 = 250.0;
    const P_FULL: f64 = 25.0;
    const N_SCARCE: f64 = 2016.0;
    let n_full = (n_full_records as f64).max(N_SCARCE + 1.0);
    let n = (n_records as f64).max(1.0);
    let frac = (n.ln() - N_SCARCE.ln()) / (n_full.ln() - N_SCARCE.ln());
    let p = (P_SCARCE.ln() + frac * (P_FULL.ln() - P_SCARCE.ln())).exp();
    (p.round() as usize).clamp(P_FULL as usize, P_SCARCE as usize)
}

pub struct TrainOutcome<S> {
    pub net: Autoencoder<S>,
    pub best_val_mse: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub final_train_mse: f64,
}

fn tensors<S: Scalar>(windows: &[WindowSample<S>]) -> Vec<&Tensor<S>> {
    windows.iter().map(|w| &w.values).collect()
}

/// Mean squared reconstruction error over a window set (deterministic
/// ordered reduction).
pub fn mean_mse<S: Scalar>(net: &Autoencoder<S>, windows: &[&Tensor<S>], chunks: usize) -> f64 {
    if windows.is_empty() {
        return 0.0;
    }
    let chunk_size = windows.len().div_ceil(chunks.max(1));
    let partial: Vec<f64> = windows
        .par_chunks(chunk_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|x| mse(x, &net.forward(x)).to_f64_c())
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum::<f64>() / windows.len() as f64
}

/// One gradient step on a batch; returns the batch training MSE.
fn batch_step<S: Scalar>(
    net: &mut Autoencoder<S>,
    batch: &[&Tensor<S>],
    opt: &mut Adam<S>,
    chunks: usize,
) -> f64 {
    let m = batch.len();
    let numel = (net.config.channels * net.config.window) as f64;
    let scale = sc::<S>(2.0 / (numel * m as f64));
    let chunk_size = m.div_ceil(chunks.max(1));
    let partial: Vec<(AeGrads<S>, f64)> = batch
        .par_chunks(chunk_size)
        .map(|chunk| {
            let mut grads = net.zero_grads();
            let mut loss = 0.0;
            for x in chunk {
                let (y, trace) = net.forward_trace(x);
                loss += mse(x, &y).to_f64_c();
                let mut gy = Tensor::zeros(x.ch(), x.len());
                for (g, (yv, xv)) in gy
                    .data_mut()
                    .iter_mut()
                    .zip(y.data().iter().zip(x.data()))
                {
                    *g = scale * (*yv - *xv);
                }
                net.backward(&trace, &gy, &mut grads);
            }
            (grads, loss)
        })
        .collect();
    let mut iter = partial.into_iter();
    let (mut total, mut loss_sum) = iter.next().expect("nonempty batch");
    for (g, l) in iter {
        total.add_assign(&g);
        loss_sum += l;
    }
    let flat = total.flat();
    opt.step(net.params_mut(), &flat);
    loss_sum / m as f64
}

/// Gradient training with early stopping; returns the parameters of the
/// epoch with the best validation reconstruction error (the untrained
/// starting point counts as the epoch-0 candidate).
pub fn train_autoencoder<S: Scalar>(
    mut net: Autoencoder<S>,
    train: &[WindowSample<S>],
    validation: &[WindowSample<S>],
    regime: &NbmTrainRegime,
) -> Result<TrainOutcome<S>, NbmError> {
    if train.is_empty() {
        return Err(NbmError::EmptyTrainingSet);
    }
    if validation.is_empty() {
        return Err(NbmError::EmptyValidationSet);
    }
    for w in train.iter().chain(validation) {
        net.check_input(&w.values)?;
    }
    let train_t = tensors(train);
    let val_t = tensors(validation);
    let mut opt = Adam::radam(regime.learning_rate);
    let mut shuffle_rng = stream_rng(regime.seed, "nbm-shuffle");

    let mut best_val = mean_mse(&net, &val_t, regime.grad_chunks);
    let mut best = net.clone();
    let mut best_epoch = 0usize;
    let mut last_train_mse = f64::NAN;
    let mut epochs_run = 0usize;

    let mut indices: Vec<usize> = (0..train_t.len()).collect();
    for epoch in 1..=regime.max_epochs {
        epochs_run = epoch;
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for batch_idx in indices.chunks(regime.batch_size.max(1)) {
            let batch: Vec<&Tensor<S>> = batch_idx.iter().map(|&i| train_t[i]).collect();
            epoch_loss += batch_step(&mut net, &batch, &mut opt, regime.grad_chunks);
            n_batches += 1;
        }
        last_train_mse = epoch_loss / n_batches as f64;
        if !last_train_mse.is_finite() {
            return Err(NbmError::NonFinite(epoch));
        }
        let val = mean_mse(&net, &val_t, regime.grad_chunks);
        if val < best_val {
            best_val = val;
            best = net.clone();
            best_epoch = epoch;
        }
        if epoch - best_epoch >= regime.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        net: best,
        best_val_mse: best_val,
        best_epoch,
        epochs_run,
        final_train_mse: last_train_mse,
    })
}

/// Anomaly score: mean absolute error between the reconstruction and the
/// original window.
pub fn score<S: Scalar>(net: &Autoencoder<S>, window: &Tensor<S>) -> Result<S, ModelError> {
    net.check_input(window)?;
    Ok(mae(window, &net.forward(window)))
}

/// Batched scoring; identical to per-window scoring, order preserved.
pub fn score_batch<S: Scalar>(net: &Autoencoder<S>, windows: &[&Tensor<S>], chunks: usize) -> Vec<f64> {
    let chunk_size = windows.len().div_ceil(chunks.max(1)).max(1);
    windows
        .par_chunks(chunk_size)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|x| mae(*x, &net.forward(x)).to_f64_c())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Far-out-outlier threshold over validation scores:
/// `T = q3 + 3 (q3 - q1)` with linearly interpolated quartiles.
pub fn compute_threshold(val_scores: &[f64]) -> Result<f64, NbmError> {
    if val_scores.len() < 4 {
        return Err(NbmError::TooFewScores(val_scores.len()));
    }
    let q1 = percentile(val_scores, 0.25)?;
    let q3 = percentile(val_scores, 0.75)?;
    Ok(q3 + 3.0 * (q3 - q1))
}

/// Binary anomaly decision: the score exceeding the threshold (inclusive)
/// is positive.
#[inline]
pub fn classify(score: f64, threshold: f64) -> bool {
    score >= threshold
}
