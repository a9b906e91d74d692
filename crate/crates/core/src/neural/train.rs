use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::lstm::{bce_loss, lstm_backward, lstm_forward, LstmParams, LstmShape};
use super::ParamTensors;
use crate::embedding::MAX_SEQ_LEN;
use crate::par::Execution;
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmTrainConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    pub min_freq: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for LstmTrainConfig {
    fn default() -> Self {
        LstmTrainConfig {
            embed_dim: 64,
            hidden_dim: 64,
            max_len: MAX_SEQ_LEN,
            min_freq: 2,
            batch_size: 32,
            epochs: 30,
            lr: 1e-3,
            clip_norm: 5.0,
            seed: crate::corpus::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// Rescale in place so the global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm<P: ParamTensors>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

pub fn train_lstm(
    seqs: &[Vec<u32>],
    labels: &[Label],
    vocab_size: usize,
    config: &LstmTrainConfig,
    exec: Execution,
) -> Result<(LstmParams, TrainLog)> {
    train_lstm_with(seqs, labels, vocab_size, config, exec, |_| {})
}

/// Seeded mini-batch training. `on_epoch` sees each epoch record as soon as
/// it is complete.
pub fn train_lstm_with<F: FnMut(&EpochRecord)>(
    seqs: &[Vec<u32>],
    labels: &[Label],
    vocab_size: usize,
    config: &LstmTrainConfig,
    exec: Execution,
    mut on_epoch: F,
) -> Result<(LstmParams, TrainLog)> {
    if seqs.is_empty() || seqs.len() != labels.len() {
        return Err(Error::Invalid(
            "LSTM training needs one label per non-empty sequence set".into(),
        ));
    }
    if !labels.contains(&Label::Ham) || !labels.contains(&Label::Spam) {
        return Err(Error::SingleClass);
    }
    if config.batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    let shape = LstmShape {
        vocab_size,
        embed_dim: config.embed_dim,
        hidden_dim: config.hidden_dim,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::init(shape, &mut rng);
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let targets: Vec<f64> = labels.iter().map(|l| l.as_target()).collect();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Vec<u32>> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            let batch_targets: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (probs, cache) = lstm_forward(&params, &batch, exec)?;
            let loss = bce_loss(&probs, &batch_targets)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite loss".into(),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            let mut grads = lstm_backward(&params, &cache, &batch_targets, exec)?;
            clip_global_norm(&mut grads, config.clip_norm);
            adam_step(&mut params, &grads, &mut adam).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite parameters".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / seqs.len() as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.epochs.push(record);
    }
    Ok((params, log))
}
