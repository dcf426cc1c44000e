//! Teacher-forced training with Adagrad, and the finite-difference check.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{Masks, Net};
use super::{S2SConfig, S2SError, S2SModel, Vocab};
use crate::seed::{rng_for, rng_for_item};
use crate::sentence::{GapLabel, LabeledSequence};

/// Sequences per gradient work unit. Fixed so the reduction order, and hence
/// the result, does not depend on the thread count.
const CHUNK: usize = 8;
const ADAGRAD_INIT: f32 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-token loss over the epoch, with dropout.
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    /// Rate used during this epoch.
    pub learning_rate: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept (1-based; 0 if none ran).
    pub best_epoch: usize,
    pub train_sequences: usize,
    pub valid_sequences: usize,
    /// Training sequences cut to `max_input_length`.
    pub truncated: usize,
}

/// Holds out `config.validation_fraction` of `data` (a seeded choice) and
/// trains on the rest.
pub fn train_s2s(data: &[LabeledSequence], config: &S2SConfig) -> Result<S2SModel, S2SError> {
    config.validate()?;
    let (train, valid) = split_validation(data, config)?;
    train_s2s_with_validation(&train, &valid, config)
}

/// The `(train, validation)` split [`train_s2s`] uses. Both keep the input
/// order.
pub fn split_validation(
    data: &[LabeledSequence],
    config: &S2SConfig,
) -> Result<(Vec<LabeledSequence>, Vec<LabeledSequence>), S2SError> {
    if data.is_empty() {
        return Err(S2SError::NoData);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_for(config.seed, "s2s-split"));
    let n_valid = ((data.len() as f64) * config.validation_fraction).floor() as usize;
    let n_valid = n_valid.min(data.len() - 1);
    let mut valid_idx = order[..n_valid].to_vec();
    let mut train_idx = order[n_valid..].to_vec();
    valid_idx.sort_unstable();
    train_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect();
    Ok((pick(&train_idx), pick(&valid_idx)))
}

/// Builds the vocabulary from `train`, initializes a model and fits it.
pub fn train_s2s_with_validation(
    train: &[LabeledSequence],
    valid: &[LabeledSequence],
    config: &S2SConfig,
) -> Result<S2SModel, S2SError> {
    config.validate()?;
    if train.is_empty() {
        return Err(S2SError::NoData);
    }
    let vocab = Vocab::build(train.iter().map(|s| s.sentence()), config.vocab_size, config.lowercase);
    let model = S2SModel::new(config.clone(), vocab)?;
    model.fit(train, valid)
}

fn dropout_masks(config: &S2SConfig, n: usize, key: u64) -> Option<Masks<f32>> {
    let p = config.dropout_rate;
    if p == 0.0 {
        return None;
    }
    let keep = (1.0 / (1.0 - p)) as f32;
    let mut rng = rng_for_item(config.seed, "s2s-dropout", key);
    let mut draw = |cols: usize| Array2::from_shape_fn((n, cols), |_| if rng.gen::<f64>() < p { 0.0 } else { keep });
    let emb = draw(config.embedding_size);
    let out = draw(3 * config.hidden_size);
    Some(Masks { emb, out })
}

impl S2SModel {
    /// Trains this model's parameters in place, starting from their current
    /// values (so pre-loaded embeddings are kept as a starting point).
    ///
    /// Each epoch visits `train` in a seeded order. When `valid` is non-empty
    /// the learning rate is multiplied by `lr_decay` after every epoch that
    /// fails to lower the validation loss, and the best epoch's parameters
    /// are returned.
    pub fn fit(mut self, train: &[LabeledSequence], valid: &[LabeledSequence]) -> Result<S2SModel, S2SError> {
        let config = self.config.clone();
        let pairs: Vec<(Vec<u32>, Vec<usize>)> = train
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.training_pair(s))
            .collect();
        if pairs.is_empty() {
            return Err(S2SError::NoData);
        }
        let truncated = train.iter().filter(|s| s.len() > config.max_input_length).count();
        if truncated > 0 {
            log::warn!(
                "{truncated} training sequences truncated to {} tokens",
                config.max_input_length
            );
        }
        let mut accum = vec![ADAGRAD_INIT; self.params.len()];
        let mut lr = config.learning_rate;
        let mut best: Option<(f64, Vec<f32>, usize)> = None;
        let mut report = TrainingReport {
            epochs: Vec::new(),
            best_epoch: 0,
            train_sequences: pairs.len(),
            valid_sequences: valid.len(),
            truncated,
        };
        for epoch in 0..config.epochs {
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rng_for_item(config.seed, "s2s-shuffle", epoch as u64));
            let (mut loss_sum, mut token_sum) = (0.0f64, 0usize);
            for batch in order.chunks(config.batch_size) {
                let tokens: usize = batch.iter().map(|&i| pairs[i].0.len()).sum();
                let scale = 1.0 / tokens as f32;
                let (loss, grad) = self.batch_gradient(&pairs, batch, epoch, scale);
                loss_sum += loss;
                token_sum += tokens;
                self.adagrad_step(&grad, &mut accum, lr as f32);
            }
            if self.params.iter().any(|v| !v.is_finite()) {
                return Err(S2SError::InvalidConfig(format!(
                    "parameters diverged in epoch {}; lower the learning rate",
                    epoch + 1
                )));
            }
            let train_loss = loss_sum / token_sum as f64;
            let valid_loss = if valid.is_empty() {
                None
            } else {
                Some(self.mean_loss(valid)?)
            };
            let improved = match (valid_loss, &best) {
                (None, _) | (Some(_), None) => true,
                (Some(v), Some((b, _, _))) => v < *b,
            };
            log::info!(
                "s2s epoch {}: train loss {train_loss:.5}, valid loss {}, lr {lr}",
                epoch + 1,
                valid_loss.map_or("-".to_string(), |v| format!("{v:.5}"))
            );
            report.epochs.push(EpochStats {
                epoch: epoch + 1,
                train_loss,
                valid_loss,
                learning_rate: lr,
                improved,
            });
            if improved {
                best = Some((valid_loss.unwrap_or(f64::INFINITY), self.params.clone(), epoch + 1));
            } else {
                lr *= config.lr_decay;
            }
        }
        if let Some((_, params, epoch)) = best {
            self.params = params;
            report.best_epoch = epoch;
        }
        self.report = Some(report);
        Ok(self)
    }

    /// Summed loss and `scale`-weighted gradient of one batch.
    fn batch_gradient(
        &self,
        pairs: &[(Vec<u32>, Vec<usize>)],
        batch: &[usize],
        epoch: usize,
        scale: f32,
    ) -> (f64, Vec<f32>) {
        let n = self.params.len();
        let net = self.net();
        let partials: Vec<(f64, Vec<f32>)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0f32; n];
                let mut loss = 0.0f64;
                for &i in chunk {
                    let (ids, gold) = &pairs[i];
                    let key = ((epoch as u64) << 32) | i as u64;
                    let masks = dropout_masks(&self.config, ids.len(), key);
                    loss += f64::from(net.loss_and_grad(ids, gold, masks.as_ref(), &mut grad, scale));
                }
                (loss, grad)
            })
            .collect();
        let mut iter = partials.into_iter();
        let (mut loss, mut grad) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (loss, grad)
    }

    fn adagrad_step(&mut self, grad: &[f32], accum: &mut [f32], lr: f32) {
        let clip = self.config.clip_norm;
        let norm = grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>().sqrt();
        let factor = if clip > 0.0 && norm > clip {
            (clip / norm) as f32
        } else {
            1.0
        };
        for ((p, &g), a) in self.params.iter_mut().zip(grad).zip(accum.iter_mut()) {
            let g = g * factor;
            *a += g * g;
            *p -= lr * g / a.sqrt();
        }
    }
}

/// Token ids with label indices.
type Pairs = Vec<(Vec<u32>, Vec<usize>)>;

fn to_pairs(model: &S2SModel, batch: &[(Vec<u32>, Vec<GapLabel>)]) -> Result<Pairs, S2SError> {
    batch
        .iter()
        .map(|(ids, labels)| {
            model.check_ids(ids)?;
            if ids.len() != labels.len() {
                return Err(S2SError::LengthMismatch {
                    tokens: ids.len(),
                    labels: labels.len(),
                });
            }
            Ok((ids.clone(), labels.iter().map(|l| l.index()).collect()))
        })
        .collect()
}

pub(super) fn loss_and_gradient_f64(
    model: &S2SModel,
    params: &[f64],
    batch: &[(Vec<u32>, Vec<GapLabel>)],
) -> Result<(f64, Vec<f64>), S2SError> {
    let pairs = to_pairs(model, batch)?;
    let net = Net::new(&model.layout, params, model.config.position_window);
    let mut grad = vec![0f64; params.len()];
    let mut loss = 0.0;
    for (ids, gold) in &pairs {
        loss += net.loss_and_grad(ids, gold, None, &mut grad, 1.0);
    }
    Ok((loss, grad))
}

/// Largest relative error between the analytic gradient of the summed
/// teacher-forced loss and central differences (h = 1e-4), over every
/// parameter, in 64-bit arithmetic with dropout off.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &S2SModel, batch: &[(Vec<u32>, Vec<GapLabel>)]) -> Result<f64, S2SError> {
    const H: f64 = 1e-4;
    let mut p: Vec<f64> = model.params.iter().map(|&v| f64::from(v)).collect();
    let (_, analytic) = loss_and_gradient_f64(model, &p, batch)?;
    let pairs = to_pairs(model, batch)?;
    let window = model.config.position_window;
    let loss_at = |p: &[f64]| -> f64 {
        let net = Net::new(&model.layout, p, window);
        pairs.iter().map(|(ids, gold)| net.loss(ids, gold, None)).sum()
    };
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + H;
        let up = loss_at(&p);
        p[i] = orig - H;
        let down = loss_at(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}
