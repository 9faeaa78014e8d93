//! Training: target normalization, MSE loss, Adam, the exponential learning
//! rate schedule, dataset splitting, and the epoch loop with validation
//! tracking, early stopping, and divergence handling.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{stable_hash, CloudBatch, ModelConfig, PointNet};
use crate::pointcloud::{sample_to_n, PointCloud};

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub lr0: f64,
    /// Multiplier applied over each decay period.
    pub decay_rate: f64,
    /// Epochs per decay period; the exponent is continuous in the epoch.
    pub decay_period_epochs: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Train/validation/test fractions; must sum to 1.
    pub split_fractions: (f64, f64, f64),
    pub seed: u64,
    /// Re-draw cloud padding every epoch (mild augmentation). Off keeps the
    /// prepared clouds fixed, which deterministic runs rely on.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.07,
            decay_rate: 0.1,
            decay_period_epochs: 50.0,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-6,
            batch_size: 32,
            max_epochs: 500,
            early_stop_patience: 50,
            split_fractions: (0.8, 0.1, 0.1),
            seed: 0,
            augment: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidInput("max_epochs must be >= 1".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidInput(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_rate > 0.0) {
            return Err(Error::InvalidInput("decay_rate must be positive".into()));
        }
        if !(self.decay_period_epochs > 0.0) {
            return Err(Error::InvalidInput("decay_period_epochs must be positive".into()));
        }
        let (a, b, c) = self.split_fractions;
        if !(a >= 0.0 && b >= 0.0 && c >= 0.0 && ((a + b + c) - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidInput(format!(
                "split fractions must be non-negative and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        Ok(())
    }
}

/// Map a target into [0, 1] by the train-split extremes. Values outside the
/// range map outside [0, 1] (no clamping) and are flagged in the log.
pub fn normalize_k(k: f64, k_min: f64, k_max: f64) -> Result<f64> {
    if !(k_max > k_min) {
        return Err(Error::InvalidInput(format!(
            "degenerate target range [{k_min}, {k_max}]"
        )));
    }
    let scaled = (k - k_min) / (k_max - k_min);
    if !(0.0..=1.0).contains(&scaled) {
        log::warn!("target {k} lies outside the normalization range [{k_min}, {k_max}]");
    }
    Ok(scaled)
}

/// Inverse of [`normalize_k`].
pub fn denormalize_k(k_scaled: f64, k_min: f64, k_max: f64) -> Result<f64> {
    if !(k_max > k_min) {
        return Err(Error::InvalidInput(format!(
            "degenerate target range [{k_min}, {k_max}]"
        )));
    }
    Ok(k_min + k_scaled * (k_max - k_min))
}

/// Mean squared error and its gradient 2 (pred - target) / B.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::InvalidInput(format!(
            "mse_loss needs equal nonzero lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let b = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        loss += d * d / b;
        grad.push(2.0 * d / b);
    }
    Ok((loss, grad))
}

/// First/second moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

/// Standard bias-corrected Adam update.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let b1t = 1.0 - cfg.beta1.powi(state.t as i32);
    let b2t = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps_hat);
    }
}

/// lr = lr0 * decay_rate^(epoch / decay_period), continuous in the epoch.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.decay_rate.powf(epoch as f64 / cfg.decay_period_epochs)
}

/// Disjoint covering index split plus the train-split target extremes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub k_min: f64,
    pub k_max: f64,
}

/// Deterministic shuffled split; `k_min`/`k_max` come from the TRAIN split
/// only.
pub fn split_dataset(
    targets: &[f64],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let n = targets.len();
    let (fa, fb, fc) = fractions;
    if !(((fa + fb + fc) - 1.0).abs() < 1e-9) {
        return Err(Error::InvalidInput("split fractions must sum to 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(b"split"));
    order.shuffle(&mut rng);
    let c1 = (fa * n as f64).round() as usize;
    let c2 = ((fa + fb) * n as f64).round() as usize;
    let (train, rest) = order.split_at(c1.min(n));
    let (val, test) = rest.split_at((c2.min(n)) - c1.min(n));
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput(format!(
            "every split must be non-empty, got sizes ({}, {}, {})",
            train.len(),
            val.len(),
            test.len()
        )));
    }
    let mut k_min = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    for &i in train {
        k_min = k_min.min(targets[i]);
        k_max = k_max.max(targets[i]);
    }
    if !(k_max > k_min) {
        return Err(Error::InvalidInput(
            "train split has zero target variance; cannot normalize".into(),
        ));
    }
    Ok(DatasetSplit {
        train: train.to_vec(),
        val: val.to_vec(),
        test: test.to_vec(),
        k_min,
        k_max,
    })
}

/// Raw boundary clouds (already coordinate-normalized) with their physical
/// targets.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub clouds: Vec<PointCloud>,
    pub k: Vec<f64>,
}

/// One row of the training history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    Completed,
    EarlyStopped,
    Diverged,
}

/// Trained model plus the normalization constants it was trained with.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: PointNet,
    pub k_min: f64,
    pub k_max: f64,
}

pub struct TrainOutcome {
    /// Best-validation model.
    pub best: Checkpoint,
    /// Model at the final epoch.
    pub last: Checkpoint,
    pub history: Vec<EpochStats>,
    pub status: TrainStatus,
    pub best_val_loss: f64,
}

fn prepare_cloud(
    cloud: &PointCloud,
    n_points: usize,
    seed: u64,
    sample_idx: usize,
    epoch: u64,
) -> Result<PointCloud> {
    let s = stable_hash(b"pad") ^ seed;
    sample_to_n(
        cloud,
        n_points,
        crate::mediagen::sample_stream_seed(s ^ (epoch << 32), sample_idx as u64),
    )
}

/// Mini-batch training loop: shuffled batches each epoch, Adam updates, per
/// epoch train/validation losses, best-validation checkpointing, early stop
/// after `early_stop_patience` epochs without improvement, and divergence
/// abort that keeps the last good checkpoint.
pub fn train_model(
    data: &TrainData,
    split: &DatasetSplit,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if data.clouds.len() != data.k.len() {
        return Err(Error::InvalidInput("clouds and targets differ in length".into()));
    }
    let n_points = model_cfg.n_points;
    let mut net = PointNet::new(model_cfg.clone(), cfg.seed)?;
    let mut adam = AdamState::new(net.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stable_hash(b"epochs"));

    let norm_targets: Vec<f64> = data
        .k
        .iter()
        .map(|&k| normalize_k(k, split.k_min, split.k_max))
        .collect::<Result<_>>()?;

    // Validation clouds are fixed across epochs.
    let val_clouds: Vec<PointCloud> = split
        .val
        .iter()
        .map(|&i| prepare_cloud(&data.clouds[i], n_points, cfg.seed, i, 0))
        .collect::<Result<_>>()?;
    let val_targets: Vec<f64> = split.val.iter().map(|&i| norm_targets[i]).collect();

    // Without augmentation the training clouds are prepared once.
    let fixed_train: Option<Vec<PointCloud>> = if cfg.augment {
        None
    } else {
        Some(
            split
                .train
                .iter()
                .map(|&i| prepare_cloud(&data.clouds[i], n_points, cfg.seed, i, 0))
                .collect::<Result<_>>()?,
        )
    };

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best: Option<Checkpoint> = None;
    let mut stale_epochs = 0usize;
    let mut status = TrainStatus::Completed;

    for epoch in 0..cfg.max_epochs {
        let lr = lr_schedule(epoch, cfg);
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        order.shuffle(&mut rng);

        let epoch_clouds: Vec<PointCloud> = match &fixed_train {
            Some(fixed) => fixed.clone(),
            None => split
                .train
                .iter()
                .map(|&i| prepare_cloud(&data.clouds[i], n_points, cfg.seed, i, epoch as u64 + 1))
                .collect::<Result<_>>()?,
        };

        let mut train_loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&PointCloud> = chunk.iter().map(|&j| &epoch_clouds[j]).collect();
            let targets: Vec<f64> = chunk.iter().map(|&j| norm_targets[split.train[j]]).collect();
            let batch = CloudBatch::from_clouds(&refs, n_points)?;
            let dropout_seed =
                crate::mediagen::sample_stream_seed(cfg.seed ^ stable_hash(b"dropout"), adam.t);
            let cache = net.forward_train(&batch, dropout_seed)?;
            let preds: Vec<f64> = (0..chunk.len()).map(|i| cache.y[[i, 0]]).collect();
            let (loss, grad) = mse_loss(&preds, &targets)?;
            let loss = loss + net.ortho_penalty(&cache);
            let mut upstream = Array2::zeros((chunk.len(), 1));
            for (i, g) in grad.iter().enumerate() {
                upstream[[i, 0]] = *g;
            }
            let grads = net.backward(&cache, &upstream);
            net.commit_bn(&cache);
            adam_step(&mut net.store.data, &grads.data, &mut adam, lr, cfg);
            train_loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = train_loss_sum / seen.max(1) as f64;

        let val_loss = {
            let preds = predict_scaled(&net, &val_clouds)?;
            mse_loss(&preds, &val_targets)?.0
        };

        history.push(EpochStats {
            epoch,
            lr,
            train_loss,
            val_loss,
        });

        if !train_loss.is_finite() || !val_loss.is_finite() {
            log::warn!("training diverged at epoch {epoch}; keeping last good checkpoint");
            status = TrainStatus::Diverged;
            break;
        }

        if val_loss < best_val {
            best_val = val_loss;
            best = Some(Checkpoint {
                net: net.clone(),
                k_min: split.k_min,
                k_max: split.k_max,
            });
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.early_stop_patience {
                status = TrainStatus::EarlyStopped;
                break;
            }
        }
    }

    let last = Checkpoint {
        net,
        k_min: split.k_min,
        k_max: split.k_max,
    };
    let best = best.unwrap_or_else(|| last.clone());
    Ok(TrainOutcome {
        best,
        last,
        history,
        status,
        best_val_loss: best_val,
    })
}

/// Inference-mode scaled predictions over any number of clouds, chunked so
/// batches stay small.
pub fn predict_scaled(net: &PointNet, clouds: &[PointCloud]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(clouds.len());
    for chunk in clouds.chunks(256) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        let batch = CloudBatch::from_clouds(&refs, net.cfg.n_points)?;
        let y = net.forward_infer(&batch)?;
        out.extend((0..chunk.len()).map(|i| y[[i, 0]]));
    }
    Ok(out)
}
