//! Supervised training of the V-Net: MAE loss, Adam, mini-batches and a
//! per-series decaying learning rate.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::run_rng;
use crate::dataset::{Dataset, DatasetEntry};
use crate::model::TrainedModel;
use crate::processing::{
    assemble_input, compute_qns_scale, fit_standardization, ns_normalize, slice_train, standardize, PipelineConfig,
    Signal, StandardizationStats,
};
use crate::vnet::{init_params, Tensor, VNetConfig, VNetParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub series: usize,
    pub epochs_per_series: usize,
    pub batch_size: usize,
    /// Per-epoch learning-rate factor within a series.
    pub decay: f64,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.005,
            series: 5,
            epochs_per_series: 120,
            batch_size: 1024,
            decay: 0.98,
            test_fraction: 0.04,
            val_fraction: 0.10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr0 > 0.0) || !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("lr0 must be positive and decay in (0, 1]");
        }
        if self.series == 0 || self.epochs_per_series == 0 || self.batch_size == 0 {
            return bad("series, epochs_per_series and batch_size must be >= 1");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0 && self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("test_fraction and val_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.series * self.epochs_per_series
    }
}

/// Mean absolute error and its subgradient (`sign(0) = 0`).
pub fn mae_loss(pred: &[f64], label: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != label.len() || pred.is_empty() {
        return Err(Error::Shape(format!("prediction has {} values, label {}", pred.len(), label.len())));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(label)
        .map(|(p, l)| {
            let d = p - l;
            loss += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss / n, grad))
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

/// Bias-corrected Adam update over the parameters in canonical order.
pub fn adam_step(params: &mut VNetParams<f64>, grads: &VNetParams<f64>, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let mut k = 0;
    for (p, g) in params.blocks_mut().zip(grads.blocks()) {
        for (x, &gi) in p.iter_mut().zip(g) {
            let m = &mut state.m[k];
            let v = &mut state.v[k];
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
            *x -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            k += 1;
        }
    }
}

/// `lr0 * decay^epoch`, restarted at every series.
pub fn lr_schedule(_series: usize, epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.decay.powi(epoch as i32)
}

/// Entry indices of each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of the entries, then `round(test_fraction n)` entries for
/// testing and `round(val_fraction * rest)` for validation.
pub fn split_entries(count: usize, cfg: &TrainConfig) -> Result<Split> {
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = run_rng(cfg.seed, 0x5EED_5011);
    idx.shuffle(&mut rng);
    let n_test = (cfg.test_fraction * count as f64).round() as usize;
    let n_val = (cfg.val_fraction * (count - n_test.min(count)) as f64).round() as usize;
    if n_test == 0 || n_val == 0 || n_test + n_val >= count {
        return Err(Error::Config(format!("{count} entries are too few for a train/val/test split")));
    }
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    Ok(Split { train, val, test })
}

/// One training window: standardized input and normalized label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Signal,
    pub label: Vec<f64>,
    pub entry: usize,
}

/// Standardized 4-channel input and NS-normalized heat flux of one entry at
/// full resolution.
pub fn preprocess_entry(entry: &DatasetEntry, stats: &StandardizationStats, pipeline: &PipelineConfig) -> Result<(Signal, Vec<f64>)> {
    let dx = 2.0 * std::f64::consts::PI / entry.len() as f64;
    let mut input = assemble_input(entry.eps, &entry.rho, &entry.u, &entry.temperature)?;
    standardize(&mut input, stats)?;
    let q_ns = compute_qns_scale(entry.eps, &entry.rho, &entry.temperature, dx);
    Ok((input, ns_normalize(&entry.q, q_ns, pipeline.norm_threshold)))
}

/// Training windows of the given entries.
pub fn make_samples(dataset: &Dataset, entries: &[usize], stats: &StandardizationStats, pipeline: &PipelineConfig) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(entries.len() * pipeline.training_windows_per_entry);
    for &e in entries {
        let (input, label) = preprocess_entry(&dataset.entries[e], stats, pipeline)?;
        for (w, l) in slice_train(&input, &label, pipeline)? {
            out.push(Sample { input: w, label: l, entry: e });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mae: Vec<f64>,
    pub val_mae: Vec<f64>,
    pub lr: Vec<f64>,
}

/// Everything needed to resume training exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: VNetParams<f64>,
    pub adam: AdamState,
    /// Number of completed epochs.
    pub epoch: usize,
    pub best: VNetParams<f64>,
    pub best_val: f64,
    pub best_epoch: usize,
    pub history: TrainHistory,
}

#[derive(Serialize, Deserialize)]
struct TrainStateFile {
    config: VNetConfig,
    params: Vec<f64>,
    best: Vec<f64>,
    adam: AdamState,
    epoch: usize,
    best_val: f64,
    best_epoch: usize,
    history: TrainHistory,
}

impl TrainState {
    pub fn new(params: VNetParams<f64>) -> Self {
        let n = params.param_count();
        TrainState {
            best: params.clone(),
            params,
            adam: AdamState::new(n),
            epoch: 0,
            best_val: f64::INFINITY,
            best_epoch: 0,
            history: TrainHistory::default(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let f = TrainStateFile {
            config: self.params.config,
            params: self.params.to_flat(),
            best: self.best.to_flat(),
            adam: self.adam.clone(),
            epoch: self.epoch,
            best_val: self.best_val,
            best_epoch: self.best_epoch,
            history: self.history.clone(),
        };
        serde_json::to_string(&f).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TrainStateFile = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        Ok(TrainState {
            params: VNetParams::from_flat(&f.config, &f.params)?,
            best: VNetParams::from_flat(&f.config, &f.best)?,
            adam: f.adam,
            epoch: f.epoch,
            best_val: f.best_val,
            best_epoch: f.best_epoch,
            history: f.history,
        })
    }
}

/// Windows per gradient chunk. Chunks are reduced in index order, which
/// keeps results independent of the thread count.
const CHUNK: usize = 8;

fn to_tensor(s: &Signal) -> Tensor<f64> {
    Tensor::from_vec(s.channels, s.len, s.data.clone())
}

/// Batch loss (mean over all values) and gradient.
pub fn batch_gradient(params: &VNetParams<f64>, batch: &[&Sample]) -> Result<(f64, VNetParams<f64>)> {
    let total = batch.len();
    let parts: Vec<Result<(f64, VNetParams<f64>)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = VNetParams::zeros(&params.config);
            let mut loss = 0.0;
            for s in chunk {
                let (y, cache) = params.forward(&to_tensor(&s.input))?;
                let (l, mut g) = mae_loss(&y, &s.label)?;
                g.iter_mut().for_each(|v| *v /= total as f64);
                loss += l;
                params.backward(&cache, &g, &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect();
    let mut grad = VNetParams::zeros(&params.config);
    let mut loss = 0.0;
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grad.add_assign(&g);
    }
    Ok((loss / total as f64, grad))
}

/// Mean MAE of the network over samples.
pub fn evaluate_mae(params: &VNetParams<f64>, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let losses: Vec<Result<f64>> = samples
        .par_iter()
        .map(|s| Ok(mae_loss(&params.predict(&to_tensor(&s.input))?, &s.label)?.0))
        .collect();
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / samples.len() as f64)
}

/// Runs epochs until `stop_epoch` (or the end of the schedule). Each epoch
/// shuffles the training windows with a seed derived from the epoch index,
/// so a saved state resumes bit for bit.
pub fn train_epochs(
    state: &mut TrainState,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    stop_epoch: Option<usize>,
    mut on_epoch: impl FnMut(usize, &TrainHistory),
) -> Result<()> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("no training windows".into()));
    }
    let end = stop_epoch.unwrap_or(usize::MAX).min(cfg.total_epochs());
    while state.epoch < end {
        let epoch = state.epoch;
        let lr = lr_schedule(epoch / cfg.epochs_per_series, epoch % cfg.epochs_per_series, cfg);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut run_rng(cfg.seed, 1 + epoch as u64));
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = batch_idx.iter().map(|&i| &train[i]).collect();
            let (loss, grad) = batch_gradient(&state.params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite training loss at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut state.params, &grad, &mut state.adam, lr);
        }
        let train_mae = loss_sum / train.len() as f64;
        let val_mae = if val.is_empty() { train_mae } else { evaluate_mae(&state.params, val)? };
        if !val_mae.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation loss at epoch {epoch}")));
        }
        if val_mae < state.best_val {
            state.best_val = val_mae;
            state.best_epoch = epoch;
            state.best = state.params.clone();
        }
        state.history.train_mae.push(train_mae);
        state.history.val_mae.push(val_mae);
        state.history.lr.push(lr);
        state.epoch += 1;
        on_epoch(epoch, &state.history);
    }
    Ok(())
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub split: Split,
}

/// Splits by entry, fits standardization on the training split, slices the
/// windows and runs the whole schedule. Returns the best-validation network.
pub fn train(
    dataset: &Dataset,
    vnet: &VNetConfig,
    pipeline: &PipelineConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, &TrainHistory),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    vnet.validate()?;
    pipeline.validate()?;
    if vnet.window != pipeline.window_size {
        return Err(Error::Config("network window and pipeline window differ".into()));
    }
    if dataset.nx != pipeline.training_resolution {
        return Err(Error::Config(format!(
            "dataset resolution {} differs from the training resolution {}",
            dataset.nx, pipeline.training_resolution
        )));
    }
    let split = split_entries(dataset.len(), cfg)?;
    let train_entries: Vec<&DatasetEntry> = split.train.iter().map(|&i| &dataset.entries[i]).collect();
    let stats = fit_standardization(&train_entries)?;
    let train_set = make_samples(dataset, &split.train, &stats, pipeline)?;
    let val_set = make_samples(dataset, &split.val, &stats, pipeline)?;
    let mut state = TrainState::new(init_params(vnet, cfg.seed)?);
    train_epochs(&mut state, &train_set, &val_set, cfg, None, on_epoch)?;
    Ok(TrainOutcome {
        model: TrainedModel { params: state.best, pipeline: *pipeline, stats, seed: cfg.seed, best_epoch: state.best_epoch },
        history: state.history,
        split,
    })
}
