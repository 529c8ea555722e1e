//! Seeded mini-batch training with a best-validation snapshot.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{accumulate_mse, AdamState, Architecture, NeuralModel, Regularization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Per-epoch multiplicative learning-rate factor.
    pub decay: f64,
    /// Share of samples held out for model selection; 0 keeps the final
    /// epoch's parameters.
    pub val_fraction: f64,
    /// Seeds the split and the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 64, lr0: 1e-3, decay: 0.97, val_fraction: 0.2, seed: 42 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams("epochs and batch_size must be positive".into()));
        }
        if !(self.lr0 > 0.0) || !(self.decay > 0.0) {
            return Err(Error::InvalidParams("lr0 and decay must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParams(format!("val_fraction {} must be in [0, 1)", self.val_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Mean objective over the epoch's batches, on standardized targets.
    pub train_loss: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochLog {
    pub records: Vec<EpochRecord>,
}

impl EpochLog {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = write!(s, "epoch={} lr={:.10e} train_loss={:.17e}", r.epoch, r.lr, r.train_loss);
            if let Some(v) = r.val_rmse {
                let _ = write!(s, " val_rmse={v:.17e}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: NeuralModel,
    pub log: EpochLog,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFiniteActivation { .. } | Error::NonFiniteLoss => Error::DivergedTraining { epoch },
        other => other,
    }
}

/// Train a network on the rows of `x` (preprocessed spectra) against `y`.
pub fn train(arch: Architecture, x: &DMatrix<f64>, y: &[f64], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (n as f64 * cfg.val_fraction).round() as usize;
    if n - n_val == 0 {
        return Err(Error::TooFewSamples { needed: n_val + 1, have: n });
    }
    let val_rows = order[..n_val].to_vec();
    let mut train_rows = order[n_val..].to_vec();

    let (net, reg, micro) = match &arch {
        Architecture::Mlp(c) => (c.build(x.ncols())?, c.regularization(), cfg.batch_size),
        Architecture::Cnn(c) => (c.build()?, Regularization::none(), 1),
    };
    let (x_mean, x_scale) = match &arch {
        Architecture::Mlp(_) => input_scaling(x, &train_rows),
        Architecture::Cnn(_) => (Vec::new(), 1.0),
    };
    let ty: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
    let y_mean = ty.iter().sum::<f64>() / ty.len() as f64;
    let y_var = ty.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / ty.len() as f64;
    let y_std = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };

    let mut model = NeuralModel { arch, net, n_points: x.ncols(), x_mean, x_scale, y_mean, y_std };
    let mut adam = AdamState::new(&model.net.params(), cfg.lr0, cfg.decay);
    let mut log = EpochLog::default();
    let mut best: Option<(f64, usize, super::Network)> = None;

    for epoch in 0..cfg.epochs {
        let label = epoch + 1;
        train_rows.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for batch in train_rows.chunks(cfg.batch_size) {
            let mut grads = model.net.zero_grads();
            let mut sse = 0.0;
            for part in batch.chunks(micro) {
                let input = model.prepare(x, part)?;
                let target: Vec<f64> = part.iter().map(|&r| (y[r] - y_mean) / y_std).collect();
                sse += accumulate_mse(&model.net, &input, &target, batch.len(), &mut grads).map_err(diverged(label))?;
            }
            let loss = sse / batch.len() as f64 + reg.apply(&model.net, &mut grads);
            if !loss.is_finite() {
                return Err(Error::DivergedTraining { epoch: label });
            }
            adam.step(&mut model.net.params_mut(), &grads, epoch);
            loss_sum += loss;
            n_batches += 1;
        }
        let val_rmse = if val_rows.is_empty() {
            None
        } else {
            let pred = model.predict_rows(x, &val_rows).map_err(diverged(label))?;
            let mse = pred.iter().zip(&val_rows).map(|(p, &r)| (p - y[r]).powi(2)).sum::<f64>() / val_rows.len() as f64;
            if !mse.is_finite() {
                return Err(Error::DivergedTraining { epoch: label });
            }
            Some(mse.sqrt())
        };
        let record = EpochRecord { epoch: label, lr: adam.lr(epoch), train_loss: loss_sum / n_batches as f64, val_rmse };
        log::debug!("{}", EpochLog { records: vec![record.clone()] }.to_text().trim_end());
        log.records.push(record);
        if let Some(v) = val_rmse {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, label, model.net.clone()));
            }
        }
    }

    let best_epoch = match best {
        Some((_, e, net)) => {
            model.net = net;
            e
        }
        None => cfg.epochs,
    };
    Ok(Trained { model, log, best_epoch, train_rows, val_rows })
}

/// Per-feature means and a single RMS scale over the training rows.
fn input_scaling(x: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, f64) {
    let d = x.ncols();
    let mut mean = vec![0.0; d];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r).iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    let mut ss = 0.0;
    for &r in rows {
        for (m, v) in mean.iter().zip(x.row(r).iter()) {
            ss += (v - m).powi(2);
        }
    }
    let rms = (ss / (rows.len() * d) as f64).sqrt();
    (mean, if rms > 0.0 { rms } else { 1.0 })
}
