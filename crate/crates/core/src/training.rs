//! The mini-batch training loop shared by the tagger and the sense
//! classifier: seeded shuffling, Adam with global-norm clipping, per-epoch
//! dev loss, and early stopping that restores the best-epoch weights.

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Adam, ParamVec};
use crate::par::Exec;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Optimization settings. Defaults follow the common recipe: Adam(0.9,
/// 0.999, 1e-8), batch 32, patience 5, and a task-dependent clip norm (1.0
/// for tagging, 0.5 for sense classification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop after this many consecutive epochs without dev-loss improvement.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl TrainConfig {
    pub fn tagger_defaults() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_grad_norm: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            max_epochs: 100,
            seed: 0,
            exec: Exec::Parallel,
        }
    }

    pub fn sense_defaults() -> TrainConfig {
        TrainConfig {
            max_grad_norm: 0.5,
            ..TrainConfig::tagger_defaults()
        }
    }

    /// The much smaller rate used when fine-tuning on top of frozen
    /// contextual vectors.
    pub const CONTEXTUAL_LEARNING_RATE: f64 = 5e-5;

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive (got {})",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One epoch's record. `wall_time_s` is the only field allowed to differ
/// between reruns of the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub grad_norm: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights the returned model carries.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Dev-loss early stopping with best-value tracking.
///
/// The first observation always counts as an improvement; afterwards only a
/// strictly smaller loss resets the counter.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Record one epoch's dev loss; returns true when it improved the best.
    pub fn observe(&mut self, epoch: usize, dev_loss: f64) -> bool {
        if dev_loss < self.best {
            self.best = dev_loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// What a model must expose for [`run_training`] to drive it.
pub(crate) trait Trainable: Sized {
    type Example: Clone + Sync;

    /// Mean loss and summed-then-averaged gradients over one batch.
    fn batch_loss_grads(&self, batch: &[Self::Example], exec: Exec) -> Result<(f64, ParamVec)>;

    /// Mean loss only (no gradients) — used for dev evaluation.
    fn batch_loss(&self, batch: &[Self::Example], exec: Exec) -> Result<f64>;

    fn params(&self) -> &ParamVec;
    fn params_mut(&mut self) -> &mut ParamVec;
}

/// The epoch loop. Returns the model carrying its best-dev-loss weights.
pub(crate) fn run_training<M: Trainable>(
    mut model: M,
    train: &[M::Example],
    dev: &[M::Example],
    tc: &TrainConfig,
) -> Result<(M, TrainLog)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    tc.validate()?;
    if train.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if dev.is_empty() {
        return Err(Error::validation("dev set is empty"));
    }

    let n_params = model.params().layout().total_len();
    let mut adam = Adam::new(tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon, n_params);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(tc.seed);
    let mut stopper = EarlyStopper::new(tc.patience);
    let mut best_params = model.params().clone();
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=tc.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut last_norm = 0.0;
        for (batch_index, chunk) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<M::Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, mut grads) = model.batch_loss_grads(&batch, tc.exec)?;
            let norm = clip_global_norm(grads.data_mut(), tc.max_grad_norm);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {batch_index} \
                     (loss {loss}, gradient norm {norm})"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            last_norm = norm;
            adam.step(model.params_mut().data_mut(), grads.data());
        }
        let train_loss = loss_sum / train.len() as f64;
        let dev_loss = model.batch_loss(dev, tc.exec)?;
        if !dev_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite dev loss at epoch {epoch}"
            )));
        }
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_loss,
            grad_norm: last_norm,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        if stopper.observe(epoch, dev_loss) {
            best_params = model.params().clone();
        }
        if stopper.should_stop() {
            log.stopped_early = true;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();
    *model.params_mut() = best_params;
    Ok((model, log))
}

/// Write a training log as JSON lines, one epoch per line.
pub fn save_train_log(path: impl AsRef<std::path::Path>, log: &TrainLog) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for e in &log.epochs {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    serde_json::to_writer(
        &mut w,
        &serde_json::json!({
            "best_epoch": log.best_epoch,
            "stopped_early": log.stopped_early,
        }),
    )?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopper_counts_consecutive_non_improvements() {
        let mut s = EarlyStopper::new(2);
        assert!(s.observe(1, 1.0)); // first value is the best so far
        assert!(!s.should_stop());
        assert!(!s.observe(2, 1.2));
        assert!(!s.should_stop());
        assert!(s.observe(3, 0.9)); // improvement resets the counter
        assert!(!s.observe(4, 0.95));
        assert!(!s.should_stop());
        assert!(!s.observe(5, 0.9)); // equal is not an improvement
        assert!(s.should_stop());
        assert_eq!(s.best_epoch(), 3);
        assert!((s.best_loss() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn patience_one_stops_after_first_worsening() {
        let mut s = EarlyStopper::new(1);
        s.observe(1, 1.0);
        assert!(!s.should_stop());
        s.observe(2, 1.1);
        assert!(s.should_stop());
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn config_validation() {
        let mut tc = TrainConfig::tagger_defaults();
        tc.validate().unwrap();
        tc.learning_rate = 0.0;
        assert!(tc.validate().is_err());
        let mut tc = TrainConfig::sense_defaults();
        assert_eq!(tc.max_grad_norm, 0.5);
        tc.batch_size = 0;
        assert!(tc.validate().is_err());
    }
}
