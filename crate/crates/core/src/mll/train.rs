//! Mini-batch training with seeded shuffling.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::{Encoded, SrModel};
use crate::clustering::Sample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 80,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        let a = &self.adam;
        // zero is allowed so a run can be checked against its initialization
        if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be ≥ 0, got {}", a.learning_rate)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1) and epsilon be positive".into()));
        }
        Ok(())
    }
}

/// Mean per-sample loss after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the final epoch.
    pub model: SrModel,
    /// Parameters at the epoch with the lowest validation loss.
    pub best: SrModel,
    pub best_epoch: usize,
    pub initial_train: f64,
    pub initial_val: f64,
    pub history: Vec<EpochLoss>,
}

fn mean_loss(model: &SrModel, data: &Encoded) -> Result<f64> {
    Ok(model.net.loss(data.x.view(), data.y.view(), data.w2.view())? / data.len() as f64)
}

fn check_finite(loss: f64, context: impl FnOnce() -> String) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "loss is {loss} {}; lower the learning rate or check normalization",
            context()
        )))
    }
}

pub fn train(model: SrModel, train_set: &[Sample], val_set: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let tr = model.encode_samples(train_set)?;
    let va = model.encode_samples(val_set)?;
    train_encoded(model, &tr, &va, config)
}

/// Same as [`train`] on samples that were already encoded for `model`.
pub fn train_encoded(mut model: SrModel, tr: &Encoded, va: &Encoded, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if tr.is_empty() || va.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let initial_train = mean_loss(&model, tr)?;
    let initial_val = mean_loss(&model, va)?;
    check_finite(initial_train, || "before training".into())?;
    log::info!(
        "training {} parameters on {} samples, initial loss {initial_train:.6} / {initial_val:.6}",
        model.net.param_count(),
        tr.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(model.net.param_count());
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = tr.x.select(Axis(0), batch);
            let y = tr.y.select(Axis(0), batch);
            let w2 = tr.w2.select(Axis(0), batch);
            let (loss, grad) = model.net.loss_and_gradient(x.view(), y.view(), w2.view())?;
            check_finite(loss, || format!("at epoch {epoch}, batch {b}"))?;
            adam_step(&mut model.net.params, &grad, &mut state, &config.adam);
        }
        model.epoch += 1;
        let train = mean_loss(&model, tr)?;
        let val = mean_loss(&model, va)?;
        check_finite(train, || format!("after epoch {epoch}"))?;
        log::debug!("epoch {epoch}: train {train:.6} val {val:.6}");
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best = model.clone();
        }
        history.push(EpochLoss { epoch, train, val });
    }
    log::info!("finished at epoch {}, best validation epoch {best_epoch}", model.epoch);
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        initial_train,
        initial_val,
        history,
    })
}
