//! Mini-batch NLL training with Adam, scene-disjoint validation and early
//! stopping on validation NLL.

use std::collections::BTreeSet;
use std::io::Write;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::render_config;
use crate::datamodel::{Behavior, LabeledSample};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, FeatureScaling, Model, ModelKind, SocialBatch};
use crate::numerics::{Adam, AdamConfig, Graph, Tensor};

/// Targets per forward pass when only evaluating.
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// `vbin` or `vlstm`.
    pub model: String,
    pub gru_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of scenes held out for validation; 0 disables validation.
    pub validation_fraction: f64,
    /// Down-sample LK samples each epoch to the number of LC samples.
    pub balance_classes: bool,
    /// Cap on samples drawn per epoch; 0 uses all.
    pub samples_per_epoch: usize,
    /// Cap on validation samples, drawn once with the seed; 0 uses all.
    pub validation_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: "vbin".into(),
            gru_hidden: crate::model::GRU_HIDDEN,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            patience: 10,
            validation_fraction: 0.2,
            balance_classes: true,
            samples_per_epoch: 0,
            validation_samples: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<ModelKind> {
        let kind = ModelKind::parse(&self.model)?;
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 || self.gru_hidden == 0 {
            return Err(Error::Config(
                "epochs, batch_size, patience and gru_hidden must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation NLL (training NLL
    /// when there is no validation split).
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Splits sample indices into training and validation sets with disjoint
/// scenes. A single-scene dataset is split by event instead.
pub fn split_by_scene(samples: &[LabeledSample], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 || samples.is_empty() {
        return ((0..samples.len()).collect(), Vec::new());
    }
    let scenes: BTreeSet<u32> = samples.iter().map(|s| s.scene_id).collect();
    let key: Box<dyn Fn(&LabeledSample) -> u64> = if scenes.len() >= 2 {
        Box::new(|s| s.scene_id as u64)
    } else {
        warn!("one scene only; validation split is by event");
        Box::new(|s| s.event_id)
    };
    let mut groups: Vec<u64> = samples.iter().map(&key).collect::<BTreeSet<_>>().into_iter().collect();
    if groups.len() < 2 {
        warn!("a single event cannot be split; training without validation");
        return ((0..samples.len()).collect(), Vec::new());
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed));
    let n_val = ((groups.len() as f64 * fraction).round() as usize).clamp(1, groups.len() - 1);
    let held: BTreeSet<u64> = groups[..n_val].iter().copied().collect();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, s) in samples.iter().enumerate() {
        if held.contains(&key(s)) {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    (train, val)
}

/// Optimizer state around a model.
pub struct Trainer {
    pub model: Model,
    adam: Adam,
}

impl Trainer {
    pub fn new(model: Model, learning_rate: f64) -> Self {
        let adam = Adam::new(
            model.params(),
            AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
        );
        Trainer { model, adam }
    }

    /// Mean NLL of `batch` before the update, then one Adam step.
    pub fn step(&mut self, batch: &SocialBatch) -> Result<f64> {
        let (loss, grads) = nll_gradients(&self.model, batch)?;
        self.adam.step(self.model.params_mut(), &grads)?;
        Ok(loss)
    }
}

/// Mean NLL of `batch` and its gradient for every parameter tensor, in
/// parameter order.
pub fn nll_gradients(model: &Model, batch: &SocialBatch) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g, true);
    let logits = model.logits(&mut g, &vars, batch)?;
    let out = g.softmax_nll(logits, &batch.labels)?;
    let loss = g.value(out.loss).data()[0];
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss is {}", loss)));
    }
    g.backward(out.loss)?;
    Ok((loss, model.params().gradients(&g, &vars)))
}

/// Mean per-sample NLL of `model` on `samples`.
pub fn evaluate_loss(samples: &[LabeledSample], model: &Model) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("evaluate_loss on an empty dataset"));
    }
    let mut total = 0.0;
    for part in samples.chunks(EVAL_CHUNK) {
        total += batch_loss(model, &SocialBatch::from_samples(part))? * part.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Mean NLL of one batch, computed exactly as in a training step.
pub fn batch_loss(model: &Model, batch: &SocialBatch) -> Result<f64> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g, false);
    let logits = model.logits(&mut g, &vars, batch)?;
    let out = g.softmax_nll(logits, &batch.labels)?;
    Ok(g.value(out.loss).data()[0])
}

fn epoch_indices(
    samples: &[LabeledSample],
    train: &[usize],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut idx: Vec<usize> = if config.balance_classes {
        let (mut lk, lc): (Vec<usize>, Vec<usize>) = train
            .iter()
            .partition(|&&i| samples[i].label == Behavior::LaneKeep);
        if !lc.is_empty() && lk.len() > lc.len() {
            lk.shuffle(rng);
            lk.truncate(lc.len());
        }
        lk.into_iter().chain(lc).collect()
    } else {
        train.to_vec()
    };
    idx.sort_unstable();
    idx.shuffle(rng);
    if config.samples_per_epoch > 0 {
        idx.truncate(config.samples_per_epoch);
    }
    idx
}

pub fn train(samples: &[LabeledSample], config: &TrainConfig) -> Result<TrainOutcome> {
    let kind = config.validate()?;
    if samples.is_empty() {
        return Err(Error::validation("cannot train on an empty dataset"));
    }
    let classes: BTreeSet<Behavior> = samples.iter().map(|s| s.label).collect();
    if classes.len() < 2 {
        warn!(
            "dataset holds only {:?} samples; training proceeds but recall is undefined",
            classes.iter().map(|c| c.short_name()).collect::<Vec<_>>()
        );
    }
    let (train_idx, val_idx) = split_by_scene(samples, config.validation_fraction, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut val_pick = val_idx.clone();
    if config.validation_samples > 0 && val_pick.len() > config.validation_samples {
        val_pick.shuffle(&mut rng);
        val_pick.truncate(config.validation_samples);
        val_pick.sort_unstable();
    }
    let val: Vec<LabeledSample> = val_pick.iter().map(|&i| samples[i].clone()).collect();
    info!(
        "training {} on {} samples, validating on {}",
        kind.name(),
        train_idx.len(),
        val.len()
    );

    let mut model = Model::new(kind, config.gru_hidden, config.seed)?;
    model.set_scaling(FeatureScaling::fit_iter(train_idx.iter().map(|&i| &samples[i])));
    let mut trainer = Trainer::new(model, config.learning_rate);
    let echo = render_config(config);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 1..=config.epochs {
        let order = epoch_indices(samples, &train_idx, config, &mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = SocialBatch::from_samples(chunk.iter().map(|&i| &samples[i]));
            let loss = trainer.step(&batch).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("epoch {} batch {}: {}", epoch, b, msg)),
                other => other,
            })?;
            sum += loss * chunk.len() as f64;
        }
        let train_nll = sum / order.len().max(1) as f64;
        let val_nll = if val.is_empty() {
            None
        } else {
            Some(evaluate_loss(&val, &trainer.model)?)
        };
        info!(
            "epoch {:>3}  train_nll {:.5}  val_nll {}",
            epoch,
            train_nll,
            val_nll.map_or("-".to_string(), |v| format!("{:.5}", v))
        );
        history.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
        });
        let score = val_nll.unwrap_or(train_nll);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, epoch, trainer.model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= config.patience {
            info!("no improvement for {} epochs; stopping", config.patience);
            break;
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(model, echo),
        history,
        best_epoch,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

pub fn write_history<W: Write>(history: &[EpochRecord], mut writer: W) -> Result<()> {
    writeln!(writer, "epoch,train_nll,val_nll")?;
    for r in history {
        let val = r.val_nll.map_or(String::new(), |v| v.to_string());
        writeln!(writer, "{},{},{}", r.epoch, r.train_nll, val)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
