//! Two-term Chamfer objective, schedules, Adam and the training loop.

mod augment;
mod loss;
mod optim;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use augment::{apply_rigid, augment, AugmentConfig};
pub use loss::{chamfer_node, total_loss, LossNodes};
pub use optim::{lambda_schedule, lr_schedule, Adam};

use crate::dataset::PatchPair;
use crate::error::{Error, Result};
use crate::model::{forward, init_params, Model, ModelConfig};
use crate::tensor::{checkpoint, Array, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Multiplicative decay applied every `lr_decay_epochs` epochs.
    pub lr_decay: f64,
    pub lr_decay_epochs: usize,
    pub lr_floor: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub augment: AugmentConfig,
    /// Weight of a repulsion term. Only 0 is accepted; the term is not part
    /// of the objective.
    pub repulsion_weight: f64,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            epochs: 400,
            batch_size: 28,
            lr0: 0.001,
            lr_decay: 0.7,
            lr_decay_epochs: 40,
            lr_floor: 1e-6,
            lambda0: 0.01,
            lambda1: 1.0,
            augment: AugmentConfig::default(),
            repulsion_weight: 0.0,
            checkpoint_interval: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.augment.validate()?;
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_epochs == 0 {
            return fail("epochs, batch_size and lr_decay_epochs must be positive".into());
        }
        if self.lambda0 > self.lambda1 {
            return fail(format!("lambda0 {} exceeds lambda1 {}", self.lambda0, self.lambda1));
        }
        if !(self.lr_floor <= self.lr0 && self.lr_floor >= 0.0) {
            return fail(format!(
                "need 0 <= lr_floor <= lr0, got {} and {}",
                self.lr_floor, self.lr0
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.repulsion_weight != 0.0 {
            return fail("repulsion_weight must be 0: the repulsion term is not implemented".into());
        }
        Ok(())
    }
}

/// One optimizer step. Losses are batch means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub iteration: usize,
    pub loss_total: f64,
    pub loss_coarse: f64,
    /// 0 for models without a refiner.
    pub loss_refined: f64,
    pub lambda: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<TrainLogEntry>,
}

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "model.ckpt";

/// Per-pair loss values and parameter gradients.
struct PairStep {
    total: f64,
    coarse: f64,
    refined: f64,
    grads: BTreeMap<String, Array>,
}

fn pair_step(model: &Model, pair: &PatchPair, lambda: f64) -> Result<PairStep> {
    let mut g = Graph::new();
    let bound = model.params.bind(&mut g);
    let input = g.constant(pair.input.to_array());
    let target = g.constant(pair.target.to_array());
    let nodes = forward(&mut g, input, &bound, &model.config)?;
    let refined = model.config.variant.has_refiner().then_some(nodes.output);
    let loss = total_loss(&mut g, nodes.coarse, refined, target, lambda)?;
    let grads = g.backward(loss.total)?;
    Ok(PairStep {
        total: g.value(loss.total).item(),
        coarse: g.value(loss.coarse).item(),
        refined: loss.refined.map_or(0.0, |id| g.value(id).item()),
        grads: bound.collect(&g, &grads),
    })
}

fn checkpoint_meta(cfg: &TrainConfig, epochs_done: usize) -> serde_json::Value {
    serde_json::json!({ "model": cfg.model, "epoch": epochs_done })
}

/// Trains from scratch; see [`train_with`].
pub fn train(pairs: &[PatchPair], cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    train_with(pairs, cfg, out_dir, |_| {})
}

/// Epochs over shuffled mini-batches with one Adam step per batch. Gradients
/// are averaged over the batch in a fixed order, so the run is a pure
/// function of `(pairs, cfg)`.
///
/// With `out_dir`, writes `train_log.csv`, periodic
/// `checkpoint_epoch_XXXX.ckpt` files and the final `model.ckpt`.
/// `on_epoch` sees the last entry of every epoch.
pub fn train_with(
    pairs: &[PatchPair],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    mut on_epoch: impl FnMut(&TrainLogEntry),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (n, r) = (cfg.model.n, cfg.model.r);
    if let Some(bad) = pairs.iter().find(|p| p.input.len() != n || p.target.len() != r * n) {
        return Err(Error::Config(format!(
            "pairs must have {n} input and {} target points, found {} and {}",
            r * n,
            bad.input.len(),
            bad.target.len()
        )));
    }
    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(csv::Writer::from_path(dir.join(LOG_FILE)).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        }
        None => None,
    };
    let mut model = Model {
        config: cfg.model.clone(),
        params: init_params(&cfg.model, cfg.seed)?,
    };
    let mut adam = Adam::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = Vec::new();
    let mut iteration = 0;
    for epoch in 0..cfg.epochs {
        let lambda = lambda_schedule(epoch, cfg)?;
        let lr = lr_schedule(epoch, cfg);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<BTreeMap<String, Array>> = None;
            let (mut total, mut coarse, mut refined) = (0.0, 0.0, 0.0);
            for &i in batch {
                let pair = augment(&pairs[i], &cfg.augment, &mut rng)?;
                let step = pair_step(&model, &pair, lambda)?;
                if !step.total.is_finite() {
                    if let Some(w) = writer.as_mut() {
                        w.flush()?;
                    }
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        iteration,
                        value: step.total,
                    });
                }
                total += step.total;
                coarse += step.coarse;
                refined += step.refined;
                match acc.as_mut() {
                    None => acc = Some(step.grads),
                    Some(acc) => {
                        for (name, g) in step.grads {
                            acc.get_mut(&name).expect("same parameter set").add_assign(&g);
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let mut grads = acc.expect("batches are non-empty");
            grads.values_mut().for_each(|g| g.scale(scale));
            adam.step(&mut model.params, &grads, lr)?;
            let entry = TrainLogEntry {
                epoch,
                iteration,
                loss_total: total * scale,
                loss_coarse: coarse * scale,
                loss_refined: refined * scale,
                lambda,
                lr,
            };
            if let Some(w) = writer.as_mut() {
                w.serialize(&entry).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            log.push(entry);
            iteration += 1;
        }
        on_epoch(log.last().expect("every epoch logs"));
        if let Some(dir) = out_dir {
            if cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0 {
                let path = dir.join(format!("checkpoint_epoch_{:04}.ckpt", epoch + 1));
                checkpoint::save(&path, &model.params, &checkpoint_meta(cfg, epoch + 1))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        checkpoint::save(
            &dir.join(FINAL_CHECKPOINT),
            &model.params,
            &checkpoint_meta(cfg, cfg.epochs),
        )?;
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    Ok(TrainOutcome { model, log })
}
