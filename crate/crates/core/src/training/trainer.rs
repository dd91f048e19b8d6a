use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::log_sum_exp;
use crate::bags::Bag;
use crate::error::{MilError, Result};
use crate::metrics::{accuracy, f1, roc_auc, EvalMetrics, ScoredPrediction};
use crate::model::{forward, loss_and_gradients, ModelConfig, ModelParams};
use crate::training::adam::Adam;

/// Stream of the per-run generator used for bag-order shuffling; stream 0
/// of the same seed initializes the parameters.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn with_rates(self, learning_rate: f64, weight_decay: f64) -> Self {
        TrainConfig {
            learning_rate,
            weight_decay,
            ..self
        }
    }

    /// `learning_rate = 0` is accepted so that smoke runs can freeze the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MilError::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be a nonnegative number", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be a nonnegative number", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub best_params: ModelParams,
    /// 1-based epoch whose validation loss is lowest (earliest on ties).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    /// Filled in once the selected model has been scored on held-out bags.
    pub test_metrics: Option<EvalMetrics>,
}

/// Cross-entropy of `logits` (1 x C) against `label`.
pub fn bag_loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(MilError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    Ok(log_sum_exp(logits) - logits[label])
}

fn check_bags(config: &ModelConfig, bags: &[Bag], which: &'static str) -> Result<()> {
    if bags.is_empty() {
        return Err(MilError::EmptyInput(which));
    }
    for bag in bags {
        if bag.input_dim() != config.input_dim {
            return Err(MilError::Shape {
                op: "bag features vs model input_dim",
                left: bag.features.shape(),
                right: (bag.len(), config.input_dim),
            });
        }
    }
    Ok(())
}

/// Trains from `ModelParams::init(model, seed)` for `config.epochs` epochs,
/// one Adam step per bag, and keeps the parameters of the epoch with the
/// lowest mean validation cross-entropy.
pub fn train(config: &TrainConfig, model: &ModelConfig, train_bags: &[Bag], val_bags: &[Bag], seed: u64) -> Result<RunResult> {
    config.validate()?;
    model.validate()?;
    check_bags(model, train_bags, "training bag set is empty")?;
    check_bags(model, val_bags, "validation bag set is empty")?;

    let mut params = ModelParams::init(model, seed)?;
    let mut adam = Adam::new(&params, config.learning_rate, config.weight_decay, config.beta1, config.beta2, config.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_bags.len()).collect();

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;
    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut train_total = 0.0;
        for &i in &order {
            let bag = &train_bags[i];
            let step = loss_and_gradients(model, &params, &bag.features, bag.label)?;
            if !step.loss.is_finite() {
                return Err(MilError::Divergence {
                    epoch,
                    bag_id: bag.bag_id.clone(),
                    loss: step.loss,
                });
            }
            train_total += step.loss;
            adam.step(&mut params, &step.gradients);
        }
        let val_loss = mean_loss(model, &params, val_bags, epoch)?;
        history.push(EpochRecord {
            epoch,
            train_loss: train_total / train_bags.len() as f64,
            val_loss,
        });
        if best.as_ref().is_none_or(|(_, loss, _)| val_loss < *loss) {
            best = Some((epoch, val_loss, params.clone()));
        }
    }
    let (best_epoch, best_val_loss, best_params) = best.expect("at least one epoch");
    Ok(RunResult {
        best_params,
        best_epoch,
        best_val_loss,
        history,
        test_metrics: None,
    })
}

fn mean_loss(model: &ModelConfig, params: &ModelParams, bags: &[Bag], epoch: usize) -> Result<f64> {
    let mut total = 0.0;
    for bag in bags {
        let logits = forward(model, params, &bag.features)?;
        let loss = bag_loss(logits.data(), bag.label)?;
        if !loss.is_finite() {
            return Err(MilError::Divergence {
                epoch,
                bag_id: bag.bag_id.clone(),
                loss,
            });
        }
        total += loss;
    }
    Ok(total / bags.len() as f64)
}

/// Class probabilities for every bag.
pub fn predict(model: &ModelConfig, params: &ModelParams, bags: &[Bag]) -> Result<Vec<ScoredPrediction>> {
    bags.iter()
        .map(|bag| {
            let logits = forward(model, params, &bag.features)?;
            Ok(ScoredPrediction::from_logits(bag.bag_id.clone(), bag.label, logits.data()))
        })
        .collect()
}

/// AUC, macro F1, accuracy and mean cross-entropy over `bags`.
pub fn evaluate(model: &ModelConfig, params: &ModelParams, bags: &[Bag]) -> Result<EvalMetrics> {
    check_bags(model, bags, "evaluation bag set is empty")?;
    let predictions = predict(model, params, bags)?;
    let loss = predictions
        .iter()
        .map(|p| -p.scores[p.label].ln())
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(EvalMetrics {
        auc: roc_auc(&predictions)?,
        f1: f1(&predictions),
        accuracy: accuracy(&predictions),
        loss,
    })
}
