use serde::{Deserialize, Serialize};

use super::{NeuralError, SeqClassifier, Target};
use crate::features::IndexSequence;
use crate::numkit::{argmax, optimizer_step, OptimizerRule, OptimizerState, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerRule,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { optimizer: OptimizerRule::default(), batch_size: 8, epochs: 30, seed: 42, clip_norm: Some(5.0) }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 {
            return Err(NeuralError::BadConfig("batch_size must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(NeuralError::BadConfig(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_loss: Option<f64>,
    pub valid_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned, if any training happened.
    pub best_epoch: Option<usize>,
}

fn true_class(t: &Target) -> usize {
    match t {
        Target::Class(c) => *c,
        Target::Binary(v) => argmax(v),
    }
}

fn evaluate(model: &SeqClassifier, seqs: &[IndexSequence], targets: &[Target]) -> Result<(f64, f64), NeuralError> {
    let loss = model.loss(seqs, targets)?;
    let outs = model.forward_batch(seqs)?;
    let hits = outs.iter().zip(targets).filter(|(o, t)| argmax(o) == true_class(t)).count();
    Ok((loss, hits as f64 / seqs.len() as f64))
}

/// Mini-batch training with seeded shuffling.
///
/// After each epoch the full training set (and validation set, when given)
/// is re-scored. The returned model holds the parameters of the epoch with
/// the lowest validation loss, or training loss without a validation set.
pub fn train(
    mut model: SeqClassifier,
    train_set: (&[IndexSequence], &[Target]),
    valid_set: Option<(&[IndexSequence], &[Target])>,
    cfg: &TrainConfig,
) -> Result<(SeqClassifier, History), NeuralError> {
    cfg.validate()?;
    let (xs, ys) = train_set;
    if xs.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    if xs.len() != ys.len() {
        return Err(NeuralError::InvalidTarget(format!("{} sequences but {} targets", xs.len(), ys.len())));
    }
    let valid_set = valid_set.filter(|(v, _)| !v.is_empty());

    let mut rng = RngState::new(cfg.seed);
    let mut state = OptimizerState::default();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut params = model.to_flat();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<IndexSequence> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<Target> = batch.iter().map(|&i| ys[i].clone()).collect();
            let (_, g) = model.loss_and_grads(&bx, &by, cfg.clip_norm)?;
            optimizer_step(&cfg.optimizer, &mut state, &mut [&mut params[..]], &[&g[..]])?;
            model.set_flat(&params)?;
        }
        let (train_loss, train_accuracy) = evaluate(&model, xs, ys)?;
        let (valid_loss, valid_accuracy) = match valid_set {
            Some((vx, vy)) => {
                let (l, a) = evaluate(&model, vx, vy)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        log::debug!("epoch {epoch}: train loss {train_loss:.4} acc {train_accuracy:.3} valid {valid_loss:?}");
        let score = valid_loss.unwrap_or(train_loss);
        if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, params.clone()));
            history.best_epoch = Some(epoch);
        }
        history.epochs.push(EpochStats { epoch, train_loss, train_accuracy, valid_loss, valid_accuracy });
    }
    if let Some((_, p)) = best {
        model.set_flat(&p)?;
    }
    Ok((model, history))
}
