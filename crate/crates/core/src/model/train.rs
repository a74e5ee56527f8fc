use rand::seq::SliceRandom;

use super::loss::{accumulate_gradients, Example, LossKind, Mode, Objective};
use super::mlp::{AdviserNet, Gradients};
use super::ModelError;
use crate::rng::substream;
use crate::taxonomy::{KeypointTaxonomy, KEYPOINT_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Multiplicative learning-rate decay applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub mode: Mode,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_decay: 0.95,
            lr_decay_every: 5,
            batch_size: 256,
            epochs: 100,
            loss: LossKind::MaskedMse,
            mode: Mode::Classification,
            hidden: vec![128, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(ModelError::Config("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(ModelError::Config("weight_decay must be >= 0".into()));
        }
        if !positive(self.lr_decay) || self.lr_decay_every == 0 {
            return Err(ModelError::Config(
                "learning-rate decay must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config(
                "batch_size and epochs must be >= 1".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(ModelError::Config("hidden widths must be >= 1".into()));
        }
        Objective::new(self.mode, self.loss)?;
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let steps = (epoch / self.lr_decay_every) as i32;
        self.learning_rate * self.lr_decay.powi(steps)
    }

    /// `[input, hidden…, 34]`.
    pub fn widths(&self, input: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(&self.hidden);
        w.push(KEYPOINT_COUNT);
        w
    }
}

/// SGD with momentum; weight decay applies to weights only.
///
/// `v ← μ·v − lr·(g + λ·w)`, `w ← w + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    weight_decay: f64,
    velocity: Gradients,
}

impl Sgd {
    pub fn new(net: &AdviserNet, momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut AdviserNet, grads: &Gradients, learning_rate: f64) {
        for ((layer, g), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.velocity.layers)
        {
            for ((w, gw), vw) in layer.weights.iter_mut().zip(&g.weights).zip(&mut v.weights) {
                *vw = self.momentum * *vw - learning_rate * (gw + self.weight_decay * *w);
                *w += *vw;
            }
            for ((b, gb), vb) in layer.bias.iter_mut().zip(&g.bias).zip(&mut v.bias) {
                *vb = self.momentum * *vb - learning_rate * gb;
                *b += *vb;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: AdviserNet,
    /// Mean example loss of every epoch, measured on the fly.
    pub loss_trace: Vec<f64>,
}

/// Trains a freshly initialized network on `examples`.
pub fn train(
    examples: &[Example],
    config: &TrainConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<TrainOutcome, ModelError> {
    let first = examples.first().ok_or(ModelError::EmptyDataset)?;
    config.validate()?;
    let net = AdviserNet::new(&config.widths(first.features.len()), config.seed)?;
    train_from(net, examples, config, taxonomy)
}

/// Trains `net` for every configured epoch (no early stopping).
pub fn train_from(
    mut net: AdviserNet,
    examples: &[Example],
    config: &TrainConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<TrainOutcome, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    config.validate()?;
    let objective = Objective::new(config.mode, config.loss)?;
    if let Some(ex) = examples
        .iter()
        .find(|e| e.features.len() != net.input_width())
    {
        return Err(ModelError::Dimension {
            expected: net.input_width(),
            got: ex.features.len(),
        });
    }

    let mut sgd = Sgd::new(&net, config.momentum, config.weight_decay);
    let mut grads = Gradients::zeros_like(&net);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut substream(config.seed, "shuffle", &[epoch.into()]));

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let loss = accumulate_gradients(&net, &batch, objective, taxonomy, &mut grads)?;
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            sgd.step(&mut net, &grads, lr);
        }
        if !net.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        loss_trace.push(epoch_loss / examples.len() as f64);
    }
    Ok(TrainOutcome { net, loss_trace })
}
