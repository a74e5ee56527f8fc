//! Class-masked objectives.
//!
//! One output head covers every class. Each example only touches the output
//! entries of its own class: the softmax is taken over the class slice and
//! entries outside it receive neither probability mass nor gradient.

use std::fmt;
use std::str::FromStr;

use super::mlp::{AdviserNet, ForwardCache, Gradients};
use super::ModelError;
use crate::advisee::AdviseeRecord;
use crate::labels::{regression_targets, soft_label, ErrorUnits, LabelConfig};
use crate::taxonomy::{KeypointTaxonomy, ObjectClass, KEYPOINT_COUNT};

/// Loss used for classification-mode training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    MaskedMse,
    MaskedCrossEntropy,
}

impl FromStr for LossKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mse" | "masked-mse" => Ok(LossKind::MaskedMse),
            "cross-entropy" | "ce" | "masked-cross-entropy" => Ok(LossKind::MaskedCrossEntropy),
            other => Err(ModelError::Config(format!("unknown loss {other:?}"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::MaskedMse => "masked-mse",
            LossKind::MaskedCrossEntropy => "masked-cross-entropy",
        })
    }
}

/// What the network output represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Scores over keypoints, trained against soft labels.
    #[default]
    Classification,
    /// Predicted per-keypoint error in degrees.
    RegressionDegrees,
    /// Predicted per-keypoint error in radians.
    RegressionRadians,
}

impl Mode {
    pub fn is_regression(self) -> bool {
        !matches!(self, Mode::Classification)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Classification => "classification",
            Mode::RegressionDegrees => "regression-degrees",
            Mode::RegressionRadians => "regression-radians",
        }
    }
}

impl FromStr for Mode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "classification" => Ok(Mode::Classification),
            "regression-degrees" => Ok(Mode::RegressionDegrees),
            "regression-radians" => Ok(Mode::RegressionRadians),
            other => Err(ModelError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The loss actually optimized, derived from mode and loss kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    ClassificationMse,
    ClassificationCrossEntropy,
    Regression,
}

impl Objective {
    pub fn new(mode: Mode, loss: LossKind) -> Result<Self, ModelError> {
        match (mode, loss) {
            (Mode::Classification, LossKind::MaskedMse) => Ok(Objective::ClassificationMse),
            (Mode::Classification, LossKind::MaskedCrossEntropy) => {
                Ok(Objective::ClassificationCrossEntropy)
            }
            (_, LossKind::MaskedMse) => Ok(Objective::Regression),
            (mode, loss) => Err(ModelError::ModeMismatch(format!(
                "{loss} cannot train {mode}"
            ))),
        }
    }

    fn is_regression(self) -> bool {
        matches!(self, Objective::Regression)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Soft label over the joint output.
    Soft(Vec<f64>),
    /// Per-keypoint errors; only visible entries are used.
    Errors(Vec<f64>),
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub class: ObjectClass,
    pub visible: Vec<bool>,
    pub target: Target,
}

impl Example {
    pub fn from_record(
        record: &AdviseeRecord,
        mode: Mode,
        labels: &LabelConfig,
    ) -> Result<Self, ModelError> {
        if record.features.is_empty() {
            return Err(ModelError::MissingFeatures(record.instance_id.clone()));
        }
        let mut visible = vec![false; KEYPOINT_COUNT];
        for k in record.visible() {
            visible[k] = true;
        }
        let target = match mode {
            Mode::Classification => Target::Soft(soft_label(record, labels)?.into_inner()),
            Mode::RegressionDegrees => {
                Target::Errors(regression_targets(record, ErrorUnits::Degrees)?.targets)
            }
            Mode::RegressionRadians => {
                Target::Errors(regression_targets(record, ErrorUnits::Radians)?.targets)
            }
        };
        Ok(Self {
            features: record.features.clone(),
            class: record.class,
            visible,
            target,
        })
    }
}

pub fn examples_from_records(
    records: &[AdviseeRecord],
    mode: Mode,
    labels: &LabelConfig,
) -> Result<Vec<Example>, ModelError> {
    records
        .iter()
        .map(|r| Example::from_record(r, mode, labels))
        .collect()
}

/// Softmax over the class slice; exactly zero elsewhere.
pub fn class_masked_probabilities(
    logits: &[f64],
    class: ObjectClass,
    taxonomy: &KeypointTaxonomy,
) -> Vec<f64> {
    let slice = taxonomy.class_slice(class);
    let mut probs = vec![0.0; logits.len()];
    let max = logits[slice.clone()]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for i in slice.clone() {
        probs[i] = (logits[i] - max).exp();
        total += probs[i];
    }
    for p in &mut probs[slice] {
        *p /= total;
    }
    probs
}

/// Mean of `(p_i − y_i)²` over the class slice.
pub fn masked_mse(probs: &[f64], label: &[f64], slice: std::ops::Range<usize>) -> f64 {
    let n = slice.len() as f64;
    slice.map(|i| (probs[i] - label[i]).powi(2)).sum::<f64>() / n
}

/// Loss of one example and its gradient with respect to the logits.
pub fn loss_and_logit_gradient(
    logits: &[f64],
    example: &Example,
    objective: Objective,
    taxonomy: &KeypointTaxonomy,
) -> Result<(f64, Vec<f64>), ModelError> {
    let slice = taxonomy.class_slice(example.class);
    let mut grad = vec![0.0; logits.len()];
    let loss = match (&example.target, objective) {
        (Target::Soft(label), Objective::ClassificationMse) => {
            let p = class_masked_probabilities(logits, example.class, taxonomy);
            let n = slice.len() as f64;
            let dp: Vec<f64> = slice.clone().map(|i| 2.0 * (p[i] - label[i]) / n).collect();
            // Softmax Jacobian: ∂L/∂z_j = p_j (∂L/∂p_j − Σ_i p_i ∂L/∂p_i).
            let dot: f64 = slice.clone().zip(&dp).map(|(i, g)| p[i] * g).sum();
            for (i, g) in slice.clone().zip(&dp) {
                grad[i] = p[i] * (g - dot);
            }
            masked_mse(&p, label, slice)
        }
        (Target::Soft(label), Objective::ClassificationCrossEntropy) => {
            let max = logits[slice.clone()]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let log_norm = max
                + logits[slice.clone()]
                    .iter()
                    .map(|z| (z - max).exp())
                    .sum::<f64>()
                    .ln();
            let mass: f64 = slice
                .clone()
                .filter(|i| example.visible[*i])
                .map(|i| label[i])
                .sum();
            let mut loss = 0.0;
            for i in slice.clone() {
                let log_p = logits[i] - log_norm;
                let y = if example.visible[i] { label[i] } else { 0.0 };
                loss -= y * log_p;
                grad[i] = log_p.exp() * mass - y;
            }
            loss
        }
        (Target::Errors(targets), Objective::Regression) => {
            let visible: Vec<usize> = slice.filter(|i| example.visible[*i]).collect();
            if visible.is_empty() {
                return Err(ModelError::ModeMismatch(
                    "regression example without visible keypoints".into(),
                ));
            }
            let n = visible.len() as f64;
            let mut loss = 0.0;
            for i in visible {
                let diff = logits[i] - targets[i];
                loss += diff * diff / n;
                grad[i] = 2.0 * diff / n;
            }
            loss
        }
        (Target::Soft(_), _) | (Target::Errors(_), _) => {
            return Err(ModelError::ModeMismatch(format!(
                "target kind does not match objective {objective:?}"
            )))
        }
    };
    Ok((loss, grad))
}

pub fn example_loss(
    logits: &[f64],
    example: &Example,
    objective: Objective,
    taxonomy: &KeypointTaxonomy,
) -> Result<f64, ModelError> {
    loss_and_logit_gradient(logits, example, objective, taxonomy).map(|(l, _)| l)
}

/// Mean loss of the network over a batch.
pub fn batch_loss(
    net: &AdviserNet,
    batch: &[&Example],
    objective: Objective,
    taxonomy: &KeypointTaxonomy,
) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut total = 0.0;
    for ex in batch {
        total += example_loss(&net.forward(&ex.features)?, ex, objective, taxonomy)?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean batch loss and its analytic gradient with respect to every parameter.
pub fn gradients(
    net: &AdviserNet,
    batch: &[&Example],
    objective: Objective,
    taxonomy: &KeypointTaxonomy,
) -> Result<(f64, Gradients), ModelError> {
    let mut grads = Gradients::zeros_like(net);
    let loss = accumulate_gradients(net, batch, objective, taxonomy, &mut grads)?;
    Ok((loss, grads))
}

/// Overwrites `grads` with the mean-loss gradient, reducing examples in order.
pub(crate) fn accumulate_gradients(
    net: &AdviserNet,
    batch: &[&Example],
    objective: Objective,
    taxonomy: &KeypointTaxonomy,
    grads: &mut Gradients,
) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if objective.is_regression() != matches!(batch[0].target, Target::Errors(_)) {
        return Err(ModelError::ModeMismatch(format!(
            "examples do not match objective {objective:?}"
        )));
    }
    grads.fill_zero();
    let scale = 1.0 / batch.len() as f64;
    let mut cache = ForwardCache::default();
    let mut scratch = Vec::new();
    let mut total = 0.0;
    for ex in batch {
        net.forward_into(&ex.features, &mut cache)?;
        let (loss, dlogits) = loss_and_logit_gradient(cache.logits(), ex, objective, taxonomy)?;
        total += loss;
        net.backward_into(&cache, &dlogits, scale, grads, &mut scratch);
    }
    Ok(total * scale)
}
