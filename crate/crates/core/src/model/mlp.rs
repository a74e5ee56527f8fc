use rand::Rng;

use super::ModelError;
use crate::rng::substream;
use crate::taxonomy::KEYPOINT_COUNT;

/// Fully connected layer, `out = W·x + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

/// Output weights start small so that the initial selection scores are
/// nearly uniform rather than an arbitrary random ranking.
const OUTPUT_INIT_GAIN: f64 = 0.01;

/// Multilayer perceptron with rectified hidden layers and a linear
/// [`KEYPOINT_COUNT`]-wide output.
#[derive(Debug, Clone, PartialEq)]
pub struct AdviserNet {
    layers: Vec<Dense>,
}

impl AdviserNet {
    /// Fan-in scaled uniform weights, `U(-g/√fan_in, g/√fan_in)` with `g = 1` for
    /// hidden layers and [`OUTPUT_INIT_GAIN`] for the output layer; zero biases.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self, ModelError> {
        let mut net = Self::zeros(widths)?;
        let mut rng = substream(seed, "init", &[]);
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let gain = if i == last { OUTPUT_INIT_GAIN } else { 1.0 };
            let bound = gain / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, ModelError> {
        check_widths(widths)?;
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, ModelError> {
        let mut widths: Vec<usize> = layers.iter().map(|l| l.inputs).collect();
        widths.extend(layers.last().map(|l| l.outputs));
        check_widths(&widths)?;
        for (i, layer) in layers.iter().enumerate() {
            if layer.inputs != widths[i]
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(ModelError::Architecture(format!(
                    "layer {i} has inconsistent shapes"
                )));
            }
            if i + 1 < layers.len() && layers[i + 1].inputs != layer.outputs {
                return Err(ModelError::Architecture(format!(
                    "layer {i} output does not feed layer {}",
                    i + 1
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        w.push(self.layers.last().map_or(0, |l| l.outputs));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Raw output logits (no class masking).
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut cache = ForwardCache::default();
        self.forward_into(features, &mut cache)?;
        Ok(cache.activations.pop().unwrap_or_default())
    }

    /// Forward pass keeping every layer's activation for backprop.
    /// `activations[0]` is the input and the last entry the logits.
    pub(crate) fn forward_into(
        &self,
        features: &[f64],
        cache: &mut ForwardCache,
    ) -> Result<(), ModelError> {
        if features.len() != self.input_width() {
            return Err(ModelError::Dimension {
                expected: self.input_width(),
                got: features.len(),
            });
        }
        cache
            .activations
            .resize_with(self.layers.len() + 1, Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(features);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(i + 1);
            let out = &mut rest[0];
            layer.apply(&done[i], out);
            if i < last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(())
    }

    /// Accumulates `scale · ∂loss/∂θ` into `grads`, given `∂loss/∂logits`.
    pub(crate) fn backward_into(
        &self,
        cache: &ForwardCache,
        dlogits: &[f64],
        scale: f64,
        grads: &mut Gradients,
        scratch: &mut Vec<f64>,
    ) {
        let mut delta: Vec<f64> = dlogits.iter().map(|d| d * scale).collect();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let g = &mut grads.layers[i];
            for ((grow, d), gb) in g
                .weights
                .chunks_exact_mut(layer.inputs)
                .zip(&delta)
                .zip(g.bias.iter_mut())
            {
                *gb += d;
                if *d != 0.0 {
                    for (gw, x) in grow.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
            }
            if i == 0 {
                break;
            }
            scratch.clear();
            scratch.resize(layer.inputs, 0.0);
            for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                if *d != 0.0 {
                    for (s, w) in scratch.iter_mut().zip(row) {
                        *s += d * w;
                    }
                }
            }
            // Rectifier derivative, read off the post-activation.
            for (s, a) in scratch.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *s = 0.0;
                }
            }
            std::mem::swap(&mut delta, scratch);
        }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), ModelError> {
        if values.len() != self.num_parameters() {
            return Err(ModelError::Dimension {
                expected: self.num_parameters(),
                got: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

fn check_widths(widths: &[usize]) -> Result<(), ModelError> {
    if widths.len() < 2 {
        return Err(ModelError::Architecture(
            "need at least input and output widths".into(),
        ));
    }
    if widths.contains(&0) {
        return Err(ModelError::Architecture("zero-width layer".into()));
    }
    if *widths.last().expect("nonempty") != KEYPOINT_COUNT {
        return Err(ModelError::Architecture(format!(
            "output width must be {KEYPOINT_COUNT}"
        )));
    }
    Ok(())
}

#[derive(Debug, Default)]
pub(crate) struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.activations.last().map_or(&[], Vec::as_slice)
    }
}

/// Parameter-shaped gradient (or momentum) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &AdviserNet) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Same ordering as [`AdviserNet::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}
