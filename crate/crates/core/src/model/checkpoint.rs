//! Versioned JSON checkpoints.
//!
//! Parameters are written with shortest round-trip float formatting and read
//! back with exact parsing, so a loaded network is bitwise identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::Mode;
use super::mlp::{AdviserNet, Dense};
use super::ModelError;

const FORMAT: &str = "adviser-mlp";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub mode: Mode,
    pub net: AdviserNet,
}

#[derive(Serialize, Deserialize)]
struct WireCheckpoint {
    format: String,
    version: u32,
    mode: String,
    widths: Vec<usize>,
    layers: Vec<WireLayer>,
}

#[derive(Serialize, Deserialize)]
struct WireLayer {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let wire = WireCheckpoint {
            format: FORMAT.into(),
            version: VERSION,
            mode: self.mode.name().into(),
            widths: self.net.widths(),
            layers: self
                .net
                .layers()
                .iter()
                .map(|l| WireLayer {
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string(&wire).expect("checkpoint serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let wire: WireCheckpoint =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if wire.format != FORMAT || wire.version != VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                wire.format, wire.version
            )));
        }
        if wire.widths.len() != wire.layers.len() + 1 {
            return Err(ModelError::Checkpoint("widths do not match layers".into()));
        }
        let layers = wire
            .layers
            .into_iter()
            .zip(wire.widths.windows(2))
            .map(|(l, w)| Dense {
                inputs: w[0],
                outputs: w[1],
                weights: l.weights,
                bias: l.bias,
            })
            .collect();
        let net = AdviserNet::from_layers(layers)?;
        if !net.is_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self {
            mode: wire.mode.parse()?,
            net,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
