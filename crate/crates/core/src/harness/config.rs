//! Experiment configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error. Later assignments (including command-line overrides) win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::advisee::SyntheticAdviseeParams;
use crate::labels::{ErrorUnits, LabelConfig};
use crate::model::{LossKind, Mode, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExperimentMode {
    #[default]
    Full,
    Small,
    Compare,
    Sweep,
    Generate,
    Ingest,
}

impl ExperimentMode {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentMode::Full => "full",
            ExperimentMode::Small => "small",
            ExperimentMode::Compare => "compare",
            ExperimentMode::Sweep => "sweep",
            ExperimentMode::Generate => "generate",
            ExperimentMode::Ingest => "ingest",
        }
    }
}

impl FromStr for ExperimentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "full" => ExperimentMode::Full,
            "small" => ExperimentMode::Small,
            "compare" => ExperimentMode::Compare,
            "sweep" => ExperimentMode::Sweep,
            "generate" => ExperimentMode::Generate,
            "ingest" => ExperimentMode::Ingest,
            other => return Err(format!("unknown experiment mode {other:?}")),
        })
    }
}

/// Where advisee records come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Generate one pool of `n_train + n_test` records and split it by position.
    Synthetic {
        params: SyntheticAdviseeParams,
        n_train: usize,
        n_test: usize,
    },
    /// Record files. `small` and `ingest` read `records`, falling back to `test`.
    Files {
        train: Option<PathBuf>,
        test: Option<PathBuf>,
        records: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub source: DataSource,
    pub labels: LabelConfig,
    pub train: TrainConfig,
    /// Fraction of records used for training in the split protocol.
    pub split_fraction: f64,
    pub repetitions: usize,
    pub temperatures: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Checkpoint read by `evaluate`.
    pub checkpoint: Option<PathBuf>,
    /// Alternative taxonomy file; the bundled vehicle taxonomy otherwise.
    pub taxonomy: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::Full,
            source: DataSource::Synthetic {
                params: SyntheticAdviseeParams::default(),
                n_train: 2000,
                n_test: 800,
            },
            labels: LabelConfig::default(),
            train: TrainConfig::default(),
            split_fraction: 0.7,
            repetitions: 6,
            temperatures: vec![0.1, 1.0, 10.0],
            seed: 0,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            taxonomy: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: ToString,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Parses a single `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(key.trim(), value.trim())
    }

    fn synthetic_mut(&mut self) -> (&mut SyntheticAdviseeParams, &mut usize, &mut usize) {
        if !matches!(self.source, DataSource::Synthetic { .. }) {
            self.source = DataSource::Synthetic {
                params: SyntheticAdviseeParams::default(),
                n_train: 2000,
                n_test: 800,
            };
        }
        match &mut self.source {
            DataSource::Synthetic {
                params,
                n_train,
                n_test,
            } => (params, n_train, n_test),
            DataSource::Files { .. } => unreachable!(),
        }
    }

    fn files_mut(
        &mut self,
    ) -> (
        &mut Option<PathBuf>,
        &mut Option<PathBuf>,
        &mut Option<PathBuf>,
    ) {
        if !matches!(self.source, DataSource::Files { .. }) {
            self.source = DataSource::Files {
                train: None,
                test: None,
                records: None,
            };
        }
        match &mut self.source {
            DataSource::Files {
                train,
                test,
                records,
            } => (train, test, records),
            DataSource::Synthetic { .. } => unreachable!(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "mode" => self.mode = parse_value(key, value)?,
            "source" => match value {
                "synthetic" => {
                    self.synthetic_mut();
                }
                "files" => {
                    self.files_mut();
                }
                _ => {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        value: value.into(),
                        message: "expected synthetic or files".into(),
                    })
                }
            },
            "n_train" => *self.synthetic_mut().1 = parse_value(key, value)?,
            "n_test" => *self.synthetic_mut().2 = parse_value(key, value)?,
            "base_noise_deg" => self.synthetic_mut().0.base_noise_deg = parse_value(key, value)?,
            "difficulty_min" => {
                self.synthetic_mut().0.difficulty_range.0 = parse_value(key, value)?
            }
            "difficulty_max" => {
                self.synthetic_mut().0.difficulty_range.1 = parse_value(key, value)?
            }
            "instance_perturbation" => {
                self.synthetic_mut().0.instance_perturbation = parse_value(key, value)?
            }
            "feature_noise" => self.synthetic_mut().0.feature_noise = parse_value(key, value)?,
            "visibility_prob" => self.synthetic_mut().0.visibility_prob = parse_value(key, value)?,
            "informativeness" => {
                let values: Vec<f64> = parse_list(key, value)?;
                let params = self.synthetic_mut().0;
                params.informativeness = if values.is_empty() {
                    SyntheticAdviseeParams::default().informativeness
                } else {
                    values
                };
            }
            "train_records" => *self.files_mut().0 = optional_path(value),
            "test_records" => *self.files_mut().1 = optional_path(value),
            "records" => *self.files_mut().2 = optional_path(value),
            "temperature" => self.labels.temperature = parse_value(key, value)?,
            "error_units" => self.labels.error_units = parse_value::<ErrorUnits>(key, value)?,
            "adviser_mode" => self.train.mode = parse_value::<Mode>(key, value)?,
            "loss" => self.train.loss = parse_value::<LossKind>(key, value)?,
            "learning_rate" => self.train.learning_rate = parse_value(key, value)?,
            "momentum" => self.train.momentum = parse_value(key, value)?,
            "weight_decay" => self.train.weight_decay = parse_value(key, value)?,
            "lr_decay" => self.train.lr_decay = parse_value(key, value)?,
            "lr_decay_every" => self.train.lr_decay_every = parse_value(key, value)?,
            "batch_size" => self.train.batch_size = parse_value(key, value)?,
            "epochs" => self.train.epochs = parse_value(key, value)?,
            "hidden" => self.train.hidden = parse_list(key, value)?,
            "split_fraction" => self.split_fraction = parse_value(key, value)?,
            "repetitions" => self.repetitions = parse_value(key, value)?,
            "temperatures" => self.temperatures = parse_list(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "checkpoint" => self.checkpoint = optional_path(value),
            "taxonomy" => self.taxonomy = optional_path(value),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return invalid("split_fraction must lie in (0, 1)".into());
        }
        if self.repetitions < 1 {
            return invalid("repetitions must be >= 1".into());
        }
        if self
            .temperatures
            .iter()
            .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return invalid("temperatures must be positive".into());
        }
        if !(self.labels.temperature.is_finite() && self.labels.temperature > 0.0) {
            return invalid("temperature must be positive".into());
        }
        self.train.validate().or_else(|e| invalid(e.to_string()))?;
        if let DataSource::Synthetic {
            params,
            n_train,
            n_test,
        } = &self.source
        {
            params.validate().or_else(|e| invalid(e.to_string()))?;
            if *n_train < 1 || *n_test < 1 {
                return invalid("n_train and n_test must be >= 1".into());
            }
        }
        Ok(())
    }

    /// Every field as `key = value`, one per line, in a fixed order. Feeding
    /// the output back through [`Self::apply_text`] reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("mode", self.mode.name().into());
        put("seed", self.seed.to_string());
        put("out", self.out_dir.display().to_string());
        match &self.source {
            DataSource::Synthetic {
                params,
                n_train,
                n_test,
            } => {
                put("source", "synthetic".into());
                put("n_train", n_train.to_string());
                put("n_test", n_test.to_string());
                put("base_noise_deg", params.base_noise_deg.to_string());
                put("difficulty_min", params.difficulty_range.0.to_string());
                put("difficulty_max", params.difficulty_range.1.to_string());
                put(
                    "instance_perturbation",
                    params.instance_perturbation.to_string(),
                );
                put("feature_noise", params.feature_noise.to_string());
                put("visibility_prob", params.visibility_prob.to_string());
                put("informativeness", join(&params.informativeness));
            }
            DataSource::Files {
                train,
                test,
                records,
            } => {
                put("source", "files".into());
                put("train_records", path_text(train));
                put("test_records", path_text(test));
                put("records", path_text(records));
            }
        }
        put("temperature", self.labels.temperature.to_string());
        put("error_units", self.labels.error_units.name().into());
        put("adviser_mode", self.train.mode.name().into());
        put("loss", self.train.loss.to_string());
        put("learning_rate", self.train.learning_rate.to_string());
        put("momentum", self.train.momentum.to_string());
        put("weight_decay", self.train.weight_decay.to_string());
        put("lr_decay", self.train.lr_decay.to_string());
        put("lr_decay_every", self.train.lr_decay_every.to_string());
        put("batch_size", self.train.batch_size.to_string());
        put("epochs", self.train.epochs.to_string());
        put("hidden", join(&self.train.hidden));
        put("split_fraction", self.split_fraction.to_string());
        put("repetitions", self.repetitions.to_string());
        put("temperatures", join(&self.temperatures));
        put("checkpoint", path_text(&self.checkpoint));
        put("taxonomy", path_text(&self.taxonomy));
        out
    }

    /// Training config with the experiment seed folded in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
