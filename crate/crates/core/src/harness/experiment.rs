//! Experiment protocols: full split, repeated 70:30 splits, classification
//! against regression, and the temperature sweep.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, DataSource, ExperimentConfig};
use super::metrics::evaluate_policy;
use super::reference::external_rows;
use super::table::{ResultsTable, RowRole, TableRow};
use crate::advisee::{
    generate_dataset, ingest_records, AdviseeError, AdviseeRecord, IngestError,
    SyntheticAdviseeParams,
};
use crate::labels::LabelConfig;
use crate::model::{
    class_masked_probabilities, examples_from_records, train, AdviserNet, LossKind, Mode,
    ModelError, TrainConfig, TrainOutcome,
};
use crate::rng::substream;
use crate::selection::{
    frequency_prior_ranking, performance_prior_ranking, Policy, SelectionError,
};
use crate::taxonomy::{KeypointTaxonomy, ObjectClass, TaxonomyError};

/// Minimum records per class for the split protocol.
pub const MIN_RECORDS_PER_CLASS: usize = 10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Advisee(#[from] AdviseeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("oracle bounds violated: {0}")]
    Sandwich(String),
    #[error("class {class} has {count} records; at least {MIN_RECORDS_PER_CLASS} are required")]
    InsufficientRecords { class: ObjectClass, count: usize },
    #[error("missing input: {0}")]
    MissingInput(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<AdviseeRecord>,
    pub test: Vec<AdviseeRecord>,
}

/// Generates `n_train + n_test` records and splits them by position.
pub fn synthetic_dataset(
    params: &SyntheticAdviseeParams,
    n_train: usize,
    n_test: usize,
    seed: u64,
    taxonomy: &KeypointTaxonomy,
) -> Result<Dataset, ExperimentError> {
    let mut records = generate_dataset(params, n_train + n_test, seed, taxonomy)?.records()?;
    let test = records.split_off(n_train);
    Ok(Dataset {
        train: records,
        test,
    })
}

pub fn load_taxonomy(config: &ExperimentConfig) -> Result<KeypointTaxonomy, ExperimentError> {
    Ok(match &config.taxonomy {
        Some(path) => KeypointTaxonomy::from_path(path)?,
        None => KeypointTaxonomy::pascal_vehicles().clone(),
    })
}

fn read(path: &Path, taxonomy: &KeypointTaxonomy) -> Result<Vec<AdviseeRecord>, ExperimentError> {
    Ok(ingest_records(path, taxonomy)?)
}

/// Train and test records for the full, compare and sweep protocols.
pub fn load_dataset(
    config: &ExperimentConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<Dataset, ExperimentError> {
    match &config.source {
        DataSource::Synthetic {
            params,
            n_train,
            n_test,
        } => synthetic_dataset(params, *n_train, *n_test, config.seed, taxonomy),
        DataSource::Files { train, test, .. } => Ok(Dataset {
            train: read(
                train
                    .as_deref()
                    .ok_or(ExperimentError::MissingInput("train_records"))?,
                taxonomy,
            )?,
            test: read(
                test.as_deref()
                    .ok_or(ExperimentError::MissingInput("test_records"))?,
                taxonomy,
            )?,
        }),
    }
}

/// The single record pool used by the split protocol and by ingestion.
pub fn load_pool(
    config: &ExperimentConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<Vec<AdviseeRecord>, ExperimentError> {
    match &config.source {
        DataSource::Synthetic { .. } => {
            let data = load_dataset(config, taxonomy)?;
            Ok(data.train.into_iter().chain(data.test).collect())
        }
        DataSource::Files { test, records, .. } => {
            let path = records
                .as_deref()
                .or(test.as_deref())
                .ok_or(ExperimentError::MissingInput("records"))?;
            read(path, taxonomy)
        }
    }
}

pub fn train_adviser(
    records: &[AdviseeRecord],
    train_config: &TrainConfig,
    labels: &LabelConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<TrainOutcome, ExperimentError> {
    let examples = examples_from_records(records, train_config.mode, labels)?;
    Ok(train(&examples, train_config, taxonomy)?)
}

/// Per-record adviser output: class-masked probabilities in classification
/// mode, raw predicted errors in regression mode.
pub fn adviser_scores(
    net: &AdviserNet,
    mode: Mode,
    records: &[AdviseeRecord],
    taxonomy: &KeypointTaxonomy,
) -> Result<Vec<Vec<f64>>, ExperimentError> {
    records
        .iter()
        .map(|r| {
            if r.features.is_empty() {
                return Err(ModelError::MissingFeatures(r.instance_id.clone()).into());
            }
            let logits = net.forward(&r.features)?;
            Ok(match mode {
                Mode::Classification => class_masked_probabilities(&logits, r.class, taxonomy),
                Mode::RegressionDegrees | Mode::RegressionRadians => logits,
            })
        })
        .collect()
}

/// An adviser row to be placed in a table.
pub struct AdviserRow {
    pub label: String,
    pub mode: Mode,
    pub scores: Vec<Vec<f64>>,
}

impl AdviserRow {
    pub fn new(
        label: impl Into<String>,
        net: &AdviserNet,
        mode: Mode,
        test: &[AdviseeRecord],
        taxonomy: &KeypointTaxonomy,
    ) -> Result<Self, ExperimentError> {
        Ok(Self {
            label: label.into(),
            mode,
            scores: adviser_scores(net, mode, test, taxonomy)?,
        })
    }
}

/// Bounds, baselines and the given adviser rows evaluated on `test`.
///
/// Priors are built from `test` itself. The sandwich is checked before returning.
pub fn policy_table(
    title: &str,
    test: &[AdviseeRecord],
    advisers: &[AdviserRow],
    taxonomy: &KeypointTaxonomy,
) -> Result<ResultsTable, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::MissingInput("test records"));
    }
    let frequency = frequency_prior_ranking(test, taxonomy)?;
    let performance = performance_prior_ranking(test, taxonomy)?;

    let mut table = ResultsTable::new(title);
    let mut push = |label: &str, role, policy: &Policy, scores: Option<&[Vec<f64>]>| {
        let metrics = evaluate_policy(policy, test, scores)?;
        table
            .rows
            .push(TableRow::from_metrics(label, role, &metrics));
        Ok::<_, SelectionError>(())
    };
    push(
        "Lower-bound",
        RowRole::LowerBound,
        &Policy::OracleLower,
        None,
    )?;
    push(
        "Advisee (expected)",
        RowRole::Baseline,
        &Policy::Expected,
        None,
    )?;
    push(
        "Frequency prior",
        RowRole::Baseline,
        &Policy::FrequencyPrior(frequency),
        None,
    )?;
    push(
        "Performance prior",
        RowRole::Baseline,
        &Policy::PerformancePrior(performance),
        None,
    )?;
    for adviser in advisers {
        let policy = match adviser.mode {
            Mode::Classification => Policy::AdviserClassification,
            _ => Policy::AdviserRegression,
        };
        push(
            &adviser.label,
            RowRole::Adviser,
            &policy,
            Some(&adviser.scores),
        )?;
    }
    push(
        "Upper-bound",
        RowRole::UpperBound,
        &Policy::OracleUpper,
        None,
    )?;

    table.external = external_rows();
    table.check_sandwich().map_err(ExperimentError::Sandwich)?;
    Ok(table)
}

/// Result of training one adviser and evaluating it against every policy.
#[derive(Debug, Clone)]
pub struct FullRun {
    pub table: ResultsTable,
    pub outcome: TrainOutcome,
}

pub fn run_full_experiment(
    data: &Dataset,
    config: &ExperimentConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<FullRun, ExperimentError> {
    let train_config = config.train_config();
    let outcome = train_adviser(&data.train, &train_config, &config.labels, taxonomy)?;
    let adviser = AdviserRow::new(
        "Adviser",
        &outcome.net,
        train_config.mode,
        &data.test,
        taxonomy,
    )?;
    let table = policy_table(
        "Advisee with and without adviser (full split)",
        &data.test,
        &[adviser],
        taxonomy,
    )?;
    Ok(FullRun { table, outcome })
}

/// Per-class stratified split; each class contributes `round(fraction·n)` training records.
pub fn stratified_split(
    records: &[AdviseeRecord],
    fraction: f64,
    seed: u64,
    repetition: usize,
) -> Dataset {
    let mut rng = substream(seed, "split", &[repetition.into()]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in ObjectClass::ALL {
        let mut idx: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].class == class)
            .collect();
        idx.shuffle(&mut rng);
        let cut = (fraction * idx.len() as f64).round() as usize;
        let (a, b) = idx.split_at(cut.min(idx.len()));
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        train.extend(a.into_iter().map(|i| records[i].clone()));
        test.extend(b.into_iter().map(|i| records[i].clone()));
    }
    Dataset { train, test }
}

/// Repeated seeded 70:30 splits aggregated as mean ± population std.
///
/// Repetitions run in parallel; results are collected by repetition index.
pub fn run_small_protocol(
    records: &[AdviseeRecord],
    config: &ExperimentConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<ResultsTable, ExperimentError> {
    config.validate()?;
    for class in ObjectClass::ALL {
        let count = records.iter().filter(|r| r.class == class).count();
        if count < MIN_RECORDS_PER_CLASS {
            return Err(ExperimentError::InsufficientRecords { class, count });
        }
    }
    let tables: Vec<ResultsTable> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let data = stratified_split(records, config.split_fraction, config.seed, rep);
            let train_config = TrainConfig {
                seed: substream(config.seed, "repetition", &[rep.into()]).next_u64(),
                ..config.train.clone()
            };
            let outcome = train_adviser(&data.train, &train_config, &config.labels, taxonomy)?;
            let adviser = AdviserRow::new(
                "Adviser",
                &outcome.net,
                train_config.mode,
                &data.test,
                taxonomy,
            )?;
            policy_table("repetition", &data.test, &[adviser], taxonomy)
        })
        .collect::<Result<_, _>>()?;

    let mut table = ResultsTable::aggregate(
        format!(
            "Advisee with and without adviser, {} seeded {:.0}:{:.0} splits (mean ± std)",
            config.repetitions,
            100.0 * config.split_fraction,
            100.0 * (1.0 - config.split_fraction)
        ),
        &tables,
    )
    .map_err(ExperimentError::Sandwich)?;
    table.external.clear();
    table.check_sandwich().map_err(ExperimentError::Sandwich)?;
    Ok(table)
}

/// Classification and both regression variants trained on the same split and seed.
pub fn compare_classification_regression(
    data: &Dataset,
    config: &ExperimentConfig,
    taxonomy: &KeypointTaxonomy,
) -> Result<ResultsTable, ExperimentError> {
    let variants = [
        (
            "Adviser (classification)",
            Mode::Classification,
            config.train.loss,
        ),
        (
            "Adviser (regression, degrees)",
            Mode::RegressionDegrees,
            LossKind::MaskedMse,
        ),
        (
            "Adviser (regression, radians)",
            Mode::RegressionRadians,
            LossKind::MaskedMse,
        ),
    ];
    let rows = variants
        .into_par_iter()
        .map(|(label, mode, loss)| {
            let train_config = TrainConfig {
                mode,
                loss,
                ..config.train_config()
            };
            let outcome = train_adviser(&data.train, &train_config, &config.labels, taxonomy)?;
            AdviserRow::new(label, &outcome.net, mode, &data.test, taxonomy)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    policy_table(
        "Classification against error regression",
        &data.test,
        &rows,
        taxonomy,
    )
}

/// One classification adviser per temperature on a shared split and seed.
pub fn temperature_sweep(
    data: &Dataset,
    config: &ExperimentConfig,
    temperatures: &[f64],
    taxonomy: &KeypointTaxonomy,
) -> Result<ResultsTable, ExperimentError> {
    if let Some(t) = temperatures.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(ConfigError::Invalid(format!("temperature {t} must be positive")).into());
    }
    let train_config = TrainConfig {
        mode: Mode::Classification,
        ..config.train_config()
    };
    let rows = temperatures
        .par_iter()
        .map(|&t| {
            let labels = LabelConfig {
                temperature: t,
                ..config.labels
            };
            let outcome = train_adviser(&data.train, &train_config, &labels, taxonomy)?;
            AdviserRow::new(
                format!("Adviser (T={t})"),
                &outcome.net,
                Mode::Classification,
                &data.test,
                taxonomy,
            )
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut table = policy_table("Soft-label temperature sweep", &data.test, &rows, taxonomy)?;
    let means: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.role == RowRole::Adviser)
        .filter_map(|r| r.accuracy.mean)
        .collect();
    if let (Some(lo), Some(hi)) = (
        means.iter().copied().reduce(f64::min),
        means.iter().copied().reduce(f64::max),
    ) {
        table.notes.push(format!(
            "Spread of adviser mean accuracy across temperatures: {:.2} points",
            hi - lo
        ));
    }
    Ok(table)
}
