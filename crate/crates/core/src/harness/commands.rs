//! Subcommand bodies. Each writes its outputs plus `run_config.txt` into the
//! configured output directory and returns a short summary for the terminal.
//! Nothing time- or host-dependent is written, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;

use super::config::{DataSource, ExperimentConfig, ExperimentMode};
use super::experiment::{
    compare_classification_regression, load_dataset, load_pool, load_taxonomy, policy_table,
    run_full_experiment, run_small_protocol, temperature_sweep, train_adviser, AdviserRow,
    ExperimentError,
};
use super::reference::{compare_rows, FULL_TEST_SET, NON_LEARNED_LABELS, REFERENCE_TOLERANCE};
use crate::advisee::{ingest_records, write_records, AdviseeRecord};
use crate::model::{Checkpoint, TrainOutcome};
use crate::taxonomy::ObjectClass;

fn prepare(
    config: &ExperimentConfig,
    mode: ExperimentMode,
) -> Result<ExperimentConfig, ExperimentError> {
    let mut config = config.clone();
    config.mode = mode;
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("run_config.txt"), config.to_text())?;
    Ok(config)
}

fn loss_trace_csv(outcome: &TrainOutcome) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        let _ = writeln!(out, "{epoch},{loss}");
    }
    out
}

fn class_counts(records: &[AdviseeRecord]) -> String {
    ObjectClass::ALL
        .iter()
        .map(|c| {
            format!(
                "{}={}",
                c.name(),
                records.iter().filter(|r| r.class == *c).count()
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Synthetic records written as `train.jsonl` and `test.jsonl`.
pub fn generate(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Generate)?;
    if !matches!(config.source, DataSource::Synthetic { .. }) {
        return Err(ExperimentError::MissingInput("synthetic source"));
    }
    let taxonomy = load_taxonomy(&config)?;
    let data = load_dataset(&config, &taxonomy)?;
    write_records(config.out_dir.join("train.jsonl"), &data.train, &taxonomy)?;
    write_records(config.out_dir.join("test.jsonl"), &data.test, &taxonomy)?;
    Ok(format!(
        "wrote {} train records ({}) and {} test records ({})",
        data.train.len(),
        class_counts(&data.train),
        data.test.len(),
        class_counts(&data.test)
    ))
}

/// Validates a record file and reports the non-learned rows computed from it.
pub fn ingest(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Ingest)?;
    let taxonomy = load_taxonomy(&config)?;
    let records = load_pool(&config, &taxonomy)?;
    let table = policy_table(
        "Non-learned policies on ingested records",
        &records,
        &[],
        &taxonomy,
    )?;
    table.write(&config.out_dir, "baselines")?;

    let mismatches = compare_rows(
        &table,
        &FULL_TEST_SET,
        &NON_LEARNED_LABELS,
        REFERENCE_TOLERANCE,
    );
    let visible: usize = records.iter().map(|r| r.errors.len()).sum();
    let mut summary = String::new();
    let _ = writeln!(summary, "records: {}", records.len());
    let _ = writeln!(summary, "classes: {}", class_counts(&records));
    let _ = writeln!(
        summary,
        "visible keypoints per record: {:.4}",
        visible as f64 / records.len() as f64
    );
    let _ = writeln!(
        summary,
        "records with features: {}",
        records.iter().filter(|r| !r.features.is_empty()).count()
    );
    let _ = writeln!(
        summary,
        "cells differing from the published full test-set values by more than {REFERENCE_TOLERANCE}: {}",
        mismatches.len()
    );
    for m in &mismatches {
        let got = m
            .got
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "absent".into());
        let _ = writeln!(
            summary,
            "  {} {}: expected {:.2}, got {got}",
            m.row, m.column, m.expected
        );
    }
    fs::write(config.out_dir.join("ingest_summary.txt"), &summary)?;
    Ok(summary)
}

/// Trains on the training records and writes the checkpoint and loss trace.
pub fn train(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Full)?;
    let taxonomy = load_taxonomy(&config)?;
    let records = match &config.source {
        DataSource::Synthetic { .. } => load_dataset(&config, &taxonomy)?.train,
        DataSource::Files { train, .. } => ingest_records(
            train
                .as_deref()
                .ok_or(ExperimentError::MissingInput("train_records"))?,
            &taxonomy,
        )?,
    };
    let train_config = config.train_config();
    let outcome = train_adviser(&records, &train_config, &config.labels, &taxonomy)?;
    Checkpoint {
        mode: train_config.mode,
        net: outcome.net.clone(),
    }
    .save(config.out_dir.join("adviser.ckpt.json"))?;
    fs::write(
        config.out_dir.join("loss_trace.csv"),
        loss_trace_csv(&outcome),
    )?;
    Ok(format!(
        "trained {} adviser on {} records; final epoch loss {:.6}",
        train_config.mode,
        records.len(),
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN)
    ))
}

/// Evaluates a saved checkpoint on the test records.
pub fn evaluate(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Full)?;
    let taxonomy = load_taxonomy(&config)?;
    let path = config
        .checkpoint
        .clone()
        .ok_or(ExperimentError::MissingInput("checkpoint"))?;
    let checkpoint = Checkpoint::load(path)?;
    let test = match &config.source {
        DataSource::Synthetic { .. } => load_dataset(&config, &taxonomy)?.test,
        DataSource::Files { .. } => load_pool(&config, &taxonomy)?,
    };
    let adviser = AdviserRow::new(
        "Adviser",
        &checkpoint.net,
        checkpoint.mode,
        &test,
        &taxonomy,
    )?;
    let table = policy_table(
        "Advisee with and without adviser (full split)",
        &test,
        &[adviser],
        &taxonomy,
    )?;
    table.write(&config.out_dir, "table1")?;
    Ok(table.to_text())
}

/// Trains and evaluates in one go, writing the checkpoint, loss trace and table.
pub fn full(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Full)?;
    let taxonomy = load_taxonomy(&config)?;
    let data = load_dataset(&config, &taxonomy)?;
    let run = run_full_experiment(&data, &config, &taxonomy)?;
    Checkpoint {
        mode: config.train.mode,
        net: run.outcome.net.clone(),
    }
    .save(config.out_dir.join("adviser.ckpt.json"))?;
    fs::write(
        config.out_dir.join("loss_trace.csv"),
        loss_trace_csv(&run.outcome),
    )?;
    run.table.write(&config.out_dir, "table1")?;
    Ok(run.table.to_text())
}

pub fn small(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Small)?;
    let taxonomy = load_taxonomy(&config)?;
    let records = load_pool(&config, &taxonomy)?;
    let table = run_small_protocol(&records, &config, &taxonomy)?;
    table.write(&config.out_dir, "table2")?;
    Ok(table.to_text())
}

pub fn compare(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Compare)?;
    let taxonomy = load_taxonomy(&config)?;
    let data = load_dataset(&config, &taxonomy)?;
    let table = compare_classification_regression(&data, &config, &taxonomy)?;
    table.write(&config.out_dir, "table3")?;
    Ok(table.to_text())
}

pub fn sweep(config: &ExperimentConfig) -> Result<String, ExperimentError> {
    let config = prepare(config, ExperimentMode::Sweep)?;
    let taxonomy = load_taxonomy(&config)?;
    let data = load_dataset(&config, &taxonomy)?;
    let table = temperature_sweep(&data, &config, &config.temperatures, &taxonomy)?;
    table.write(&config.out_dir, "sweep")?;
    Ok(table.to_text())
}
