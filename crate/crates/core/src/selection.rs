//! Query-selection policies: the learned adviser, both oracles, the
//! expected-performance baseline and the two fixed priors.
//!
//! All choices are restricted to keypoints visible on the record and ties are
//! broken towards the lowest global index.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::advisee::AdviseeRecord;
use crate::taxonomy::{KeypointTaxonomy, ObjectClass, KEYPOINT_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("policy {0} needs adviser scores")]
    MissingScores(&'static str),
    #[error("expected {KEYPOINT_COUNT} scores, got {0}")]
    ScoreWidth(usize),
    #[error("non-finite adviser score for keypoint {0}")]
    NonFiniteScore(usize),
    #[error("record {0} has no visible keypoints")]
    EmptyRecord(String),
    #[error("the expected-performance baseline averages over keypoints and selects none")]
    NoSingleChoice,
    #[error("no reference records to build a prior from")]
    NoReferenceRecords,
    #[error("prior ranking has no visible keypoint for record {0}")]
    NoApplicableKeypoint(String),
}

/// Per-class keypoint ordering, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorRanking {
    per_class: [Vec<usize>; 3],
}

impl PriorRanking {
    pub fn ranking(&self, class: ObjectClass) -> &[usize] {
        &self.per_class[class.index()]
    }

    /// Highest-ranked keypoint visible on the record.
    pub fn first_applicable(&self, record: &AdviseeRecord) -> Option<usize> {
        self.ranking(record.class)
            .iter()
            .copied()
            .find(|k| record.errors.contains_key(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Highest adviser probability among visible keypoints.
    AdviserClassification,
    /// Lowest adviser-predicted error among visible keypoints.
    AdviserRegression,
    /// Friendly oracle: minimum true error.
    OracleUpper,
    /// Adversarial oracle: maximum true error.
    OracleLower,
    /// Mean over all visible keypoints (no single choice).
    Expected,
    FrequencyPrior(PriorRanking),
    PerformancePrior(PriorRanking),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::AdviserClassification => "adviser-classification",
            Policy::AdviserRegression => "adviser-regression",
            Policy::OracleUpper => "oracle-upper",
            Policy::OracleLower => "oracle-lower",
            Policy::Expected => "expected",
            Policy::FrequencyPrior(_) => "frequency-prior",
            Policy::PerformancePrior(_) => "performance-prior",
        }
    }

    pub fn needs_scores(&self) -> bool {
        matches!(
            self,
            Policy::AdviserClassification | Policy::AdviserRegression
        )
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First visible keypoint that is best under `better`, scanning in index order.
fn best_visible(
    record: &AdviseeRecord,
    value: impl Fn(usize) -> f64,
    better: Ordering,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in record.visible() {
        let v = value(k);
        match best {
            Some((_, b)) if v.total_cmp(&b) != better => {}
            _ => best = Some((k, v)),
        }
    }
    best.map(|(k, _)| k)
}

pub fn select_keypoint(
    policy: &Policy,
    record: &AdviseeRecord,
    scores: Option<&[f64]>,
) -> Result<usize, SelectionError> {
    if record.errors.is_empty() {
        return Err(SelectionError::EmptyRecord(record.instance_id.clone()));
    }
    let checked_scores = || -> Result<&[f64], SelectionError> {
        let s = scores.ok_or(SelectionError::MissingScores(policy.name()))?;
        if s.len() != KEYPOINT_COUNT {
            return Err(SelectionError::ScoreWidth(s.len()));
        }
        if let Some(k) = record.visible().find(|k| !s[*k].is_finite()) {
            return Err(SelectionError::NonFiniteScore(k));
        }
        Ok(s)
    };
    let error_of = |k: usize| record.errors[&k];
    let chosen = match policy {
        Policy::AdviserClassification => {
            let s = checked_scores()?;
            best_visible(record, |k| s[k], Ordering::Greater)
        }
        Policy::AdviserRegression => {
            let s = checked_scores()?;
            best_visible(record, |k| s[k], Ordering::Less)
        }
        Policy::OracleUpper => best_visible(record, error_of, Ordering::Less),
        Policy::OracleLower => best_visible(record, error_of, Ordering::Greater),
        Policy::Expected => return Err(SelectionError::NoSingleChoice),
        Policy::FrequencyPrior(r) | Policy::PerformancePrior(r) => {
            return r
                .first_applicable(record)
                .ok_or_else(|| SelectionError::NoApplicableKeypoint(record.instance_id.clone()))
        }
    };
    Ok(chosen.expect("record has a visible keypoint"))
}

/// Mean error over the visible keypoints, degrees.
pub fn expected_error(record: &AdviseeRecord) -> Result<f64, SelectionError> {
    if record.errors.is_empty() {
        return Err(SelectionError::EmptyRecord(record.instance_id.clone()));
    }
    Ok(record.errors.values().sum::<f64>() / record.errors.len() as f64)
}

fn rank_by(
    records: &[AdviseeRecord],
    taxonomy: &KeypointTaxonomy,
    key: impl Fn(usize, &[usize], &[f64]) -> (u8, f64),
) -> Result<PriorRanking, SelectionError> {
    if records.is_empty() {
        return Err(SelectionError::NoReferenceRecords);
    }
    let mut counts = vec![0usize; KEYPOINT_COUNT];
    let mut sums = vec![0.0; KEYPOINT_COUNT];
    for r in records {
        for (&k, &e) in &r.errors {
            counts[k] += 1;
            sums[k] += e;
        }
    }
    let per_class = ObjectClass::ALL.map(|class| {
        let mut ranking: Vec<usize> = taxonomy.class_slice(class).collect();
        // Stable sort keeps index order among ties.
        ranking.sort_by(|a, b| {
            let (ga, va) = key(*a, &counts, &sums);
            let (gb, vb) = key(*b, &counts, &sums);
            ga.cmp(&gb).then(va.total_cmp(&vb))
        });
        ranking
    });
    Ok(PriorRanking { per_class })
}

/// Keypoints by descending visibility count in the reference records.
pub fn frequency_prior_ranking(
    records: &[AdviseeRecord],
    taxonomy: &KeypointTaxonomy,
) -> Result<PriorRanking, SelectionError> {
    rank_by(records, taxonomy, |k, counts, _| (0, -(counts[k] as f64)))
}

/// Keypoints by ascending mean error where visible; never-seen keypoints last.
pub fn performance_prior_ranking(
    records: &[AdviseeRecord],
    taxonomy: &KeypointTaxonomy,
) -> Result<PriorRanking, SelectionError> {
    rank_by(records, taxonomy, |k, counts, sums| {
        if counts[k] == 0 {
            (1, 0.0)
        } else {
            (0, sums[k] / counts[k] as f64)
        }
    })
}
