//! Per-class accuracy and median geodesic error of a selection policy.

use crate::advisee::AdviseeRecord;
use crate::selection::{expected_error, select_keypoint, Policy, SelectionError};
use crate::taxonomy::ObjectClass;

/// An estimate counts as correct when its error is strictly below 30° (π/6).
pub const ACCURACY_THRESHOLD_DEG: f64 = 30.0;

/// Order-statistic median; the midpoint of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    /// Percent of records counted correct.
    pub accuracy: f64,
    /// Degrees.
    pub median_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyMetrics {
    /// Indexed by [`ObjectClass::index`]; `None` when the class has no records.
    pub per_class: [Option<ClassMetrics>; 3],
}

impl PolicyMetrics {
    pub fn class(&self, class: ObjectClass) -> Option<&ClassMetrics> {
        self.per_class[class.index()].as_ref()
    }

    fn mean_of(&self, f: impl Fn(&ClassMetrics) -> f64) -> Option<f64> {
        let present: Vec<f64> = self.per_class.iter().flatten().map(f).collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }

    /// Unweighted mean over present classes.
    pub fn mean_accuracy(&self) -> Option<f64> {
        self.mean_of(|m| m.accuracy)
    }

    pub fn mean_median_error(&self) -> Option<f64> {
        self.mean_of(|m| m.median_error)
    }
}

/// One record's contribution: the error and correctness attributed to the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub class: ObjectClass,
    pub error: f64,
    /// 0/1 for single-choice policies; the visible-keypoint mean for the expected baseline.
    pub hit: f64,
}

fn hit(error: f64) -> f64 {
    if error < ACCURACY_THRESHOLD_DEG {
        1.0
    } else {
        0.0
    }
}

/// Reduces every record to exactly one outcome under `policy`.
///
/// `scores[i]` holds the adviser output for `records[i]` and is only consulted
/// by the adviser policies.
pub fn policy_outcomes(
    policy: &Policy,
    records: &[AdviseeRecord],
    scores: Option<&[Vec<f64>]>,
) -> Result<Vec<Outcome>, SelectionError> {
    if let Some(s) = scores {
        if s.len() != records.len() {
            return Err(SelectionError::ScoreWidth(s.len()));
        }
    }
    records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            if matches!(policy, Policy::Expected) {
                let n = record.errors.len() as f64;
                return Ok(Outcome {
                    class: record.class,
                    error: expected_error(record)?,
                    hit: record.errors.values().map(|e| hit(*e)).sum::<f64>() / n,
                });
            }
            let row = scores.map(|s| s[i].as_slice());
            let k = select_keypoint(policy, record, row)?;
            let error = record.errors[&k];
            Ok(Outcome {
                class: record.class,
                error,
                hit: hit(error),
            })
        })
        .collect()
}

pub fn metrics_from_outcomes(outcomes: &[Outcome]) -> PolicyMetrics {
    let mut metrics = PolicyMetrics::default();
    for class in ObjectClass::ALL {
        let of_class: Vec<&Outcome> = outcomes.iter().filter(|o| o.class == class).collect();
        if of_class.is_empty() {
            continue;
        }
        let errors: Vec<f64> = of_class.iter().map(|o| o.error).collect();
        let hits: f64 = of_class.iter().map(|o| o.hit).sum();
        metrics.per_class[class.index()] = Some(ClassMetrics {
            accuracy: 100.0 * hits / of_class.len() as f64,
            median_error: median(&errors).expect("nonempty"),
            count: of_class.len(),
        });
    }
    metrics
}

pub fn evaluate_policy(
    policy: &Policy,
    records: &[AdviseeRecord],
    scores: Option<&[Vec<f64>]>,
) -> Result<PolicyMetrics, SelectionError> {
    Ok(metrics_from_outcomes(&policy_outcomes(
        policy, records, scores,
    )?))
}
