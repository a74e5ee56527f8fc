//! Training targets derived from per-keypoint advisee errors.
//!
//! The classification target is a temperature softmax over negated errors,
//! restricted to the visible keypoints:
//!
//! ```text
//! y_i = exp(-e_i / T) / Σ_{j visible} exp(-e_j / T)   if i visible
//! y_i = 0                                              otherwise
//! ```
//!
//! Because only `e / T` enters, scaling errors and temperature together leaves
//! the label unchanged; degrees with `T = 10` is the default pairing.

use std::str::FromStr;

use thiserror::Error;

use crate::advisee::AdviseeRecord;
use crate::taxonomy::KEYPOINT_COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("record {0} has no visible keypoints")]
    EmptyRecord(String),
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("keypoint index {0} out of range")]
    Index(usize),
    #[error("unknown error unit {0:?}")]
    Units(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorUnits {
    #[default]
    Degrees,
    Radians,
}

impl ErrorUnits {
    pub fn convert_degrees(self, degrees: f64) -> f64 {
        match self {
            ErrorUnits::Degrees => degrees,
            ErrorUnits::Radians => degrees.to_radians(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorUnits::Degrees => "degrees",
            ErrorUnits::Radians => "radians",
        }
    }
}

impl FromStr for ErrorUnits {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "degrees" | "deg" => Ok(ErrorUnits::Degrees),
            "radians" | "rad" => Ok(ErrorUnits::Radians),
            other => Err(LabelError::Units(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    pub temperature: f64,
    pub error_units: ErrorUnits,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            temperature: 10.0,
            error_units: ErrorUnits::Degrees,
        }
    }
}

/// A distribution over the joint keypoint output, zero off the visible set.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn soft_label(record: &AdviseeRecord, config: &LabelConfig) -> Result<SoftLabel, LabelError> {
    let errors: Vec<(usize, f64)> = record
        .errors
        .iter()
        .map(|(k, e)| (*k, config.error_units.convert_degrees(*e)))
        .collect();
    soft_label_from_errors(&errors, config.temperature).map_err(|e| match e {
        LabelError::EmptyRecord(_) => LabelError::EmptyRecord(record.instance_id.clone()),
        other => other,
    })
}

/// Soft label from `(keypoint, error)` pairs, errors already in the desired units.
pub fn soft_label_from_errors(
    errors: &[(usize, f64)],
    temperature: f64,
) -> Result<SoftLabel, LabelError> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(LabelError::Temperature(temperature));
    }
    if errors.is_empty() {
        return Err(LabelError::EmptyRecord(String::new()));
    }
    if let Some((k, _)) = errors.iter().find(|(k, _)| *k >= KEYPOINT_COUNT) {
        return Err(LabelError::Index(*k));
    }
    // Shift by the smallest error so the largest weight is exactly 1.
    let min = errors.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = errors
        .iter()
        .map(|(_, e)| (-(e - min) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut label = vec![0.0; KEYPOINT_COUNT];
    for ((k, _), w) in errors.iter().zip(&weights) {
        label[*k] = w / total;
    }
    Ok(SoftLabel(label))
}

/// Per-keypoint regression targets and the visibility mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTargets {
    pub targets: Vec<f64>,
    pub mask: Vec<bool>,
}

pub fn regression_targets(
    record: &AdviseeRecord,
    units: ErrorUnits,
) -> Result<RegressionTargets, LabelError> {
    if record.errors.is_empty() {
        return Err(LabelError::EmptyRecord(record.instance_id.clone()));
    }
    let mut targets = vec![0.0; KEYPOINT_COUNT];
    let mut mask = vec![false; KEYPOINT_COUNT];
    for (&k, &e) in &record.errors {
        if k >= KEYPOINT_COUNT {
            return Err(LabelError::Index(k));
        }
        targets[k] = units.convert_degrees(e);
        mask[k] = true;
    }
    Ok(RegressionTargets { targets, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::ObjectClass;
    use std::collections::BTreeMap;

    fn record(errors: &[(usize, f64)]) -> AdviseeRecord {
        AdviseeRecord {
            instance_id: "r".into(),
            class: ObjectClass::Bus,
            features: vec![],
            errors: errors.iter().copied().collect::<BTreeMap<_, _>>(),
            truth: None,
            locations: BTreeMap::new(),
        }
    }

    #[test]
    fn equal_errors_split_evenly() {
        let l = soft_label(&record(&[(2, 7.0), (5, 7.0)]), &LabelConfig::default()).unwrap();
        assert_eq!(l.as_slice()[2], 0.5);
        assert_eq!(l.as_slice()[5], 0.5);
        assert_eq!(l.as_slice().iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn worked_example_at_temperature_ten() {
        // Independent numpy evaluation: [0.66524096, 0.24472847, 0.09003057].
        let l = soft_label(
            &record(&[(0, 10.0), (1, 20.0), (2, 30.0)]),
            &LabelConfig::default(),
        )
        .unwrap();
        let expected = [0.6652409557748219, 0.24472847105479767, 0.09003057317038046];
        for (got, want) in l.as_slice()[..3].iter().zip(expected) {
            assert!((got - want).abs() < 1e-5);
        }
        assert!(l.as_slice()[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn radians_label_matches_degrees_with_scaled_temperature() {
        let rec = record(&[(0, 10.0), (1, 25.0), (4, 90.0)]);
        let deg = soft_label(&rec, &LabelConfig::default()).unwrap();
        let rad = soft_label(
            &rec,
            &LabelConfig {
                temperature: 10f64.to_radians(),
                error_units: ErrorUnits::Radians,
            },
        )
        .unwrap();
        for (a, b) in deg.as_slice().iter().zip(rad.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            soft_label(&record(&[]), &LabelConfig::default()),
            Err(LabelError::EmptyRecord(_))
        ));
        let cfg = LabelConfig {
            temperature: 0.0,
            ..LabelConfig::default()
        };
        assert_eq!(
            soft_label(&record(&[(0, 1.0)]), &cfg),
            Err(LabelError::Temperature(0.0))
        );
        assert!(regression_targets(&record(&[]), ErrorUnits::Degrees).is_err());
        assert!("furlongs".parse::<ErrorUnits>().is_err());
    }

    #[test]
    fn large_errors_do_not_underflow_to_nan() {
        let l = soft_label_from_errors(&[(0, 179.0), (1, 180.0)], 1e-4).unwrap();
        assert_eq!(l.as_slice()[0], 1.0);
        assert_eq!(l.as_slice()[1], 0.0);
    }

    #[test]
    fn regression_units() {
        let rec = record(&[(3, 30.0)]);
        let rad = regression_targets(&rec, ErrorUnits::Radians).unwrap();
        assert!((rad.targets[3] - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
        assert_eq!(rad.mask.iter().filter(|m| **m).count(), 1);
        assert!(rad.mask[3]);

        let rec = record(&[(0, 12.5), (1, 3.0), (7, 44.0)]);
        let deg = regression_targets(&rec, ErrorUnits::Degrees).unwrap();
        let rad = regression_targets(&rec, ErrorUnits::Radians).unwrap();
        for k in [0, 1, 7] {
            assert!((deg.targets[k] - rad.targets[k].to_degrees()).abs() < 1e-12);
        }
        let argmin = (0..KEYPOINT_COUNT)
            .filter(|k| deg.mask[*k])
            .min_by(|a, b| deg.targets[*a].total_cmp(&deg.targets[*b]))
            .unwrap();
        assert_eq!(argmin, 1);
    }
}
