//! The advisee: a black-box viewpoint estimator `f(x, q)` that consumes one
//! keypoint hint, plus the per-keypoint error records the adviser learns from.

mod records;
mod synthetic;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::so3::{pose_error_degrees, EulerPose, GeometryError};
use crate::taxonomy::{KeypointTaxonomy, ObjectClass};

pub use records::{
    ingest_records, parse_records, write_records, IngestError, LineError, LineErrorKind,
};
pub use synthetic::{
    default_informativeness, generate_dataset, HiddenState, SyntheticAdvisee,
    SyntheticAdviseeParams, SyntheticDataset, FEATURE_DIM,
};

/// Largest possible geodesic error, in degrees.
pub const MAX_ERROR_DEG: f64 = 180.0;

#[derive(Debug, Error)]
pub enum AdviseeError {
    #[error("keypoint {keypoint} is not visible on instance {instance}")]
    InvalidQuery { instance: String, keypoint: usize },
    #[error("instance {0} is unknown to this advisee")]
    UnknownInstance(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid record {id}: {message}")]
    InvalidRecord { id: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A query answer `(k, u, v)`: keypoint identity plus its pixel location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointAnnotation {
    pub keypoint: usize,
    pub u: f64,
    pub v: f64,
}

/// One input image, reduced to a feature vector at this scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub class: ObjectClass,
    pub features: Vec<f64>,
    /// Visible keypoints in ascending index order.
    pub visible: Vec<KeypointAnnotation>,
    pub truth: EulerPose,
}

impl Instance {
    pub fn annotation(&self, keypoint: usize) -> Option<&KeypointAnnotation> {
        self.visible.iter().find(|a| a.keypoint == keypoint)
    }
}

/// A viewpoint estimator guided by one keypoint.
pub trait Advisee {
    fn estimate(
        &self,
        instance: &Instance,
        query: &KeypointAnnotation,
    ) -> Result<EulerPose, AdviseeError>;
}

/// Per-keypoint geodesic errors of the advisee on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AdviseeRecord {
    pub instance_id: String,
    pub class: ObjectClass,
    pub features: Vec<f64>,
    /// Global keypoint index → error in degrees; keys are exactly the visible set.
    pub errors: BTreeMap<usize, f64>,
    pub truth: Option<EulerPose>,
    pub locations: BTreeMap<usize, (f64, f64)>,
}

impl AdviseeRecord {
    pub fn visible(&self) -> impl Iterator<Item = usize> + '_ {
        self.errors.keys().copied()
    }

    pub fn error(&self, keypoint: usize) -> Option<f64> {
        self.errors.get(&keypoint).copied()
    }

    pub fn min_error(&self) -> Option<f64> {
        self.errors.values().copied().reduce(f64::min)
    }

    pub fn max_error(&self) -> Option<f64> {
        self.errors.values().copied().reduce(f64::max)
    }

    /// Checks the visible set is nonempty and in-slice, and every error lies in `[0, 180]`.
    pub fn validate(&self, taxonomy: &KeypointTaxonomy) -> Result<(), AdviseeError> {
        let invalid = |message: String| AdviseeError::InvalidRecord {
            id: self.instance_id.clone(),
            message,
        };
        if self.errors.is_empty() {
            return Err(invalid("no visible keypoints".into()));
        }
        let slice = taxonomy.class_slice(self.class);
        for (&k, &e) in &self.errors {
            if !slice.contains(&k) {
                return Err(invalid(format!(
                    "keypoint {k} outside class {}",
                    self.class
                )));
            }
            if !(0.0..=MAX_ERROR_DEG).contains(&e) {
                return Err(invalid(format!(
                    "error {e} for keypoint {k} outside [0, 180]"
                )));
            }
        }
        if let Some(k) = self.locations.keys().find(|k| !self.errors.contains_key(k)) {
            return Err(invalid(format!("location for invisible keypoint {k}")));
        }
        Ok(())
    }
}

/// Runs the advisee once per visible keypoint and records each geodesic error.
pub fn build_record<A: Advisee + ?Sized>(
    advisee: &A,
    instance: &Instance,
) -> Result<AdviseeRecord, AdviseeError> {
    if instance.visible.is_empty() {
        return Err(AdviseeError::InvalidRecord {
            id: instance.id.clone(),
            message: "no visible keypoints".into(),
        });
    }
    let mut errors = BTreeMap::new();
    let mut locations = BTreeMap::new();
    for query in &instance.visible {
        let estimate = advisee.estimate(instance, query)?;
        errors.insert(
            query.keypoint,
            pose_error_degrees(&estimate, &instance.truth),
        );
        locations.insert(query.keypoint, (query.u, query.v));
    }
    Ok(AdviseeRecord {
        instance_id: instance.id.clone(),
        class: instance.class,
        features: instance.features.clone(),
        errors,
        truth: Some(instance.truth),
        locations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Perfect;

    impl Advisee for Perfect {
        fn estimate(
            &self,
            instance: &Instance,
            _query: &KeypointAnnotation,
        ) -> Result<EulerPose, AdviseeError> {
            Ok(instance.truth)
        }
    }

    fn instance(visible: &[usize]) -> Instance {
        Instance {
            id: "i0".into(),
            class: ObjectClass::Car,
            features: vec![1.0],
            visible: visible
                .iter()
                .map(|&keypoint| KeypointAnnotation {
                    keypoint,
                    u: 1.0,
                    v: 2.0,
                })
                .collect(),
            truth: EulerPose::new(1.0, 0.2, -0.1).unwrap(),
        }
    }

    #[test]
    fn record_cardinality_matches_visible_set() {
        let rec = build_record(&Perfect, &instance(&[15])).unwrap();
        assert_eq!(rec.errors.len(), 1);
        assert_eq!(rec.error(15), Some(0.0));
        let rec = build_record(&Perfect, &instance(&[12, 13, 20])).unwrap();
        assert_eq!(rec.visible().collect::<Vec<_>>(), vec![12, 13, 20]);
        assert!(rec.errors.values().all(|e| *e == 0.0));
        rec.validate(KeypointTaxonomy::pascal_vehicles()).unwrap();
    }

    #[test]
    fn empty_visible_set_rejected() {
        assert!(build_record(&Perfect, &instance(&[])).is_err());
    }

    #[test]
    fn validate_catches_bad_records() {
        let t = KeypointTaxonomy::pascal_vehicles();
        let mut rec = build_record(&Perfect, &instance(&[12])).unwrap();
        rec.errors.insert(3, 1.0);
        assert!(rec.validate(t).is_err());
        rec.errors.remove(&3);
        rec.errors.insert(13, 181.0);
        assert!(rec.validate(t).is_err());
        rec.errors.insert(13, 10.0);
        rec.validate(t).unwrap();
        rec.locations.insert(14, (0.0, 0.0));
        assert!(rec.validate(t).is_err());
    }
}
