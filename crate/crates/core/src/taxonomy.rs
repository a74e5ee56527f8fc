//! Object classes and the joint keypoint vocabulary.
//!
//! The adviser predicts over one shared output of [`KEYPOINT_COUNT`] entries.
//! Each object class owns a contiguous slice of that output; the slices are
//! defined by a plain-text taxonomy file with one `class,keypoint_name` pair
//! per line, in global index order.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the joint keypoint output.
pub const KEYPOINT_COUNT: usize = 34;

const PASCAL_VEHICLES: &str = include_str!("../data/pascal_vehicles.txt");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("taxonomy has {0} keypoints, expected {KEYPOINT_COUNT}")]
    Count(usize),
    #[error("class {0} is missing or not contiguous")]
    Layout(ObjectClass),
    #[error("unknown object class {0:?}")]
    UnknownClass(String),
    #[error("keypoint {name:?} does not belong to class {class}")]
    UnknownKeypoint { class: ObjectClass, name: String },
    #[error("keypoint index {0} out of range")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Bus,
    Car,
    Motorbike,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::Bus, ObjectClass::Car, ObjectClass::Motorbike];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Bus => "bus",
            ObjectClass::Car => "car",
            ObjectClass::Motorbike => "motorbike",
        }
    }

    /// Column label used in reports.
    pub fn short_label(self) -> &'static str {
        match self {
            ObjectClass::Bus => "Bus",
            ObjectClass::Car => "Car",
            ObjectClass::Motorbike => "M.bike",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bus" => Ok(ObjectClass::Bus),
            "car" => Ok(ObjectClass::Car),
            "motorbike" => Ok(ObjectClass::Motorbike),
            other => Err(TaxonomyError::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keypoint {
    pub class: ObjectClass,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct KeypointTaxonomy {
    keypoints: Vec<Keypoint>,
    slices: [Range<usize>; 3],
    lookup: HashMap<(ObjectClass, String), usize>,
}

impl KeypointTaxonomy {
    /// The bundled bus/car/motorbike vocabulary (12 + 12 + 10 keypoints).
    pub fn pascal_vehicles() -> &'static KeypointTaxonomy {
        static DEFAULT: OnceLock<KeypointTaxonomy> = OnceLock::new();
        DEFAULT.get_or_init(|| {
            Self::parse(PASCAL_VEHICLES).expect("bundled taxonomy file is well formed")
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `class,keypoint_name` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut keypoints = Vec::new();
        let mut lookup = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| TaxonomyError::Parse {
                line: lineno + 1,
                message,
            };
            let (class, name) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected `class,keypoint_name`".into()))?;
            let class: ObjectClass = class.parse().map_err(|e| parse_err(format!("{e}")))?;
            let name = name.trim();
            if name.is_empty() || name.contains(',') {
                return Err(parse_err(format!("bad keypoint name {name:?}")));
            }
            if lookup
                .insert((class, name.to_string()), keypoints.len())
                .is_some()
            {
                return Err(parse_err(format!("duplicate keypoint {class},{name}")));
            }
            keypoints.push(Keypoint {
                class,
                name: name.to_string(),
            });
        }
        if keypoints.len() != KEYPOINT_COUNT {
            return Err(TaxonomyError::Count(keypoints.len()));
        }

        let mut slices = [0..0, 0..0, 0..0];
        for class in ObjectClass::ALL {
            let first = keypoints
                .iter()
                .position(|k| k.class == class)
                .ok_or(TaxonomyError::Layout(class))?;
            let len = keypoints[first..]
                .iter()
                .take_while(|k| k.class == class)
                .count();
            let total = keypoints.iter().filter(|k| k.class == class).count();
            if len != total {
                return Err(TaxonomyError::Layout(class));
            }
            slices[class.index()] = first..first + len;
        }

        Ok(Self {
            keypoints,
            slices,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn class_slice(&self, class: ObjectClass) -> Range<usize> {
        self.slices[class.index()].clone()
    }

    pub fn keypoint_index(&self, class: ObjectClass, name: &str) -> Result<usize, TaxonomyError> {
        self.lookup
            .get(&(class, name.to_string()))
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownKeypoint {
                class,
                name: name.to_string(),
            })
    }

    pub fn keypoint(&self, index: usize) -> Result<&Keypoint, TaxonomyError> {
        self.keypoints
            .get(index)
            .ok_or(TaxonomyError::IndexOutOfRange(index))
    }

    /// Class owning a global index.
    pub fn class_of(&self, index: usize) -> Option<ObjectClass> {
        self.keypoints.get(index).map(|k| k.class)
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }
}
