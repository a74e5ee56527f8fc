//! JSON-Lines record files.
//!
//! One object per line:
//!
//! ```text
//! {"id": "...", "class": "car", "features": [..], "truth_pose_deg": [az, pitch, roll],
//!  "errors": {"left_front_wheel": 4.2, ...}, "locations": {"left_front_wheel": [u, v], ...}}
//! ```
//!
//! `features`, `truth_pose_deg` and `locations` are optional. Error keys are
//! keypoint names of the record's class; a bare integer key is read as a
//! global keypoint index. Angles and errors are degrees on the wire.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AdviseeRecord, MAX_ERROR_DEG};
use crate::so3::EulerPose;
use crate::taxonomy::{KeypointTaxonomy, ObjectClass};

#[derive(Debug, Clone, PartialEq)]
pub enum LineErrorKind {
    Parse(String),
    TaxonomyMismatch(String),
    OutOfRange { keypoint: String, value: f64 },
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LineErrorKind::Parse(m) => write!(f, "line {}: parse error: {m}", self.line),
            LineErrorKind::TaxonomyMismatch(m) => {
                write!(f, "line {}: taxonomy mismatch: {m}", self.line)
            }
            LineErrorKind::OutOfRange { keypoint, value } => write!(
                f,
                "line {}: error {value} for keypoint {keypoint} outside [0, 180]",
                self.line
            ),
            LineErrorKind::Invalid(m) => write!(f, "line {}: {m}", self.line),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{} malformed line(s); first: {}", .0.len(), .0[0])]
    Malformed(Vec<LineError>),
}

impl IngestError {
    pub fn line_errors(&self) -> &[LineError] {
        match self {
            IngestError::Malformed(errors) => errors,
            IngestError::Io(_) => &[],
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    id: String,
    class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_pose_deg: Option<[f64; 3]>,
    errors: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    locations: Option<BTreeMap<String, [f64; 2]>>,
}

/// Reads and validates a record file.
pub fn ingest_records(
    path: impl AsRef<Path>,
    taxonomy: &KeypointTaxonomy,
) -> Result<Vec<AdviseeRecord>, IngestError> {
    let reader = BufReader::new(File::open(path)?);
    parse_records(reader, taxonomy)
}

/// Parses every line, collecting all line errors before failing.
pub fn parse_records<R: BufRead>(
    reader: R,
    taxonomy: &KeypointTaxonomy,
) -> Result<Vec<AdviseeRecord>, IngestError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut feature_dim: Option<usize> = None;

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match parse_line(&line, taxonomy) {
            Ok(r) => r,
            Err(kind) => {
                errors.push(LineError { line: lineno, kind });
                continue;
            }
        };
        if !seen_ids.insert(record.instance_id.clone()) {
            errors.push(LineError {
                line: lineno,
                kind: LineErrorKind::Invalid(format!("duplicate id {:?}", record.instance_id)),
            });
            continue;
        }
        if !record.features.is_empty() {
            match feature_dim {
                None => feature_dim = Some(record.features.len()),
                Some(d) if d != record.features.len() => {
                    errors.push(LineError {
                        line: lineno,
                        kind: LineErrorKind::Invalid(format!(
                            "feature dimension {} differs from {d}",
                            record.features.len()
                        )),
                    });
                    continue;
                }
                Some(_) => {}
            }
        }
        records.push(record);
    }

    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::Malformed(errors))
    }
}

fn parse_line(line: &str, taxonomy: &KeypointTaxonomy) -> Result<AdviseeRecord, LineErrorKind> {
    let wire: WireRecord =
        serde_json::from_str(line).map_err(|e| LineErrorKind::Parse(e.to_string()))?;
    let class: ObjectClass = wire
        .class
        .parse()
        .map_err(|e| LineErrorKind::TaxonomyMismatch(format!("{e}")))?;
    let slice = taxonomy.class_slice(class);

    let resolve = |key: &str| -> Result<usize, LineErrorKind> {
        let index = match key.parse::<usize>() {
            Ok(index) => index,
            Err(_) => taxonomy
                .keypoint_index(class, key)
                .map_err(|e| LineErrorKind::TaxonomyMismatch(e.to_string()))?,
        };
        if slice.contains(&index) {
            Ok(index)
        } else {
            Err(LineErrorKind::TaxonomyMismatch(format!(
                "keypoint index {index} does not belong to class {class}"
            )))
        }
    };

    if wire.errors.is_empty() {
        return Err(LineErrorKind::Invalid("no visible keypoints".into()));
    }
    let mut errors = BTreeMap::new();
    for (key, value) in &wire.errors {
        let index = resolve(key)?;
        if !(value.is_finite() && (0.0..=MAX_ERROR_DEG).contains(value)) {
            return Err(LineErrorKind::OutOfRange {
                keypoint: key.clone(),
                value: *value,
            });
        }
        if errors.insert(index, *value).is_some() {
            return Err(LineErrorKind::Invalid(format!(
                "keypoint {key} listed twice"
            )));
        }
    }

    let mut locations = BTreeMap::new();
    for (key, [u, v]) in wire.locations.unwrap_or_default() {
        let index = resolve(&key)?;
        if !errors.contains_key(&index) {
            return Err(LineErrorKind::Invalid(format!(
                "location given for keypoint {key} without an error"
            )));
        }
        if !(u.is_finite() && v.is_finite() && u >= 0.0 && v >= 0.0) {
            return Err(LineErrorKind::Invalid(format!("bad location for {key}")));
        }
        locations.insert(index, (u, v));
    }

    let features = wire.features.unwrap_or_default();
    if features.iter().any(|v| !v.is_finite()) {
        return Err(LineErrorKind::Invalid("non-finite feature".into()));
    }
    let truth = wire
        .truth_pose_deg
        .map(|[a, p, r]| EulerPose::from_degrees(a, p, r))
        .transpose()
        .map_err(|e| LineErrorKind::Invalid(e.to_string()))?;

    Ok(AdviseeRecord {
        instance_id: wire.id,
        class,
        features,
        errors,
        truth,
        locations,
    })
}

/// Writes records as JSON Lines, keyed by keypoint name.
pub fn write_records(
    path: impl AsRef<Path>,
    records: &[AdviseeRecord],
    taxonomy: &KeypointTaxonomy,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        let name = |k: usize| -> std::io::Result<String> {
            taxonomy
                .keypoint(k)
                .map(|kp| kp.name.clone())
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))
        };
        let errors = record
            .errors
            .iter()
            .map(|(k, e)| Ok((name(*k)?, *e)))
            .collect::<std::io::Result<_>>()?;
        let locations = if record.locations.is_empty() {
            None
        } else {
            Some(
                record
                    .locations
                    .iter()
                    .map(|(k, (u, v))| Ok((name(*k)?, [*u, *v])))
                    .collect::<std::io::Result<_>>()?,
            )
        };
        let wire = WireRecord {
            id: record.instance_id.clone(),
            class: record.class.name().to_string(),
            features: (!record.features.is_empty()).then(|| record.features.clone()),
            truth_pose_deg: record.truth.map(|p| p.to_degrees()),
            errors,
            locations,
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Vec<AdviseeRecord>, IngestError> {
        parse_records(Cursor::new(text), KeypointTaxonomy::pascal_vehicles())
    }

    #[test]
    fn well_formed_file() {
        let text = r#"{"id":"a","class":"bus","errors":{"left_back_wheel":3.5,"back_left_lower":40.0}}
{"id":"b","class":"car","features":[0.1,0.2],"truth_pose_deg":[10,5,0],"errors":{"left_front_wheel":12.0},"locations":{"left_front_wheel":[10,20]}}
{"id":"c","class":"motorbike","features":[0.3,0.4],"errors":{"24":7.0}}
"#;
        let recs = parse(text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].errors.len(), 2);
        assert_eq!(recs[1].locations.get(&15), Some(&(10.0, 20.0)));
        assert_eq!(recs[2].error(24), Some(7.0));
    }

    #[test]
    fn cross_class_keypoint_is_a_taxonomy_mismatch() {
        let by_index = r#"{"id":"a","class":"bus","errors":{"15":3.0}}"#;
        let err = parse(by_index).unwrap_err();
        assert!(matches!(
            err.line_errors()[0].kind,
            LineErrorKind::TaxonomyMismatch(_)
        ));
        let by_name = r#"{"id":"a","class":"bus","errors":{"left_front_light":3.0}}"#;
        assert!(matches!(
            parse(by_name).unwrap_err().line_errors()[0].kind,
            LineErrorKind::TaxonomyMismatch(_)
        ));
    }

    #[test]
    fn impossible_error_value() {
        let text = r#"{"id":"a","class":"car","errors":{"left_front_wheel":312.0}}"#;
        let err = parse(text).unwrap_err();
        assert_eq!(
            err.line_errors()[0].kind,
            LineErrorKind::OutOfRange {
                keypoint: "left_front_wheel".into(),
                value: 312.0
            }
        );
    }

    #[test]
    fn reports_every_bad_line_with_numbers() {
        let text = "{\"id\":\"a\",\"class\":\"car\",\"errors\":{\"left_front_wheel\":1}}\nnot json\n\n{\"id\":\"a\",\"class\":\"car\",\"errors\":{\"left_front_wheel\":1}}\n{\"id\":\"z\",\"class\":\"truck\",\"errors\":{\"x\":1}}\n";
        let err = parse(text).unwrap_err();
        let lines: Vec<usize> = err.line_errors().iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 4, 5]);
    }

    #[test]
    fn rejects_structural_problems() {
        for text in [
            r#"{"id":"a","class":"car","errors":{}}"#,
            r#"{"id":"a","class":"car","errors":{"left_front_wheel":1},"locations":{"left_back_wheel":[1,1]}}"#,
            r#"{"id":"a","class":"car","errors":{"left_front_wheel":1},"bogus":1}"#,
        ] {
            assert!(parse(text).is_err(), "{text}");
        }
        let mixed = "{\"id\":\"a\",\"class\":\"car\",\"features\":[1],\"errors\":{\"12\":1}}\n{\"id\":\"b\",\"class\":\"car\",\"features\":[1,2],\"errors\":{\"12\":1}}\n";
        assert_eq!(parse(mixed).unwrap_err().line_errors()[0].line, 2);
    }

    #[test]
    fn write_then_ingest_is_lossless() {
        use crate::advisee::{generate_dataset, SyntheticAdviseeParams};
        let t = KeypointTaxonomy::pascal_vehicles();
        let data = generate_dataset(&SyntheticAdviseeParams::default(), 25, 1, t).unwrap();
        let records = data.records().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_records(&path, &records, t).unwrap();
        let back = ingest_records(&path, t).unwrap();
        assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.instance_id, b.instance_id);
            assert_eq!(a.features, b.features);
            assert_eq!(a.errors, b.errors);
            assert_eq!(a.locations, b.locations);
        }
    }
}
