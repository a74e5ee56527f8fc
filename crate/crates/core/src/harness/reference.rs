//! Published reference numbers for the vehicle benchmark, used for context
//! rows and for checking the non-learned rows against real advisee records.

use super::table::{ExternalRow, ResultsTable};

/// Tolerance for comparing recomputed cells against two-decimal published values.
pub const REFERENCE_TOLERANCE: f64 = 0.01;

/// Bus, car, motorbike, mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub label: &'static str,
    pub accuracy: [f64; 4],
    pub median: [f64; 4],
}

/// Computer-vision-only models, reported for context only.
pub const EXTERNAL_BASELINES: [ReferenceRow; 2] = [
    ReferenceRow {
        label: "Render For CNN",
        accuracy: [89.32, 78.39, 76.99, 81.57],
        median: [5.21, 8.29, 15.00, 9.50],
    },
    ReferenceRow {
        label: "Render For CNN-FT",
        accuracy: [88.26, 80.00, 83.48, 83.91],
        median: [3.61, 6.83, 12.22, 7.55],
    },
];

/// Full test-set rows; labels match the rows of [`super::experiment::policy_table`].
pub const FULL_TEST_SET: [ReferenceRow; 6] = [
    ReferenceRow {
        label: "Lower-bound",
        accuracy: [88.61, 82.37, 79.65, 83.54],
        median: [3.81, 6.63, 13.93, 8.12],
    },
    ReferenceRow {
        label: "Advisee (expected)",
        accuracy: [90.04, 85.59, 80.83, 85.49],
        median: [3.54, 6.17, 13.41, 7.71],
    },
    ReferenceRow {
        label: "Frequency prior",
        accuracy: [93.59, 87.63, 82.01, 87.74],
        median: [3.51, 5.78, 13.27, 7.52],
    },
    ReferenceRow {
        label: "Performance prior",
        accuracy: [93.95, 87.96, 83.78, 88.56],
        median: [3.54, 5.77, 12.93, 7.41],
    },
    ReferenceRow {
        label: "Adviser",
        accuracy: [93.95, 89.25, 84.37, 89.19],
        median: [3.48, 5.75, 12.89, 7.37],
    },
    ReferenceRow {
        label: "Upper-bound",
        accuracy: [95.02, 92.47, 87.32, 91.60],
        median: [3.00, 5.32, 11.76, 6.69],
    },
];

/// Rows that are pure arithmetic over the records, independent of training.
pub const NON_LEARNED_LABELS: [&str; 5] = [
    "Lower-bound",
    "Advisee (expected)",
    "Frequency prior",
    "Performance prior",
    "Upper-bound",
];

/// Mean accuracy ± std over six 70:30 splits (accuracy only).
pub const SMALL_SPLITS_ACCURACY: [(&str, [(f64, f64); 4]); 6] = [
    (
        "Lower-bound",
        [(89.28, 3.01), (87.36, 4.21), (81.70, 3.43), (86.11, 3.31)],
    ),
    (
        "Advisee (expected)",
        [(92.19, 3.74), (90.64, 4.12), (83.18, 3.99), (88.67, 3.86)],
    ),
    (
        "Frequency prior",
        [(95.69, 3.15), (91.78, 3.83), (83.97, 3.47), (90.48, 3.24)],
    ),
    (
        "Performance prior",
        [(95.56, 2.90), (92.03, 3.36), (84.95, 2.20), (90.85, 2.56)],
    ),
    (
        "Adviser",
        [(95.93, 3.00), (92.68, 3.33), (85.05, 2.26), (91.22, 2.64)],
    ),
    (
        "Upper-bound",
        [(97.13, 2.55), (95.85, 3.08), (86.23, 1.97), (93.07, 2.16)],
    ),
];

/// Classification against error regression on the full test set.
pub const LOSS_COMPARISON: [ReferenceRow; 3] = [
    ReferenceRow {
        label: "Adviser (classification)",
        accuracy: [93.95, 89.25, 84.37, 89.19],
        median: [3.48, 5.75, 12.89, 7.37],
    },
    ReferenceRow {
        label: "Adviser (regression, degrees)",
        accuracy: [91.1, 87.42, 84.66, 87.73],
        median: [3.61, 5.8, 12.94, 7.45],
    },
    ReferenceRow {
        label: "Adviser (regression, radians)",
        accuracy: [91.1, 87.74, 84.66, 87.83],
        median: [3.61, 5.81, 12.69, 7.37],
    },
];

pub fn external_rows() -> Vec<ExternalRow> {
    EXTERNAL_BASELINES
        .iter()
        .map(|r| ExternalRow {
            label: r.label.to_string(),
            accuracy: r.accuracy,
            median: r.median,
        })
        .collect()
}

/// A cell that differs from its reference value by more than the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub row: String,
    pub column: String,
    pub expected: f64,
    pub got: Option<f64>,
}

/// Compares the listed rows of `table` against `reference`, cell by cell.
pub fn compare_rows(
    table: &ResultsTable,
    reference: &[ReferenceRow],
    labels: &[&str],
    tolerance: f64,
) -> Vec<Mismatch> {
    const COLUMNS: [&str; 4] = ["bus", "car", "motorbike", "mean"];
    let mut out = Vec::new();
    for label in labels {
        let Some(expected) = reference.iter().find(|r| r.label == *label) else {
            continue;
        };
        let row = table.row(label);
        for (metric, want, got) in [
            ("accuracy", expected.accuracy, row.map(|r| r.accuracy.all())),
            ("median", expected.median, row.map(|r| r.median.all())),
        ] {
            for c in 0..4 {
                let value = got.and_then(|g| g[c]);
                let ok = value.is_some_and(|v| (v - want[c]).abs() <= tolerance);
                if !ok {
                    out.push(Mismatch {
                        row: label.to_string(),
                        column: format!("{metric}_{}", COLUMNS[c]),
                        expected: want[c],
                        got: value,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_means_are_class_averages() {
        for row in FULL_TEST_SET
            .iter()
            .chain(&EXTERNAL_BASELINES)
            .chain(&LOSS_COMPARISON)
        {
            for cells in [row.accuracy, row.median] {
                let avg = (cells[0] + cells[1] + cells[2]) / 3.0;
                assert!((avg - cells[3]).abs() < 0.011, "{}", row.label);
            }
        }
    }

    #[test]
    fn published_rows_are_sandwiched() {
        let upper = FULL_TEST_SET[5];
        let lower = FULL_TEST_SET[0];
        for row in &FULL_TEST_SET {
            for c in 0..4 {
                assert!(row.accuracy[c] <= upper.accuracy[c]);
                assert!(row.accuracy[c] >= lower.accuracy[c]);
                assert!(row.median[c] >= upper.median[c]);
                assert!(row.median[c] <= lower.median[c]);
            }
        }
    }
}
