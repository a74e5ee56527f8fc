//! Results tables: per-class and mean accuracy / median error per policy row,
//! rendered as aligned text and CSV.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::metrics::PolicyMetrics;
use crate::taxonomy::ObjectClass;

const ABSENT: &str = "—";
const SANDWICH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    LowerBound,
    Baseline,
    Adviser,
    UpperBound,
}

impl RowRole {
    fn name(self) -> &'static str {
        match self {
            RowRole::LowerBound => "lower-bound",
            RowRole::Baseline => "baseline",
            RowRole::Adviser => "adviser",
            RowRole::UpperBound => "upper-bound",
        }
    }
}

/// Three class cells plus the mean column.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cells {
    pub classes: [Option<f64>; 3],
    pub mean: Option<f64>,
}

impl Cells {
    pub fn class(&self, class: ObjectClass) -> Option<f64> {
        self.classes[class.index()]
    }

    fn from_classes(classes: [Option<f64>; 3]) -> Self {
        let present: Vec<f64> = classes.iter().flatten().copied().collect();
        let mean =
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Self { classes, mean }
    }

    /// Class cells followed by the mean cell.
    pub fn all(&self) -> [Option<f64>; 4] {
        [self.classes[0], self.classes[1], self.classes[2], self.mean]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub role: RowRole,
    /// Percent.
    pub accuracy: Cells,
    /// Degrees.
    pub median: Cells,
    /// Population standard deviations, present on aggregated tables.
    pub accuracy_std: Option<Cells>,
    pub median_std: Option<Cells>,
}

impl TableRow {
    pub fn from_metrics(label: impl Into<String>, role: RowRole, metrics: &PolicyMetrics) -> Self {
        Self {
            label: label.into(),
            role,
            accuracy: Cells::from_classes(metrics.per_class.map(|m| m.map(|m| m.accuracy))),
            median: Cells::from_classes(metrics.per_class.map(|m| m.map(|m| m.median_error))),
            accuracy_std: None,
            median_std: None,
        }
    }
}

/// A row of externally reported numbers, shown for context only.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRow {
    pub label: String,
    /// Bus, car, motorbike, mean.
    pub accuracy: [f64; 4],
    pub median: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub title: String,
    pub rows: Vec<TableRow>,
    pub external: Vec<ExternalRow>,
    pub notes: Vec<String>,
}

impl ResultsTable {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            rows: Vec::new(),
            external: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    fn role_row(&self, role: RowRole) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.role == role)
    }

    /// Every row lies between the lower- and upper-bound rows on every cell:
    /// accuracy no higher than the upper bound and no lower than the lower
    /// bound; median error the other way round.
    pub fn check_sandwich(&self) -> Result<(), String> {
        let upper = self
            .role_row(RowRole::UpperBound)
            .ok_or("missing upper-bound row")?;
        let lower = self
            .role_row(RowRole::LowerBound)
            .ok_or("missing lower-bound row")?;
        let columns = ["bus", "car", "motorbike", "mean"];
        for row in &self.rows {
            for (c, col) in columns.iter().enumerate() {
                let acc = (
                    row.accuracy.all()[c],
                    upper.accuracy.all()[c],
                    lower.accuracy.all()[c],
                );
                if let (Some(v), Some(hi), Some(lo)) = acc {
                    if v > hi + SANDWICH_TOLERANCE || v < lo - SANDWICH_TOLERANCE {
                        return Err(format!(
                            "{}: accuracy {v} for {col} outside [{lo}, {hi}]",
                            row.label
                        ));
                    }
                }
                let med = (
                    row.median.all()[c],
                    upper.median.all()[c],
                    lower.median.all()[c],
                );
                if let (Some(v), Some(best), Some(worst)) = med {
                    if v < best - SANDWICH_TOLERANCE || v > worst + SANDWICH_TOLERANCE {
                        return Err(format!(
                            "{}: median error {v} for {col} outside [{best}, {worst}]",
                            row.label
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Where all three classes are present, the mean cell is their plain average.
    pub fn check_mean_columns(&self) -> Result<(), String> {
        for row in &self.rows {
            for (name, cells) in [("accuracy", &row.accuracy), ("median", &row.median)] {
                if let ([Some(a), Some(b), Some(c)], Some(mean)) = (cells.classes, cells.mean) {
                    if ((a + b + c) / 3.0 - mean).abs() > 1e-9 {
                        return Err(format!(
                            "{}: {name} mean column {mean} inconsistent",
                            row.label
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_aggregated(&self) -> bool {
        self.rows.iter().any(|r| r.accuracy_std.is_some())
    }

    /// Cell-wise mean and population standard deviation over repetitions.
    /// Rows are matched by label and keep the order of the first table.
    pub fn aggregate(title: impl Into<String>, tables: &[ResultsTable]) -> Result<Self, String> {
        let first = tables.first().ok_or("no tables to aggregate")?;
        let mut out = ResultsTable::new(title);
        out.external = first.external.clone();
        out.notes = first.notes.clone();
        for proto in &first.rows {
            let rows: Vec<&TableRow> = tables
                .iter()
                .map(|t| {
                    t.row(&proto.label)
                        .ok_or_else(|| format!("row {} missing from a repetition", proto.label))
                })
                .collect::<Result<_, _>>()?;
            let acc: Vec<Cells> = rows.iter().map(|r| r.accuracy).collect();
            let med: Vec<Cells> = rows.iter().map(|r| r.median).collect();
            let (accuracy, accuracy_std) = mean_and_std(&acc);
            let (median, median_std) = mean_and_std(&med);
            out.rows.push(TableRow {
                label: proto.label.clone(),
                role: proto.role,
                accuracy,
                median,
                accuracy_std: Some(accuracy_std),
                median_std: Some(median_std),
            });
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let aggregated = self.is_aggregated();
        let fmt_cell = |v: Option<f64>, s: Option<f64>| match (v, s) {
            (None, _) => ABSENT.to_string(),
            (Some(v), Some(s)) if aggregated => format!("{v:.2} ± {s:.2}"),
            (Some(v), _) => format!("{v:.2}"),
        };

        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Policy".to_string()];
        for _ in 0..2 {
            header.extend(ObjectClass::ALL.iter().map(|c| c.short_label().to_string()));
            header.push("Mean".into());
        }
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.label.clone()];
            for (cells, std) in [
                (&row.accuracy, &row.accuracy_std),
                (&row.median, &row.median_std),
            ] {
                let spread = std.map(|s| s.all()).unwrap_or([None; 4]);
                line.extend(cells.all().iter().zip(spread).map(|(v, s)| fmt_cell(*v, s)));
            }
            grid.push(line);
        }

        let ncols = grid[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let render = |cells: &[String]| {
            let mut s = String::new();
            for (c, cell) in cells.iter().enumerate() {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
                s.push_str(match c {
                    0 | 3 | 7 => " | ",
                    4 => " || ",
                    _ if c + 1 == ncols => "",
                    _ => "  ",
                });
            }
            s.trim_end().to_string()
        };

        let body: Vec<String> = grid.iter().map(|r| render(r)).collect();
        let total = body.iter().map(|l| l.chars().count()).max().unwrap_or(0);
        let acc_start = widths[0] + 3;
        let acc_span: usize = widths[1..5].iter().sum::<usize>() + 2 * 2 + 3;
        let caption = format!(
            "{}{:^acc_span$} || {}",
            " ".repeat(acc_start),
            "Accuracy_pi/6 (%)",
            "Median geodesic error (deg)"
        );

        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(out);
        let _ = writeln!(out, "{}", caption.trim_end());
        let _ = writeln!(out, "{}", body[0]);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for line in &body[1..] {
            let _ = writeln!(out, "{line}");
        }
        if !self.external.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "External computer-only baselines (reported values, not computed here):"
            );
            for ext in &self.external {
                let fmt4 = |v: &[f64; 4]| {
                    v.iter()
                        .map(|x| format!("{x:.2}"))
                        .collect::<Vec<_>>()
                        .join(" / ")
                };
                let _ = writeln!(
                    out,
                    "  {}: accuracy {}  median {}",
                    ext.label,
                    fmt4(&ext.accuracy),
                    fmt4(&ext.median)
                );
            }
        }
        for note in &self.notes {
            let _ = writeln!(out, "{note}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let num = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut out = String::from("label,role");
        for metric in ["acc", "median"] {
            for col in ["bus", "car", "motorbike", "mean"] {
                let _ = write!(out, ",{metric}_{col},{metric}_{col}_std");
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&csv_field(&row.label));
            out.push(',');
            out.push_str(row.role.name());
            for (cells, std) in [
                (&row.accuracy, &row.accuracy_std),
                (&row.median, &row.median_std),
            ] {
                let spread = std.map(|s| s.all()).unwrap_or([None; 4]);
                for (v, s) in cells.all().iter().zip(spread) {
                    let _ = write!(out, ",{},{}", num(*v), num(s));
                }
            }
            out.push('\n');
        }
        for ext in &self.external {
            out.push_str(&csv_field(&ext.label));
            out.push_str(",external");
            for values in [&ext.accuracy, &ext.median] {
                for v in values {
                    let _ = write!(out, ",{},", num(Some(*v)));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.txt")), self.to_text())?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn mean_and_std(cells: &[Cells]) -> (Cells, Cells) {
    let stat = |pick: &dyn Fn(&Cells) -> Option<f64>| -> (Option<f64>, Option<f64>) {
        let values: Vec<f64> = cells.iter().filter_map(pick).collect();
        if values.is_empty() {
            return (None, None);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    let mut mean = Cells::default();
    let mut std = Cells::default();
    for c in 0..3 {
        (mean.classes[c], std.classes[c]) = stat(&|cell: &Cells| cell.classes[c]);
    }
    (mean.mean, std.mean) = stat(&|cell: &Cells| cell.mean);
    (mean, std)
}
