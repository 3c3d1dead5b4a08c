use std::io::{Read, Write};

use crate::circuit::Circuit;
use crate::error::{Error, Result};

/// Labeled examples: named feature columns in `[0,1]` and a label in `[0,1]`.
///
/// A column named after a binary evidence variable holds `λ` of its first
/// state (the second state gets `1 − λ`). A column named `Var=state` holds
/// the likelihood of that one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

/// Rows of a dataset laid out as circuit evidence slot values.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedData {
    pub slots: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl AlignedData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> AlignedData {
        AlignedData {
            slots: rows.iter().map(|&r| self.slots[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

impl Dataset {
    pub fn new(columns: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let d = Dataset {
            columns,
            features,
            labels,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::invalid("dataset", "feature and label counts differ"));
        }
        for (r, (row, y)) in self.features.iter().zip(&self.labels).enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::invalid(
                    "dataset",
                    format!("row {r} has {} values for {} columns", row.len(), self.columns.len()),
                ));
            }
            if let Some(v) = row.iter().chain([y]).find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(
                    "dataset",
                    format!("row {r} has value {v} outside [0,1]"),
                ));
            }
        }
        Ok(())
    }

    /// Reads delimited text with a header row; the label column is named `label`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| csv_err(e, 1))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let label_col = header
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::Parse {
                locus: "line 1".into(),
                message: "header has no `label` column".into(),
            })?;
        let columns: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_col)
            .map(|(_, h)| h.clone())
            .collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let line = r + 2;
            let record = record.map_err(|e| csv_err(e, line))?;
            let mut row = Vec::with_capacity(columns.len());
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    locus: format!("line {line}, column `{}`", header[i]),
                    message: format!("`{field}` is not a number"),
                })?;
                if i == label_col {
                    labels.push(v);
                } else {
                    row.push(v);
                }
            }
            features.push(row);
        }
        Dataset::new(columns, features, labels)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.columns.clone();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_err(e, 1))?;
        for (row, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec).map_err(|e| csv_err(e, 0))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Lays the features out as evidence slot values of `circuit`.
    pub fn align(&self, circuit: &Circuit) -> Result<AlignedData> {
        // For each slot: (column, complement?) source.
        let mut sources: Vec<Option<(usize, bool)>> = vec![None; circuit.evidence_slots().len()];
        for var in circuit.evidence_variables() {
            let slots = circuit.slots_of(var);
            if let Some(c) = self.columns.iter().position(|h| h == var) {
                if slots.len() != 2 {
                    return Err(Error::invalid(
                        "dataset",
                        format!("column `{var}` needs a binary variable; use `{var}=state` columns"),
                    ));
                }
                sources[slots[0].0 as usize] = Some((c, false));
                sources[slots[1].0 as usize] = Some((c, true));
                continue;
            }
            for s in slots {
                let slot = &circuit.evidence_slots()[s.0 as usize];
                let name = format!("{}={}", slot.variable, slot.state);
                let c = self.columns.iter().position(|h| *h == name).ok_or_else(|| {
                    Error::invalid("dataset", format!("no column for evidence `{var}` (expected `{var}` or `{name}`)"))
                })?;
                sources[s.0 as usize] = Some((c, false));
            }
        }
        let slots = self
            .features
            .iter()
            .map(|row| {
                sources
                    .iter()
                    .map(|src| match src {
                        Some((c, false)) => row[*c],
                        Some((c, true)) => 1.0 - row[*c],
                        None => 0.0,
                    })
                    .collect()
            })
            .collect();
        Ok(AlignedData {
            slots,
            labels: self.labels.clone(),
        })
    }
}

fn csv_err(e: csv::Error, line: usize) -> Error {
    let line = e.position().map_or(line, |p| p.line() as usize);
    Error::Parse {
        locus: format!("line {line}"),
        message: e.to_string(),
    }
}

/// Samples `f` at the centers of a `resolution × resolution` grid on `[0,1]²`.
/// Labels are clamped to `[0,1]`.
pub fn grid_dataset(f: impl Fn(f64, f64) -> f64, resolution: usize, x: &str, y: &str) -> Result<Dataset> {
    if resolution < 2 {
        return Err(Error::invalid("grid", format!("resolution must be at least 2, got {resolution}")));
    }
    let mut features = Vec::with_capacity(resolution * resolution);
    let mut labels = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (a, b) = ((i as f64 + 0.5) / resolution as f64, (j as f64 + 0.5) / resolution as f64);
            features.push(vec![a, b]);
            labels.push(f(a, b).clamp(0.0, 1.0));
        }
    }
    Dataset::new(vec![x.into(), y.into()], features, labels)
}

/// Samples `f` on the `(resolution+1)²` lattice `{i/resolution}²`, corners included.
pub fn lattice_dataset(f: impl Fn(f64, f64) -> f64, resolution: usize, x: &str, y: &str) -> Result<Dataset> {
    if resolution < 1 {
        return Err(Error::invalid("grid", "resolution must be positive"));
    }
    let n = resolution + 1;
    let mut features = Vec::with_capacity(n * n);
    let mut labels = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i as f64 / resolution as f64, j as f64 / resolution as f64);
            features.push(vec![a, b]);
            labels.push(f(a, b).clamp(0.0, 1.0));
        }
    }
    Dataset::new(vec![x.into(), y.into()], features, labels)
}
