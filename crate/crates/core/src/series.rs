//! Observed paths and their text input.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MirError, Result};

/// A finite real-valued path X_1, ..., X_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MirError::invalid("time series is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MirError::invalid(format!(
                "non-finite value {} at position {}",
                values[i],
                i + 1
            )));
        }
        Ok(TimeSeries {
            values,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Reads numbers separated by commas and/or newlines. A non-numeric
    /// first record is taken as a header and skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(idx + 1);
            let mut parsed = Vec::with_capacity(record.len());
            let mut bad = None;
            for field in record.iter().filter(|f| !f.is_empty()) {
                match field.parse::<f64>() {
                    Ok(v) => parsed.push(v),
                    Err(_) => {
                        bad = Some(field.to_string());
                        break;
                    }
                }
            }
            if let Some(field) = bad {
                if idx == 0 {
                    continue;
                }
                return Err(MirError::Parse {
                    line,
                    msg: format!("cannot parse {field:?} as a number"),
                });
            }
            if let Some(v) = parsed.iter().find(|v| !v.is_finite()) {
                return Err(MirError::Parse {
                    line,
                    msg: format!("non-finite value {v}"),
                });
            }
            values.extend(parsed);
        }
        if values.is_empty() {
            return Err(MirError::invalid("no numeric values in input"));
        }
        TimeSeries::new(values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(Self::from_csv_reader(file)?.with_provenance(path.display().to_string()))
    }

    /// One value per line, full round-trip precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20);
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }
}
