//! Feature CSV: `ecosystem,name,version,label,<schema names...>`.
//!
//! Labels are `0` (benign), `1` (malicious) or `-` (unlabeled). A package
//! that failed extraction keeps its row; its first feature cell holds
//! `error:<kind>` and the remaining cells are empty.

use std::io::{Read, Write};

use super::schema::FeatureSchema;
use crate::Ecosystem;

const ERROR_PREFIX: &str = "error:";

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header does not match the feature schema: {0}")]
    HeaderMismatch(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowLabel {
    Benign,
    Malicious,
    Unlabeled,
}

impl RowLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RowLabel::Benign => "0",
            RowLabel::Malicious => "1",
            RowLabel::Unlabeled => "-",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "0" => Some(RowLabel::Benign),
            "1" => Some(RowLabel::Malicious),
            "-" | "" => Some(RowLabel::Unlabeled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub label: RowLabel,
    /// Empty when `error` is set.
    pub values: Vec<f64>,
    pub error: Option<String>,
}

impl FeatureRow {
    pub fn failed(ecosystem: Ecosystem, name: String, version: String, kind: &str) -> Self {
        FeatureRow {
            ecosystem,
            name,
            version,
            label: RowLabel::Unlabeled,
            values: Vec::new(),
            error: Some(kind.to_string()),
        }
    }
}

pub fn header(schema: &FeatureSchema) -> Vec<String> {
    ["ecosystem", "name", "version", "label"]
        .iter()
        .map(|s| s.to_string())
        .chain(schema.names.iter().cloned())
        .collect()
}

pub struct FeatureCsvWriter<W: Write> {
    inner: csv::Writer<W>,
    width: usize,
}

impl<W: Write> FeatureCsvWriter<W> {
    pub fn new(w: W, schema: &FeatureSchema) -> Result<Self, CsvError> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(header(schema))?;
        Ok(FeatureCsvWriter { inner, width: schema.len() })
    }

    pub fn write_row(&mut self, row: &FeatureRow) -> Result<(), CsvError> {
        let mut rec: Vec<String> = vec![
            row.ecosystem.to_string(),
            row.name.clone(),
            row.version.clone(),
            row.label.as_str().to_string(),
        ];
        match &row.error {
            Some(kind) => {
                rec.push(format!("{ERROR_PREFIX}{kind}"));
                rec.extend(std::iter::repeat_n(String::new(), self.width.saturating_sub(1)));
            }
            None => {
                if row.values.len() != self.width {
                    return Err(CsvError::BadRow {
                        line: 0,
                        message: format!("{} values for a {}-slot schema", row.values.len(), self.width),
                    });
                }
                rec.extend(row.values.iter().map(|v| v.to_string()));
            }
        }
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, CsvError> {
        self.inner.flush().map_err(csv::Error::from)?;
        self.inner
            .into_inner()
            .map_err(|e| CsvError::Csv(csv::Error::from(e.into_error())))
    }
}

pub fn write_feature_csv<W: Write>(w: W, schema: &FeatureSchema, rows: &[FeatureRow]) -> Result<W, CsvError> {
    let mut writer = FeatureCsvWriter::new(w, schema)?;
    for row in rows {
        writer.write_row(row)?;
    }
    writer.finish()
}

pub fn read_feature_csv<R: Read>(r: R, schema: &FeatureSchema) -> Result<Vec<FeatureRow>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected = header(schema);
    if got != expected {
        let first_diff = got
            .iter()
            .zip(&expected)
            .position(|(a, b)| a != b)
            .unwrap_or(got.len().min(expected.len()));
        return Err(CsvError::HeaderMismatch(format!(
            "column {first_diff}: got {:?}, expected {:?} ({} vs {} columns)",
            got.get(first_diff),
            expected.get(first_diff),
            got.len(),
            expected.len()
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| CsvError::BadRow { line, message };
        let ecosystem: Ecosystem = rec[0].parse().map_err(|e: crate::ParseEcosystemError| bad(e.to_string()))?;
        let label = RowLabel::parse(&rec[3]).ok_or_else(|| bad(format!("bad label `{}`", &rec[3])))?;
        let first = rec.get(4).unwrap_or("");
        if let Some(kind) = first.strip_prefix(ERROR_PREFIX) {
            let mut row = FeatureRow::failed(ecosystem, rec[1].to_string(), rec[2].to_string(), kind);
            row.label = label;
            rows.push(row);
            continue;
        }
        let values = rec
            .iter()
            .skip(4)
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("bad value `{c}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(FeatureRow {
            ecosystem,
            name: rec[1].to_string(),
            version: rec[2].to_string(),
            label,
            values,
            error: None,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_error_row() {
        let schema = FeatureSchema::default();
        let mut values = vec![0.0; schema.len()];
        values[3] = 0.1 + 0.2;
        values[10] = 1.0 / 3.0;
        let rows = vec![
            FeatureRow {
                ecosystem: Ecosystem::Npm,
                name: "a,b".into(),
                version: "1.0.0".into(),
                label: RowLabel::Malicious,
                values,
                error: None,
            },
            FeatureRow::failed(Ecosystem::Pypi, "bad".into(), "0.1".into(), "corrupt_archive"),
        ];
        let bytes = write_feature_csv(Vec::new(), &schema, &rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("ecosystem,name,version,label,has_install_hook,"));
        assert!(text.contains("error:corrupt_archive"));
        let back = read_feature_csv(bytes.as_slice(), &schema).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn header_mismatch() {
        let schema = FeatureSchema::default();
        let err = read_feature_csv("ecosystem,name,version,label,x\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, CsvError::HeaderMismatch(_)));
    }
}
