use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::verdict::ScanVerdict;
use super::watch::EcosystemCounts;
use super::ScanError;
use crate::Ecosystem;

pub fn read_sink(path: &Path) -> Result<Vec<ScanVerdict>, ScanError> {
    let f = std::fs::File::open(path).map_err(|e| ScanError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ScanError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| ScanError::SinkRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelCounts {
    pub benign: usize,
    pub malicious: usize,
}

/// Per-model classification counts over one or more sinks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SinkReport {
    pub per_model: BTreeMap<String, BTreeMap<Ecosystem, ModelCounts>>,
    /// Verdict dispositions, flagged meaning "any model".
    pub per_ecosystem: BTreeMap<Ecosystem, EcosystemCounts>,
}

impl SinkReport {
    pub fn add(&mut self, v: &ScanVerdict) {
        let c = self.per_ecosystem.entry(v.ecosystem).or_default();
        c.scanned += 1;
        if v.is_error() {
            c.errors += 1;
        } else if v.flagged {
            c.flagged += 1;
        } else {
            c.benign += 1;
        }
        for m in &v.models {
            let mc = self.per_model.entry(m.model_id.clone()).or_default().entry(v.ecosystem).or_default();
            if m.label.is_malicious() {
                mc.malicious += 1;
            } else {
                mc.benign += 1;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_ecosystem.is_empty()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Model | Ecosystem | Benign | Malicious |\n|---|---|---|---|\n");
        for (model, by_eco) in &self.per_model {
            for (eco, c) in by_eco {
                let _ = writeln!(s, "| {model} | {eco} | {} | {} |", c.benign, c.malicious);
            }
        }
        for (eco, c) in &self.per_ecosystem {
            let _ = writeln!(s, "| any | {eco} | {} | {} |", c.benign, c.flagged);
        }
        let errors: usize = self.per_ecosystem.values().map(|c| c.errors).sum();
        if errors > 0 {
            let _ = writeln!(s, "\n{errors} packages could not be classified.");
        }
        s
    }
}

pub fn summarize_sinks<P: AsRef<Path>>(paths: &[P]) -> Result<SinkReport, ScanError> {
    let mut r = SinkReport::default();
    for p in paths {
        for v in read_sink(p.as_ref())? {
            r.add(&v);
        }
    }
    Ok(r)
}
