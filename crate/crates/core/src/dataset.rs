//! Labeled corpora: loading sample trees, malicious-sample de-duplication,
//! 90/10 assembly, cross-ecosystem union and per-feature distribution summaries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{
    extract_features, read_feature_csv, write_feature_csv, CsvError, FeatureRow, FeatureSchema, FeatureVector,
    RowLabel, SensitiveDictionary,
};
use crate::ingest::{open_archive_with, IngestError, IngestLimits};
use crate::models::{Label, Matrix};
use crate::stats;
use crate::Ecosystem;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("need {needed} benign samples for the ratio, only {available} available")]
    InsufficientBenign { needed: usize, available: usize },
    #[error("schema mismatch: {0} vs {1}")]
    SchemaMismatch(String, String),
    #[error("duplicate sample {0}")]
    DuplicateSample(String),
    #[error("sample {key} is labeled {found:?} but was passed as {expected:?}")]
    Mislabeled { key: String, expected: Label, found: Label },
    #[error("ratio must be in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("row {0} has no label")]
    UnlabeledRow(String),
    #[error("campaign map line {line}: {message}")]
    CampaignMap { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed provenance manifest: {0}")]
    Provenance(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub vector: FeatureVector,
    pub label: Label,
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub campaign_id: Option<String>,
}

impl LabeledSample {
    pub fn key(&self) -> (Ecosystem, &str, &str) {
        (self.ecosystem, &self.name, &self.version)
    }

    pub fn id(&self) -> String {
        format!("{}/{}@{}", self.ecosystem, self.name, self.version)
    }
}

/// Ordering of version strings: digit runs compare numerically, letter runs
/// lexicographically, separators are ignored, a missing run sorts first;
/// full ties fall back to plain string order.
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    let (ta, tb) = (version_runs(a), version_runs(b));
    for (x, y) in ta.iter().zip(&tb) {
        let o = match (x, y) {
            (Run::Num(p), Run::Num(q)) => {
                let (p, q) = (p.trim_start_matches('0'), q.trim_start_matches('0'));
                p.len().cmp(&q.len()).then_with(|| p.cmp(q))
            }
            (Run::Alpha(p), Run::Alpha(q)) => p.cmp(q),
            (Run::Num(_), Run::Alpha(_)) => Ordering::Greater,
            (Run::Alpha(_), Run::Num(_)) => Ordering::Less,
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    ta.len().cmp(&tb.len()).then_with(|| a.cmp(b))
}

enum Run<'a> {
    Num(&'a str),
    Alpha(&'a str),
}

fn version_runs(v: &str) -> Vec<Run<'_>> {
    let mut out = Vec::new();
    let b = v.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let start = i;
        if b[i].is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Run::Num(&v[start..i]));
        } else if b[i].is_ascii_alphabetic() {
            while i < b.len() && b[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push(Run::Alpha(&v[start..i]));
        } else {
            i += 1;
        }
    }
    out
}

fn sample_order(a: &LabeledSample, b: &LabeledSample) -> Ordering {
    a.ecosystem
        .cmp(&b.ecosystem)
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| compare_versions(&a.version, &b.version))
}

/// Survivor counts after each filter: input, latest version, campaign, identical vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupCounts {
    pub input: usize,
    pub latest_version: usize,
    pub campaign: usize,
    pub identical_vectors: usize,
}

pub fn dedup_malicious(samples: &[LabeledSample]) -> Vec<LabeledSample> {
    dedup_malicious_traced(samples).0
}

/// The three filters in sequence. Output is sorted by (ecosystem, name, version).
pub fn dedup_malicious_traced(samples: &[LabeledSample]) -> (Vec<LabeledSample>, DedupCounts) {
    let input = samples.len();

    let mut latest: BTreeMap<(Ecosystem, &str), &LabeledSample> = BTreeMap::new();
    for s in samples {
        latest
            .entry((s.ecosystem, s.name.as_str()))
            .and_modify(|cur| {
                if compare_versions(&s.version, &cur.version) == Ordering::Greater {
                    *cur = s;
                }
            })
            .or_insert(s);
    }
    let step1: Vec<&LabeledSample> = latest.into_values().collect();
    let latest_version = step1.len();

    let mut by_campaign: BTreeMap<&str, &LabeledSample> = BTreeMap::new();
    let mut step2: Vec<&LabeledSample> = Vec::new();
    for s in step1 {
        match s.campaign_id.as_deref() {
            None => step2.push(s),
            Some(c) => {
                by_campaign
                    .entry(c)
                    .and_modify(|cur| {
                        let better = s.name.cmp(&cur.name).then_with(|| sample_order(s, cur));
                        if better == Ordering::Less {
                            *cur = s;
                        }
                    })
                    .or_insert(s);
            }
        }
    }
    step2.extend(by_campaign.into_values());
    step2.sort_by(|a, b| sample_order(a, b));
    let campaign = step2.len();

    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut step3: Vec<LabeledSample> = Vec::new();
    for s in step2 {
        let bits: Vec<u64> = s.vector.values.iter().map(|v| v.to_bits()).collect();
        if seen.insert(bits) {
            step3.push(s.clone());
        }
    }
    let counts = DedupCounts { input, latest_version, campaign, identical_vectors: step3.len() };
    (step3, counts)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub schema_version: String,
    pub schema_hash: String,
    /// Benign share the dataset was assembled for, if any.
    pub declared_ratio: Option<f64>,
    pub provenance: Vec<String>,
}

impl Dataset {
    pub fn new(schema: &FeatureSchema, samples: Vec<LabeledSample>) -> Result<Self, DatasetError> {
        let ds = Dataset {
            samples,
            schema_version: schema.version.clone(),
            schema_hash: schema.hash(),
            declared_ratio: None,
            provenance: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_malicious(&self) -> usize {
        self.samples.iter().filter(|s| s.label == Label::Malicious).count()
    }

    pub fn n_benign(&self) -> usize {
        self.len() - self.n_malicious()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.label.is_malicious()).collect()
    }

    pub fn matrix(&self) -> Matrix {
        let width = self.samples.first().map_or(0, |s| s.vector.values.len());
        let rows: Vec<&[f64]> = self.samples.iter().map(|s| s.vector.values.as_slice()).collect();
        Matrix::from_rows(&rows, width).expect("validated dataset rows share a width")
    }

    pub fn ecosystems(&self) -> BTreeSet<Ecosystem> {
        self.samples.iter().map(|s| s.ecosystem).collect()
    }

    pub fn filter_ecosystem(&self, eco: Ecosystem) -> Dataset {
        Dataset {
            samples: self.samples.iter().filter(|s| s.ecosystem == eco).cloned().collect(),
            schema_version: self.schema_version.clone(),
            schema_hash: self.schema_hash.clone(),
            declared_ratio: self.declared_ratio,
            provenance: self.provenance.clone(),
        }
    }

    /// Uniform schema and unique (ecosystem, name, version) keys.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut keys = HashSet::new();
        for s in &self.samples {
            if s.vector.schema_hash != self.schema_hash {
                return Err(DatasetError::SchemaMismatch(self.schema_hash.clone(), s.vector.schema_hash.clone()));
            }
            if !keys.insert(s.key()) {
                return Err(DatasetError::DuplicateSample(s.id()));
            }
        }
        Ok(())
    }
}

/// Keeps every malicious sample and the first `round(m·ratio/(1−ratio))`
/// benign samples by (name, ecosystem, version).
pub fn assemble(
    schema: &FeatureSchema,
    benign: &[LabeledSample],
    malicious: &[LabeledSample],
    ratio: f64,
) -> Result<Dataset, DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidRatio(ratio));
    }
    for (set, expected) in [(benign, Label::Benign), (malicious, Label::Malicious)] {
        if let Some(s) = set.iter().find(|s| s.label != expected) {
            return Err(DatasetError::Mislabeled { key: s.id(), expected, found: s.label });
        }
    }
    let m = malicious.len();
    let needed = (m as f64 * ratio / (1.0 - ratio)).round() as usize;
    if benign.len() < needed {
        return Err(DatasetError::InsufficientBenign { needed, available: benign.len() });
    }
    let mut pool: Vec<&LabeledSample> = benign.iter().collect();
    pool.sort_by(|a, b| {
        a.name
            .cmp(&b.name)
            .then_with(|| a.ecosystem.cmp(&b.ecosystem))
            .then_with(|| compare_versions(&a.version, &b.version))
    });
    let mut samples: Vec<LabeledSample> = malicious.to_vec();
    samples.extend(pool.into_iter().take(needed).cloned());
    let mut ds = Dataset::new(schema, samples)?;
    ds.declared_ratio = Some(ratio);
    ds.provenance.push(format!("assembled: {m} malicious + {needed} benign at benign ratio {ratio}"));
    Ok(ds)
}

/// Union of two datasets over the same schema.
pub fn merge_cross(a: &Dataset, b: &Dataset) -> Result<Dataset, DatasetError> {
    if !a.is_empty() && !b.is_empty() && (a.schema_hash != b.schema_hash || a.schema_version != b.schema_version) {
        return Err(DatasetError::SchemaMismatch(a.schema_hash.clone(), b.schema_hash.clone()));
    }
    let base = if a.is_empty() && !b.is_empty() { b } else { a };
    let mut samples = a.samples.clone();
    samples.extend(b.samples.iter().cloned());
    let ds = Dataset {
        samples,
        schema_version: base.schema_version.clone(),
        schema_hash: base.schema_hash.clone(),
        declared_ratio: if a.declared_ratio == b.declared_ratio || b.is_empty() {
            a.declared_ratio
        } else if a.is_empty() {
            b.declared_ratio
        } else {
            None
        },
        provenance: a.provenance.iter().chain(&b.provenance).cloned().collect(),
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub feature: String,
    pub label: Label,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub std: f64,
}

/// Per feature × label summary statistics; labels absent from the data get no rows.
pub fn feature_distribution_report(ds: &Dataset, schema: &FeatureSchema) -> Vec<DistributionRow> {
    let mut rows = Vec::new();
    for (j, feature) in schema.names.iter().enumerate() {
        for label in [Label::Benign, Label::Malicious] {
            let vals: Vec<f64> = ds.samples.iter().filter(|s| s.label == label).map(|s| s.vector.values[j]).collect();
            if vals.is_empty() {
                continue;
            }
            let sorted = stats::sorted_copy(&vals);
            rows.push(DistributionRow {
                feature: feature.clone(),
                label,
                count: vals.len(),
                min: sorted[0],
                mean: stats::mean(&vals),
                median: stats::quantile_sorted(&sorted, 0.5),
                q3: stats::quantile_sorted(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
                std: stats::population_std(&vals),
            });
        }
    }
    rows
}

pub fn write_distribution_csv<W: std::io::Write>(w: W, rows: &[DistributionRow]) -> Result<(), DatasetError> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| DatasetError::Csv(CsvError::Csv(e));
    out.write_record(["feature", "label", "count", "min", "mean", "median", "q3", "max", "std"]).map_err(csv_err)?;
    for r in rows {
        let label = if r.label.is_malicious() { "malicious" } else { "benign" };
        out.write_record([
            r.feature.clone(),
            label.to_string(),
            r.count.to_string(),
            r.min.to_string(),
            r.mean.to_string(),
            r.median.to_string(),
            r.q3.to_string(),
            r.max.to_string(),
            r.std.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| csv_err(e.into()))?;
    Ok(())
}

/// Parses `name<TAB>campaign_id` lines; `#` starts a comment.
pub fn parse_campaign_map(text: &str) -> Result<BTreeMap<String, String>, DatasetError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let Some((name, id)) = line.split_once('\t') else {
            return Err(DatasetError::CampaignMap { line: i + 1, message: "expected name<TAB>campaign_id".into() });
        };
        let (name, id) = (name.trim(), id.trim());
        if name.is_empty() || id.is_empty() {
            return Err(DatasetError::CampaignMap { line: i + 1, message: "empty name or campaign id".into() });
        }
        map.insert(name.to_string(), id.to_string());
    }
    Ok(map)
}

/// One archive found in a `<ecosystem>/<name>/<version>/<archive>` tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CorpusEntry {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub path: PathBuf,
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(io_err(path))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(path)))
        .collect::<Result<_, _>>()?;
    v.sort();
    Ok(v)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Lists archives in a corpus tree, sorted. Unknown ecosystem directories are skipped.
pub fn scan_corpus_tree(root: &Path) -> Result<Vec<CorpusEntry>, DatasetError> {
    let mut out = Vec::new();
    for eco_dir in sorted_dir(root)? {
        if !eco_dir.is_dir() {
            continue;
        }
        let Ok(ecosystem) = file_name(&eco_dir).parse::<Ecosystem>() else {
            log::warn!("skipping {}: not an ecosystem directory", eco_dir.display());
            continue;
        };
        for name_dir in sorted_dir(&eco_dir)?.into_iter().filter(|p| p.is_dir()) {
            for version_dir in sorted_dir(&name_dir)?.into_iter().filter(|p| p.is_dir()) {
                for archive in sorted_dir(&version_dir)?.into_iter().filter(|p| p.is_file()) {
                    out.push(CorpusEntry {
                        ecosystem,
                        name: file_name(&name_dir),
                        version: file_name(&version_dir),
                        path: archive,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct CorpusLoad {
    pub samples: Vec<LabeledSample>,
    pub failures: Vec<(CorpusEntry, IngestError)>,
}

/// Ingests and featurizes every archive of a corpus tree. Name and version
/// come from the directory layout; campaign ids from `campaigns` by name.
pub fn load_corpus(
    root: &Path,
    label: Label,
    campaigns: &BTreeMap<String, String>,
    schema: &FeatureSchema,
    dict: &SensitiveDictionary,
    limits: IngestLimits,
) -> Result<CorpusLoad, DatasetError> {
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut seen = HashSet::new();
    for entry in scan_corpus_tree(root)? {
        if !seen.insert((entry.ecosystem, entry.name.clone(), entry.version.clone())) {
            log::warn!("{}: more than one archive for {}@{}; keeping the first", entry.path.display(), entry.name, entry.version);
            continue;
        }
        match open_archive_with(&entry.path, entry.ecosystem, limits) {
            Ok(artifact) => samples.push(LabeledSample {
                vector: extract_features(&artifact, schema, dict),
                label,
                ecosystem: entry.ecosystem,
                campaign_id: campaigns.get(&entry.name).cloned(),
                name: entry.name,
                version: entry.version,
            }),
            Err(e) => failures.push((entry, e)),
        }
    }
    Ok(CorpusLoad { samples, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: String,
    pub schema_hash: String,
    pub declared_ratio: Option<f64>,
    pub malicious: usize,
    pub benign: usize,
    pub sources: Vec<String>,
    /// `ecosystem/name@version` → campaign id.
    pub campaigns: BTreeMap<String, String>,
}

pub fn provenance_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

/// Writes the feature CSV and its provenance manifest next to it.
pub fn save_dataset(ds: &Dataset, schema: &FeatureSchema, csv_path: &Path) -> Result<(), DatasetError> {
    let rows: Vec<FeatureRow> = ds
        .samples
        .iter()
        .map(|s| FeatureRow {
            ecosystem: s.ecosystem,
            name: s.name.clone(),
            version: s.version.clone(),
            label: if s.label.is_malicious() { RowLabel::Malicious } else { RowLabel::Benign },
            values: s.vector.values.clone(),
            error: None,
        })
        .collect();
    let file = std::fs::File::create(csv_path).map_err(io_err(csv_path))?;
    write_feature_csv(std::io::BufWriter::new(file), schema, &rows)?;
    let prov = Provenance {
        schema_version: ds.schema_version.clone(),
        schema_hash: ds.schema_hash.clone(),
        declared_ratio: ds.declared_ratio,
        malicious: ds.n_malicious(),
        benign: ds.n_benign(),
        sources: ds.provenance.clone(),
        campaigns: ds
            .samples
            .iter()
            .filter_map(|s| s.campaign_id.as_ref().map(|c| (s.id(), c.clone())))
            .collect(),
    };
    let p = provenance_path(csv_path);
    std::fs::write(&p, serde_json::to_string_pretty(&prov).expect("provenance serializes")).map_err(io_err(&p))
}

/// Reads a labeled feature CSV (plus its provenance manifest if present).
/// Rows carrying an extraction error are skipped with a warning.
pub fn load_dataset(csv_path: &Path, schema: &FeatureSchema) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(csv_path).map_err(io_err(csv_path))?;
    let rows = read_feature_csv(std::io::BufReader::new(file), schema)?;
    let prov_path = provenance_path(csv_path);
    let prov: Option<Provenance> = match std::fs::read_to_string(&prov_path) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| DatasetError::Provenance(e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(&prov_path)(e)),
    };
    let hash = schema.hash();
    if let Some(p) = &prov {
        if p.schema_hash != hash {
            return Err(DatasetError::SchemaMismatch(hash, p.schema_hash.clone()));
        }
    }
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(kind) = &row.error {
            log::warn!("skipping {}/{}@{}: extraction failed ({kind})", row.ecosystem, row.name, row.version);
            continue;
        }
        let label = match row.label {
            RowLabel::Benign => Label::Benign,
            RowLabel::Malicious => Label::Malicious,
            RowLabel::Unlabeled => {
                return Err(DatasetError::UnlabeledRow(format!("{}/{}@{}", row.ecosystem, row.name, row.version)))
            }
        };
        let id = format!("{}/{}@{}", row.ecosystem, row.name, row.version);
        samples.push(LabeledSample {
            vector: FeatureVector { schema_version: schema.version.clone(), schema_hash: hash.clone(), values: row.values },
            label,
            ecosystem: row.ecosystem,
            campaign_id: prov.as_ref().and_then(|p| p.campaigns.get(&id).cloned()),
            name: row.name,
            version: row.version,
        });
    }
    let mut ds = Dataset::new(schema, samples)?;
    if let Some(p) = prov {
        ds.declared_ratio = p.declared_ratio;
        ds.provenance = p.sources;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_order() {
        let lt = |a, b| assert_eq!(compare_versions(a, b), Ordering::Less, "{a} < {b}");
        lt("1.0", "2.0");
        lt("1.9", "1.10");
        lt("1.0", "1.0.1");
        lt("0.0.9", "0.1");
        lt("1.0a", "1.0.1");
        lt("01.0", "1.0");
        assert_eq!(compare_versions("1.2.3", "1.2.3"), Ordering::Equal);
    }

    #[test]
    fn campaign_map() {
        let m = parse_campaign_map("a\tX\n# c\n\nb\tX  # trailing\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["b"], "X");
        assert!(parse_campaign_map("nope\n").is_err());
    }
}
