use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::feed::{LocalDirSource, NpmChangesSource, PypiRssSource};
use super::fetch::Fetcher;
use super::http::HttpClient;
use super::verdict::{ModelSet, NamedModel, ScanOptions};
use super::watch::{SourceSpec, WatchOptions};
use super::{ScanError, USER_AGENT};
use crate::features::SensitiveDictionary;
use crate::models::load_model;
use crate::Ecosystem;

pub const DEFAULT_PYPI_RSS: &str = "https://pypi.org/rss/updates.xml";
pub const DEFAULT_NPM_REGISTRY: &str = "https://replicate.npmjs.com";

/// Environment variable naming the scanner config file.
pub const CONFIG_ENV: &str = "CROSSPKG_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "crosspkg.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Directory of dropped archives, one event per file.
    Local,
    /// PyPI "newest releases" RSS feed.
    PypiRss,
    /// npm registry `_changes` follower.
    NpmChanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Defaults to the kind, or `local:<path>`.
    pub name: Option<String>,
    pub url: Option<String>,
    pub path: Option<PathBuf>,
    /// Required for `local` sources holding a single ecosystem; otherwise
    /// inferred from the file suffix (`.tgz` npm, everything else PyPI).
    pub ecosystem: Option<Ecosystem>,
    #[serde(default = "default_interval")]
    pub poll_interval_secs: u64,
}

fn default_interval() -> u64 {
    900
}

impl SourceConfig {
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.kind {
            SourceKind::Local => format!("local:{}", self.path.as_deref().unwrap_or(Path::new("")).display()),
            SourceKind::PypiRss => "pypi-rss".into(),
            SourceKind::NpmChanges => "npm-changes".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Column name in verdicts; defaults to the file stem.
    pub id: Option<String>,
    pub path: PathBuf,
}

impl ModelConfig {
    pub fn model_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub user_agent: String,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig { timeout_secs: 30.0, retries: 3, backoff_base_ms: 1000, user_agent: USER_AGENT.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScannerConfig {
    pub sources: Vec<SourceConfig>,
    pub models: Vec<ModelConfig>,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub state_dir: PathBuf,
    pub download_dir: PathBuf,
    pub max_download_bytes: u64,
    pub max_total_bytes: u64,
    pub max_file_bytes: u64,
    pub top_features: usize,
    pub dictionary: Option<PathBuf>,
    pub http: HttpConfig,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        ScannerConfig {
            sources: Vec::new(),
            models: Vec::new(),
            workers: 8,
            output_dir: PathBuf::from("scans"),
            state_dir: PathBuf::from("state"),
            download_dir: PathBuf::from("downloads"),
            max_download_bytes: super::DEFAULT_MAX_DOWNLOAD_BYTES,
            max_total_bytes: crate::ingest::DEFAULT_MAX_TOTAL_BYTES,
            max_file_bytes: crate::ingest::DEFAULT_MAX_FILE_BYTES,
            top_features: 10,
            dictionary: None,
            http: HttpConfig::default(),
        }
    }
}

impl ScannerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScanError> {
        let cfg: ScannerConfig = toml::from_str(text).map_err(|e| ScanError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, making relative paths relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ScanError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScanError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    /// Config path resolution: explicit argument, then `$CROSSPKG_CONFIG`,
    /// then `crosspkg.toml` in the working directory.
    pub fn resolve_path(explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => PathBuf::from(DEFAULT_CONFIG_FILE),
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if self.workers == 0 {
            return Err(ScanError::Config("workers must be at least 1".into()));
        }
        if self.max_download_bytes == 0 {
            return Err(ScanError::Config("max_download_bytes must be positive".into()));
        }
        if !(self.http.timeout_secs.is_finite() && self.http.timeout_secs > 0.0) {
            return Err(ScanError::Config("http.timeout_secs must be positive".into()));
        }
        for s in &self.sources {
            match s.kind {
                SourceKind::Local if s.path.is_none() => {
                    return Err(ScanError::Config(format!("source {} needs a path", s.display_name())))
                }
                SourceKind::PypiRss | SourceKind::NpmChanges if s.path.is_some() => {
                    return Err(ScanError::Config(format!("source {} takes a url, not a path", s.display_name())))
                }
                _ => {}
            }
        }
        let mut names: Vec<String> = self.sources.iter().map(SourceConfig::display_name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScanError::Config("source names must be unique".into()));
        }
        let mut ids: Vec<String> = self.models.iter().map(ModelConfig::model_id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScanError::Config("model ids must be unique".into()));
        }
        Ok(())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.state_dir);
        fix(&mut self.download_dir);
        if let Some(d) = &mut self.dictionary {
            fix(d);
        }
        for m in &mut self.models {
            fix(&mut m.path);
        }
        for s in &mut self.sources {
            if let Some(p) = &mut s.path {
                fix(p);
            }
        }
    }

    pub fn limits(&self) -> crate::ingest::IngestLimits {
        crate::ingest::IngestLimits { max_total_bytes: self.max_total_bytes, max_file_bytes: self.max_file_bytes }
    }

    pub fn sources(&self) -> Vec<SourceSpec> {
        let client = HttpClient::new(&self.http);
        self.sources
            .iter()
            .map(|s| {
                let interval = std::time::Duration::from_secs(s.poll_interval_secs.max(1));
                let name = s.display_name();
                match s.kind {
                    SourceKind::Local => SourceSpec::new(
                        LocalDirSource::new(s.path.clone().unwrap_or_default(), s.ecosystem).with_name(name),
                        interval,
                    ),
                    SourceKind::PypiRss => SourceSpec::new(
                        PypiRssSource::new(s.url.as_deref().unwrap_or(DEFAULT_PYPI_RSS), client.clone()).with_name(name),
                        interval,
                    ),
                    SourceKind::NpmChanges => SourceSpec::new(
                        NpmChangesSource::new(s.url.as_deref().unwrap_or(DEFAULT_NPM_REGISTRY), client.clone())
                            .with_name(name),
                        interval,
                    ),
                }
            })
            .collect()
    }

    pub fn load_models(&self) -> Result<ModelSet, ScanError> {
        let mut models = Vec::with_capacity(self.models.len());
        for m in &self.models {
            models.push(NamedModel { id: m.model_id(), model: load_model(&m.path)? });
        }
        ModelSet::new(models)
    }

    pub fn scan_options(&self) -> Result<ScanOptions, ScanError> {
        let dictionary = match &self.dictionary {
            Some(p) => SensitiveDictionary::load(p).map_err(|e| ScanError::io(p, e))?,
            None => SensitiveDictionary::default_seed(),
        };
        Ok(ScanOptions { limits: self.limits(), dictionary, top_features: self.top_features, now: None })
    }

    pub fn watch_options(&self) -> Result<WatchOptions, ScanError> {
        Ok(WatchOptions {
            workers: self.workers,
            output_dir: self.output_dir.clone(),
            state_dir: self.state_dir.clone(),
            download_dir: self.download_dir.clone(),
            fetcher: Fetcher { client: HttpClient::new(&self.http), max_download_bytes: self.max_download_bytes },
            scan: self.scan_options()?,
            once: false,
            run_id: None,
            keep_downloads: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_defaults() {
        let cfg = ScannerConfig::from_toml(
            r#"
            workers = 4
            [[sources]]
            kind = "local"
            path = "drops"
            ecosystem = "npm"
            [[sources]]
            kind = "pypi_rss"
            url = "https://pypi.org/rss/updates.xml"
            poll_interval_secs = 60
            [[models]]
            path = "m/mono.json"
            [http]
            retries = 1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.sources[0].poll_interval_secs, 900);
        assert_eq!(cfg.sources[1].display_name(), "pypi-rss");
        assert_eq!(cfg.models[0].model_id(), "mono");
        assert_eq!(cfg.http.timeout_secs, 30.0);
        assert_eq!(cfg.http.retries, 1);
    }

    #[test]
    fn rejects() {
        assert!(ScannerConfig::from_toml("workers = 0").is_err());
        assert!(ScannerConfig::from_toml("bogus = 1").is_err());
        assert!(ScannerConfig::from_toml("[[sources]]\nkind = \"local\"").is_err());
        let dup = "[[models]]\npath = \"a/x.json\"\n[[models]]\npath = \"b/x.json\"";
        assert!(ScannerConfig::from_toml(dup).is_err());
    }

    #[test]
    fn rebase_relative() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "output_dir = \"out\"\n[[models]]\npath = \"/abs/m.json\"").unwrap();
        let cfg = ScannerConfig::load(&p).unwrap();
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.models[0].path, PathBuf::from("/abs/m.json"));
    }
}
