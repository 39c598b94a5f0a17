//! Registry monitoring: feed polling, archive download, per-package
//! verdicts and the long-running watch loop.
//!
//! A run polls every [`FeedSource`], fetches each new archive, classifies it
//! with every attached model and appends one [`ScanVerdict`] per package to a
//! line-delimited sink. A package is flagged when any model flags it.

mod config;
mod feed;
mod fetch;
mod http;
mod report;
mod verdict;
mod watch;

use std::path::PathBuf;

pub use config::{
    HttpConfig, ModelConfig, ScannerConfig, SourceConfig, SourceKind, CONFIG_ENV, DEFAULT_CONFIG_FILE, DEFAULT_NPM_REGISTRY,
    DEFAULT_PYPI_RSS,
};
pub use feed::{
    parse_npm_changes, parse_pypi_rss, FeedCursor, FeedEvent, FeedSource, LocalDirSource, NpmChangesSource,
    PollResult, PypiRssSource,
};
pub use fetch::{fetch_archive, FetchedArchive, Fetcher, DEFAULT_MAX_DOWNLOAD_BYTES};
pub use http::{HttpClient, HttpError};
pub use report::{read_sink, summarize_sinks, ModelCounts, SinkReport};
pub use verdict::{scan_package, Disposition, ModelScore, ModelSet, NamedModel, ScanOptions, ScanVerdict};
pub use watch::{run_watch, sink_file_name, EcosystemCounts, RunSummary, SourceSpec, WatchOptions};

pub const USER_AGENT: &str = concat!("crosspkg-scanner/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("feed {source_name} unavailable after {attempts} attempts: {message}")]
    FeedUnavailable {
        source_name: String,
        message: String,
        attempts: u32,
        /// Suggested wait before the next poll.
        retry_after: std::time::Duration,
    },
    #[error("malformed payload from {source_name}: {message}")]
    MalformedFeedPayload { source_name: String, message: String },
    #[error("download of {url} failed: {message}")]
    DownloadFailed { url: String, message: String, retryable: bool },
    #[error("download of {url} exceeds the {cap}-byte cap")]
    OversizeDownload { url: String, cap: u64 },
    #[error("no models attached")]
    NoModels,
    #[error("models disagree on schema: {0} vs {1}")]
    ModelSchemaMismatch(String, String),
    #[error("invalid scanner config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed sink record {path}:{line}: {message}")]
    SinkRecord { path: PathBuf, line: usize, message: String },
}

impl ScanError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ScanError::FeedUnavailable { .. } => true,
            ScanError::DownloadFailed { retryable, .. } => *retryable,
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScanError::Io { path: path.into(), source }
    }
}
