//! Package archive ingestion.
//!
//! [`open_archive`] reads a gzip tar (npm `.tgz`, sdist `.tar.gz`) or a zip
//! (`.whl`, `.zip`) fully in memory and yields a [`PackageArtifact`] whose
//! files carry a lowercase extension and a [`FileRole`]. Entries that would
//! escape the extraction root are rejected, links are ignored, and both the
//! total decompressed size and the retained per-file content are capped.

mod archive;
mod classify;
mod write;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::Ecosystem;

pub use archive::{open_archive, open_archive_with, read_archive_bytes, split_archive_filename};
pub use write::{build_tar_gz, build_zip, ArchiveEntry};
pub use classify::{classify_files, extension_of, role_for};

/// Default cap on the sum of decompressed entry sizes (256 MiB).
pub const DEFAULT_MAX_TOTAL_BYTES: u64 = 256 * 1024 * 1024;
/// Default cap on retained content per file (16 MiB).
pub const DEFAULT_MAX_FILE_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestLimits {
    pub max_total_bytes: u64,
    pub max_file_bytes: u64,
}

impl Default for IngestLimits {
    fn default() -> Self {
        IngestLimits {
            max_total_bytes: DEFAULT_MAX_TOTAL_BYTES,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unsupported archive format: {0}")]
    UnsupportedFormat(String),
    #[error("archive entry escapes the extraction root: {0}")]
    PathTraversal(String),
    #[error("decompressed size exceeds the {limit}-byte cap")]
    SizeBombExceeded { limit: u64 },
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    /// Short machine-readable name used in reports and CSV error markers.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::UnsupportedFormat(_) => "unsupported_format",
            IngestError::PathTraversal(_) => "path_traversal",
            IngestError::SizeBombExceeded { .. } => "size_bomb_exceeded",
            IngestError::CorruptArchive(_) => "corrupt_archive",
            IngestError::Io { .. } => "io_error",
        }
    }
}

/// Distribution format of the original archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistFormat {
    /// gzip-compressed tar (npm tarball or PyPI sdist)
    TarGz,
    /// PyPI built wheel
    Wheel,
    /// any other zip container
    Zip,
}

impl DistFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            DistFormat::TarGz => "targz",
            DistFormat::Wheel => "wheel",
            DistFormat::Zip => "zip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileRole {
    SourceJs,
    SourcePy,
    InstallScript,
    ShellScript,
    Other,
}

impl FileRole {
    pub fn is_source(self) -> bool {
        matches!(self, FileRole::SourceJs | FileRole::SourcePy)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageFile {
    pub rel_path: String,
    pub extension: String,
    pub byte_size: u64,
    /// Empty when `truncated` is set.
    #[serde(skip)]
    pub content: Vec<u8>,
    pub truncated: bool,
    pub role: FileRole,
}

impl PackageFile {
    /// Build an unclassified file; call [`classify_files`] (or construct the
    /// artifact through [`PackageArtifact::new`]) to assign the role.
    pub fn new(rel_path: impl Into<String>, content: Vec<u8>) -> Self {
        let rel_path = rel_path.into();
        PackageFile {
            extension: extension_of(&rel_path),
            byte_size: content.len() as u64,
            content,
            truncated: false,
            role: FileRole::Other,
            rel_path,
        }
    }

    pub fn basename(&self) -> &str {
        self.rel_path.rsplit('/').next().unwrap_or(&self.rel_path)
    }

    pub fn text(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageArtifact {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub files: Vec<PackageFile>,
    pub source_path: PathBuf,
    pub format: DistFormat,
}

impl PackageArtifact {
    /// In-memory artifact, classified on construction. Paths are taken as
    /// given; callers building artifacts by hand are trusted.
    pub fn new(
        ecosystem: Ecosystem,
        name: impl Into<String>,
        version: impl Into<String>,
        files: Vec<PackageFile>,
    ) -> Self {
        let artifact = PackageArtifact {
            ecosystem,
            name: name.into(),
            version: version.into(),
            files,
            source_path: PathBuf::new(),
            format: DistFormat::TarGz,
        };
        classify_files(artifact)
    }

    pub fn any_truncated(&self) -> bool {
        self.files.iter().any(|f| f.truncated)
    }

    pub fn files_with_role(&self, role: FileRole) -> impl Iterator<Item = &PackageFile> {
        self.files.iter().filter(move |f| f.role == role)
    }
}
