use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::feed::FeedEvent;
use super::http::{map_read_error, HttpClient, HttpError};
use super::ScanError;
use crate::Ecosystem;

/// Default cap on a downloaded (still compressed) archive: 256 MiB.
pub const DEFAULT_MAX_DOWNLOAD_BYTES: u64 = 256 * 1024 * 1024;
const METADATA_CAP: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct Fetcher {
    pub client: HttpClient,
    pub max_download_bytes: u64,
}

impl Default for Fetcher {
    fn default() -> Self {
        Fetcher { client: HttpClient::default(), max_download_bytes: DEFAULT_MAX_DOWNLOAD_BYTES }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedArchive {
    pub path: PathBuf,
    pub sha256: String,
    pub size: u64,
}

enum CopyError {
    TooLarge,
    Io(io::Error),
    Read(HttpError),
}

/// Streams at most `cap` bytes from `r` into `dest` while hashing.
fn copy_hashed(r: &mut dyn Read, dest: &Path, cap: u64) -> Result<(u64, String), CopyError> {
    let mut out = BufWriter::new(File::create(dest).map_err(CopyError::Io)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = match r.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => {
                return Err(match map_read_error(e, cap) {
                    HttpError::TooLarge { .. } => CopyError::TooLarge,
                    other => CopyError::Read(other),
                })
            }
        };
        total += n as u64;
        if total > cap {
            return Err(CopyError::TooLarge);
        }
        hasher.update(&buf[..n]);
        out.write_all(&buf[..n]).map_err(CopyError::Io)?;
    }
    out.flush().map_err(CopyError::Io)?;
    Ok((total, to_hex(&hasher.finalize())))
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    data_encoding::HEXLOWER.encode(bytes)
}

fn safe_file_name(raw: &str, event: &FeedEvent) -> String {
    let cleaned: String = raw
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '+'))
        .collect();
    if cleaned.is_empty() || cleaned.starts_with('.') {
        let stem: String = format!("{}-{}", event.name.replace('/', "-").trim_start_matches('@'), event.version)
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '+'))
            .collect();
        match event.ecosystem {
            Ecosystem::Npm => format!("{stem}.tgz"),
            Ecosystem::Pypi => format!("{stem}.tar.gz"),
        }
    } else {
        cleaned
    }
}

fn last_segment(url: &str) -> &str {
    let no_query = url.split(['?', '#']).next().unwrap_or(url);
    no_query.rsplit('/').next().unwrap_or("")
}

/// Resolves a PyPI release JSON document to its sdist (or first wheel) URL
/// and published sha256.
fn resolve_pypi(client: &HttpClient, url: &str) -> Result<(String, Option<String>), ScanError> {
    let failed = |message: String, retryable| ScanError::DownloadFailed { url: url.to_string(), message, retryable };
    let body = client.get_bytes(url, METADATA_CAP).map_err(|(e, _)| failed(e.to_string(), e.is_retryable()))?;
    let doc: serde_json::Value =
        serde_json::from_slice(&body).map_err(|e| failed(format!("release metadata: {e}"), false))?;
    let urls = doc.get("urls").and_then(|u| u.as_array()).cloned().unwrap_or_default();
    let pick = |t: &str| urls.iter().find(|u| u.get("packagetype").and_then(|p| p.as_str()) == Some(t));
    let chosen = pick("sdist").or_else(|| pick("bdist_wheel")).ok_or_else(|| failed("release has no files".into(), false))?;
    let file_url = chosen.get("url").and_then(|u| u.as_str()).ok_or_else(|| failed("file entry without url".into(), false))?;
    let digest = chosen.pointer("/digests/sha256").and_then(|d| d.as_str()).map(str::to_ascii_lowercase);
    Ok((file_url.to_string(), digest))
}

fn is_pypi_metadata(url: &str) -> bool {
    (url.starts_with("http://") || url.starts_with("https://")) && url.contains("/pypi/") && url.ends_with("/json")
}

/// Downloads the event's archive into `dest/<ecosystem>/`. The size cap
/// applies to the compressed bytes, before any decompression.
pub fn fetch_archive(event: &FeedEvent, dest: &Path, fetcher: &Fetcher) -> Result<FetchedArchive, ScanError> {
    let cap = fetcher.max_download_bytes;
    let (url, expected) = if is_pypi_metadata(&event.archive_url) {
        resolve_pypi(&fetcher.client, &event.archive_url)?
    } else {
        (event.archive_url.clone(), None)
    };
    let dir = dest.join(event.ecosystem.as_str());
    std::fs::create_dir_all(&dir).map_err(|e| ScanError::io(&dir, e))?;
    let final_path = dir.join(safe_file_name(last_segment(&url), event));
    static PART: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let n = PART.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let tmp = dir.join(format!(".{}-{n}.part", std::process::id()));

    let failed = |message: String, retryable| ScanError::DownloadFailed { url: url.clone(), message, retryable };
    let map_copy = |e: CopyError| match e {
        CopyError::TooLarge => ScanError::OversizeDownload { url: url.clone(), cap },
        CopyError::Io(e) => ScanError::io(&tmp, e),
        CopyError::Read(e) => failed(e.to_string(), e.is_retryable()),
    };

    let result = if let Some(path) = url.strip_prefix("file://") {
        let src = Path::new(path);
        match std::fs::metadata(src) {
            Err(e) => Err(failed(format!("{}: {e}", src.display()), false)),
            Ok(m) if !m.is_file() => Err(failed(format!("{} is not a file", src.display()), false)),
            Ok(m) if m.len() > cap => Err(ScanError::OversizeDownload { url: url.clone(), cap }),
            Ok(_) => File::open(src)
                .map_err(|e| failed(format!("{}: {e}", src.display()), false))
                .and_then(|mut f| copy_hashed(&mut f, &tmp, cap).map_err(map_copy)),
        }
    } else if url.starts_with("http://") || url.starts_with("https://") {
        let mut last_copy_err = None;
        let r = fetcher.client.get_streaming(&url, cap, |r, cap| match copy_hashed(r, &tmp, cap) {
            Ok(v) => Ok(v),
            Err(CopyError::TooLarge) => Err(HttpError::TooLarge { cap }),
            Err(CopyError::Read(e)) => Err(e),
            Err(CopyError::Io(e)) => {
                let msg = e.to_string();
                last_copy_err = Some(e);
                Err(HttpError::Transport(msg))
            }
        });
        match r {
            Ok(v) => Ok(v),
            Err(_) if last_copy_err.is_some() => Err(ScanError::io(&tmp, last_copy_err.take().expect("checked"))),
            Err((HttpError::TooLarge { .. }, _)) => Err(ScanError::OversizeDownload { url: url.clone(), cap }),
            Err((e, n)) => Err(failed(format!("{e} after {n} attempts"), e.is_retryable())),
        }
    } else {
        Err(failed("unsupported url scheme".into(), false))
    };

    let (size, sha256) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            return Err(e);
        }
    };
    if let Some(exp) = expected {
        if exp != sha256 {
            let _ = std::fs::remove_file(&tmp);
            return Err(failed(format!("sha256 mismatch: published {exp}, got {sha256}"), false));
        }
    }
    std::fs::rename(&tmp, &final_path).map_err(|e| ScanError::io(&final_path, e))?;
    Ok(FetchedArchive { path: final_path, sha256, size })
}
