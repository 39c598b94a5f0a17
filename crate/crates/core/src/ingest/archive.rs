use std::collections::HashMap;
use std::io::{self, Cursor, Read};
use std::path::Path;

use super::{
    classify_files, DistFormat, IngestError, IngestLimits, PackageArtifact, PackageFile,
};
use crate::Ecosystem;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];
const ZIP_MAGIC: [u8; 4] = [b'P', b'K', 0x03, 0x04];
const ZIP_EMPTY_MAGIC: [u8; 4] = [b'P', b'K', 0x05, 0x06];

pub fn open_archive(path: &Path, ecosystem: Ecosystem) -> Result<PackageArtifact, IngestError> {
    open_archive_with(path, ecosystem, IngestLimits::default())
}

pub fn open_archive_with(
    path: &Path,
    ecosystem: Ecosystem,
    limits: IngestLimits,
) -> Result<PackageArtifact, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_archive_bytes(&bytes, ecosystem, path, limits)
}

/// Decode an archive held in memory. `source_path` is used for the
/// distribution format (a `.whl` suffix marks a wheel) and as the fallback
/// for name/version when the archive carries no metadata.
pub fn read_archive_bytes(
    bytes: &[u8],
    ecosystem: Ecosystem,
    source_path: &Path,
    limits: IngestLimits,
) -> Result<PackageArtifact, IngestError> {
    let file_name = source_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (format, files) = if bytes.starts_with(&GZIP_MAGIC) {
        (DistFormat::TarGz, read_tar_gz(bytes, limits)?)
    } else if bytes.starts_with(&ZIP_MAGIC) || bytes.starts_with(&ZIP_EMPTY_MAGIC) {
        let format = if file_name.to_ascii_lowercase().ends_with(".whl") {
            DistFormat::Wheel
        } else {
            DistFormat::Zip
        };
        (format, read_zip(bytes, limits)?)
    } else {
        return Err(IngestError::UnsupportedFormat(if file_name.is_empty() {
            "unrecognized magic bytes".to_string()
        } else {
            format!("{file_name}: unrecognized magic bytes")
        }));
    };

    let (name, version) = metadata_name_version(ecosystem, &files)
        .or_else(|| split_archive_filename(&file_name))
        .unwrap_or_else(|| (strip_archive_suffix(&file_name).to_string(), String::new()));

    let artifact = PackageArtifact {
        ecosystem,
        name,
        version,
        files,
        source_path: source_path.to_path_buf(),
        format,
    };
    Ok(classify_files(artifact))
}

/// Validate and normalize an archive entry path. Absolute paths, drive
/// prefixes and any `..` component are traversal; `.` and empty components
/// are dropped. Returns `None` for entries that normalize to nothing.
pub(crate) fn sanitize_entry_path(raw: &str) -> Result<Option<String>, IngestError> {
    let unified = raw.replace('\\', "/");
    if unified.starts_with('/') || has_drive_prefix(&unified) {
        return Err(IngestError::PathTraversal(raw.to_string()));
    }
    let mut parts = Vec::new();
    for comp in unified.split('/') {
        match comp {
            "" | "." => {}
            ".." => return Err(IngestError::PathTraversal(raw.to_string())),
            c => parts.push(c),
        }
    }
    if parts.is_empty() {
        Ok(None)
    } else {
        Ok(Some(parts.join("/")))
    }
}

fn has_drive_prefix(p: &str) -> bool {
    let b = p.as_bytes();
    b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1] == b':'
}

/// Accumulates entries while enforcing the size caps.
struct Collector {
    limits: IngestLimits,
    total: u64,
    files: Vec<PackageFile>,
    index: HashMap<String, usize>,
}

impl Collector {
    fn new(limits: IngestLimits) -> Self {
        Collector { limits, total: 0, files: Vec::new(), index: HashMap::new() }
    }

    fn add<R: Read>(&mut self, rel_path: String, reader: R) -> Result<(), IngestError> {
        let budget = self.limits.max_total_bytes.saturating_sub(self.total);
        // one extra byte past the budget is enough to detect the overflow
        let mut limited = reader.take(budget.saturating_add(1));
        let mut content = Vec::new();
        let keep = self.limits.max_file_bytes;
        (&mut limited)
            .take(keep.saturating_add(1))
            .read_to_end(&mut content)
            .map_err(corrupt)?;
        let mut size = content.len() as u64;
        let truncated = size > keep;
        if truncated {
            content = Vec::new();
            size += io::copy(&mut limited, &mut io::sink()).map_err(corrupt)?;
        }
        if size > budget {
            return Err(IngestError::SizeBombExceeded { limit: self.limits.max_total_bytes });
        }
        self.total += size;

        let mut file = PackageFile::new(rel_path, content);
        file.byte_size = size;
        file.truncated = truncated;
        match self.index.get(&file.rel_path) {
            // later entries win, as when a tar is unpacked
            Some(&i) => {
                self.total -= self.files[i].byte_size;
                self.files[i] = file;
            }
            None => {
                self.index.insert(file.rel_path.clone(), self.files.len());
                self.files.push(file);
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Vec<PackageFile> {
        self.files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
        self.files
    }
}

fn corrupt(e: io::Error) -> IngestError {
    IngestError::CorruptArchive(e.to_string())
}

fn read_tar_gz(bytes: &[u8], limits: IngestLimits) -> Result<Vec<PackageFile>, IngestError> {
    let gz = flate2::read::GzDecoder::new(Cursor::new(bytes));
    let mut archive = tar::Archive::new(gz);
    let mut collector = Collector::new(limits);
    for entry in archive.entries().map_err(corrupt)? {
        let entry = entry.map_err(corrupt)?;
        let raw = String::from_utf8_lossy(&entry.path_bytes()).into_owned();
        let Some(rel) = sanitize_entry_path(&raw)? else { continue };
        match entry.header().entry_type() {
            tar::EntryType::Regular | tar::EntryType::Continuous | tar::EntryType::GNUSparse => {
                collector.add(rel, entry)?;
            }
            // directories, links, devices: metadata only
            _ => {}
        }
    }
    Ok(collector.finish())
}

fn read_zip(bytes: &[u8], limits: IngestLimits) -> Result<Vec<PackageFile>, IngestError> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
    let mut collector = Collector::new(limits);
    for i in 0..archive.len() {
        let entry = archive
            .by_index(i)
            .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
        let raw = String::from_utf8_lossy(entry.name_raw()).into_owned();
        let Some(rel) = sanitize_entry_path(&raw)? else { continue };
        if entry.is_dir() || is_zip_symlink(entry.unix_mode()) {
            continue;
        }
        collector.add(rel, entry)?;
    }
    Ok(collector.finish())
}

fn is_zip_symlink(mode: Option<u32>) -> bool {
    const S_IFMT: u32 = 0o170000;
    const S_IFLNK: u32 = 0o120000;
    matches!(mode, Some(m) if m & S_IFMT == S_IFLNK)
}

/// Name and version from embedded metadata: the shallowest `package.json`
/// for npm, `PKG-INFO` (sdist) or `*.dist-info/METADATA` (wheel) for PyPI.
fn metadata_name_version(ecosystem: Ecosystem, files: &[PackageFile]) -> Option<(String, String)> {
    let shallowest = |pred: &dyn Fn(&PackageFile) -> bool| {
        files
            .iter()
            .filter(|f| pred(f) && !f.truncated)
            .min_by_key(|f| (f.rel_path.matches('/').count(), f.rel_path.clone()))
    };
    match ecosystem {
        Ecosystem::Npm => {
            let f = shallowest(&|f| f.basename() == "package.json")?;
            let v: serde_json::Value = serde_json::from_slice(&f.content).ok()?;
            let name = v.get("name")?.as_str()?.to_string();
            let version = v.get("version").and_then(|x| x.as_str()).unwrap_or("").to_string();
            Some((name, version))
        }
        Ecosystem::Pypi => {
            let f = shallowest(&|f| {
                f.basename() == "PKG-INFO"
                    || (f.basename() == "METADATA" && f.rel_path.contains(".dist-info/"))
            })?;
            let text = f.text();
            let mut name = None;
            let mut version = None;
            for line in text.lines() {
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.strip_prefix("Name:") {
                    name.get_or_insert_with(|| v.trim().to_string());
                } else if let Some(v) = line.strip_prefix("Version:") {
                    version.get_or_insert_with(|| v.trim().to_string());
                }
            }
            Some((name?, version.unwrap_or_default()))
        }
    }
}

const ARCHIVE_SUFFIXES: [&str; 5] = [".tar.gz", ".tgz", ".whl", ".zip", ".tar"];

fn strip_archive_suffix(file_name: &str) -> &str {
    let lower = file_name.to_ascii_lowercase();
    for suffix in ARCHIVE_SUFFIXES {
        if lower.ends_with(suffix) {
            return &file_name[..file_name.len() - suffix.len()];
        }
    }
    file_name
}

/// Split `name-1.2.3.tgz` style filenames into `(name, version)`. Wheels use
/// the first two dash-separated fields. Returns `None` without a version.
pub fn split_archive_filename(file_name: &str) -> Option<(String, String)> {
    let lower = file_name.to_ascii_lowercase();
    let stem = strip_archive_suffix(file_name);
    if lower.ends_with(".whl") {
        let mut parts = stem.splitn(3, '-');
        let name = parts.next()?;
        let version = parts.next()?;
        return (!name.is_empty() && !version.is_empty())
            .then(|| (name.to_string(), version.to_string()));
    }
    let bytes = stem.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| bytes[i - 1] == b'-' && bytes[i].is_ascii_digit())?;
    let name = &stem[..split - 1];
    let version = &stem[split..];
    (!name.is_empty()).then(|| (name.to_string(), version.to_string()))
}
