//! Archive writers for fixtures and synthetic corpora.

use std::io::{Cursor, Write};

/// One entry for [`build_tar_gz`] / [`build_zip`]. Paths are written
/// verbatim, without validation, so hostile fixtures can be produced.
#[derive(Debug, Clone)]
pub enum ArchiveEntry {
    File { path: String, content: Vec<u8> },
    Dir { path: String },
    Symlink { path: String, target: String },
}

impl ArchiveEntry {
    pub fn file(path: impl Into<String>, content: impl Into<Vec<u8>>) -> Self {
        ArchiveEntry::File { path: path.into(), content: content.into() }
    }
}

fn set_raw_name(header: &mut tar::Header, path: &str) -> std::io::Result<()> {
    let bytes = path.as_bytes();
    let name = &mut header.as_old_mut().name;
    if bytes.len() > name.len() {
        return Err(std::io::Error::other(format!("tar path too long: {path}")));
    }
    name.fill(0);
    name[..bytes.len()].copy_from_slice(bytes);
    Ok(())
}

/// Deterministic gzip tar: fixed mtime, mode and ownership.
pub fn build_tar_gz(entries: &[ArchiveEntry]) -> std::io::Result<Vec<u8>> {
    let gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    let mut builder = tar::Builder::new(gz);
    for entry in entries {
        let mut header = tar::Header::new_gnu();
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        match entry {
            ArchiveEntry::File { path, content } => {
                set_raw_name(&mut header, path)?;
                header.set_entry_type(tar::EntryType::Regular);
                header.set_mode(0o644);
                header.set_size(content.len() as u64);
                header.set_cksum();
                builder.append(&header, content.as_slice())?;
            }
            ArchiveEntry::Dir { path } => {
                set_raw_name(&mut header, path)?;
                header.set_entry_type(tar::EntryType::Directory);
                header.set_mode(0o755);
                header.set_size(0);
                header.set_cksum();
                builder.append(&header, std::io::empty())?;
            }
            ArchiveEntry::Symlink { path, target } => {
                set_raw_name(&mut header, path)?;
                header.set_entry_type(tar::EntryType::Symlink);
                header.set_mode(0o777);
                header.set_size(0);
                header.set_link_name(target)?;
                header.set_cksum();
                builder.append(&header, std::io::empty())?;
            }
        }
    }
    let gz = builder.into_inner()?;
    gz.finish()
}

pub fn build_zip(entries: &[ArchiveEntry]) -> std::io::Result<Vec<u8>> {
    use zip::write::SimpleFileOptions;
    let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    let to_io = |e: zip::result::ZipError| std::io::Error::other(e.to_string());
    for entry in entries {
        match entry {
            ArchiveEntry::File { path, content } => {
                writer.start_file(path.as_str(), opts).map_err(to_io)?;
                writer.write_all(content)?;
            }
            ArchiveEntry::Dir { path } => {
                writer.add_directory(path.as_str(), opts).map_err(to_io)?;
            }
            ArchiveEntry::Symlink { path, target } => {
                writer.add_symlink(path.as_str(), target.as_str(), opts).map_err(to_io)?;
            }
        }
    }
    Ok(writer.finish().map_err(to_io)?.into_inner())
}
