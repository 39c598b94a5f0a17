use super::{FileRole, PackageArtifact};
use crate::Ecosystem;

/// Lowercased substring after the final `.` of the basename, or empty.
pub fn extension_of(rel_path: &str) -> String {
    let base = rel_path.rsplit('/').next().unwrap_or(rel_path);
    match base.rfind('.') {
        Some(i) => base[i + 1..].to_ascii_lowercase(),
        None => String::new(),
    }
}

/// Install scripts are matched on basename, case-insensitively, at any depth.
pub fn role_for(ecosystem: Ecosystem, rel_path: &str, extension: &str) -> FileRole {
    let base = rel_path.rsplit('/').next().unwrap_or(rel_path);
    if base.eq_ignore_ascii_case(ecosystem.install_script_name()) {
        return FileRole::InstallScript;
    }
    match extension {
        "js" => FileRole::SourceJs,
        "py" => FileRole::SourcePy,
        "sh" => FileRole::ShellScript,
        _ => FileRole::Other,
    }
}

pub fn classify_files(mut artifact: PackageArtifact) -> PackageArtifact {
    let eco = artifact.ecosystem;
    for file in &mut artifact.files {
        file.extension = extension_of(&file.rel_path);
        file.role = role_for(eco, &file.rel_path, &file.extension);
    }
    artifact
}
