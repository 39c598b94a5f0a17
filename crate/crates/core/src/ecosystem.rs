use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Package registry a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ecosystem {
    Npm,
    Pypi,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 2] = [Ecosystem::Npm, Ecosystem::Pypi];

    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Npm => "npm",
            Ecosystem::Pypi => "pypi",
        }
    }

    /// Basename (lowercase) of the installation script for this ecosystem.
    pub fn install_script_name(self) -> &'static str {
        match self {
            Ecosystem::Npm => "package.json",
            Ecosystem::Pypi => "setup.py",
        }
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("unknown ecosystem `{0}` (expected npm or pypi)")]
pub struct ParseEcosystemError(pub String);

impl FromStr for Ecosystem {
    type Err = ParseEcosystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "npm" | "js" | "javascript" => Ok(Ecosystem::Npm),
            "pypi" | "py" | "python" => Ok(Ecosystem::Pypi),
            _ => Err(ParseEcosystemError(s.to_string())),
        }
    }
}
