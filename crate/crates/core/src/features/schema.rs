//! The versioned, ordered feature schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_EXTENSIONS: &str = include_str!("../../data/extensions.txt");
pub const EXTENSION_COUNT: usize = 91;

/// Scalar slots in vector order; extension counters follow.
pub const SCALAR_FEATURES: [&str; 41] = [
    "has_install_hook",
    "install_words",
    "install_lines",
    "source_words",
    "source_lines",
    "num_urls",
    "num_ips",
    "num_suspicious_tokens",
    "num_base64_strings",
    "src_string_entropy_mean",
    "src_string_entropy_std",
    "src_string_entropy_q3",
    "src_string_entropy_max",
    "src_string_homogeneous",
    "src_string_heterogeneous",
    "src_identifier_entropy_mean",
    "src_identifier_entropy_std",
    "src_identifier_entropy_q3",
    "src_identifier_entropy_max",
    "src_identifier_homogeneous",
    "src_identifier_heterogeneous",
    "install_string_entropy_mean",
    "install_string_entropy_std",
    "install_string_entropy_q3",
    "install_string_entropy_max",
    "install_identifier_entropy_mean",
    "install_identifier_entropy_std",
    "install_identifier_entropy_q3",
    "install_identifier_entropy_max",
    "ratio_square_brackets_mean",
    "ratio_square_brackets_std",
    "ratio_square_brackets_q3",
    "ratio_square_brackets_max",
    "ratio_equals_mean",
    "ratio_equals_std",
    "ratio_equals_q3",
    "ratio_equals_max",
    "ratio_plus_mean",
    "ratio_plus_std",
    "ratio_plus_q3",
    "ratio_plus_max",
];

/// Slot indices of the scalar features.
pub mod slot {
    pub const HAS_INSTALL_HOOK: usize = 0;
    pub const INSTALL_WORDS: usize = 1;
    pub const INSTALL_LINES: usize = 2;
    pub const SOURCE_WORDS: usize = 3;
    pub const SOURCE_LINES: usize = 4;
    pub const NUM_URLS: usize = 5;
    pub const NUM_IPS: usize = 6;
    pub const NUM_SUSPICIOUS: usize = 7;
    pub const NUM_BASE64: usize = 8;
    pub const SRC_STRING_ENTROPY: usize = 9;
    pub const SRC_STRING_HOMOGENEOUS: usize = 13;
    pub const SRC_STRING_HETEROGENEOUS: usize = 14;
    pub const SRC_IDENT_ENTROPY: usize = 15;
    pub const SRC_IDENT_HOMOGENEOUS: usize = 19;
    pub const SRC_IDENT_HETEROGENEOUS: usize = 20;
    pub const INSTALL_STRING_ENTROPY: usize = 21;
    pub const INSTALL_IDENT_ENTROPY: usize = 25;
    pub const RATIO_BRACKETS: usize = 29;
    pub const RATIO_EQUALS: usize = 33;
    pub const RATIO_PLUS: usize = 37;
    pub const FIRST_EXTENSION: usize = 41;
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema file: {0}")]
    Malformed(String),
    #[error("invalid schema: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    pub names: Vec<String>,
    pub extension_list: Vec<String>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        let extensions = super::dictionary::parse_dictionary(DEFAULT_EXTENSIONS);
        FeatureSchema::with_extensions(extensions).expect("shipped extension list is valid")
    }
}

impl FeatureSchema {
    /// Canonical scalar features followed by `ext_<e>` counters.
    pub fn with_extensions(extension_list: Vec<String>) -> Result<Self, SchemaError> {
        let mut names: Vec<String> = SCALAR_FEATURES.iter().map(|s| s.to_string()).collect();
        names.extend(extension_list.iter().map(|e| format!("ext_{e}")));
        let schema = FeatureSchema { version: SCHEMA_VERSION.to_string(), names, extension_list };
        schema.validate()?;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.version != SCHEMA_VERSION {
            return Err(SchemaError::Invalid(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.extension_list.len() != EXTENSION_COUNT {
            return Err(SchemaError::Invalid(format!(
                "extension list has {} entries, expected {EXTENSION_COUNT}",
                self.extension_list.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.extension_list {
            if e.is_empty() || e != &e.to_ascii_lowercase() || e.contains('.') {
                return Err(SchemaError::Invalid(format!("bad extension `{e}`")));
            }
            if !seen.insert(e) {
                return Err(SchemaError::Invalid(format!("duplicate extension `{e}`")));
            }
        }
        if self.names.len() != SCALAR_FEATURES.len() + self.extension_list.len() {
            return Err(SchemaError::Invalid(format!("schema has {} names", self.names.len())));
        }
        for (i, expected) in SCALAR_FEATURES.iter().enumerate() {
            if self.names[i] != *expected {
                return Err(SchemaError::Invalid(format!(
                    "slot {i} is `{}`, expected `{expected}`",
                    self.names[i]
                )));
            }
        }
        for (i, e) in self.extension_list.iter().enumerate() {
            let name = &self.names[SCALAR_FEATURES.len() + i];
            if *name != format!("ext_{e}") {
                return Err(SchemaError::Invalid(format!("slot name `{name}` does not match extension `{e}`")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex(&Sha256::digest(&json))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: FeatureSchema =
            serde_json::from_str(text).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_132_slots() {
        let s = FeatureSchema::default();
        assert_eq!(s.len(), 132);
        assert_eq!(s.extension_list.len(), 91);
        assert_eq!(s.names[slot::FIRST_EXTENSION], "ext_js");
        assert_eq!(s.names[slot::RATIO_PLUS + 3], "ratio_plus_max");
        assert_eq!(s.names[slot::INSTALL_IDENT_ENTROPY], "install_identifier_entropy_mean");
        let unique: std::collections::HashSet<_> = s.names.iter().collect();
        assert_eq!(unique.len(), 132);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let s = FeatureSchema::default();
        let back = FeatureSchema::from_json(&s.to_json_pretty()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(s.hash().len(), 64);
    }

    #[test]
    fn rejects_reordered_scalars() {
        let mut s = FeatureSchema::default();
        s.names.swap(1, 2);
        assert!(matches!(s.validate(), Err(SchemaError::Invalid(_))));
        let mut s = FeatureSchema::default();
        s.extension_list.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = FeatureSchema::default();
        let mut exts = a.extension_list.clone();
        exts.swap(0, 1);
        let b = FeatureSchema::with_extensions(exts).unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
