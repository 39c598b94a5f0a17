//! Language-independent lexical and structural features.
//!
//! The vector has 132 slots: 41 scalar features (install hook, word and
//! line counts, URL/IP/base64/dictionary counters, GL4 entropy statistics
//! of strings and identifiers, string-manipulation symbol ratios) followed
//! by 91 per-extension file counters. See [`schema::SCALAR_FEATURES`].
//!
//! Populations: source-file entropy statistics pool tokens from every
//! `.js`/`.py` file; install-script statistics pool tokens from every
//! install script; URL/IP/base64/dictionary counters run over the string
//! tokens of both; symbol ratios use source files only.

mod csv_io;
pub mod dictionary;
mod extract;
pub mod gl4;
pub mod schema;
pub mod strings;

pub use csv_io::{read_feature_csv, write_feature_csv, CsvError, FeatureRow, FeatureCsvWriter, RowLabel};
pub use dictionary::{count_suspicious, expand_dictionary, parse_dictionary, SensitiveDictionary};
pub use extract::{
    detect_install_hook, extension_census, extract_detailed, extract_features, lex_artifact,
    line_count, size_counts, symbol_ratio_stats, word_count, Extraction, FeatureVector,
    SizeCounts, SymbolClass, NPM_HOOK_NAMES,
};
pub use gl4::{entropy_stats, gl4_encode, homogeneity_counts, shannon_entropy};
pub use schema::{FeatureSchema, SchemaError};
pub use strings::{count_base64, count_ips, count_urls};
