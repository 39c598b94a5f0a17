//! Assembly of the full feature vector from an artifact.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::dictionary::{count_suspicious, SensitiveDictionary};
use super::gl4::{entropy_stats, homogeneity_counts};
use super::schema::{slot, FeatureSchema};
use super::strings::{count_base64, count_ips, count_urls};
use crate::ingest::{FileRole, PackageArtifact};
use crate::lexing::{lex_javascript, lex_package_json, lex_python, TokenKind, TokenStream};
use crate::stats::{summary4, Summary4};
use crate::Ecosystem;

pub const NPM_HOOK_NAMES: [&str; 5] = ["install", "preinstall", "postinstall", "pre-install", "post-install"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_version: String,
    pub schema_hash: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn zeros(schema: &FeatureSchema) -> Self {
        FeatureVector {
            schema_version: schema.version.clone(),
            schema_hash: schema.hash(),
            values: vec![0.0; schema.len()],
        }
    }

    pub fn get(&self, schema: &FeatureSchema, name: &str) -> Option<f64> {
        schema.index_of(name).map(|i| self.values[i])
    }
}

/// Feature vector plus the lexer diagnostics gathered on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub vector: FeatureVector,
    pub lex_error: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolClass {
    SquareBrackets,
    Equals,
    Plus,
}

impl SymbolClass {
    fn matches(self, b: u8) -> bool {
        match self {
            SymbolClass::SquareBrackets => b == b'[' || b == b']',
            SymbolClass::Equals => b == b'=',
            SymbolClass::Plus => b == b'+',
        }
    }
}

/// Lexes every source file and install script, keyed by relative path.
pub fn lex_artifact(artifact: &PackageArtifact) -> BTreeMap<String, TokenStream> {
    let mut out = BTreeMap::new();
    for file in &artifact.files {
        let ts = match (file.role, artifact.ecosystem) {
            (FileRole::SourceJs, _) => lex_javascript(&file.content),
            (FileRole::SourcePy, _) => lex_python(&file.content),
            (FileRole::InstallScript, Ecosystem::Npm) => lex_package_json(&file.content),
            (FileRole::InstallScript, Ecosystem::Pypi) => lex_python(&file.content),
            _ => continue,
        };
        out.insert(file.rel_path.clone(), ts.with_file(file.rel_path.clone()));
    }
    out
}

/// String tokens nested anywhere inside the root object's `scripts` member.
fn npm_script_strings(ts: &TokenStream) -> Vec<&str> {
    let toks = &ts.tokens;
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut scripts_depth: Option<usize> = None;
    for (i, t) in toks.iter().enumerate() {
        match (t.kind, t.text.as_str()) {
            (TokenKind::Punctuation, "{" | "[") => depth += 1,
            (TokenKind::Punctuation, "}" | "]") => {
                if scripts_depth == Some(depth) {
                    scripts_depth = None;
                }
                depth = depth.saturating_sub(1);
            }
            (TokenKind::String, text) => {
                if scripts_depth.is_some() {
                    out.push(text);
                } else if depth == 1
                    && text == "scripts"
                    && toks.get(i + 1).is_some_and(|n| n.text == ":")
                    && toks.get(i + 2).is_some_and(|n| n.kind == TokenKind::Punctuation && n.text == "{")
                {
                    scripts_depth = Some(2);
                }
            }
            _ => {}
        }
    }
    out
}

/// PyPI: a `setup.py` exists. npm: some `package.json` declares an install
/// hook under `scripts` (any string token when the JSON was malformed).
pub fn detect_install_hook(artifact: &PackageArtifact, tokens: &BTreeMap<String, TokenStream>) -> bool {
    let mut scripts = artifact.files_with_role(FileRole::InstallScript);
    match artifact.ecosystem {
        Ecosystem::Pypi => scripts.next().is_some(),
        Ecosystem::Npm => scripts.any(|f| {
            let Some(ts) = tokens.get(&f.rel_path) else { return false };
            let is_hook = |s: &str| NPM_HOOK_NAMES.iter().any(|h| h.eq_ignore_ascii_case(s));
            if ts.lex_error {
                ts.strings().any(is_hook)
            } else {
                npm_script_strings(ts).into_iter().any(is_hook)
            }
        }),
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Newline-terminated segments plus a trailing unterminated one.
pub fn line_count(text: &str) -> usize {
    let newlines = text.bytes().filter(|&b| b == b'\n').count();
    let tail = !text.is_empty() && !text.ends_with('\n');
    newlines + usize::from(tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeCounts {
    pub install_words: usize,
    pub install_lines: usize,
    pub source_words: usize,
    pub source_lines: usize,
}

pub fn size_counts(artifact: &PackageArtifact) -> SizeCounts {
    let mut c = SizeCounts::default();
    for file in &artifact.files {
        let text = file.text();
        if file.role == FileRole::InstallScript {
            c.install_words += word_count(&text);
            c.install_lines += line_count(&text);
        } else if file.role.is_source() {
            c.source_words += word_count(&text);
            c.source_lines += line_count(&text);
        }
    }
    c
}

/// Per source file ratio of symbol characters to file size, summarized
/// across the package. Truncated files have no content and are skipped.
pub fn symbol_ratio_stats(artifact: &PackageArtifact, class: SymbolClass) -> Summary4 {
    let ratios: Vec<f64> = artifact
        .files
        .iter()
        .filter(|f| f.role.is_source() && f.byte_size > 0 && !f.truncated)
        .map(|f| {
            let n = f.content.iter().filter(|&&b| class.matches(b)).count();
            n as f64 / f.byte_size as f64
        })
        .collect();
    summary4(&ratios)
}

pub fn extension_census(artifact: &PackageArtifact, schema: &FeatureSchema) -> Vec<f64> {
    let index: HashMap<&str, usize> =
        schema.extension_list.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let mut counts = vec![0.0; schema.extension_list.len()];
    for f in &artifact.files {
        if let Some(&i) = index.get(f.extension.as_str()) {
            counts[i] += 1.0;
        }
    }
    counts
}

pub fn extract_features(
    artifact: &PackageArtifact,
    schema: &FeatureSchema,
    dict: &SensitiveDictionary,
) -> FeatureVector {
    extract_detailed(artifact, schema, dict).vector
}

pub fn extract_detailed(
    artifact: &PackageArtifact,
    schema: &FeatureSchema,
    dict: &SensitiveDictionary,
) -> Extraction {
    let tokens = lex_artifact(artifact);
    let role_of: HashMap<&str, FileRole> =
        artifact.files.iter().map(|f| (f.rel_path.as_str(), f.role)).collect();

    let mut src_strings: Vec<&str> = Vec::new();
    let mut src_idents: Vec<&str> = Vec::new();
    let mut inst_strings: Vec<&str> = Vec::new();
    let mut inst_idents: Vec<&str> = Vec::new();
    for (path, ts) in &tokens {
        let (strings, idents) = if role_of.get(path.as_str()) == Some(&FileRole::InstallScript) {
            (&mut inst_strings, &mut inst_idents)
        } else {
            (&mut src_strings, &mut src_idents)
        };
        strings.extend(ts.strings());
        idents.extend(ts.identifiers());
    }
    let all_strings: Vec<&str> = src_strings.iter().chain(inst_strings.iter()).copied().collect();

    let mut v = FeatureVector::zeros(schema);
    let x = &mut v.values;
    let put4 = |x: &mut Vec<f64>, at: usize, s: Summary4| x[at..at + 4].copy_from_slice(&s.to_array());

    x[slot::HAS_INSTALL_HOOK] = f64::from(u8::from(detect_install_hook(artifact, &tokens)));
    let sizes = size_counts(artifact);
    x[slot::INSTALL_WORDS] = sizes.install_words as f64;
    x[slot::INSTALL_LINES] = sizes.install_lines as f64;
    x[slot::SOURCE_WORDS] = sizes.source_words as f64;
    x[slot::SOURCE_LINES] = sizes.source_lines as f64;
    x[slot::NUM_URLS] = count_urls(&all_strings) as f64;
    x[slot::NUM_IPS] = count_ips(&all_strings) as f64;
    x[slot::NUM_SUSPICIOUS] = count_suspicious(&all_strings, dict) as f64;
    x[slot::NUM_BASE64] = count_base64(&all_strings) as f64;

    put4(x, slot::SRC_STRING_ENTROPY, entropy_stats(&src_strings));
    let (hom, het) = homogeneity_counts(&src_strings);
    x[slot::SRC_STRING_HOMOGENEOUS] = hom as f64;
    x[slot::SRC_STRING_HETEROGENEOUS] = het as f64;
    put4(x, slot::SRC_IDENT_ENTROPY, entropy_stats(&src_idents));
    let (hom, het) = homogeneity_counts(&src_idents);
    x[slot::SRC_IDENT_HOMOGENEOUS] = hom as f64;
    x[slot::SRC_IDENT_HETEROGENEOUS] = het as f64;
    put4(x, slot::INSTALL_STRING_ENTROPY, entropy_stats(&inst_strings));
    put4(x, slot::INSTALL_IDENT_ENTROPY, entropy_stats(&inst_idents));

    put4(x, slot::RATIO_BRACKETS, symbol_ratio_stats(artifact, SymbolClass::SquareBrackets));
    put4(x, slot::RATIO_EQUALS, symbol_ratio_stats(artifact, SymbolClass::Equals));
    put4(x, slot::RATIO_PLUS, symbol_ratio_stats(artifact, SymbolClass::Plus));

    let census = extension_census(artifact, schema);
    x[slot::FIRST_EXTENSION..].copy_from_slice(&census);

    Extraction {
        lex_error: tokens.values().any(|t| t.lex_error),
        truncated: artifact.any_truncated(),
        vector: v,
    }
}
