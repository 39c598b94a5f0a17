//! Sensitive keyword dictionary expanded into encoded variants.

use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};

/// Shipped seed list.
pub const DEFAULT_DICTIONARY: &str = include_str!("../../data/suspicious_keywords.txt");

/// Encoded cores shorter than this are dropped; they would match noise.
const MIN_CORE_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub keyword: String,
    /// Lowercased, deduplicated; the plaintext comes first.
    pub variants: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SensitiveDictionary {
    entries: Vec<DictionaryEntry>,
    matcher: Option<AhoCorasick>,
    /// pattern id -> entry index
    owner: Vec<usize>,
}

impl SensitiveDictionary {
    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_variant(&self, variant: &str) -> bool {
        let v = variant.to_lowercase();
        self.entries.iter().any(|e| e.variants.contains(&v))
    }

    /// The shipped seed list, expanded.
    pub fn default_seed() -> Self {
        expand_dictionary(&parse_dictionary(DEFAULT_DICTIONARY))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(expand_dictionary(&parse_dictionary(&text)))
    }

    /// Case-insensitive hits in one string. Matches of different variants
    /// of the same keyword starting at the same offset count once.
    pub fn hits_in(&self, s: &str) -> usize {
        let Some(matcher) = &self.matcher else { return 0 };
        let mut hits: Vec<(usize, usize)> = matcher
            .find_overlapping_iter(s)
            .map(|m| (self.owner[m.pattern().as_usize()], m.start()))
            .collect();
        hits.sort_unstable();
        hits.dedup();
        hits.len()
    }
}

/// One keyword per line; blank lines and `#` comment lines are ignored.
pub fn parse_dictionary(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn rot13(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'a'..='z' => (((c as u8 - b'a') + 13) % 26 + b'a') as char,
            'A'..='Z' => (((c as u8 - b'A') + 13) % 26 + b'A') as char,
            _ => c,
        })
        .collect()
}

/// Percent-encode everything outside the unreserved set.
pub fn url_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 3);
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Characters of `encode(shift zero bytes ++ data)` that depend only on
/// `data`, whatever surrounds it in a larger encoded blob.
fn stable_core(
    encoding: &data_encoding::Encoding,
    bits_per_char: usize,
    data: &[u8],
    shift: usize,
) -> String {
    let mut buf = vec![0u8; shift];
    buf.extend_from_slice(data);
    let encoded = encoding.encode(&buf);
    let first = (8 * shift).div_ceil(bits_per_char);
    let end = (8 * (shift + data.len())) / bits_per_char;
    if end <= first {
        return String::new();
    }
    encoded[first..end].to_string()
}

/// Expand each keyword into plaintext, rot13, URL-encoded, padded base64
/// and base32, plus the alignment-independent cores of base64 (3 byte
/// alignments) and base32 (5 byte alignments).
pub fn expand_dictionary<S: AsRef<str>>(keywords: &[S]) -> SensitiveDictionary {
    let mut entries: Vec<DictionaryEntry> = Vec::new();
    for kw in keywords {
        let kw = kw.as_ref();
        if kw.is_empty() || entries.iter().any(|e| e.keyword.eq_ignore_ascii_case(kw)) {
            continue;
        }
        let bytes = kw.as_bytes();
        let mut variants = vec![
            kw.to_string(),
            rot13(kw),
            url_encode(kw),
            data_encoding::BASE64.encode(bytes),
            data_encoding::BASE32.encode(bytes),
        ];
        for shift in 0..3 {
            variants.push(stable_core(&data_encoding::BASE64, 6, bytes, shift));
        }
        for shift in 0..5 {
            variants.push(stable_core(&data_encoding::BASE32, 5, bytes, shift));
        }
        let mut uniq: Vec<String> = Vec::new();
        for (i, v) in variants.into_iter().enumerate() {
            let v = v.to_lowercase();
            // the first five are whole encodings; the rest are cores
            if v.is_empty() || (i >= 5 && v.len() < MIN_CORE_LEN) || uniq.contains(&v) {
                continue;
            }
            uniq.push(v);
        }
        entries.push(DictionaryEntry { keyword: kw.to_string(), variants: uniq });
    }

    let mut patterns = Vec::new();
    let mut owner = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        for v in &e.variants {
            patterns.push(v.clone());
            owner.push(i);
        }
    }
    let matcher = (!patterns.is_empty()).then(|| {
        AhoCorasickBuilder::new()
            .ascii_case_insensitive(true)
            .match_kind(MatchKind::Standard)
            .build(&patterns)
            .expect("dictionary automaton")
    });
    SensitiveDictionary { entries, matcher, owner }
}

/// Total dictionary hits over all strings.
pub fn count_suspicious<S: AsRef<str>>(strings: &[S], dict: &SensitiveDictionary) -> usize {
    strings.iter().map(|s| dict.hits_in(s.as_ref())).sum()
}
