//! Best-effort tokenizers for JavaScript, Python and `package.json`.
//!
//! Only four token kinds are produced: string literals (inner text, quotes
//! stripped, escapes left raw), identifiers (keywords included), operators
//! and punctuation. Numbers and comments are consumed without emitting a
//! token. Lexing is total: malformed input sets `lex_error` and yields
//! whatever tokens were recognized. Offsets index the UTF-8 text after
//! invalid sequences are replaced, which equals the input for valid UTF-8.

mod javascript;
mod json;
mod python;
mod scan;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

pub use javascript::lex_javascript;
pub use json::lex_package_json;
pub use python::lex_python;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    String,
    Identifier,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub byte_offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Js,
    Py,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub file: String,
    pub language: Language,
    pub tokens: Vec<Token>,
    pub lex_error: bool,
}

impl TokenStream {
    pub fn with_file(mut self, file: impl Into<String>) -> Self {
        self.file = file.into();
        self
    }

    pub fn of_kind(&self, kind: TokenKind) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter(move |t| t.kind == kind).map(|t| t.text.as_str())
    }

    pub fn strings(&self) -> impl Iterator<Item = &str> {
        self.of_kind(TokenKind::String)
    }

    pub fn identifiers(&self) -> impl Iterator<Item = &str> {
        self.of_kind(TokenKind::Identifier)
    }
}

/// Lossy decode; the flag reports whether replacement happened.
pub(crate) fn decode(content: &[u8]) -> (Cow<'_, str>, bool) {
    let text = String::from_utf8_lossy(content);
    let replaced = matches!(text, Cow::Owned(_));
    (text, replaced)
}
