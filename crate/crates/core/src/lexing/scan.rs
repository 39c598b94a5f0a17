use super::{Language, Token, TokenKind, TokenStream};

/// Byte cursor shared by the tokenizers. Every delimiter the lexers care
/// about is ASCII, so slicing at those positions stays on char boundaries.
pub(super) struct Scanner<'a> {
    pub src: &'a str,
    pub bytes: &'a [u8],
    pub pos: usize,
    pub tokens: Vec<Token>,
    pub error: bool,
}

impl<'a> Scanner<'a> {
    pub fn new(src: &'a str) -> Self {
        Scanner { src, bytes: src.as_bytes(), pos: 0, tokens: Vec::new(), error: false }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub fn peek(&self) -> u8 {
        self.peek_at(0)
    }

    pub fn peek_at(&self, ahead: usize) -> u8 {
        self.bytes.get(self.pos + ahead).copied().unwrap_or(0)
    }

    pub fn starts_with(&self, s: &str) -> bool {
        self.bytes[self.pos.min(self.bytes.len())..].starts_with(s.as_bytes())
    }

    pub fn push(&mut self, kind: TokenKind, offset: usize, text: &str) {
        self.tokens.push(Token { kind, text: text.to_string(), byte_offset: offset });
    }

    pub fn skip_to_newline(&mut self) {
        while !self.at_end() && self.peek() != b'\n' {
            self.pos += 1;
        }
    }

    /// Consume an identifier run starting at `pos`; returns its slice.
    pub fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while !self.at_end() && pred(self.peek()) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    /// Skip a numeric literal (decimal, hex, exponent, separators).
    pub fn skip_number(&mut self) {
        let start = self.pos;
        let hex = self.peek() == b'0' && matches!(self.peek_at(1), b'x' | b'X');
        while !self.at_end() {
            let c = self.peek();
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
                self.pos += 1;
            } else if (c == b'+' || c == b'-')
                && !hex
                && self.pos > start
                && matches!(self.bytes[self.pos - 1], b'e' | b'E')
            {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Read a quoted body whose opening delimiter (`delim`, one or three
    /// bytes) starts at `pos`. Backslash always escapes the next byte.
    /// Unterminated bodies run to end of input and set the error flag.
    /// Returns the inner slice.
    pub fn quoted(&mut self, delim: &str) -> &'a str {
        self.pos += delim.len();
        let start = self.pos;
        loop {
            if self.at_end() {
                self.error = true;
                return &self.src[start..];
            }
            if self.peek() == b'\\' {
                self.pos = (self.pos + 2).min(self.bytes.len());
                continue;
            }
            if self.starts_with(delim) {
                let inner = &self.src[start..self.pos];
                self.pos += delim.len();
                return inner;
            }
            self.pos += 1;
        }
    }

    /// Longest match against operator and punctuation tables (entries of
    /// each table may have any length).
    pub fn symbol(&mut self, operators: &[&str], punctuation: &[&str]) -> Option<TokenKind> {
        let mut best: Option<(usize, TokenKind)> = None;
        let rest = &self.bytes[self.pos..];
        for (table, kind) in [(operators, TokenKind::Operator), (punctuation, TokenKind::Punctuation)] {
            for sym in table {
                if rest.starts_with(sym.as_bytes()) && best.is_none_or(|(len, _)| sym.len() > len) {
                    best = Some((sym.len(), kind));
                }
            }
        }
        let (len, kind) = best?;
        let offset = self.pos;
        let text = &self.src[offset..offset + len];
        self.pos += len;
        self.push(kind, offset, text);
        Some(kind)
    }

    pub fn finish(self, language: Language, decode_error: bool) -> TokenStream {
        TokenStream {
            file: String::new(),
            language,
            tokens: self.tokens,
            lex_error: self.error || decode_error,
        }
    }
}

pub(super) fn is_space(c: u8) -> bool {
    matches!(c, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}
