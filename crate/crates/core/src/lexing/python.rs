use super::scan::{is_space, Scanner};
use super::{decode, Language, TokenKind, TokenStream};

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "!=", "%=", "&=", "**", "*=", "+=", "-=", "->", "//", "/=",
    ":=", "<<", "<=", "==", ">=", ">>", "@=", "^=", "|=", "~", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "<", ">", "=", "!",
];
const PUNCTUATION: &[&str] = &["...", "(", ")", "[", "]", "{", "}", ",", ":", ";", "."];

fn ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn ident_continue(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// `r`, `b`, `f`, `u` and their two-letter combinations, any case.
fn is_string_prefix(s: &str) -> bool {
    s.len() <= 2 && s.bytes().all(|c| matches!(c.to_ascii_lowercase(), b'r' | b'b' | b'f' | b'u'))
}

pub fn lex_python(content: &[u8]) -> TokenStream {
    let (text, decode_error) = decode(content);
    let mut sc = Scanner::new(&text);
    while !sc.at_end() {
        let c = sc.peek();
        if is_space(c) {
            sc.pos += 1;
        } else if c == b'\\' {
            // line continuation
            sc.pos += 1;
        } else if c == b'#' {
            sc.skip_to_newline();
        } else if c == b'"' || c == b'\'' {
            let start = sc.pos;
            string_literal(&mut sc, start);
        } else if ident_start(c) {
            let start = sc.pos;
            let word = sc.take_while(ident_continue);
            if is_string_prefix(word) && matches!(sc.peek(), b'"' | b'\'') {
                string_literal(&mut sc, start);
            } else {
                sc.push(TokenKind::Identifier, start, word);
            }
        } else if c.is_ascii_digit() || (c == b'.' && sc.peek_at(1).is_ascii_digit()) {
            sc.skip_number();
        } else if sc.symbol(OPERATORS, PUNCTUATION).is_none() {
            sc.pos += 1;
        }
    }
    sc.finish(Language::Py, decode_error)
}

/// `pos` is at the opening quote; `offset` is where the token starts
/// (the prefix, when there is one).
fn string_literal(sc: &mut Scanner<'_>, offset: usize) {
    let q = sc.peek();
    let triple = sc.peek_at(1) == q && sc.peek_at(2) == q;
    let delim = match (q, triple) {
        (b'"', true) => "\"\"\"",
        (b'"', false) => "\"",
        (_, true) => "'''",
        (_, false) => "'",
    };
    let inner = sc.quoted(delim);
    sc.push(TokenKind::String, offset, inner);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexing::Token;

    fn kinds(ts: &TokenStream) -> Vec<(TokenKind, &str)> {
        ts.tokens.iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    #[test]
    fn assignment_of_base64_literal() {
        let ts = lex_python(br#"x = "YmFzaA==""#);
        assert_eq!(
            kinds(&ts),
            vec![
                (TokenKind::Identifier, "x"),
                (TokenKind::Operator, "="),
                (TokenKind::String, "YmFzaA==")
            ]
        );
        assert!(!ts.lex_error);
    }

    #[test]
    fn triple_quoted_keeps_newline() {
        let ts = lex_python(b"s = '''a\nb'''");
        let strings: Vec<_> = ts.strings().collect();
        assert_eq!(strings, vec!["a\nb"]);
    }

    #[test]
    fn fstring_is_one_token() {
        let ts = lex_python(br#"f"v{x}""#);
        assert_eq!(ts.tokens, vec![Token { kind: TokenKind::String, text: "v{x}".into(), byte_offset: 0 }]);
    }

    #[test]
    fn prefixes_any_case() {
        let ts = lex_python(br#"a = Rb'\x00' + bR"q" + U'u'"#);
        let strings: Vec<_> = ts.strings().collect();
        assert_eq!(strings, vec!["\\x00", "q", "u"]);
        // a word that merely starts like a prefix stays an identifier
        let ts = lex_python(b"bar = fu");
        assert_eq!(ts.identifiers().collect::<Vec<_>>(), vec!["bar", "fu"]);
    }

    #[test]
    fn comments_and_numbers_are_skipped() {
        let ts = lex_python(b"# import os\ny = 1e-5 + 0x1F  # trailing \"q\"\n");
        assert_eq!(
            kinds(&ts),
            vec![(TokenKind::Identifier, "y"), (TokenKind::Operator, "="), (TokenKind::Operator, "+")]
        );
    }

    #[test]
    fn escapes_stay_raw() {
        let ts = lex_python(br#"'it\'s'"#);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec![r"it\'s"]);
    }

    #[test]
    fn unterminated_runs_to_eof() {
        let ts = lex_python(b"x = 'abc\ny = 2");
        assert!(ts.lex_error);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["abc\ny = 2"]);
    }

    #[test]
    fn longest_operator_wins() {
        let ts = lex_python(b"a **= b // c -> d");
        let ops: Vec<_> = ts.of_kind(TokenKind::Operator).collect();
        assert_eq!(ops, vec!["**=", "//", "->"]);
    }

    #[test]
    fn invalid_utf8_sets_flag() {
        let ts = lex_python(b"x = '\xff'");
        assert!(ts.lex_error);
        assert_eq!(ts.strings().count(), 1);
    }
}
