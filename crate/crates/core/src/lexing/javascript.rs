use super::scan::{is_space, Scanner};
use super::{decode, Language, TokenKind, TokenStream};

const OPERATORS: &[&str] = &[
    ">>>=", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "...", "=>", "==",
    "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "**", "<<", ">>", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|",
    "^", "?", "@",
];
const PUNCTUATION: &[&str] = &["(", ")", "[", "]", "{", "}", ",", ";", ":", "."];

/// What came before the current position, for the regex-vs-division call.
#[derive(Clone, Copy, PartialEq)]
enum Prev {
    Start,
    Operator,
    Punct(u8),
    Value,
}

impl Prev {
    fn allows_regex(self) -> bool {
        match self {
            Prev::Start | Prev::Operator => true,
            Prev::Punct(c) => matches!(c, b'(' | b',' | b'[' | b'{' | b';' | b':'),
            Prev::Value => false,
        }
    }
}

fn ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$'
}

fn ident_continue(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

pub fn lex_javascript(content: &[u8]) -> TokenStream {
    let (text, decode_error) = decode(content);
    let mut sc = Scanner::new(&text);
    let mut prev = Prev::Start;
    if sc.starts_with("#!") {
        sc.skip_to_newline();
    }
    while !sc.at_end() {
        let c = sc.peek();
        if is_space(c) {
            sc.pos += 1;
        } else if sc.starts_with("//") || sc.starts_with("<!--") {
            sc.skip_to_newline();
        } else if sc.starts_with("/*") {
            block_comment(&mut sc);
        } else if c == b'"' || c == b'\'' {
            let offset = sc.pos;
            let delim = if c == b'"' { "\"" } else { "'" };
            let inner = sc.quoted(delim);
            sc.push(TokenKind::String, offset, inner);
            prev = Prev::Value;
        } else if c == b'`' {
            let offset = sc.pos;
            sc.pos += 1;
            let start = sc.pos;
            let end = skip_template_body(&mut sc);
            let inner = &sc.src[start..end];
            sc.push(TokenKind::String, offset, inner);
            prev = Prev::Value;
        } else if ident_start(c) {
            let offset = sc.pos;
            let word = sc.take_while(ident_continue);
            sc.push(TokenKind::Identifier, offset, word);
            prev = Prev::Value;
        } else if c.is_ascii_digit() || (c == b'.' && sc.peek_at(1).is_ascii_digit()) {
            sc.skip_number();
            prev = Prev::Value;
        } else if c == b'/' && prev.allows_regex() && skip_regex(&mut sc) {
            prev = Prev::Value;
        } else {
            let at = sc.peek();
            match sc.symbol(OPERATORS, PUNCTUATION) {
                Some(TokenKind::Operator) => prev = Prev::Operator,
                Some(_) => {
                    prev = match at {
                        b')' | b']' | b'}' => Prev::Value,
                        other => Prev::Punct(other),
                    }
                }
                None => sc.pos += 1,
            }
        }
    }
    sc.finish(Language::Js, decode_error)
}

fn block_comment(sc: &mut Scanner<'_>) {
    sc.pos += 2;
    while !sc.at_end() {
        if sc.starts_with("*/") {
            sc.pos += 2;
            return;
        }
        sc.pos += 1;
    }
    sc.error = true;
}

/// `pos` is just past an opening backtick. Consumes through the closing
/// backtick and returns the end of the inner text. `${...}` spans are
/// skipped with brace and nested-literal tracking, not tokenized.
fn skip_template_body(sc: &mut Scanner<'_>) -> usize {
    loop {
        if sc.at_end() {
            sc.error = true;
            return sc.pos;
        }
        match sc.peek() {
            b'\\' => sc.pos = (sc.pos + 2).min(sc.bytes.len()),
            b'`' => {
                let end = sc.pos;
                sc.pos += 1;
                return end;
            }
            b'$' if sc.peek_at(1) == b'{' => {
                sc.pos += 2;
                skip_template_expr(sc);
            }
            _ => sc.pos += 1,
        }
    }
}

fn skip_template_expr(sc: &mut Scanner<'_>) {
    let mut depth = 1usize;
    while !sc.at_end() {
        match sc.peek() {
            b'{' => {
                depth += 1;
                sc.pos += 1;
            }
            b'}' => {
                depth -= 1;
                sc.pos += 1;
                if depth == 0 {
                    return;
                }
            }
            b'"' => {
                sc.quoted("\"");
            }
            b'\'' => {
                sc.quoted("'");
            }
            b'`' => {
                sc.pos += 1;
                skip_template_body(sc);
            }
            _ => sc.pos += 1,
        }
    }
    sc.error = true;
}

/// Try to skip a regex literal at `pos`. A line break before the closing
/// slash means it was not a regex; nothing is consumed in that case.
fn skip_regex(sc: &mut Scanner<'_>) -> bool {
    let mut j = sc.pos + 1;
    let mut in_class = false;
    loop {
        match sc.bytes.get(j).copied() {
            None | Some(b'\n') | Some(b'\r') => return false,
            Some(b'\\') => j += 2,
            Some(b'[') => {
                in_class = true;
                j += 1;
            }
            Some(b']') => {
                in_class = false;
                j += 1;
            }
            Some(b'/') if !in_class => {
                j += 1;
                break;
            }
            Some(_) => j += 1,
        }
    }
    while j < sc.bytes.len() && sc.bytes[j].is_ascii_alphabetic() {
        j += 1;
    }
    sc.pos = j;
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(ts: &TokenStream) -> Vec<(TokenKind, &str)> {
        ts.tokens.iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    #[test]
    fn const_is_an_identifier() {
        let ts = lex_javascript(br#"const u = "http://evil.example/x";"#);
        assert_eq!(
            texts(&ts),
            vec![
                (TokenKind::Identifier, "const"),
                (TokenKind::Identifier, "u"),
                (TokenKind::Operator, "="),
                (TokenKind::String, "http://evil.example/x"),
                (TokenKind::Punctuation, ";"),
            ]
        );
    }

    #[test]
    fn template_literal_verbatim() {
        let ts = lex_javascript(b"`a${b}c`");
        assert_eq!(texts(&ts), vec![(TokenKind::String, "a${b}c")]);
        let ts = lex_javascript(b"`x${ f(`in${1}`) + '}' }y` + z");
        assert_eq!(ts.strings().next(), Some("x${ f(`in${1}`) + '}' }y"));
        assert_eq!(ts.identifiers().collect::<Vec<_>>(), vec!["z"]);
        assert!(!ts.lex_error);
    }

    #[test]
    fn division_after_number() {
        let ts = lex_javascript(b"var a = 1 /2/ 3");
        assert_eq!(
            texts(&ts),
            vec![
                (TokenKind::Identifier, "var"),
                (TokenKind::Identifier, "a"),
                (TokenKind::Operator, "="),
                (TokenKind::Operator, "/"),
                (TokenKind::Operator, "/"),
            ]
        );
    }

    #[test]
    fn regex_after_operator_is_skipped() {
        let ts = lex_javascript(br#"var r = /ab+c"[/]/gi; s = "x";"#);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["x"]);
        assert_eq!(ts.identifiers().collect::<Vec<_>>(), vec!["var", "r", "s"]);
        // after `(` as well
        let ts = lex_javascript(b"f(/'/)");
        assert_eq!(ts.strings().count(), 0);
        assert!(!ts.lex_error);
    }

    #[test]
    fn division_after_paren() {
        let ts = lex_javascript(b"(a) / b / c");
        assert_eq!(ts.of_kind(TokenKind::Operator).collect::<Vec<_>>(), vec!["/", "/"]);
    }

    #[test]
    fn comments_skipped() {
        let ts = lex_javascript(b"#!/usr/bin/env node\n// 'no'\n/* \"no\" */ x");
        assert_eq!(texts(&ts), vec![(TokenKind::Identifier, "x")]);
    }

    #[test]
    fn unterminated_block_comment_flags() {
        let ts = lex_javascript(b"a /* never closed");
        assert!(ts.lex_error);
        assert_eq!(ts.tokens.len(), 1);
    }

    #[test]
    fn dollar_identifiers_and_longest_ops() {
        let ts = lex_javascript(b"$_a1 >>>= b === c ?? d");
        assert_eq!(
            texts(&ts),
            vec![
                (TokenKind::Identifier, "$_a1"),
                (TokenKind::Operator, ">>>="),
                (TokenKind::Identifier, "b"),
                (TokenKind::Operator, "==="),
                (TokenKind::Identifier, "c"),
                (TokenKind::Operator, "??"),
                (TokenKind::Identifier, "d"),
            ]
        );
    }
}
