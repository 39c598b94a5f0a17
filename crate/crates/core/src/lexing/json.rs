use super::javascript::lex_javascript;
use super::scan::{is_space, Scanner};
use super::{decode, Language, TokenKind, TokenStream};

/// Keys and string values become string tokens, structural characters
/// punctuation. Numbers and `true`/`false`/`null` are skipped. Input that
/// is not well-formed JSON is lexed as JavaScript with `lex_error` set.
pub fn lex_package_json(content: &[u8]) -> TokenStream {
    let (text, decode_error) = decode(content);
    let body = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let offset_base = text.len() - body.len();
    if body.bytes().all(is_space) {
        return Scanner::new("").finish(Language::Js, decode_error);
    }
    if serde_json::from_str::<serde::de::IgnoredAny>(body).is_err() {
        let mut ts = lex_javascript(content);
        ts.lex_error = true;
        return ts;
    }
    let mut sc = Scanner::new(&text);
    sc.pos = offset_base;
    while !sc.at_end() {
        match sc.peek() {
            b'"' => {
                let offset = sc.pos;
                let inner = sc.quoted("\"");
                sc.push(TokenKind::String, offset, inner);
            }
            c @ (b'{' | b'}' | b'[' | b']' | b',' | b':') => {
                let offset = sc.pos;
                sc.pos += 1;
                let s = match c {
                    b'{' => "{",
                    b'}' => "}",
                    b'[' => "[",
                    b']' => "]",
                    b',' => ",",
                    _ => ":",
                };
                sc.push(TokenKind::Punctuation, offset, s);
            }
            _ => sc.pos += 1,
        }
    }
    sc.finish(Language::Js, decode_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_object() {
        let ts = lex_package_json(br#"{"scripts":{"preinstall":"node a.js"}}"#);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["scripts", "preinstall", "node a.js"]);
        assert!(!ts.lex_error);
        assert_eq!(ts.of_kind(TokenKind::Punctuation).collect::<String>(), "{:{:}}");
    }

    #[test]
    fn empty_file() {
        let ts = lex_package_json(b"");
        assert!(ts.tokens.is_empty());
        assert!(!ts.lex_error);
        let ts = lex_package_json(b"  \n");
        assert!(ts.tokens.is_empty() && !ts.lex_error);
    }

    #[test]
    fn truncated_falls_back() {
        let ts = lex_package_json(br#"{"a":1,"#);
        assert!(ts.lex_error);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["a"]);
    }

    #[test]
    fn literals_and_numbers_skipped() {
        let ts = lex_package_json(br#"{"private": true, "n": -1.5e3, "x": null}"#);
        assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["private", "n", "x"]);
        assert_eq!(ts.identifiers().count(), 0);
    }
}
