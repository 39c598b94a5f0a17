use crosspkg::lexing::{lex_javascript, lex_package_json, lex_python, TokenKind, TokenStream};
use proptest::prelude::*;

/// Offsets index the lossy-decoded text.
fn check_offsets(ts: &TokenStream, input: &[u8]) -> Result<(), TestCaseError> {
    let text = String::from_utf8_lossy(input);
    for w in ts.tokens.windows(2) {
        prop_assert!(w[0].byte_offset < w[1].byte_offset, "{:?} then {:?}", w[0], w[1]);
    }
    for t in &ts.tokens {
        prop_assert!(t.byte_offset < text.len(), "{t:?} beyond {}", text.len());
        prop_assert!(text.is_char_boundary(t.byte_offset));
    }
    Ok(())
}

fn lexers() -> [(&'static str, fn(&[u8]) -> TokenStream); 3] {
    [("js", lex_javascript), ("py", lex_python), ("json", lex_package_json)]
}

proptest! {
    #[test]
    fn total_and_monotone_on_random_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        for (_, lex) in lexers() {
            let ts = lex(&bytes);
            check_offsets(&ts, &bytes)?;
        }
    }

    #[test]
    fn in_bounds_on_utf8_text(s in "\\PC{0,200}") {
        for (name, lex) in lexers() {
            let ts = lex(s.as_bytes());
            for w in ts.tokens.windows(2) {
                prop_assert!(w[0].byte_offset < w[1].byte_offset, "{name}");
            }
            for t in &ts.tokens {
                prop_assert!(t.byte_offset < s.len(), "{name}: {t:?}");
                prop_assert!(s.is_char_boundary(t.byte_offset), "{name}: {t:?}");
            }
        }
    }

    #[test]
    fn source_like_text_is_total(s in "[a-z =+\\[\\](){};:'\"`/\\\\#\\n.,0-9$]{0,300}") {
        for (_, lex) in lexers() {
            let ts = lex(s.as_bytes());
            for t in &ts.tokens {
                prop_assert!(t.byte_offset < s.len());
            }
        }
    }

    #[test]
    fn quoted_literal_text_is_exact(inner in "[A-Za-z0-9 _.,:;!?%&*+=/-]{0,40}") {
        for (quote, lex) in [("\"", lex_javascript as fn(&[u8]) -> TokenStream), ("'", lex_javascript), ("\"", lex_python), ("'", lex_python)] {
            let src = format!("x = {quote}{inner}{quote}\n");
            let ts = lex(src.as_bytes());
            let strings: Vec<&str> = ts.strings().collect();
            prop_assert_eq!(strings, vec![inner.as_str()], "{}", src);
            prop_assert!(!ts.lex_error);
        }
        let json = format!("{{\"k\":\"{inner}\"}}");
        let ts = lex_package_json(json.as_bytes());
        prop_assert_eq!(ts.strings().collect::<Vec<_>>(), vec!["k", inner.as_str()]);
    }
}

#[test]
fn keywords_are_identifiers() {
    let ts = lex_javascript(b"while (x) { return y }");
    let ids: Vec<&str> = ts.identifiers().collect();
    assert_eq!(ids, ["while", "x", "return", "y"]);
    let ts = lex_python(b"def f():\n    return 1\n");
    assert_eq!(ts.identifiers().collect::<Vec<_>>(), ["def", "f", "return"]);
}

#[test]
fn invalid_utf8_sets_error_and_keeps_going() {
    let ts = lex_javascript(b"a = \"\xff\xfe\"; b");
    assert!(ts.lex_error);
    assert!(ts.identifiers().any(|i| i == "b"));
    assert_eq!(ts.of_kind(TokenKind::String).count(), 1);
}
