//! Security-sensitive string counters over string-literal token texts.

use std::sync::LazyLock;

use regex::Regex;

/// Base64 runs shorter than this are ignored.
pub const DEFAULT_BASE64_MIN_LEN: usize = 20;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)(?:https?|ftp|wss?)://[^\s"'`]+"#).expect("url regex"));

/// Total (not distinct) URL occurrences with an http, https, ftp, ws or wss
/// scheme.
pub fn count_urls<S: AsRef<str>>(strings: &[S]) -> usize {
    strings.iter().map(|s| URL_RE.find_iter(s.as_ref()).count()).sum()
}

/// IPv4 dotted quads whose run of digits and dots is exactly four octets in
/// 0..=255, so version strings such as `1.2.3.4.5` do not count.
pub fn count_ips<S: AsRef<str>>(strings: &[S]) -> usize {
    strings.iter().map(|s| ips_in(s.as_ref())).sum()
}

fn ips_in(s: &str) -> usize {
    let bytes = s.as_bytes();
    let mut count = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() || bytes[i] == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if is_dotted_quad(&s[start..i]) {
                count += 1;
            }
        } else {
            i += 1;
        }
    }
    count
}

fn is_dotted_quad(run: &str) -> bool {
    let parts: Vec<&str> = run.split('.').collect();
    parts.len() == 4
        && parts
            .iter()
            .all(|p| (1..=3).contains(&p.len()) && p.parse::<u16>().is_ok_and(|v| v <= 255))
}

fn is_b64_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'+' || c == b'/'
}

/// Whether `s` contains a maximal base64 run (alphabet run plus at most two
/// `=`) of at least `min_len` characters, length divisible by four, that
/// decodes.
pub fn has_base64_run(s: &str, min_len: usize) -> bool {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !is_b64_char(bytes[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && is_b64_char(bytes[i]) {
            i += 1;
        }
        let body_end = i;
        while i < bytes.len() && bytes[i] == b'=' {
            i += 1;
        }
        let pad = i - body_end;
        let run = &bytes[start..i];
        if pad <= 2
            && run.len() >= min_len
            && run.len() % 4 == 0
            && data_encoding::BASE64.decode(run).is_ok()
        {
            return true;
        }
    }
    false
}

/// Number of strings holding at least one base64 run; each string counts
/// at most once.
pub fn count_base64<S: AsRef<str>>(strings: &[S]) -> usize {
    count_base64_with(strings, DEFAULT_BASE64_MIN_LEN)
}

pub fn count_base64_with<S: AsRef<str>>(strings: &[S], min_len: usize) -> usize {
    strings.iter().filter(|s| has_base64_run(s.as_ref(), min_len)).count()
}
