use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use quick_xml::events::Event;
use serde::{Deserialize, Serialize};

use super::http::HttpClient;
use super::ScanError;
use crate::ingest::split_archive_filename;
use crate::Ecosystem;

const FEED_BYTES_CAP: u64 = 32 * 1024 * 1024;
pub const PYPI_JSON_BASE: &str = "https://pypi.org/pypi";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedEvent {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub archive_url: String,
    pub observed_at: DateTime<Utc>,
}

impl FeedEvent {
    pub fn key(&self) -> (Ecosystem, String, String) {
        (self.ecosystem, self.name.clone(), self.version.clone())
    }
}

/// Position in a feed. Time cursors order events by `(observed_at, archive_url)`;
/// sequence cursors are opaque registry sequence numbers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedCursor {
    #[default]
    Start,
    Time { at: DateTime<Utc>, last: String },
    Seq { seq: String },
}

impl FeedCursor {
    fn admits(&self, at: &DateTime<Utc>, tiebreak: &str) -> bool {
        match self {
            FeedCursor::Time { at: c, last } => (at, tiebreak) > (c, last.as_str()),
            _ => true,
        }
    }
}

#[derive(Debug, Default)]
pub struct PollResult {
    /// Events strictly after the cursor, ordered by `observed_at`.
    pub events: Vec<FeedEvent>,
    pub next_cursor: FeedCursor,
    /// Entries that could not be turned into events.
    pub malformed: Vec<ScanError>,
}

pub trait FeedSource: Send {
    fn name(&self) -> &str;
    fn poll(&mut self, since: &FeedCursor) -> Result<PollResult, ScanError>;
}

/// Turns timed entries into a poll result: filter by cursor, sort and
/// advance the cursor past everything seen, malformed entries included.
fn finish_timed(
    since: &FeedCursor,
    entries: Vec<(DateTime<Utc>, String, Result<FeedEvent, ScanError>)>,
) -> PollResult {
    let mut fresh: Vec<_> = entries.into_iter().filter(|(at, tb, _)| since.admits(at, tb)).collect();
    fresh.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    let next_cursor = match fresh.last() {
        Some((at, tb, _)) => FeedCursor::Time { at: *at, last: tb.clone() },
        None => since.clone(),
    };
    let mut out = PollResult { next_cursor, ..Default::default() };
    for (_, _, r) in fresh {
        match r {
            Ok(e) => out.events.push(e),
            Err(e) => out.malformed.push(e),
        }
    }
    out
}

/// A directory of dropped archives. Each regular file is one event observed at
/// its modification time. Subdirectories named `npm` or `pypi` are read one
/// level deep with that ecosystem.
#[derive(Debug, Clone)]
pub struct LocalDirSource {
    name: String,
    dir: PathBuf,
    ecosystem: Option<Ecosystem>,
}

impl LocalDirSource {
    pub fn new(dir: impl Into<PathBuf>, ecosystem: Option<Ecosystem>) -> Self {
        let dir = dir.into();
        LocalDirSource { name: format!("local:{}", dir.display()), dir, ecosystem }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn collect(
        &self,
        dir: &Path,
        eco: Option<Ecosystem>,
        depth: usize,
        out: &mut Vec<(DateTime<Utc>, String, Result<FeedEvent, ScanError>)>,
    ) -> Result<(), ScanError> {
        let rd = std::fs::read_dir(dir).map_err(|e| ScanError::FeedUnavailable {
            source_name: self.name.clone(),
            message: format!("{}: {e}", dir.display()),
            attempts: 1,
            retry_after: std::time::Duration::from_secs(1),
        })?;
        for entry in rd {
            let entry = entry.map_err(|e| ScanError::io(dir, e))?;
            let file_name = entry.file_name().to_string_lossy().into_owned();
            if file_name.starts_with('.') || file_name.ends_with(".part") || file_name.ends_with(".tmp") {
                continue;
            }
            let path = entry.path();
            let meta = std::fs::metadata(&path).map_err(|e| ScanError::io(&path, e))?;
            if meta.is_dir() {
                if depth == 0 {
                    if let Ok(sub) = file_name.parse::<Ecosystem>() {
                        if file_name == sub.as_str() {
                            self.collect(&path, Some(sub), 1, out)?;
                        }
                    }
                }
                continue;
            }
            if !meta.is_file() {
                continue;
            }
            let at: DateTime<Utc> = meta.modified().map(DateTime::<Utc>::from).unwrap_or_else(|_| Utc::now());
            let abs = std::path::absolute(&path).unwrap_or(path.clone());
            let url = format!("file://{}", abs.display());
            let ecosystem = eco.unwrap_or_else(|| infer_ecosystem(&file_name));
            let ev = match split_archive_filename(&file_name) {
                Some((name, version)) => Ok(FeedEvent { ecosystem, name, version, archive_url: url.clone(), observed_at: at }),
                None => Err(ScanError::MalformedFeedPayload {
                    source_name: self.name.clone(),
                    message: format!("{file_name}: no version in file name"),
                }),
            };
            out.push((at, url, ev));
        }
        Ok(())
    }
}

fn infer_ecosystem(file_name: &str) -> Ecosystem {
    if file_name.to_ascii_lowercase().ends_with(".tgz") {
        Ecosystem::Npm
    } else {
        Ecosystem::Pypi
    }
}

impl FeedSource for LocalDirSource {
    fn name(&self) -> &str {
        &self.name
    }

    fn poll(&mut self, since: &FeedCursor) -> Result<PollResult, ScanError> {
        let mut entries = Vec::new();
        self.collect(&self.dir, self.ecosystem, 0, &mut entries)?;
        Ok(finish_timed(since, entries))
    }
}

fn unavailable(source: &str, client: &HttpClient, err: super::HttpError, attempts: u32) -> ScanError {
    ScanError::FeedUnavailable {
        source_name: source.to_string(),
        message: err.to_string(),
        attempts,
        retry_after: client.backoff(attempts),
    }
}

/// PyPI release feed (`/rss/updates.xml`). Item titles are `"<name> <version>"`.
/// Event URLs point at the release JSON document, resolved on fetch.
#[derive(Debug, Clone)]
pub struct PypiRssSource {
    name: String,
    url: String,
    json_base: String,
    client: HttpClient,
}

impl PypiRssSource {
    pub fn new(url: impl Into<String>, client: HttpClient) -> Self {
        PypiRssSource { name: "pypi-rss".into(), url: url.into(), json_base: PYPI_JSON_BASE.into(), client }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_json_base(mut self, base: impl Into<String>) -> Self {
        self.json_base = base.into();
        self
    }
}

impl FeedSource for PypiRssSource {
    fn name(&self) -> &str {
        &self.name
    }

    fn poll(&mut self, since: &FeedCursor) -> Result<PollResult, ScanError> {
        let body = self
            .client
            .get_bytes(&self.url, FEED_BYTES_CAP)
            .map_err(|(e, n)| unavailable(&self.name, &self.client, e, n))?;
        let text = String::from_utf8_lossy(&body);
        parse_pypi_rss(&text, since, &self.name, &self.json_base)
    }
}

#[derive(Default)]
struct RssItem {
    title: Option<String>,
    link: Option<String>,
    pub_date: Option<String>,
}

/// Parses an RSS 2.0 document of PyPI releases. A payload that is not XML is
/// an error; individual bad items are reported in `malformed`.
pub fn parse_pypi_rss(xml: &str, since: &FeedCursor, source: &str, json_base: &str) -> Result<PollResult, ScanError> {
    let bad = |message: String| ScanError::MalformedFeedPayload { source_name: source.to_string(), message };
    let mut reader = quick_xml::Reader::from_str(xml);
    let mut items = Vec::new();
    let mut current: Option<RssItem> = None;
    let mut field: Option<String> = None;
    let mut saw_channel = false;
    loop {
        let ev = reader.read_event().map_err(|e| bad(format!("xml error at {}: {e}", reader.buffer_position())))?;
        match ev {
            Event::Start(e) => {
                let tag = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                match tag.as_str() {
                    "channel" | "rss" => saw_channel = true,
                    "item" => current = Some(RssItem::default()),
                    _ => {}
                }
                field = Some(tag);
            }
            Event::End(e) => {
                if e.local_name().as_ref() == b"item" {
                    items.extend(current.take());
                }
                field = None;
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| bad(e.to_string()))?.into_owned();
                set_field(current.as_mut(), field.as_deref(), text);
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t.into_inner()).into_owned();
                set_field(current.as_mut(), field.as_deref(), text);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_channel {
        return Err(bad("not an RSS document".into()));
    }
    let base = json_base.trim_end_matches('/');
    let mut entries = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let title = item.title.unwrap_or_default();
        let at = item
            .pub_date
            .as_deref()
            .and_then(|d| DateTime::parse_from_rfc2822(d.trim()).ok())
            .map(|d| d.with_timezone(&Utc));
        let Some(at) = at else {
            entries.push((DateTime::<Utc>::MIN_UTC, format!("#{i}"), Err(bad(format!("item {i} ({title}): missing or invalid pubDate")))));
            continue;
        };
        let mut words = title.split_whitespace();
        let (name, version) = (words.next(), words.next());
        let tiebreak = item.link.clone().unwrap_or_else(|| title.clone());
        let ev = match (name, version, words.next()) {
            (Some(n), Some(v), None) => Ok(FeedEvent {
                ecosystem: Ecosystem::Pypi,
                name: n.to_string(),
                version: v.to_string(),
                archive_url: format!("{base}/{n}/{v}/json"),
                observed_at: at,
            }),
            _ => Err(bad(format!("item {i} ({title:?}): missing version"))),
        };
        entries.push((at, tiebreak, ev));
    }
    Ok(finish_timed(since, entries))
}

fn set_field(item: Option<&mut RssItem>, field: Option<&str>, text: String) {
    let (Some(item), Some(field)) = (item, field) else { return };
    let slot = match field {
        "title" => &mut item.title,
        "link" => &mut item.link,
        "pubDate" => &mut item.pub_date,
        _ => return,
    };
    slot.get_or_insert_with(String::new).push_str(&text);
}

/// npm registry follower over `/_changes?include_docs=true`. Each change
/// yields the `latest` dist-tag of the changed document.
#[derive(Debug, Clone)]
pub struct NpmChangesSource {
    name: String,
    base_url: String,
    limit: usize,
    client: HttpClient,
}

impl NpmChangesSource {
    pub fn new(base_url: impl Into<String>, client: HttpClient) -> Self {
        NpmChangesSource { name: "npm-changes".into(), base_url: base_url.into(), limit: 200, client }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit.max(1);
        self
    }
}

impl FeedSource for NpmChangesSource {
    fn name(&self) -> &str {
        &self.name
    }

    fn poll(&mut self, since: &FeedCursor) -> Result<PollResult, ScanError> {
        let seq = match since {
            FeedCursor::Seq { seq } => seq.clone(),
            _ => "now".to_string(),
        };
        let url = format!(
            "{}/_changes?since={seq}&limit={}&include_docs=true",
            self.base_url.trim_end_matches('/'),
            self.limit
        );
        let body = self
            .client
            .get_bytes(&url, FEED_BYTES_CAP)
            .map_err(|(e, n)| unavailable(&self.name, &self.client, e, n))?;
        parse_npm_changes(&String::from_utf8_lossy(&body), since, &self.name, Utc::now())
    }
}

/// Parses a CouchDB-style changes document. `now` stamps changes whose
/// document carries no publish time.
pub fn parse_npm_changes(
    json: &str,
    since: &FeedCursor,
    source: &str,
    now: DateTime<Utc>,
) -> Result<PollResult, ScanError> {
    use serde_json::Value;
    let bad = |message: String| ScanError::MalformedFeedPayload { source_name: source.to_string(), message };
    let doc: Value = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
    let results = doc.get("results").and_then(Value::as_array).ok_or_else(|| bad("no results array".into()))?;
    let seq_str = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    let mut out = PollResult::default();
    let mut last_seq = None;
    for (i, change) in results.iter().enumerate() {
        if let Some(s) = change.get("seq").and_then(seq_str) {
            last_seq = Some(s);
        }
        let id = change.get("id").and_then(Value::as_str).unwrap_or("");
        if id.starts_with("_design/") || change.get("deleted").and_then(Value::as_bool) == Some(true) {
            continue;
        }
        let Some(d) = change.get("doc") else {
            out.malformed.push(bad(format!("change {i} ({id}): no doc")));
            continue;
        };
        let name = d.get("name").and_then(Value::as_str).unwrap_or(id);
        let Some(version) = d.pointer("/dist-tags/latest").and_then(Value::as_str) else {
            out.malformed.push(bad(format!("change {i} ({name}): missing version")));
            continue;
        };
        let tarball = d
            .get("versions")
            .and_then(|v| v.get(version))
            .and_then(|v| v.pointer("/dist/tarball"))
            .and_then(Value::as_str);
        let Some(tarball) = tarball else {
            out.malformed.push(bad(format!("change {i} ({name}@{version}): missing tarball")));
            continue;
        };
        let at = d
            .get("time")
            .and_then(|t| t.get(version))
            .and_then(Value::as_str)
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
            .map(|t| t.with_timezone(&Utc))
            .unwrap_or(now);
        out.events.push(FeedEvent {
            ecosystem: Ecosystem::Npm,
            name: name.to_string(),
            version: version.to_string(),
            archive_url: tarball.to_string(),
            observed_at: at,
        });
    }
    out.events.sort_by(|a, b| a.observed_at.cmp(&b.observed_at));
    let last_seq = doc.get("last_seq").and_then(seq_str).or(last_seq);
    out.next_cursor = match last_seq {
        Some(seq) => FeedCursor::Seq { seq },
        None => since.clone(),
    };
    Ok(out)
}
