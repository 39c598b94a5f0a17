use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::feed::{FeedCursor, FeedEvent, FeedSource};
use super::fetch::{fetch_archive, Fetcher};
use super::verdict::{scan_package, Disposition, ModelSet, ScanOptions, ScanVerdict};
use super::ScanError;
use crate::Ecosystem;

const SEEN_FILE: &str = "seen.tsv";
const CURSOR_FILE: &str = "cursors.json";

pub struct SourceSpec {
    pub source: Box<dyn FeedSource>,
    pub interval: Duration,
}

impl SourceSpec {
    pub fn new(source: impl FeedSource + 'static, interval: Duration) -> Self {
        SourceSpec { source: Box::new(source), interval }
    }
}

#[derive(Debug, Clone)]
pub struct WatchOptions {
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Holds the dedup log and the feed cursors.
    pub state_dir: PathBuf,
    pub download_dir: PathBuf,
    pub fetcher: Fetcher,
    pub scan: ScanOptions,
    /// Poll each source once, drain, and return.
    pub once: bool,
    pub run_id: Option<String>,
    pub keep_downloads: bool,
}

impl WatchOptions {
    pub fn new(root: &Path) -> Self {
        WatchOptions {
            workers: 8,
            output_dir: root.join("scans"),
            state_dir: root.join("state"),
            download_dir: root.join("downloads"),
            fetcher: Fetcher::default(),
            scan: ScanOptions::default(),
            once: false,
            run_id: None,
            keep_downloads: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EcosystemCounts {
    pub scanned: usize,
    pub benign: usize,
    pub flagged: usize,
    pub errors: usize,
}

impl EcosystemCounts {
    fn add(&mut self, v: &ScanVerdict) {
        self.scanned += 1;
        match (v.disposition, v.flagged) {
            (Disposition::Classified, true) => self.flagged += 1,
            (Disposition::Classified, false) => self.benign += 1,
            _ => self.errors += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub sink_path: PathBuf,
    pub per_ecosystem: BTreeMap<Ecosystem, EcosystemCounts>,
    pub per_model_flagged: BTreeMap<String, usize>,
    pub malformed_events: usize,
    pub feed_errors: usize,
    pub skipped_duplicates: usize,
}

impl RunSummary {
    pub fn total(&self) -> EcosystemCounts {
        self.per_ecosystem.values().fold(EcosystemCounts::default(), |a, c| EcosystemCounts {
            scanned: a.scanned + c.scanned,
            benign: a.benign + c.benign,
            flagged: a.flagged + c.flagged,
            errors: a.errors + c.errors,
        })
    }
}

pub fn sink_file_name(at: DateTime<Utc>, run_id: &str) -> String {
    format!("scan-{}-{run_id}.jsonl", at.format("%Y%m%d"))
}

fn new_run_id(at: DateTime<Utc>) -> String {
    let nanos = at.timestamp_nanos_opt().unwrap_or_default() as u64;
    format!("{:08x}", (nanos ^ (u64::from(std::process::id()) << 20)) & 0xffff_ffff)
}

type Key = (Ecosystem, String, String);

fn load_seen(path: &Path) -> Result<HashSet<Key>, ScanError> {
    let mut seen = HashSet::new();
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(seen),
        Err(e) => return Err(ScanError::io(path, e)),
    };
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ScanError::io(path, e))?;
        let mut parts = line.splitn(3, '\t');
        match (parts.next().and_then(|e| e.parse().ok()), parts.next(), parts.next()) {
            (Some(eco), Some(n), Some(v)) => {
                seen.insert((eco, n.to_string(), v.to_string()));
            }
            _ if line.trim().is_empty() => {}
            _ => log::warn!("{}:{}: ignoring malformed dedup entry", path.display(), i + 1),
        }
    }
    Ok(seen)
}

fn load_cursors(path: &Path) -> Result<BTreeMap<String, FeedCursor>, ScanError> {
    match std::fs::read_to_string(path) {
        Ok(t) => serde_json::from_str(&t).map_err(|e| ScanError::Config(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(ScanError::io(path, e)),
    }
}

fn save_cursors(path: &Path, cursors: &BTreeMap<String, FeedCursor>) -> Result<(), ScanError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(cursors).expect("cursor map serializes");
    std::fs::write(&tmp, text).map_err(|e| ScanError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ScanError::io(path, e))
}

struct Job {
    event: FeedEvent,
    ack: Sender<()>,
}

struct SinkMsg {
    verdict: ScanVerdict,
    ack: Sender<()>,
}

fn error_kind(e: &ScanError) -> &'static str {
    match e {
        ScanError::OversizeDownload { .. } => "oversize_download",
        ScanError::DownloadFailed { .. } => "download_failed",
        ScanError::Io { .. } => "io_error",
        _ => "fetch_error",
    }
}

fn process(event: &FeedEvent, models: &ModelSet, opts: &WatchOptions) -> ScanVerdict {
    let mut v = match fetch_archive(event, &opts.download_dir, &opts.fetcher) {
        Err(e) => ScanVerdict::failed(
            event.ecosystem,
            event.name.clone(),
            event.version.clone(),
            Disposition::FetchError,
            format!("{}: {e}", error_kind(&e)),
            models.schema_hash(),
            opts.scan.timestamp(),
        ),
        Ok(f) => {
            let mut v = scan_package(&f.path, event.ecosystem, models, &opts.scan);
            v.sha256 = Some(f.sha256);
            if !opts.keep_downloads {
                let _ = std::fs::remove_file(&f.path);
            }
            v
        }
    };
    v.name = event.name.clone();
    v.version = event.version.clone();
    v.archive_url = Some(event.archive_url.clone());
    v
}

struct SinkState {
    summary: RunSummary,
    error: Option<ScanError>,
}

fn run_sink(rx: Receiver<SinkMsg>, sink_path: &Path, seen_path: &Path, mut state: SinkState) -> SinkState {
    let open = |p: &Path| OpenOptions::new().create(true).append(true).open(p).map_err(|e| ScanError::io(p, e));
    let (mut sink, mut seen) = match (open(sink_path), open(seen_path)) {
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
        (Err(e), _) | (_, Err(e)) => {
            state.error = Some(e);
            (None, None)
        }
    };
    for msg in rx {
        let v = &msg.verdict;
        if let (Some(s), Some(d)) = (sink.as_mut(), seen.as_mut()) {
            let line = serde_json::to_string(v).expect("verdict serializes");
            let written = writeln!(s, "{line}")
                .and_then(|_| s.flush())
                .map_err(|e| ScanError::io(sink_path, e))
                .and_then(|_| {
                    writeln!(d, "{}\t{}\t{}", v.ecosystem, v.name, v.version)
                        .and_then(|_| d.flush())
                        .map_err(|e| ScanError::io(seen_path, e))
                });
            if let Err(e) = written {
                log::error!("sink write failed: {e}");
                state.error = Some(e);
                sink = None;
                seen = None;
            }
        }
        state.summary.per_ecosystem.entry(v.ecosystem).or_default().add(v);
        for m in v.models.iter().filter(|m| m.label.is_malicious()) {
            *state.summary.per_model_flagged.entry(m.model_id.clone()).or_default() += 1;
        }
        let _ = msg.ack.send(());
    }
    state
}

fn sleep_unless_stopped(d: Duration, stop: &AtomicBool) {
    let until = Instant::now() + d;
    while !stop.load(Ordering::Relaxed) {
        let now = Instant::now();
        if now >= until {
            break;
        }
        std::thread::sleep((until - now).min(Duration::from_millis(100)));
    }
}

struct Shared<'a> {
    seen: &'a Mutex<HashSet<Key>>,
    cursors: &'a Mutex<BTreeMap<String, FeedCursor>>,
    cursor_path: &'a Path,
    stop: &'a AtomicBool,
    counters: &'a Mutex<(usize, usize, usize)>,
    once: bool,
}

fn run_poller(spec: &mut SourceSpec, jobs: SyncSender<Job>, sh: &Shared<'_>) {
    let name = spec.source.name().to_string();
    let mut cursor = sh.cursors.lock().expect("cursor lock").get(&name).cloned().unwrap_or_default();
    loop {
        if sh.stop.load(Ordering::Relaxed) {
            break;
        }
        let mut wait = spec.interval;
        match spec.source.poll(&cursor) {
            Ok(res) => {
                for m in &res.malformed {
                    log::warn!("{m}");
                }
                let (ack_tx, ack_rx) = mpsc::channel();
                let mut sent = 0usize;
                let mut dups = 0usize;
                for event in res.events {
                    if !sh.seen.lock().expect("seen lock").insert(event.key()) {
                        dups += 1;
                        continue;
                    }
                    if jobs.send(Job { event, ack: ack_tx.clone() }).is_err() {
                        break;
                    }
                    sent += 1;
                }
                drop(ack_tx);
                // drain: the cursor only moves once every event of the batch is sunk
                let done = ack_rx.iter().take(sent).count();
                {
                    let mut c = sh.counters.lock().expect("counter lock");
                    c.0 += res.malformed.len();
                    c.2 += dups;
                }
                if done == sent {
                    cursor = res.next_cursor;
                    let mut all = sh.cursors.lock().expect("cursor lock");
                    all.insert(name.clone(), cursor.clone());
                    if let Err(e) = save_cursors(sh.cursor_path, &all) {
                        log::error!("{e}");
                    }
                }
                log::info!("{name}: {sent} new events");
            }
            Err(e) => {
                log::warn!("{e}");
                sh.counters.lock().expect("counter lock").1 += 1;
                if let ScanError::FeedUnavailable { retry_after, .. } = &e {
                    wait = (*retry_after).min(spec.interval);
                }
            }
        }
        if sh.once {
            break;
        }
        sleep_unless_stopped(wait, sh.stop);
    }
}

/// Polls every source, scans new packages on a bounded worker pool and
/// appends verdicts to `scan-<date>-<run>.jsonl`. On stop, in-flight batches
/// finish and cursors are saved before returning.
pub fn run_watch(
    sources: Vec<SourceSpec>,
    models: Arc<ModelSet>,
    opts: WatchOptions,
    stop: Arc<AtomicBool>,
) -> Result<RunSummary, ScanError> {
    for d in [&opts.output_dir, &opts.state_dir, &opts.download_dir] {
        std::fs::create_dir_all(d).map_err(|e| ScanError::io(d, e))?;
    }
    let started = opts.scan.timestamp();
    let run_id = opts.run_id.clone().unwrap_or_else(|| new_run_id(Utc::now()));
    let sink_path = opts.output_dir.join(sink_file_name(started, &run_id));
    let seen_path = opts.state_dir.join(SEEN_FILE);
    let cursor_path = opts.state_dir.join(CURSOR_FILE);
    let seen = Mutex::new(load_seen(&seen_path)?);
    let cursors = Mutex::new(load_cursors(&cursor_path)?);
    let counters = Mutex::new((0usize, 0usize, 0usize));
    let workers = opts.workers.max(1);

    let (job_tx, job_rx) = mpsc::sync_channel::<Job>(workers * 2);
    let job_rx = Mutex::new(job_rx);
    let (sink_tx, sink_rx) = mpsc::sync_channel::<SinkMsg>(workers * 2);
    let init = SinkState {
        summary: RunSummary { run_id: run_id.clone(), sink_path: sink_path.clone(), ..Default::default() },
        error: None,
    };
    let shared = Shared {
        seen: &seen,
        cursors: &cursors,
        cursor_path: &cursor_path,
        stop: &stop,
        counters: &counters,
        once: opts.once,
    };
    let mut sources = sources;

    let state = std::thread::scope(|s| {
        let sink = s.spawn(|| run_sink(sink_rx, &sink_path, &seen_path, init));
        for _ in 0..workers {
            let tx = sink_tx.clone();
            let (job_rx, models, opts) = (&job_rx, &models, &opts);
            s.spawn(move || loop {
                let job = match job_rx.lock().expect("job lock").recv() {
                    Ok(j) => j,
                    Err(_) => break,
                };
                let verdict = process(&job.event, models, opts);
                if tx.send(SinkMsg { verdict, ack: job.ack }).is_err() {
                    break;
                }
            });
        }
        drop(sink_tx);
        for spec in sources.iter_mut() {
            let jobs = job_tx.clone();
            let shared = &shared;
            s.spawn(move || run_poller(spec, jobs, shared));
        }
        drop(job_tx);
        sink.join().expect("sink thread panicked")
    });

    if let Some(e) = state.error {
        return Err(e);
    }
    let mut summary = state.summary;
    let (malformed, feed_errors, dups) = *counters.lock().expect("counter lock");
    summary.malformed_events = malformed;
    summary.feed_errors = feed_errors;
    summary.skipped_duplicates = dups;
    Ok(summary)
}
