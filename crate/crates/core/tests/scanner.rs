mod common;

use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use crosspkg::features::{extract_features, FeatureSchema, SensitiveDictionary};
use crosspkg::scanner::*;
use crosspkg::synth::generate_corpus;
use crosspkg::Ecosystem;

fn fast_client() -> HttpClient {
    HttpClient::new(&HttpConfig { backoff_base_ms: 1, timeout_secs: 5.0, ..Default::default() })
}

fn event(url: String) -> FeedEvent {
    FeedEvent { ecosystem: Ecosystem::Npm, name: "p".into(), version: "1.0.0".into(), archive_url: url, observed_at: Utc::now() }
}

#[test]
fn http_fetch_ok_404_and_retries() {
    let (base, hits) = common::serve(vec![
        common::Canned { path: "/p-1.0.0.tgz", status: 200, body: b"tarball".to_vec(), declared_len: None },
        common::Canned { path: "/flaky.tgz", status: 503, body: vec![], declared_len: None },
        common::Canned { path: "/huge.tgz", status: 200, body: vec![], declared_len: Some(1 << 30) },
    ]);
    let dir = tempfile::tempdir().unwrap();
    let fetcher = Fetcher { client: fast_client(), max_download_bytes: 1 << 20 };
    let ok = fetch_archive(&event(format!("{base}/p-1.0.0.tgz")), dir.path(), &fetcher).unwrap();
    assert_eq!(std::fs::read(&ok.path).unwrap(), b"tarball");

    let before = hits.load(std::sync::atomic::Ordering::SeqCst);
    let e = fetch_archive(&event(format!("{base}/missing.tgz")), dir.path(), &fetcher).unwrap_err();
    assert!(matches!(e, ScanError::DownloadFailed { retryable: false, .. }), "{e}");
    assert_eq!(hits.load(std::sync::atomic::Ordering::SeqCst) - before, 1);

    let before = hits.load(std::sync::atomic::Ordering::SeqCst);
    let e = fetch_archive(&event(format!("{base}/flaky.tgz")), dir.path(), &fetcher).unwrap_err();
    assert!(e.is_retryable());
    assert_eq!(hits.load(std::sync::atomic::Ordering::SeqCst) - before, 4);

    let e = fetch_archive(&event(format!("{base}/huge.tgz")), dir.path(), &fetcher).unwrap_err();
    assert!(matches!(e, ScanError::OversizeDownload { .. }), "{e}");
}

#[test]
fn streamed_body_over_cap() {
    let (base, _) = common::serve(vec![common::Canned {
        path: "/big.tgz",
        status: 200,
        body: vec![7u8; 5000],
        declared_len: None,
    }]);
    let dir = tempfile::tempdir().unwrap();
    let fetcher = Fetcher { client: fast_client(), max_download_bytes: 4096 };
    let e = fetch_archive(&event(format!("{base}/big.tgz")), dir.path(), &fetcher).unwrap_err();
    assert!(matches!(e, ScanError::OversizeDownload { cap: 4096, .. }), "{e}");
    assert_eq!(std::fs::read_dir(dir.path().join("npm")).unwrap().count(), 0);
}

#[test]
fn sparse_gigabyte_is_oversize() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big-1.0.0.tgz");
    std::fs::File::create(&big).unwrap().set_len(1 << 30).unwrap();
    let e = fetch_archive(&event(format!("file://{}", big.display())), &dir.path().join("dl"), &Fetcher::default())
        .unwrap_err();
    assert!(matches!(e, ScanError::OversizeDownload { cap, .. } if cap == 256 * 1024 * 1024));
}

#[test]
fn pypi_feed_over_http_and_metadata_resolution() {
    let rss = r#"<rss version="2.0"><channel>
<item><title>demo 0.2</title><link>x</link><pubDate>Wed, 14 Oct 2026 10:00:00 GMT</pubDate></item>
</channel></rss>"#;
    let pkg = &generate_corpus(Ecosystem::Pypi, 1, 0, 3)[0];
    let bytes = pkg.archive_bytes();
    let sha = {
        use sha2::Digest;
        data_encoding::HEXLOWER.encode(&sha2::Sha256::digest(&bytes))
    };
    let (base, _) = common::serve(vec![
        common::Canned { path: "/rss", status: 200, body: rss.as_bytes().to_vec(), declared_len: None },
        common::Canned { path: "/files/demo-0.2.tar.gz", status: 200, body: bytes.clone(), declared_len: None },
    ]);
    let meta = format!(
        r#"{{"urls":[{{"packagetype":"sdist","url":"{base}/files/demo-0.2.tar.gz","digests":{{"sha256":"{sha}"}}}}]}}"#
    );
    let (meta_base, _) = common::serve(vec![common::Canned {
        path: "/pypi/demo/0.2/json",
        status: 200,
        body: meta.into_bytes(),
        declared_len: None,
    }]);
    let mut src = PypiRssSource::new(format!("{base}/rss"), fast_client()).with_json_base(format!("{meta_base}/pypi"));
    let r = src.poll(&FeedCursor::Start).unwrap();
    assert_eq!(r.events.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    let f = fetch_archive(&r.events[0], dir.path(), &Fetcher { client: fast_client(), ..Default::default() }).unwrap();
    assert_eq!(f.sha256, sha);
    assert_eq!(std::fs::read(&f.path).unwrap(), bytes);
}

#[test]
fn unreachable_feed_is_retryable() {
    let mut src = PypiRssSource::new("http://127.0.0.1:9/rss", fast_client());
    let e = src.poll(&FeedCursor::Start).unwrap_err();
    assert!(matches!(e, ScanError::FeedUnavailable { attempts: 4, .. }), "{e}");
    assert!(e.is_retryable());
}

fn write_fixtures(dir: &Path, n_benign: usize, n_mal: usize, seed: u64) -> Vec<crosspkg::synth::SynthPackage> {
    let pkgs = generate_corpus(Ecosystem::Npm, n_benign, n_mal, seed);
    for p in &pkgs {
        std::fs::write(dir.join(p.archive_file_name()), p.archive_bytes()).unwrap();
    }
    pkgs
}

#[test]
fn scan_package_dispositions() {
    let model = common::trained_gbt(Ecosystem::Npm, 5);
    let models = ModelSet::single("mono", model.clone());
    let dir = tempfile::tempdir().unwrap();
    let pkgs = write_fixtures(dir.path(), 1, 1, 77);
    let opts = ScanOptions { now: Some(Utc.with_ymd_and_hms(2026, 10, 14, 0, 0, 0).unwrap()), ..Default::default() };
    for p in &pkgs {
        let v = scan_package(&dir.path().join(p.archive_file_name()), Ecosystem::Npm, &models, &opts);
        assert_eq!(v.disposition, Disposition::Classified);
        assert_eq!(v.flagged, p.malicious, "{}", p.name);
        assert_eq!((v.name.as_str(), v.version.as_str()), (p.name.as_str(), p.version.as_str()));
        assert!((0.0..=1.0).contains(&v.models[0].probability));
        let imp = model.feature_importance();
        for (name, value) in &v.top_features {
            assert_eq!(imp[name], *value);
        }
        assert_eq!(v.top_features.is_empty(), !p.malicious);
    }
    let bad = dir.path().join("bad-1.0.0.tgz");
    std::fs::write(&bad, b"\x1f\x8bnot really gzip").unwrap();
    let v = scan_package(&bad, Ecosystem::Npm, &models, &opts);
    assert_eq!(v.disposition, Disposition::IngestError);
    assert!(v.models.is_empty() && !v.flagged);
    assert_eq!(v.name, "bad");
}

#[test]
fn model_set_requires_shared_schema() {
    let a = common::trained_gbt(Ecosystem::Npm, 1);
    let mut b = a.clone();
    b.schema_hash = "other".into();
    assert!(matches!(ModelSet::new(vec![]), Err(ScanError::NoModels)));
    let r = ModelSet::new(vec![NamedModel { id: "a".into(), model: a }, NamedModel { id: "b".into(), model: b }]);
    assert!(matches!(r, Err(ScanError::ModelSchemaMismatch(..))));
}

fn watch_opts(root: &Path) -> WatchOptions {
    let mut o = WatchOptions::new(root);
    o.once = true;
    o.run_id = Some("t1".into());
    o.scan.now = Some(Utc.with_ymd_and_hms(2026, 10, 14, 12, 0, 0).unwrap());
    o.fetcher.client = fast_client();
    o
}

#[test]
fn watch_two_models_and_dedup_across_sources() {
    let drops = tempfile::tempdir().unwrap();
    let pkgs = write_fixtures(drops.path(), 4, 2, 31);
    let mono = common::trained_gbt(Ecosystem::Npm, 2);
    let cross = common::trained_gbt(Ecosystem::Npm, 3);
    let models = Arc::new(
        ModelSet::new(vec![NamedModel { id: "mono".into(), model: mono }, NamedModel { id: "cross".into(), model: cross }])
            .unwrap(),
    );
    let work = tempfile::tempdir().unwrap();
    let sources = vec![
        SourceSpec::new(LocalDirSource::new(drops.path(), Some(Ecosystem::Npm)).with_name("a"), Duration::from_secs(1)),
        SourceSpec::new(LocalDirSource::new(drops.path(), Some(Ecosystem::Npm)).with_name("b"), Duration::from_secs(1)),
    ];
    let s = run_watch(sources, models, watch_opts(work.path()), Arc::new(AtomicBool::new(false))).unwrap();
    assert_eq!(s.total().scanned, pkgs.len());
    assert_eq!(s.skipped_duplicates, pkgs.len());
    let verdicts = read_sink(&s.sink_path).unwrap();
    assert_eq!(verdicts.len(), pkgs.len());
    assert!(verdicts.iter().all(|v| v.models.len() == 2));
    assert!(s.sink_path.ends_with("scan-20261014-t1.jsonl"));
    let report = summarize_sinks(&[&s.sink_path, &s.sink_path]).unwrap();
    assert_eq!(report.per_ecosystem[&Ecosystem::Npm].scanned, 2 * pkgs.len());
}

#[test]
fn watch_stop_before_start_emits_nothing() {
    let drops = tempfile::tempdir().unwrap();
    write_fixtures(drops.path(), 2, 1, 8);
    let work = tempfile::tempdir().unwrap();
    let models = Arc::new(ModelSet::single("m", common::trained_gbt(Ecosystem::Npm, 2)));
    let mut o = watch_opts(work.path());
    o.once = false;
    let s = run_watch(
        vec![SourceSpec::new(LocalDirSource::new(drops.path(), None), Duration::from_secs(3600))],
        models,
        o,
        Arc::new(AtomicBool::new(true)),
    )
    .unwrap();
    assert_eq!(s.total().scanned, 0);
}

#[test]
fn watch_stop_mid_run_drains_and_saves_cursor() {
    let drops = tempfile::tempdir().unwrap();
    let pkgs = write_fixtures(drops.path(), 5, 1, 9);
    let work = tempfile::tempdir().unwrap();
    let models = Arc::new(ModelSet::single("m", common::trained_gbt(Ecosystem::Npm, 2)));
    let mut o = watch_opts(work.path());
    o.once = false;
    let stop = Arc::new(AtomicBool::new(false));
    let st = stop.clone();
    let h = std::thread::spawn(move || {
        run_watch(vec![SourceSpec::new(LocalDirSource::new(drops.path(), None), Duration::from_millis(50))], models, o, st)
    });
    std::thread::sleep(Duration::from_millis(300));
    stop.store(true, std::sync::atomic::Ordering::SeqCst);
    let s = h.join().unwrap().unwrap();
    assert_eq!(s.total().scanned, pkgs.len());
    let cursors = std::fs::read_to_string(work.path().join("state/cursors.json")).unwrap();
    assert!(cursors.contains("\"time\""), "{cursors}");
}

#[test]
fn extracted_vector_matches_scan_path() {
    let pkg = &generate_corpus(Ecosystem::Npm, 0, 1, 4)[0];
    let schema = FeatureSchema::default();
    let v = extract_features(&pkg.artifact(), &schema, &SensitiveDictionary::default_seed());
    let model = common::trained_gbt(Ecosystem::Npm, 5);
    let direct = model.predict(&v).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(pkg.archive_file_name());
    std::fs::write(&path, pkg.archive_bytes()).unwrap();
    let verdict = scan_package(&path, Ecosystem::Npm, &ModelSet::single("m", model), &ScanOptions::default());
    assert_eq!(verdict.models[0].probability.to_bits(), direct.probability.to_bits());
}
