use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use crosspkg::dataset::{
    assemble, dedup_malicious_traced, feature_distribution_report, load_corpus, load_dataset, merge_cross,
    parse_campaign_map, save_dataset, write_distribution_csv, Dataset,
};
use crosspkg::features::{extract_detailed, FeatureCsvWriter, FeatureRow, FeatureSchema, RowLabel, SensitiveDictionary};
use crosspkg::ingest::{open_archive_with, split_archive_filename, IngestLimits};
use crosspkg::models::{load_model, save_model, train, Hyperparams, Label};
use crosspkg::scanner::{
    run_watch, scan_package, summarize_sinks, Disposition, ModelSet, NamedModel, RunSummary, ScanOptions, ScannerConfig,
};
use crosspkg::synth::generate_corpus;
use crosspkg::tuning::{
    cross_validate, cross_validate_sliced, optimize_cv, write_trial_log, CvConfig, ExperimentResult, SearchSpace,
};

use crate::error::{CliError, EX_OK, EX_PARTIAL, EX_USAGE};
use crate::{
    BuildDatasetArgs, Cli, Command, CvArgs, EvaluateArgs, ExtractArgs, GlobalOpts, LearnerArgs, ReportArgs, ScanArgs,
    SchemaArgs, SynthArgs, TrainArgs, TuneArgs, WatchArgs,
};

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Extract(a) => extract(g, a),
        Command::BuildDataset(a) => build_dataset(g, a),
        Command::Train(a) => train_cmd(g, a),
        Command::Evaluate(a) => evaluate(g, a),
        Command::Tune(a) => tune(g, a),
        Command::Scan(a) => scan(g, a),
        Command::Watch(a) => watch(g, a),
        Command::Report(a) => report(a),
        Command::Schema(a) => schema_cmd(g, a),
        Command::Synth(a) => synth(g, a),
    }
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::new(crate::error::EX_NOINPUT, format!("{}: no such file or directory", path.display())))
    }
}

fn load_schema(g: &GlobalOpts) -> Result<FeatureSchema, CliError> {
    match &g.schema {
        Some(p) => {
            require(p)?;
            Ok(FeatureSchema::load(p)?)
        }
        None => Ok(FeatureSchema::default()),
    }
}

fn load_dict(g: &GlobalOpts) -> Result<SensitiveDictionary, CliError> {
    match &g.dictionary {
        Some(p) => SensitiveDictionary::load(p).map_err(|e| CliError::io(p, e)),
        None => Ok(SensitiveDictionary::default_seed()),
    }
}

/// Output file or stdout.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn parse_now(s: Option<&str>) -> Result<Option<DateTime<Utc>>, CliError> {
    s.map(|s| {
        DateTime::parse_from_rfc3339(s)
            .map(|d| d.with_timezone(&Utc))
            .map_err(|e| CliError::usage(format!("--now {s}: {e}")))
    })
    .transpose()
}

fn archives_under(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))? {
            let p = entry.map_err(|e| CliError::io(&dir, e))?.path();
            let hidden = p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
            if hidden {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else if p.is_file() {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn extract(g: &GlobalOpts, a: &ExtractArgs) -> Result<i32, CliError> {
    require(&a.input)?;
    let label = match a.label.as_str() {
        "0" | "benign" => RowLabel::Benign,
        "1" | "malicious" => RowLabel::Malicious,
        "-" => RowLabel::Unlabeled,
        other => return Err(CliError::usage(format!("--label must be 0, 1 or -, got {other}"))),
    };
    let schema = load_schema(g)?;
    let dict = load_dict(g)?;
    let files = archives_under(&a.input)?;
    let mut w = FeatureCsvWriter::new(open_output(a.output.as_deref())?, &schema)?;
    let mut failed = 0usize;
    for path in &files {
        let row = match open_archive_with(path, a.ecosystem, IngestLimits::default()) {
            Ok(art) => {
                let ex = extract_detailed(&art, &schema, &dict);
                if ex.lex_error {
                    log::info!("{}: lexer recovered from errors", path.display());
                }
                FeatureRow {
                    ecosystem: a.ecosystem,
                    name: art.name,
                    version: art.version,
                    label,
                    values: ex.vector.values,
                    error: None,
                }
            }
            Err(e) => {
                failed += 1;
                log::warn!("{}: {e}", path.display());
                let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let (name, version) = split_archive_filename(&file_name).unwrap_or((file_name, String::new()));
                FeatureRow::failed(a.ecosystem, name, version, e.kind())
            }
        };
        w.write_row(&row)?;
    }
    w.finish()?.flush().map_err(|e| CliError::new(crate::error::EX_IOERR, e.to_string()))?;
    log::info!("{} rows, {failed} failed", files.len());
    Ok(if failed > 0 { EX_PARTIAL } else { EX_OK })
}

fn build_dataset(g: &GlobalOpts, a: &BuildDatasetArgs) -> Result<i32, CliError> {
    let schema = load_schema(g)?;
    if !a.merge.is_empty() {
        for p in &a.merge {
            require(p)?;
        }
        let mut merged = Dataset::new(&schema, Vec::new())?;
        for p in &a.merge {
            merged = merge_cross(&merged, &load_dataset(p, &schema)?)?;
        }
        save_dataset(&merged, &schema, &a.output)?;
        eprintln!("merged {} datasets: {} malicious, {} benign", a.merge.len(), merged.n_malicious(), merged.n_benign());
        return write_distribution(a, &merged, &schema).map(|_| EX_OK);
    }
    let (benign_root, mal_root) = (a.benign.as_ref().expect("clap"), a.malicious.as_ref().expect("clap"));
    require(benign_root)?;
    require(mal_root)?;
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(CliError::usage(format!("--ratio must be in (0, 1), got {}", a.ratio)));
    }
    let campaigns = match &a.campaigns {
        Some(p) => parse_campaign_map(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
        None => Default::default(),
    };
    let dict = load_dict(g)?;
    let limits = IngestLimits::default();
    let benign = load_corpus(benign_root, Label::Benign, &Default::default(), &schema, &dict, limits)?;
    let malicious = load_corpus(mal_root, Label::Malicious, &campaigns, &schema, &dict, limits)?;
    let failures = benign.failures.len() + malicious.failures.len();
    for (entry, e) in benign.failures.iter().chain(&malicious.failures) {
        log::warn!("{}: {e}", entry.path.display());
    }
    let mal = if a.no_dedup {
        malicious.samples
    } else {
        let (kept, counts) = dedup_malicious_traced(&malicious.samples);
        eprintln!(
            "dedup: {} input, {} after latest-version, {} after campaign, {} after identical-vector",
            counts.input, counts.latest_version, counts.campaign, counts.identical_vectors
        );
        kept
    };
    let ds = assemble(&schema, &benign.samples, &mal, a.ratio)?;
    save_dataset(&ds, &schema, &a.output)?;
    eprintln!("dataset: {} malicious, {} benign; {failures} archives failed", ds.n_malicious(), ds.n_benign());
    write_distribution(a, &ds, &schema)?;
    Ok(if failures > 0 { EX_PARTIAL } else { EX_OK })
}

fn write_distribution(a: &BuildDatasetArgs, ds: &Dataset, schema: &FeatureSchema) -> Result<(), CliError> {
    if let Some(p) = &a.distribution {
        let f = File::create(p).map_err(|e| CliError::io(p, e))?;
        write_distribution_csv(BufWriter::new(f), &feature_distribution_report(ds, schema))?;
    }
    Ok(())
}

fn load_hp(a: &LearnerArgs) -> Result<Hyperparams, CliError> {
    let Some(path) = &a.hp else {
        return Ok(Hyperparams::default_for(a.learner));
    };
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: String| CliError::usage(format!("{}: {e}", path.display()));
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let obj = v.as_object_mut().ok_or_else(|| bad("expected a JSON object".into()))?;
    obj.entry("kind").or_insert_with(|| a.learner.as_str().into());
    let hp: Hyperparams = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
    if hp.kind() != a.learner {
        return Err(bad(format!("hyperparameters are for {}, learner is {}", hp.kind(), a.learner)));
    }
    hp.validate()?;
    Ok(hp)
}

fn load_labeled(g: &GlobalOpts, path: &Path) -> Result<(FeatureSchema, Dataset), CliError> {
    require(path)?;
    let schema = load_schema(g)?;
    let ds = load_dataset(path, &schema)?;
    Ok((schema, ds))
}

fn train_cmd(g: &GlobalOpts, a: &TrainArgs) -> Result<i32, CliError> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(CliError::usage(format!("--threshold must be in (0, 1), got {}", a.threshold)));
    }
    let hp = load_hp(&a.learner)?;
    let (schema, ds) = load_labeled(g, &a.dataset)?;
    let xs: Vec<_> = ds.samples.iter().map(|s| s.vector.clone()).collect();
    let mut model = train(&schema, &xs, &ds.labels(), &hp, g.seed)?;
    if model.is_degenerate() {
        eprintln!("warning: training data has a single class; wrote a constant model");
    }
    model.decision_threshold = a.threshold;
    save_model(&model, &a.output)?;
    log::info!("wrote {} model to {}", model.kind(), a.output.display());
    Ok(EX_OK)
}

fn cv_config(g: &GlobalOpts, cv: &CvArgs) -> CvConfig {
    CvConfig { k: cv.k, repeats: cv.repeats, seed: g.seed }
}

fn trained_on(ds: &Dataset) -> String {
    let ecos: Vec<&str> = ds.ecosystems().into_iter().map(|e| e.as_str()).collect();
    match ecos.len() {
        1 => format!("mono {}", ecos[0]),
        _ => format!("cross {}", ecos.join("+")),
    }
}

fn evaluate(g: &GlobalOpts, a: &EvaluateArgs) -> Result<i32, CliError> {
    let hp = load_hp(&a.learner)?;
    let (_, ds) = load_labeled(g, &a.dataset)?;
    let cv = cv_config(g, &a.cv);
    let x = ds.matrix();
    let y = ds.labels();
    let label = trained_on(&ds);
    let mut result = ExperimentResult { k: cv.k, repeats: cv.repeats, seed: cv.seed, rows: Vec::new() };
    if a.by_ecosystem {
        let slices: Vec<_> = ds.samples.iter().map(|s| s.ecosystem).collect();
        let r = cross_validate_sliced(&hp, &x, &y, &slices, &cv)?;
        result.push(hp.kind(), &label, "all", r.overall);
        for (eco, rep) in r.per_slice {
            result.push(hp.kind(), &label, eco.as_str(), rep);
        }
    } else {
        result.push(hp.kind(), &label, "all", cross_validate(&x, &y, &hp, &cv)?);
    }
    print!("{}", result.to_markdown());
    if let Some(p) = &a.json {
        write_file(p, &serde_json::to_string_pretty(&result).expect("result serializes"))?;
    }
    Ok(EX_OK)
}

fn tune(g: &GlobalOpts, a: &TuneArgs) -> Result<i32, CliError> {
    let space = match &a.space {
        Some(p) => {
            require(p)?;
            SearchSpace::from_json(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?
        }
        None => SearchSpace::default_for(a.learner),
    };
    if space.kind != a.learner {
        return Err(CliError::usage(format!("search space is for {}, learner is {}", space.kind, a.learner)));
    }
    space.validate()?;
    let (_, ds) = load_labeled(g, &a.dataset)?;
    let cv = cv_config(g, &a.cv);
    let out = optimize_cv(&ds.matrix(), &ds.labels(), &space, a.budget, a.strategy, &cv, g.seed)?;
    if let Some(p) = &a.trials {
        let f = File::create(p).map_err(|e| CliError::io(p, e))?;
        write_trial_log(BufWriter::new(f), &out.trials).map_err(|e| CliError::io(p, e))?;
    }
    write_file(&a.output, &serde_json::to_string_pretty(&out.best_hp).expect("hp serializes"))?;
    let best = &out.trials[out.best_index];
    println!(
        "best trial {} of {}: precision {:.4}, recall {:.4}",
        best.trial_index,
        out.trials.len(),
        best.mean_precision,
        best.mean_recall
    );
    Ok(EX_OK)
}

fn models_from_paths(paths: &[PathBuf]) -> Result<ModelSet, CliError> {
    let mut models = Vec::new();
    for p in paths {
        require(p)?;
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
        if models.iter().any(|m: &NamedModel| m.id == id) {
            return Err(CliError::usage(format!("two models named {id}")));
        }
        models.push(NamedModel { id, model: load_model(p)? });
    }
    Ok(ModelSet::new(models)?)
}

fn load_config(path: Option<&Path>) -> Result<ScannerConfig, CliError> {
    let p = ScannerConfig::resolve_path(path);
    require(&p)?;
    Ok(ScannerConfig::load(&p)?)
}

fn print_summary(s: &RunSummary) {
    eprintln!("sink: {}", s.sink_path.display());
    eprintln!("{:<6} {:>8} {:>8} {:>8} {:>8}", "eco", "scanned", "benign", "flagged", "errors");
    for (eco, c) in &s.per_ecosystem {
        eprintln!("{:<6} {:>8} {:>8} {:>8} {:>8}", eco.as_str(), c.scanned, c.benign, c.flagged, c.errors);
    }
    for (m, n) in &s.per_model_flagged {
        eprintln!("flagged by {m}: {n}");
    }
}

fn scan(g: &GlobalOpts, a: &ScanArgs) -> Result<i32, CliError> {
    let now = parse_now(a.now.as_deref())?;
    if a.archives.is_empty() {
        let cfg = load_config(a.config.as_deref())?;
        let models = if a.model.is_empty() { cfg.load_models()? } else { models_from_paths(&a.model)? };
        let mut opts = cfg.watch_options()?;
        opts.once = true;
        opts.scan.now = now;
        opts.scan.top_features = a.top;
        let summary = run_watch(cfg.sources(), Arc::new(models), opts, Arc::new(AtomicBool::new(false)))?;
        print_summary(&summary);
        return Ok(if summary.total().errors > 0 { EX_PARTIAL } else { EX_OK });
    }
    let eco = a.ecosystem.ok_or_else(|| CliError::usage("--ecosystem is required with archive arguments"))?;
    for p in &a.archives {
        require(p)?;
    }
    if a.model.is_empty() {
        return Err(CliError::usage("at least one --model is required with archive arguments"));
    }
    let models = models_from_paths(&a.model)?;
    let opts = ScanOptions { dictionary: load_dict(g)?, top_features: a.top, now, ..Default::default() };
    let mut out = open_output(a.output.as_deref())?;
    let mut errors = 0;
    for p in &a.archives {
        let v = scan_package(p, eco, &models, &opts);
        if v.disposition != Disposition::Classified {
            errors += 1;
        }
        let line = serde_json::to_string(&v).expect("verdict serializes");
        writeln!(out, "{line}").map_err(|e| CliError::new(crate::error::EX_IOERR, e.to_string()))?;
    }
    out.flush().map_err(|e| CliError::new(crate::error::EX_IOERR, e.to_string()))?;
    Ok(if errors > 0 { EX_PARTIAL } else { EX_OK })
}

fn watch(_g: &GlobalOpts, a: &WatchArgs) -> Result<i32, CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let models = if a.model.is_empty() { cfg.load_models()? } else { models_from_paths(&a.model)? };
    let mut opts = cfg.watch_options()?;
    opts.once = a.once;
    opts.run_id = a.run_id.clone();
    opts.scan.now = parse_now(a.now.as_deref())?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .map_err(|e| CliError::new(crate::error::EX_SOFTWARE, format!("cannot install signal handler: {e}")))?;
    let summary = run_watch(cfg.sources(), Arc::new(models), opts, stop)?;
    print_summary(&summary);
    Ok(EX_OK)
}

fn report(a: &ReportArgs) -> Result<i32, CliError> {
    for p in &a.sinks {
        require(p)?;
    }
    let r = summarize_sinks(&a.sinks)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    } else {
        print!("{}", r.to_markdown());
    }
    Ok(EX_OK)
}

fn schema_cmd(g: &GlobalOpts, a: &SchemaArgs) -> Result<i32, CliError> {
    let schema = load_schema(g)?;
    let text = if a.hash { schema.hash() } else { schema.to_json_pretty() };
    match &a.output {
        Some(p) => write_file(p, &text)?,
        None => println!("{text}"),
    }
    Ok(EX_OK)
}

fn synth(g: &GlobalOpts, a: &SynthArgs) -> Result<i32, CliError> {
    if a.malicious == 0 && a.benign == 0 {
        return Err(CliError::new(EX_USAGE, "nothing to generate"));
    }
    let pkgs = generate_corpus(a.ecosystem, a.benign, a.malicious, g.seed);
    for p in &pkgs {
        let class = if p.malicious { "malicious" } else { "benign" };
        let dir = a.output.join(class).join(p.ecosystem.as_str()).join(&p.name).join(&p.version);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let bytes = p.archive_bytes();
        let file = dir.join(p.archive_file_name());
        std::fs::write(&file, &bytes).map_err(|e| CliError::io(&file, e))?;
        if let Some(flat) = &a.flat {
            std::fs::create_dir_all(flat).map_err(|e| CliError::io(flat, e))?;
            let f = flat.join(p.archive_file_name());
            std::fs::write(&f, &bytes).map_err(|e| CliError::io(&f, e))?;
        }
    }
    eprintln!("wrote {} benign and {} malicious {} packages", a.benign, a.malicious, a.ecosystem);
    Ok(EX_OK)
}
