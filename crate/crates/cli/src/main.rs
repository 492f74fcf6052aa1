//! `xdalign`: build a cross-lingual comparable corpus from dated news
//! articles, one stage at a time or end to end.

mod config;
mod manifest;
mod stages;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use xdalign::align::{AlignmentRecord, Strategy};
use xdalign::cleanup::{filter_faulty_pairs, CleanupConfig};
use xdalign::corpus::{read_jsonl, write_jsonl, Corpus, DocPair, GoldSet, LangPair};
use xdalign::embedding::store::write_matrix;
use xdalign::embedding::FileBackend;
use xdalign::embedding::{Embedder, EmbeddingMatrix, ProviderConfig, ProviderMode, TextUnit};
use xdalign::metrics::{PairMetrics, DEFAULT_ANALYSIS_THRESHOLD};
use xdalign::report::{write_report, ReportInputs, DEFAULT_BINS, DEFAULT_TOP_K};
use xdalign::sentences::{MinCharsRule, RuleSegmenter, SentenceAlignmentRecord, DEFAULT_MIN_CHARS};
use xdalign::similarity::{dump_matrices, similarity_matrices};

use config::{load_cleanup, load_provider, Overrides, RunConfig, TokenCounterKind};
use manifest::{digest, manifest_path_for, RunManifest};
use stages::*;

#[derive(Parser)]
#[command(
    name = "xdalign",
    version,
    about = "Cross-lingual news alignment toolkit"
)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a document file and print per-language and per-date counts.
    Validate(CorpusArgs),
    /// Embed document alignment texts and/or sentences into a vector file.
    Embed(EmbedArgs),
    /// Align documents published on the same day.
    AlignDocs(AlignDocsArgs),
    /// Sweep the threshold grid against gold pairs.
    Tune(TuneArgs),
    /// Remove faulty document pairs.
    Clean(CleanArgs),
    /// Align sentences inside the top-scoring document pairs.
    AlignSents(AlignSentsArgs),
    /// Per-pair comparability measures from sentence alignments.
    Metrics(MetricsArgs),
    /// Statistics tables, score histogram and correlation plots.
    Report(ReportArgs),
    /// Run every stage from one configuration file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Documents, one JSON object per line.
    #[arg(long)]
    input: PathBuf,
    /// Language pair as `a,b`; `a` supplies rows, `b` columns.
    #[arg(long, default_value = "de,fr")]
    langs: LangPair,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Units {
    #[value(alias = "title-lead")]
    Documents,
    #[value(alias = "sentence")]
    Sentences,
    All,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Provider configuration (JSON).
    #[arg(long, conflicts_with_all = ["vector_file", "endpoint"])]
    provider: Option<PathBuf>,
    /// Serve vectors from a precomputed file.
    #[arg(long, conflicts_with = "endpoint")]
    vector_file: Option<PathBuf>,
    /// Remote embedding service base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    token_env: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, visible_alias = "unit", value_enum, default_value = "documents")]
    units: Units,
    /// Only embed sentences of documents in these alignments.
    #[arg(long)]
    alignments: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignDocsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Document vectors.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value = "intersection")]
    strategy: Strategy,
    #[arg(long, default_value_t = DEFAULT_ANALYSIS_THRESHOLD)]
    threshold: f64,
    /// Write each day's score matrix as CSV into this directory.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    vectors: PathBuf,
    /// Tab-separated gold pairs.
    #[arg(long)]
    gold: PathBuf,
    /// Strategy to tune; all five when omitted.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    cleanup_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Removed pairs with their reason.
    #[arg(long)]
    removed: Option<PathBuf>,
}

fn parse_rule(s: &str) -> Result<MinCharsRule, String> {
    match s {
        "each-side" => Ok(MinCharsRule::EachSide),
        "combined" => Ok(MinCharsRule::Combined),
        _ => Err(format!("unknown rule `{s}` (each-side, combined)")),
    }
}

#[derive(Args)]
struct AlignSentsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Cleaned document alignments.
    #[arg(long, visible_alias = "doc-pairs")]
    alignments: PathBuf,
    /// Sentence vectors keyed `<doc_id>#<index>`.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_CHARS)]
    min_chars: usize,
    #[arg(long, value_parser = parse_rule, default_value = "each-side")]
    min_chars_rule: MinCharsRule,
    /// Leave out sentence pairs scoring below this. Metrics apply the
    /// same cut themselves, so it only trims the file.
    #[arg(long)]
    analysis_threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    alignments: PathBuf,
    /// Sentence alignments from `align-sents`.
    #[arg(long)]
    sentences: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_ANALYSIS_THRESHOLD)]
    analysis_threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Histogram lower bound; defaults to the alignment threshold.
    #[arg(long)]
    hist_low: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    hist_high: f64,
    #[arg(long, value_enum)]
    token_counter: Option<TokenCounterKind>,
    #[arg(long, visible_alias = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    min_chars: Option<usize>,
    #[arg(long)]
    analysis_threshold: Option<f64>,
    #[arg(long)]
    cleanup_config: Option<PathBuf>,
    #[arg(long)]
    dump_matrices: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("xdalign: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command, cli.jobs.map(usize::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xdalign: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, jobs: Option<usize>) -> Result<()> {
    match command {
        Command::Validate(a) => validate(a),
        Command::Embed(a) => embed(a, jobs),
        Command::AlignDocs(a) => align_docs(a, jobs),
        Command::Tune(a) => tune(a, jobs),
        Command::Clean(a) => clean(a, jobs),
        Command::AlignSents(a) => align_sents(a, jobs),
        Command::Metrics(a) => metrics(a, jobs),
        Command::Report(a) => report(a, jobs),
        Command::Pipeline(a) => pipeline(a, jobs),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn load_corpus(c: &CorpusArgs) -> Result<Corpus> {
    Ok(Corpus::load(&c.input, c.langs.clone())?)
}

/// Strategy and threshold the pairs were produced with, when recorded.
type Provenance = Option<(Strategy, f64)>;

fn read_pairs(path: &Path) -> Result<(Vec<DocPair>, Provenance)> {
    let records: Vec<AlignmentRecord> = read_jsonl(path)?;
    let setting = records.first().map(|r| (r.strategy, r.threshold));
    Ok((
        records.iter().map(AlignmentRecord::doc_pair).collect(),
        setting,
    ))
}

/// Vectors for `units`, read from a precomputed file and normalized.
fn vectors_from_file(path: &Path, units: &[TextUnit]) -> Result<EmbeddingMatrix> {
    let backend = FileBackend::open(path)?;
    Ok(Embedder::new(Box::new(backend), 4096, 1).embed(units)?)
}

fn validate(a: CorpusArgs) -> Result<()> {
    let corpus =
        RunManifest::new("validate", json!({}), None)?.stage("validate", || load_corpus(&a))?;
    let summary = corpus.summary();
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(summary)?);
    Ok(())
}

fn embed(a: EmbedArgs, jobs: Option<usize>) -> Result<()> {
    let provider = if let Some(p) = &a.provider {
        load_provider(p)?
    } else if let Some(v) = &a.vector_file {
        ProviderConfig::file(v)
    } else if let Some(e) = &a.endpoint {
        ProviderConfig::remote(e)
    } else {
        bail!("one of --provider, --vector-file or --endpoint is required");
    };
    let provider = ProviderConfig {
        model_name: a.model.clone().unwrap_or(provider.model_name),
        auth_token_env: a.token_env.clone().or(provider.auth_token_env),
        batch_size: a.batch_size.unwrap_or(provider.batch_size),
        ..provider
    };
    let mut man = RunManifest::new(
        "embed",
        json!({ "langs": a.corpus.langs.to_string(), "provider": provider }),
        jobs,
    )?;
    man.input(&a.corpus.input)?;
    if let Some(v) = &provider.vector_file {
        man.input(v)?;
    }
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let matrix = man.stage("embed", || {
        let embedder = Embedder::from_config(&provider)?;
        let mut units = Vec::new();
        if a.units != Units::Sentences {
            units.extend(document_units(&corpus)?);
        }
        if a.units != Units::Documents {
            let pairs: Vec<DocPair> = match &a.alignments {
                Some(p) => read_pairs(p)?.0,
                None => Vec::new(),
            };
            let seg = RuleSegmenter::default();
            if a.alignments.is_some() {
                let table = sentence_table(&corpus, &pairs, &seg)?;
                units.extend(ordered_sentence_units(&pairs, &table));
            } else {
                for d in corpus.documents() {
                    let s = xdalign::sentences::segment_sentences(d, &seg);
                    units.extend(xdalign::sentences::sentence_units(&s));
                }
            }
        }
        Ok(embedder.embed(&units)?)
    })?;
    ensure_parent(&a.out)?;
    write_matrix(&matrix, &a.out)?;
    man.output(&a.out, None)?;
    man.write(&manifest_path_for(&a.out))?;
    println!(
        "embedded {} units (dim {}) -> {}",
        matrix.len(),
        matrix.dim(),
        a.out.display()
    );
    Ok(())
}

fn align_docs(a: AlignDocsArgs, jobs: Option<usize>) -> Result<()> {
    let mut man = RunManifest::new(
        "align-docs",
        json!({ "langs": a.corpus.langs.to_string(), "strategy": a.strategy, "threshold": a.threshold }),
        jobs,
    )?;
    man.input(&a.corpus.input)?;
    man.input(&a.vectors)?;
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let vectors = man.stage("embed", || {
        vectors_from_file(&a.vectors, &document_units(&corpus)?)
    })?;
    let matrices = man.stage("similarity", || Ok(similarity_matrices(&corpus, &vectors)?))?;
    if let Some(dir) = &a.dump_matrices {
        dump_matrices(&matrices, dir)?;
    }
    let records = man.stage("align-docs", || {
        align_documents(&matrices, a.threshold, a.strategy)
    })?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &records)?;
    man.output(&a.out, None)?;
    man.write(&manifest_path_for(&a.out))?;
    println!(
        "{} pairs from {} day(s) -> {}",
        records.len(),
        matrices.len(),
        a.out.display()
    );
    Ok(())
}

fn tuning_summary(results: &[xdalign::tune::SweepResult]) -> serde_json::Value {
    json!(results
        .iter()
        .map(|r| {
            let b = r.best();
            json!({
                "strategy": r.strategy,
                "best_threshold": r.best_threshold,
                "best_f1": (b.f1 * 1e6).round() / 1e6,
                "precision": (b.precision * 1e6).round() / 1e6,
                "recall": (b.recall * 1e6).round() / 1e6,
                "true_positives": b.true_positives,
                "predicted": b.predicted,
                "gold": b.gold,
            })
        })
        .collect::<Vec<_>>())
}

/// Writes `tuning.json` and one curve CSV per strategy into `dir`.
fn write_tuning(dir: &Path, results: &[xdalign::tune::SweepResult]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for r in results {
        let p = dir.join(format!("curve_{}.csv", r.strategy));
        fs::write(&p, r.to_csv())?;
        files.push(p);
    }
    let p = dir.join("tuning.json");
    fs::write(
        &p,
        serde_json::to_string_pretty(&tuning_summary(results))? + "\n",
    )?;
    files.push(p);
    Ok(files)
}

fn tune(a: TuneArgs, jobs: Option<usize>) -> Result<()> {
    let strategies: Vec<Strategy> = match a.strategy {
        Some(s) => vec![s],
        None => Strategy::ALL.to_vec(),
    };
    let mut man = RunManifest::new(
        "tune",
        json!({ "langs": a.corpus.langs.to_string(), "strategies": strategies }),
        jobs,
    )?;
    for p in [&a.corpus.input, &a.vectors, &a.gold] {
        man.input(p)?;
    }
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let vectors = man.stage("embed", || {
        vectors_from_file(&a.vectors, &document_units(&corpus)?)
    })?;
    let matrices = man.stage("similarity", || Ok(similarity_matrices(&corpus, &vectors)?))?;
    let results = man.stage("tune", || {
        let gold = GoldSet::load(&a.gold)?;
        let subset = gold_matrices(&matrices, &gold, &corpus)?;
        tune_all(&subset, &gold, &strategies)
    })?;
    for f in write_tuning(&a.out_dir, &results)? {
        man.output(&f, Some(&a.out_dir))?;
    }
    man.write(&a.out_dir.join("manifest.json"))?;
    for r in &results {
        println!(
            "{:<16} θ̂ = {:>5.1}  F1 = {:.4}",
            r.strategy.as_str(),
            r.best_threshold,
            r.best_f1
        );
    }
    Ok(())
}

fn clean(a: CleanArgs, jobs: Option<usize>) -> Result<()> {
    let config = match &a.cleanup_config {
        Some(p) => load_cleanup(p)?,
        None => CleanupConfig::default(),
    };
    let mut man = RunManifest::new(
        "clean",
        json!({ "langs": a.corpus.langs.to_string(), "cleanup": config }),
        jobs,
    )?;
    man.input(&a.corpus.input)?;
    man.input(&a.alignments)?;
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let (pairs, setting) = read_pairs(&a.alignments)?;
    let (strategy, threshold) =
        setting.unwrap_or((Strategy::Intersection, DEFAULT_ANALYSIS_THRESHOLD));
    let outcome = man.stage("clean", || {
        Ok(filter_faulty_pairs(&pairs, &corpus, &config)?)
    })?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &as_written(&outcome.kept, strategy, threshold))?;
    man.output(&a.out, None)?;
    if let Some(r) = &a.removed {
        ensure_parent(r)?;
        write_jsonl(r, &outcome.removed)?;
        man.output(r, None)?;
    }
    man.write(&manifest_path_for(&a.out))?;
    println!(
        "kept {}, removed {}",
        outcome.kept.len(),
        outcome.removed.len()
    );
    Ok(())
}

fn align_sents(a: AlignSentsArgs, jobs: Option<usize>) -> Result<()> {
    let mut man = RunManifest::new(
        "align-sents",
        json!({
            "langs": a.corpus.langs.to_string(),
            "top_k": a.top_k,
            "min_chars": a.min_chars,
            "min_chars_rule": a.min_chars_rule,
            "analysis_threshold": a.analysis_threshold,
        }),
        jobs,
    )?;
    for p in [&a.corpus.input, &a.alignments, &a.vectors] {
        man.input(p)?;
    }
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let records = man.stage("align-sents", || {
        let top = select_top(&read_pairs(&a.alignments)?.0, a.top_k);
        let table = sentence_table(&corpus, &top, &RuleSegmenter::default())?;
        let units = ordered_sentence_units(&top, &table);
        let vectors = if units.is_empty() {
            None
        } else {
            Some(vectors_from_file(&a.vectors, &units)?)
        };
        let per_pair = align_all_sentences(
            &top,
            &table,
            vectors.as_ref(),
            a.min_chars,
            a.min_chars_rule,
        )?;
        let mut records = sentence_records(&per_pair);
        if let Some(t) = a.analysis_threshold {
            records.retain(|r| r.score >= t);
        }
        Ok(records)
    })?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &records)?;
    man.output(&a.out, None)?;
    man.write(&manifest_path_for(&a.out))?;
    println!("{} sentence pairs -> {}", records.len(), a.out.display());
    Ok(())
}

fn metrics(a: MetricsArgs, jobs: Option<usize>) -> Result<()> {
    let mut man = RunManifest::new(
        "metrics",
        json!({ "langs": a.corpus.langs.to_string(), "top_k": a.top_k, "analysis_threshold": a.analysis_threshold }),
        jobs,
    )?;
    for p in [&a.corpus.input, &a.alignments, &a.sentences] {
        man.input(p)?;
    }
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let rows = man.stage("metrics", || {
        let top = select_top(&read_pairs(&a.alignments)?.0, a.top_k);
        let table = sentence_table(&corpus, &top, &RuleSegmenter::default())?;
        let sentences: Vec<SentenceAlignmentRecord> = read_jsonl(&a.sentences)?;
        let per_pair = group_sentence_records(&top, &sentences);
        all_metrics(&top, &table, &per_pair, a.analysis_threshold)
    })?;
    ensure_parent(&a.out)?;
    write_jsonl(&a.out, &rows)?;
    man.output(&a.out, None)?;
    man.write(&manifest_path_for(&a.out))?;
    println!("metrics for {} pairs -> {}", rows.len(), a.out.display());
    Ok(())
}

fn report(a: ReportArgs, jobs: Option<usize>) -> Result<()> {
    let mut man = RunManifest::new(
        "report",
        json!({ "langs": a.corpus.langs.to_string(), "top_k": a.top_k, "bins": a.bins, "hist_low": a.hist_low, "hist_high": a.hist_high, "token_counter": a.token_counter }),
        jobs,
    )?;
    man.input(&a.corpus.input)?;
    man.input(&a.alignments)?;
    if let Some(m) = &a.metrics {
        man.input(m)?;
    }
    let corpus = man.stage("validate", || load_corpus(&a.corpus))?;
    let files = man.stage("report", || {
        let (pairs, setting) = read_pairs(&a.alignments)?;
        let metrics: Vec<PairMetrics> = match &a.metrics {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        };
        if a.token_counter.is_none() {
            eprintln!("notice: no token counter configured; token statistics skipped");
        }
        let low = a.hist_low.or(setting.map(|s| s.1)).unwrap_or(0.0);
        let inputs = ReportInputs {
            corpus: &corpus,
            pairs: &pairs,
            metrics: &metrics,
            segmenter: &RuleSegmenter::default(),
            tokens: token_counter(a.token_counter),
            top_k: a.top_k,
            histogram_low: low,
            histogram_high: a.hist_high,
            bins: a.bins,
        };
        Ok(write_report(&a.out_dir, &inputs)?.1)
    })?;
    for f in files {
        man.output(&a.out_dir.join(f), Some(&a.out_dir))?;
    }
    man.write(&a.out_dir.join("manifest.json"))?;
    println!("report -> {}", a.out_dir.display());
    Ok(())
}

fn pipeline(a: PipelineArgs, jobs: Option<usize>) -> Result<()> {
    let overrides = Overrides {
        out_dir: a.out_dir,
        gold: a.gold,
        strategy: a.strategy,
        threshold: a.threshold,
        top_k: a.top_k,
        min_chars: a.min_chars,
        analysis_threshold: a.analysis_threshold,
        cleanup_config: a.cleanup_config,
        dump_matrices: a.dump_matrices,
    };
    let cfg = RunConfig::load(&a.config, &overrides).context("stage `config` failed")?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut man = RunManifest::new("pipeline", &cfg, jobs)?;
    let mut inputs = vec![a.config.clone(), cfg.input.clone()];
    inputs.extend(cfg.gold.clone());
    if cfg.provider.mode == ProviderMode::File {
        inputs.extend(cfg.provider.vector_file.clone());
    }
    man.inputs = inputs
        .iter()
        .map(|p| digest(p))
        .collect::<Result<_>>()
        .context("stage `config` failed")?;
    let mut outputs: Vec<PathBuf> = Vec::new();
    let emit = |name: &str| out.join(name);

    let corpus = man.stage("validate", || {
        Ok(Corpus::load(&cfg.input, cfg.langs.clone())?)
    })?;
    for w in &corpus.summary().warnings {
        eprintln!("warning: {w}");
    }
    let p = emit("corpus_summary.json");
    fs::write(&p, serde_json::to_string_pretty(corpus.summary())? + "\n")?;
    outputs.push(p);

    let embedder = man.stage("embed", || Ok(Embedder::from_config(&cfg.provider)?))?;
    let doc_vectors = man.stage("embed", || Ok(embedder.embed(&document_units(&corpus)?)?))?;
    let matrices = man.stage("similarity", || {
        Ok(similarity_matrices(&corpus, &doc_vectors)?)
    })?;
    if cfg.dump_matrices {
        let dir = emit("matrices");
        dump_matrices(&matrices, &dir)?;
        for m in &matrices {
            outputs.push(dir.join(format!("{}.csv", m.date)));
        }
    }

    let mut threshold = cfg.threshold;
    if let Some(gold_path) = &cfg.gold {
        let results = man.stage("tune", || {
            let gold = GoldSet::load(gold_path)?;
            let subset = gold_matrices(&matrices, &gold, &corpus)?;
            tune_all(&subset, &gold, &Strategy::ALL)
        })?;
        outputs.extend(write_tuning(&emit("tuning"), &results)?);
        if cfg.use_tuned_threshold {
            threshold = results
                .iter()
                .find(|r| r.strategy == cfg.strategy)
                .expect("every strategy is tuned")
                .best_threshold;
        }
    }

    let records = man.stage("align-docs", || {
        align_documents(&matrices, threshold, cfg.strategy)
    })?;
    let p = emit("alignments.jsonl");
    write_jsonl(&p, &records)?;
    outputs.push(p);
    let pairs: Vec<DocPair> = records.iter().map(AlignmentRecord::doc_pair).collect();

    let outcome = man.stage("clean", || {
        Ok(filter_faulty_pairs(&pairs, &corpus, &cfg.cleanup)?)
    })?;
    let p = emit("cleaned.jsonl");
    write_jsonl(&p, &as_written(&outcome.kept, cfg.strategy, threshold))?;
    outputs.push(p);
    let p = emit("removed.jsonl");
    write_jsonl(&p, &outcome.removed)?;
    outputs.push(p);

    let top = select_top(&outcome.kept, cfg.top_k);
    let p = emit("selected.jsonl");
    write_jsonl(&p, &as_written(&top, cfg.strategy, threshold))?;
    outputs.push(p);

    let seg = RuleSegmenter::default();
    let (table, sentence_vectors, sentence_rows) = man.stage("align-sents", || {
        let table = sentence_table(&corpus, &top, &seg)?;
        let units = ordered_sentence_units(&top, &table);
        let vectors = embed_sentences(&embedder, &units)?;
        let per_pair = align_all_sentences(
            &top,
            &table,
            vectors.as_ref(),
            cfg.min_chars,
            cfg.min_chars_rule,
        )?;
        Ok((table, vectors, sentence_records(&per_pair)))
    })?;
    let p = emit("sentence_alignments.jsonl");
    write_jsonl(&p, &sentence_rows)?;
    outputs.push(p);

    let metric_rows = man.stage("metrics", || {
        let per_pair = group_sentence_records(&top, &sentence_rows);
        all_metrics(&top, &table, &per_pair, cfg.analysis_threshold)
    })?;
    let p = emit("metrics.jsonl");
    write_jsonl(&p, &metric_rows)?;
    outputs.push(p);

    let report_dir = emit("report");
    let files = man.stage("report", || {
        if cfg.token_counter.is_none() {
            eprintln!("notice: no token counter configured; token statistics skipped");
        }
        let inputs = ReportInputs {
            corpus: &corpus,
            pairs: &outcome.kept,
            metrics: &metric_rows,
            segmenter: &seg,
            tokens: token_counter(cfg.token_counter),
            top_k: cfg.top_k,
            histogram_low: cfg.histogram_low.unwrap_or(threshold),
            histogram_high: 100.0,
            bins: cfg.histogram_bins,
        };
        Ok(write_report(&report_dir, &inputs)?.1)
    })?;
    outputs.extend(files.iter().map(|f| report_dir.join(f)));

    let all_vectors = match &sentence_vectors {
        Some(s) => doc_vectors.concat(s)?,
        None => doc_vectors,
    };
    let p = emit("vectors.xdemb");
    write_matrix(&all_vectors, &p)?;
    outputs.push(p);

    for p in &outputs {
        man.output(p, Some(&out))?;
    }
    man.write(&emit("manifest.json"))?;
    println!(
        "{} aligned, {} kept, {} selected, {} sentence pairs -> {}",
        records.len(),
        outcome.kept.len(),
        top.len(),
        sentence_rows.len(),
        out.display()
    );
    Ok(())
}
