//! Batch front end for `ce-summ`: seeded multi-run summarization, ROUGE
//! scoring of saved summaries, length/trade-off profiles, and generation of
//! the synthetic benchmark.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 optimization failure.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ce_summ::cascade::{summarize, tradeoff_profile, CascadeConfig, Mode, StepResult, SummaryResult, TradeoffRow};
use ce_summ::corpus::{load_corpus, DocumentSet, Topic};
use ce_summ::rouge::{self, ReferenceFile, RougeConfig};
use ce_summ::stats;
use ce_summ::synthetic::{benchmark, SyntheticConfig};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CE_SUMM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ce_summ::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(ce_summ::Error::Optimization(_) | ce_summ::Error::Invariant(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ce-summ", version, about = "Query-focused extractive summarization with the cross-entropy method")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize every topic for each seed and write a run report.
    Summarize(SummarizeArgs),
    /// Score saved summaries against reference summaries.
    Evaluate(EvaluateArgs),
    /// Saliency/focus of saliency-step summaries across length budgets.
    Profile(ProfileArgs),
    /// Write the synthetic benchmark (corpora and references) to disk.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Corpus JSON file, or a directory of them.
    #[arg(long)]
    pub corpus: PathBuf,
    /// JSON document with cascade and optimizer settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "dual", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    /// First seed; runs use seed-base, seed-base + 1, ...
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference file or directory. When given, per-seed scores are ROUGE-2
    /// recall; otherwise the final objective value.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Record wall-clock times. Off by default so repeated runs are byte-identical.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of summary JSON files written by `summarize`.
    #[arg(long)]
    pub summaries: PathBuf,
    #[arg(long)]
    pub references: PathBuf,
    /// JSON document with ROUGE settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Strictly ascending word limits.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,1500")]
    pub budgets: Vec<usize>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 2018)]
    pub seed: u64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: ce_summ::Error| e.to_string())
}

/// Worker count from [`THREADS_ENV`]; `None` leaves the choice to rayon.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn run(cli: Cli, threads: Option<usize>) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Summarize(a) => cmd_summarize(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Profile(a) => cmd_profile(&a),
        Command::Synth(a) => cmd_synth(&a),
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(text.strip_prefix('\u{feff}').unwrap_or(&text)).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

/// `path` itself if it is a file, else the `.json` files below it in path order.
fn json_files(path: &Path) -> CliResult<Vec<PathBuf>> {
    if !path.exists() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: "no such file or directory".into(),
        });
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "json") {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: "no .json files found".into(),
        });
    }
    Ok(files)
}

fn load_topics(path: &Path) -> CliResult<Vec<(Topic, DocumentSet)>> {
    let mut topics: Vec<(Topic, DocumentSet)> = Vec::new();
    for file in json_files(path)? {
        let (topic, docs) = load_corpus(&file)?;
        if topics.iter().any(|(t, _)| t.topic_id == topic.topic_id) {
            return Err(CliError::Input {
                path: file,
                message: format!("duplicate topic_id {:?}", topic.topic_id),
            });
        }
        topics.push((topic, docs));
    }
    Ok(topics)
}

fn load_references(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for file in json_files(path)? {
        let r: ReferenceFile = read_json(&file)?;
        if out.insert(r.topic_id.clone(), r.references).is_some() {
            return Err(CliError::Input {
                path: file,
                message: format!("duplicate references for topic {:?}", r.topic_id),
            });
        }
    }
    Ok(out)
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv rows serialize into memory");
    }
    let bytes = w.into_inner().expect("in-memory csv flush");
    write_file(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySentence {
    pub doc_id: String,
    pub sentence_id: String,
    pub text: String,
}

/// One summary as written by `summarize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub topic_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub summary: Vec<SummarySentence>,
    pub word_count: usize,
    pub step1_word_count: Option<usize>,
    pub distillate_terms: Vec<String>,
    /// Relative to the output directory.
    pub traces_path: String,
}

impl SummaryFile {
    pub fn text(&self) -> String {
        self.summary.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Serialize)]
struct TraceRow {
    step: u8,
    iteration: usize,
    gamma: f64,
    elite_mean: f64,
    elite_size: usize,
    #[serde(rename = "L_t")]
    length_limit: f64,
    wallclock_ms: f64,
}

fn trace_rows(step: u8, result: &StepResult, timing: bool) -> impl Iterator<Item = TraceRow> + '_ {
    result.trace.iter().map(move |t| TraceRow {
        step,
        iteration: t.iteration,
        gamma: t.gamma,
        elite_mean: t.elite_mean,
        elite_size: t.elite_size,
        length_limit: t.length_limit,
        wallclock_ms: if timing { t.wallclock_ms } else { 0.0 },
    })
}

/// Per-topic aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub topic_id: String,
    pub mode: Mode,
    /// `rouge-2-recall` or `objective`.
    pub metric: String,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Absent for a single run.
    pub ci95_halfwidth: Option<f64>,
    pub runtime_ms: f64,
}

impl RunReport {
    pub fn new(topic_id: String, mode: Mode, metric: &str, seeds: Vec<u64>, scores: Vec<f64>, runtime_ms: f64) -> Self {
        Self {
            topic_id,
            mode,
            metric: metric.to_string(),
            mean: stats::mean(&scores),
            ci95_halfwidth: stats::ci95_halfwidth(&scores),
            seeds,
            scores,
            runtime_ms,
        }
    }
}

struct RunOutput {
    topic: usize,
    seed: u64,
    result: SummaryResult,
    elapsed_ms: f64,
}

fn summary_file(result: &SummaryResult, docs: &DocumentSet, topic_id: &str, traces_path: String) -> SummaryFile {
    let mut distillate_terms: Vec<String> = result
        .distillate
        .iter()
        .flat_map(|d| d.salient_terms.iter().map(|&t| docs.vocabulary.term(t).to_string()))
        .collect();
    distillate_terms.sort();
    SummaryFile {
        topic_id: topic_id.to_string(),
        mode: result.mode,
        seed: result.seed,
        summary: result
            .sentences()
            .into_iter()
            .map(|s| SummarySentence {
                doc_id: s.doc_id.clone(),
                sentence_id: s.id.clone(),
                text: s.raw_text.clone(),
            })
            .collect(),
        word_count: result.total_words(),
        step1_word_count: result.step1.as_ref().map(|s| s.summary.total_words),
        distillate_terms,
        traces_path,
    }
}

/// Runs every (topic, seed) pair on the current pool, writes summaries,
/// traces and `report.json` under `args.out`, and returns the reports.
pub fn cmd_summarize(args: &SummarizeArgs) -> CliResult<Vec<RunReport>> {
    let config: CascadeConfig = read_config(args.config.as_deref())?;
    config.validate()?;
    let topics = load_topics(&args.corpus)?;
    let references = args.references.as_deref().map(load_references).transpose()?;
    if let Some(refs) = &references {
        for (t, _) in &topics {
            if !refs.contains_key(&t.topic_id) {
                return Err(CliError::Usage(format!("no references for topic {:?}", t.topic_id)));
            }
        }
    }
    let seeds: Vec<u64> = (0..args.runs).map(|i| args.seed_base + i).collect();
    let jobs: Vec<(usize, u64)> = (0..topics.len())
        .flat_map(|t| seeds.iter().map(move |&s| (t, s)))
        .collect();

    let outputs: Vec<RunOutput> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let (topic, docs) = &topics[t];
            let mut cfg = config.clone();
            cfg.ce.seed = seed;
            let start = Instant::now();
            let result = summarize(topic, docs, &cfg, args.mode)?;
            Ok(RunOutput {
                topic: t,
                seed,
                result,
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<CliResult<_>>()?;

    let mode = args.mode;
    let mut per_topic: Vec<(Vec<u64>, Vec<f64>, f64)> = vec![(Vec::new(), Vec::new(), 0.0); topics.len()];
    for out in &outputs {
        let (topic, docs) = &topics[out.topic];
        let stem = format!("{}/{}.seed{}", topic.topic_id, mode, out.seed);
        let traces_path = format!("traces/{stem}.csv");
        let mut rows: Vec<TraceRow> = Vec::new();
        if let Some(step1) = &out.result.step1 {
            rows.extend(trace_rows(1, step1, args.timing));
        }
        let final_step = if out.result.step1.is_some() { 2 } else { 1 };
        rows.extend(trace_rows(final_step, &out.result.summary, args.timing));
        write_csv(&args.out.join(&traces_path), &rows)?;

        let file = summary_file(&out.result, docs, &topic.topic_id, traces_path);
        write_json(&args.out.join(format!("summaries/{stem}.json")), &file)?;

        let score = match &references {
            Some(refs) => rouge::evaluate(&file.text(), &refs[&topic.topic_id], &RougeConfig::default())?
                .rouge_2
                .recall,
            None => out.result.summary.objective,
        };
        let entry = &mut per_topic[out.topic];
        entry.0.push(out.seed);
        entry.1.push(score);
        if args.timing {
            entry.2 += out.elapsed_ms;
        }
    }

    let metric = if references.is_some() { "rouge-2-recall" } else { "objective" };
    let reports: Vec<RunReport> = topics
        .iter()
        .zip(per_topic)
        .map(|((topic, _), (seeds, scores, ms))| RunReport::new(topic.topic_id.clone(), mode, metric, seeds, scores, ms))
        .collect();
    write_json(&args.out.join("report.json"), &reports)?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub topic_id: String,
    pub mode: Mode,
    pub metric: String,
    pub recall: f64,
    pub precision: f64,
    pub f: f64,
    /// Number of summaries averaged.
    pub summaries: usize,
}

/// Mean ROUGE scores per (topic, mode) over the summaries found below
/// `args.summaries`.
pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let config: RougeConfig = read_config(args.config.as_deref())?;
    let references = load_references(&args.references)?;
    let mut groups: BTreeMap<(String, String), (Mode, Vec<rouge::RougeReport>)> = BTreeMap::new();
    for path in json_files(&args.summaries)? {
        let s: SummaryFile = read_json(&path)?;
        let refs = references.get(&s.topic_id).ok_or_else(|| CliError::Input {
            path: path.clone(),
            message: format!("no references for topic {:?}", s.topic_id),
        })?;
        let report = rouge::evaluate(&s.text(), refs, &config)?;
        groups
            .entry((s.topic_id.clone(), s.mode.to_string()))
            .or_insert_with(|| (s.mode, Vec::new()))
            .1
            .push(report);
    }
    let mut rows = Vec::new();
    for ((topic_id, _), (mode, reports)) in groups {
        for (i, (metric, _)) in reports[0].metrics().into_iter().enumerate() {
            let scores: Vec<_> = reports.iter().map(|r| r.metrics()[i].1).collect();
            let avg = |f: fn(&rouge::RougeScore) -> f64| stats::mean(&scores.iter().map(f).collect::<Vec<_>>());
            rows.push(ScoreRow {
                topic_id: topic_id.clone(),
                mode,
                metric: metric.to_string(),
                recall: avg(|s| s.recall),
                precision: avg(|s| s.precision),
                f: avg(|s| s.f),
                summaries: reports.len(),
            });
        }
    }
    write_csv(&args.out, &rows)
}

#[derive(Debug, Serialize)]
struct ProfileRow {
    topic_id: String,
    budget: usize,
    saliency: Option<f64>,
    focus: Option<f64>,
    word_count: Option<usize>,
    status: &'static str,
}

pub fn cmd_profile(args: &ProfileArgs) -> CliResult<()> {
    let config: CascadeConfig = read_config(args.config.as_deref())?;
    config.validate()?;
    if args.budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(format!("budgets must be strictly ascending, got {:?}", args.budgets)));
    }
    let topics = load_topics(&args.corpus)?;
    let tables: Vec<Vec<TradeoffRow>> = topics
        .par_iter()
        .map(|(topic, docs)| tradeoff_profile(topic, docs, &config, &args.budgets))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for ((topic, _), table) in topics.iter().zip(tables) {
        for row in table {
            rows.push(match row {
                TradeoffRow::Solved {
                    budget,
                    saliency,
                    focus,
                    word_count,
                } => ProfileRow {
                    topic_id: topic.topic_id.clone(),
                    budget,
                    saliency: Some(saliency),
                    focus: Some(focus),
                    word_count: Some(word_count),
                    status: "ok",
                },
                TradeoffRow::Infeasible { budget } => ProfileRow {
                    topic_id: topic.topic_id.clone(),
                    budget,
                    saliency: None,
                    focus: None,
                    word_count: None,
                    status: "infeasible",
                },
            });
        }
    }
    write_csv(&args.out, &rows)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let cfg = SyntheticConfig {
        topics: args.topics,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    for t in benchmark(&cfg) {
        let id = &t.corpus.topic_id;
        write_json(&args.out.join(format!("corpus/{id}.json")), &t.corpus)?;
        write_json(&args.out.join(format!("references/{id}.json")), &t.references)?;
    }
    Ok(())
}
