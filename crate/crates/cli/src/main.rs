use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evloop::corpus::{build_embedder, ingest, ChunkingConfig, VectorIndex};
use evloop::domain::{validate_question, BackendConfig, EmbedderConfig, RawQuestion, RunConfig, TaskKind, Timing};
use evloop::harness::{self, Engine};
use evloop::llm::build_gateway;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "evloop",
    version,
    about = "Evidence-loop retrieval QA: ingest corpora, run benchmarks, ask questions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk, embed and index corpus files.
    Ingest(IngestArgs),
    /// Answer every question of a dataset and write records and metrics.
    Run(RunArgs),
    /// Answer one question and print schema, trajectory, report and answer.
    Ask(AskArgs),
    /// Recompute the summary from stored records.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus JSONL files ({"source","title","text"} per line).
    #[arg(long = "corpus", required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Output index directory.
    #[arg(long)]
    index: PathBuf,
    /// TOML config supplying the embedder.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long, default_value_t = 1000)]
    max_chars: usize,
    #[arg(long, default_value_t = 200)]
    overlap: usize,
}

#[derive(Args, Clone)]
struct EmbedArgs {
    /// Dimension of the built-in hashing embedder.
    #[arg(long)]
    dim: Option<usize>,
    /// Seed of the built-in hashing embedder.
    #[arg(long)]
    seed: Option<u64>,
    /// Use a remote embedding service at this URL instead.
    #[arg(long)]
    embed_url: Option<String>,
}

#[derive(Copy, Clone, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prebuilt index directory.
    #[arg(long, conflicts_with = "corpus")]
    index: Option<PathBuf>,
    /// Corpus files to ingest in memory instead of loading an index.
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// JSONL script for the mock backend.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Chat endpoint base URL for the http backend. The API key is read from
    /// the environment variable named in the config (EVLOOP_API_KEY by default).
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    embed: EmbedArgs,
    /// Skip the interpreter; the raw stem becomes the first query.
    #[arg(long)]
    no_interpreter: bool,
    /// Stop after one retrieval round.
    #[arg(long)]
    single_round: bool,
    /// Answer from evidence summaries without an adjudication report.
    #[arg(long)]
    no_adjudication: bool,
    /// Report zero wall time so repeated scripted runs are byte-identical.
    #[arg(long)]
    frozen_time: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Output directory for records and summaries.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct AskArgs {
    /// Question stem.
    #[arg(long)]
    question: String,
    /// Option as LABEL=TEXT; repeat per option. Omit for yn/ynm tasks.
    #[arg(long = "option")]
    options: Vec<String>,
    #[arg(long, value_parser = parse_task, default_value = "mcq4")]
    task: TaskKind,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding records.jsonl.
    #[arg(long)]
    run: PathBuf,
    /// Where to write the recomputed summary; defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse::<TaskKind>().map_err(|e| e.to_string())
}

fn embedder_config(base: EmbedderConfig, args: &EmbedArgs) -> EmbedderConfig {
    if let Some(url) = &args.embed_url {
        let dim = args.dim.unwrap_or(match base {
            EmbedderConfig::Mock { dim, .. } | EmbedderConfig::Remote { dim, .. } => dim,
        });
        return EmbedderConfig::Remote {
            url: url.clone(),
            dim,
            batch_size: 64,
        };
    }
    match base {
        EmbedderConfig::Mock { dim, seed } => EmbedderConfig::Mock {
            dim: args.dim.unwrap_or(dim),
            seed: args.seed.unwrap_or(seed),
        },
        remote => remote,
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_config(args: &EngineArgs) -> Result<RunConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(v) = args.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    cfg.ablation.skip_interpreter |= args.no_interpreter;
    cfg.ablation.single_round |= args.single_round;
    cfg.ablation.skip_adjudication |= args.no_adjudication;
    if args.frozen_time {
        cfg.timing = Timing::Frozen;
    }
    cfg.embedder = embedder_config(cfg.embedder, &args.embed);

    let kind = args.backend.or(match (&args.mock_script, &args.base_url) {
        (Some(_), _) => Some(BackendKind::Mock),
        (None, Some(_)) => Some(BackendKind::Http),
        _ => None,
    });
    match kind {
        Some(BackendKind::Mock) => {
            let script = args.mock_script.clone().or(match &cfg.backend {
                BackendConfig::Mock { script } => script.clone(),
                _ => None,
            });
            cfg.backend = BackendConfig::Mock { script };
        }
        Some(BackendKind::Http) => {
            let (base_url, model) = match &cfg.backend {
                BackendConfig::Http { base_url, model, .. } => (Some(base_url.clone()), Some(model.clone())),
                _ => (None, None),
            };
            let base_url = args
                .base_url
                .clone()
                .or(base_url)
                .context("--backend http needs --base-url")?;
            let model = args.model.clone().or(model).context("--backend http needs --model")?;
            cfg.backend = match cfg.backend {
                BackendConfig::Http {
                    path,
                    api_key_env,
                    timeout_secs,
                    ..
                } => BackendConfig::Http {
                    base_url,
                    path,
                    model,
                    api_key_env,
                    timeout_secs,
                },
                BackendConfig::Mock { .. } => BackendConfig::Http {
                    base_url,
                    path: "/v1/chat/completions".into(),
                    model,
                    api_key_env: "EVLOOP_API_KEY".into(),
                    timeout_secs: 120,
                },
            };
        }
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_engine(args: &EngineArgs) -> Result<Engine> {
    let cfg = resolve_config(args)?;
    let embedder = build_embedder(&cfg.embedder)?;
    let index = match (&args.index, args.corpus.is_empty()) {
        (Some(dir), _) => VectorIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))?,
        (None, false) => ingest(&args.corpus, ChunkingConfig::default(), embedder.as_ref())?,
        (None, true) => bail!("either --index or --corpus is required"),
    };
    if index.embedder_tag() != embedder.tag() {
        bail!(
            "index was built with embedder `{}` but the run uses `{}`",
            index.embedder_tag(),
            embedder.tag()
        );
    }
    let gateway = build_gateway(&cfg)?;
    Ok(Engine::new(cfg, gateway, index, embedder)?)
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let embedder = build_embedder(&embedder_config(cfg.embedder, &args.embed))?;
    let chunking = ChunkingConfig {
        max_chars: args.max_chars,
        overlap: args.overlap,
    };
    if chunking.overlap >= chunking.max_chars {
        bail!("--overlap must be smaller than --max-chars");
    }
    let index = ingest(&args.corpus, chunking, embedder.as_ref())?;
    let manifest = index.save(&args.index)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let data = harness::load_dataset(&args.dataset, args.task)?;
    for r in &data.rejected {
        eprintln!("{}:{}: rejected: {}", args.dataset.display(), r.line, r.message);
    }
    eprintln!(
        "loaded {} question(s), rejected {}",
        data.questions.len(),
        data.rejected.len()
    );
    let engine = build_engine(&args.engine)?;
    let run = harness::run_benchmark(&engine, &data.questions);
    let label = engine.config().ablation.label();
    harness::write_run(&args.out, &run.records, &run.metrics, label)?;
    print!("{}", run.metrics.to_table(label));
    Ok(())
}

fn cmd_ask(args: AskArgs) -> Result<()> {
    let options: Vec<(String, String)> = if args.options.is_empty() {
        args.task
            .labels()
            .iter()
            .map(|l| (l.to_string(), String::new()))
            .collect()
    } else {
        args.options
            .iter()
            .map(|o| {
                o.split_once('=')
                    .map(|(l, t)| (l.trim().to_string(), t.trim().to_string()))
                    .with_context(|| format!("option `{o}` is not LABEL=TEXT"))
            })
            .collect::<Result<_>>()?
    };
    let raw = RawQuestion {
        id: "ask".into(),
        question: args.question,
        options,
        answer: None,
    };
    let question = validate_question(raw, args.task)?;
    let engine = build_engine(&args.engine)?;
    let rec = engine.run_question(&question);
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), serde_json::to_value(&rec.schema)?);
    out.insert("trajectory".into(), serde_json::to_value(&rec.trajectory)?);
    out.insert("report".into(), serde_json::to_value(&rec.report)?);
    out.insert("answer".into(), serde_json::to_value(&rec.prediction)?);
    out.insert("cost".into(), serde_json::to_value(rec.cost)?);
    if let Some(err) = &rec.error {
        out.insert("error".into(), serde_json::to_value(err)?);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let records = harness::read_records(&args.run.join(harness::RECORDS_FILE))?;
    let metrics = harness::RunMetrics::from_records(&records);
    let mut labels: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        *labels.entry(r.variant.as_str()).or_default() += 1;
    }
    let label = match labels.len() {
        1 => labels.keys().next().copied().unwrap_or("run"),
        _ => "mixed",
    };
    harness::write_summary(args.out.as_deref().unwrap_or(&args.run), &metrics, label)?;
    print!("{}", metrics.to_table(label));
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Run(a) => cmd_run(a),
        Command::Ask(a) => cmd_ask(a),
        Command::Report(a) => cmd_report(a),
    }
}
