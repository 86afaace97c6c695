//! Command-line frontend wiring the library into the full workflow:
//! collect, embed, train, eval-reward, select, bench-sweep, synth, and
//! cost-report.
//!
//! Exit codes: 0 on success, 1 on domain errors (the module error name is
//! printed on standard error), 2 on usage and configuration errors.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use oirl_core::bench::{
    cost_report, sweep_k, sweep_scarcity, EvalPool, StrategyContext, SweepInputs, TokenProfile,
};
use oirl_core::corpus::{
    self, Corpus, DemonstrationSet, Prompt, SplitTag,
};
use oirl_core::embedding::{Embedder, EmbeddingStore, RemoteEmbeddingConfig};
use oirl_core::llm::{collect_demonstrations, LlmClient, PriceSheet, RemoteLlmConfig};
use oirl_core::policy::{Strategy, DEFAULT_TEMPLATE};
use oirl_core::reward::{
    evaluate_reward_model, load_model, train_reward_model, BoostConfig,
    DEFAULT_THRESHOLD,
};
use oirl_core::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "oirl",
    version,
    about = "Offline prompt evaluation and optimization workflows",
    propagate_version = true
)]
struct Cli {
    /// Configuration file (TOML, flat dotted keys); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect demonstrations by completing every (query, prompt) pair of
    /// one partition against an LLM.
    Collect(CollectArgs),
    /// Embed every distinct query and prompt text of a corpus.
    Embed(EmbedArgs),
    /// Train the proxy reward model from demonstrations and embeddings.
    Train(TrainArgs),
    /// Evaluate a trained reward model as a binary classifier.
    EvalReward(EvalRewardArgs),
    /// Select a prompt per test query with one strategy, writing a trace.
    Select(SelectArgs),
    /// Sweep training-prompt availability (or data scarcity) and report
    /// per-subset and per-K success.
    BenchSweep(BenchSweepArgs),
    /// Generate a synthetic benchmark with a planted reward rule.
    Synth(SynthArgs),
    /// Emit the per-query inference cost table.
    Cost(CostArgs),
}

#[derive(Args)]
struct ProviderFlags {
    /// Embedding provider kind: mock, file, or remote.
    #[arg(long)]
    provider: Option<String>,
    /// Remote embedding endpoint URL.
    #[arg(long)]
    embed_url: Option<String>,
    /// Embedding dimension (mock and remote providers).
    #[arg(long)]
    dimension: Option<usize>,
    /// Remote request batch size.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct BoostFlags {
    /// Maximum tree depth [default: 10]
    #[arg(long)]
    max_depth: Option<usize>,
    /// Learning rate [default: 0.001]
    #[arg(long)]
    eta: Option<f64>,
    /// Boosting rounds [default: 500]
    #[arg(long)]
    num_rounds: Option<usize>,
    /// Leaf L2 regularizer [default: 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Minimum split gain [default: 0]
    #[arg(long)]
    gamma: Option<f64>,
    /// Minimum hessian mass per leaf [default: 1]
    #[arg(long)]
    min_child_weight: Option<f64>,
    /// Starting margin [default: 0]
    #[arg(long)]
    base_margin: Option<f64>,
    /// Training seed [default: 0]
    #[arg(long)]
    boost_seed: Option<u64>,
}

impl BoostFlags {
    fn resolve(&self, cfg: &config::BoostToml) -> BoostConfig {
        let defaults = BoostConfig::default();
        BoostConfig {
            max_depth: self.max_depth.or(cfg.max_depth).unwrap_or(defaults.max_depth),
            eta: self.eta.or(cfg.eta).unwrap_or(defaults.eta),
            num_rounds: self
                .num_rounds
                .or(cfg.num_rounds)
                .unwrap_or(defaults.num_rounds),
            lambda: self.lambda.or(cfg.lambda).unwrap_or(defaults.lambda),
            gamma: self.gamma.or(cfg.gamma).unwrap_or(defaults.gamma),
            min_child_weight: self
                .min_child_weight
                .or(cfg.min_child_weight)
                .unwrap_or(defaults.min_child_weight),
            base_margin: self
                .base_margin
                .or(cfg.base_margin)
                .unwrap_or(defaults.base_margin),
            seed: self.boost_seed.or(cfg.seed).unwrap_or(defaults.seed),
        }
    }
}

#[derive(Args)]
struct CollectArgs {
    /// Corpus manifest path.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Partition to collect: train, test_q, or test_p.
    #[arg(long, default_value = "train")]
    split: String,
    /// Restrict to these prompt ids (comma separated).
    #[arg(long)]
    prompt_ids: Option<String>,
    /// LLM kind: mock or remote.
    #[arg(long)]
    llm: Option<String>,
    /// Mock fixture file ({"request","response"} lines).
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Remote chat endpoint URL.
    #[arg(long)]
    llm_url: Option<String>,
    /// Remote model name.
    #[arg(long)]
    model_name: Option<String>,
    /// Concurrent in-flight completions.
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Prompted-query template.
    #[arg(long)]
    template: Option<String>,
    /// Checkpoint file; already-collected pairs are skipped.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output demonstration file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderFlags,
    /// Mock provider seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Existing store to warm-start from (defaults to the output file).
    #[arg(long)]
    warm: Option<PathBuf>,
    /// Output embedding store.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Training demonstration file.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Embedding store file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    boost: BoostFlags,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalRewardArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    demos: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Model file to evaluate.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Classification threshold.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Optional report output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Strategy: distributional, best_of_train_qd, prompt_oirl,
    /// nearest_neighbor, oracle, or llm_confidence.
    #[arg(long)]
    strategy: String,
    /// Training demonstrations (distributional / nearest_neighbor).
    #[arg(long)]
    train_demos: Option<PathBuf>,
    /// Evaluation demonstrations for the oracle (may repeat).
    #[arg(long)]
    eval_demos: Vec<PathBuf>,
    /// Candidate pool: train, heldout, or all.
    #[arg(long, default_value = "train")]
    candidates: String,
    /// Mock fixture file for llm_confidence.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    template: Option<String>,
    /// Output selection trace file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchSweepArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    train_demos: Option<PathBuf>,
    #[arg(long)]
    test_q_demos: Option<PathBuf>,
    #[arg(long)]
    test_p_demos: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Comma-separated strategies to run.
    #[arg(long, default_value = "distributional,best_of_train_qd,prompt_oirl,oracle")]
    strategies: String,
    /// Comma-separated training-prompt counts, e.g. 1,2,3,4,5,6.
    #[arg(long)]
    ks: Option<String>,
    /// Run the data-scarcity sweep with these removal fractions instead,
    /// e.g. 0.0,0.3,0.5,0.7,0.8,0.9.
    #[arg(long)]
    scarcity: Option<String>,
    /// Seed for scarcity subsampling.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    boost: BoostFlags,
    /// Directory for report and curve files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// World seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding dimension.
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Label-noise probability in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Training queries.
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Held-out test queries.
    #[arg(long, default_value_t = 20)]
    test_queries: usize,
    /// Training prompts.
    #[arg(long, default_value_t = 6)]
    train_prompts: usize,
    /// Held-out prompts.
    #[arg(long, default_value_t = 10)]
    heldout_prompts: usize,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CostArgs {
    /// Price sheet file.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Token profile file.
    #[arg(long)]
    profile: PathBuf,
    /// Comma-separated candidate counts, e.g. 1,6,110.
    #[arg(long, default_value = "1,6,110")]
    ks: String,
    #[arg(long, default_value = "llm_confidence,prompt_oirl")]
    strategies: String,
    /// Output cost table file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Config(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("UsageError: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("ConfigError: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(err)) => {
            eprintln!("{}: {err}", err.name());
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    run(cli.command, &config)
}

fn run(command: Command, config: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Collect(args) => cmd_collect(args, config),
        Command::Embed(args) => cmd_embed(args, config),
        Command::Train(args) => cmd_train(args, config),
        Command::EvalReward(args) => cmd_eval_reward(args, config),
        Command::Select(args) => cmd_select(args, config),
        Command::BenchSweep(args) => cmd_bench_sweep(args, config),
        Command::Synth(args) => cmd_synth(args, config),
        Command::Cost(args) => cmd_cost(args, config),
    }
}

fn require(path: Option<PathBuf>, cfg: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.or_else(|| cfg.cloned())
        .ok_or_else(|| CliError::Usage(format!("--{what} is required (flag or config key)")))
}

/// Writes bytes via a temp file and rename so interrupted runs never leave
/// half-written outputs.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension(format!(
        "{}tmp{}",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_jsonl_atomic(path: &Path, lines: &[serde_json::Value]) -> Result<(), Error> {
    let mut buf = Vec::new();
    for line in lines {
        buf.extend_from_slice(line.to_string().as_bytes());
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Single-instance guard for commands that mutate a shared checkpoint.
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(target: &Path) -> Result<Self, Error> {
        let path = target.with_extension("lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::InvalidInput(
                format!("lock file {} exists; another run owns this checkpoint", path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn parse_split(s: &str) -> Result<SplitTag, CliError> {
    match s {
        "train" => Ok(SplitTag::Train),
        "test_q" => Ok(SplitTag::TestQ),
        "test_p" => Ok(SplitTag::TestP),
        other => Err(CliError::Usage(format!("unknown split `{other}`"))),
    }
}

fn parse_strategies(s: &str) -> Result<Vec<Strategy>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| Strategy::parse(t).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("`{t}` is not an integer")))
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{t}` is not a number")))
        })
        .collect()
}

fn load_corpus_arg(path: Option<PathBuf>, config: &RunConfig) -> Result<Corpus, CliError> {
    let path = require(path, config.corpus.as_ref(), "corpus")?;
    Ok(corpus::load_corpus(&path)?)
}

fn build_embedder(
    flags: &ProviderFlags,
    seed: Option<u64>,
    config: &RunConfig,
    warm: Option<&Path>,
) -> Result<Embedder, CliError> {
    let kind = flags
        .provider
        .clone()
        .or_else(|| config.provider.kind.clone())
        .unwrap_or_else(|| "mock".to_string());
    let dimension = flags
        .dimension
        .or(config.provider.dimension)
        .unwrap_or(oirl_core::embedding::DEFAULT_MOCK_DIMENSION);
    match kind.as_str() {
        "mock" => Ok(Embedder::mock(
            seed.or(config.seed).unwrap_or(0),
            dimension,
        )),
        "file" => {
            let path = warm.ok_or_else(|| {
                CliError::Usage("file provider needs an existing store (--warm)".into())
            })?;
            Ok(Embedder::from_file(path)?)
        }
        "remote" => {
            let url = flags
                .embed_url
                .clone()
                .or_else(|| config.provider.url.clone())
                .ok_or_else(|| CliError::Usage("remote provider needs --embed-url".into()))?;
            let mut remote = RemoteEmbeddingConfig::new(url);
            remote.dimension = dimension;
            if let Some(batch) = flags.batch_size.or(config.provider.batch_size) {
                remote.batch_size = batch;
            }
            Ok(Embedder::remote(remote))
        }
        other => Err(CliError::Usage(format!("unknown provider `{other}`"))),
    }
}

fn build_llm(
    kind: Option<String>,
    fixtures: Option<PathBuf>,
    url: Option<String>,
    model: Option<String>,
    max_in_flight: Option<usize>,
    config: &RunConfig,
) -> Result<LlmClient, CliError> {
    let kind = kind
        .or_else(|| config.llm.kind.clone())
        .unwrap_or_else(|| "mock".to_string());
    let client = match kind.as_str() {
        "mock" => {
            let fixtures = fixtures.or_else(|| config.llm.fixtures.clone());
            match fixtures {
                Some(path) => LlmClient::mock_from_file(&path)?,
                None => LlmClient::mock(Default::default()),
            }
        }
        "remote" => {
            let url = url
                .or_else(|| config.llm.url.clone())
                .ok_or_else(|| CliError::Usage("remote llm needs --llm-url".into()))?;
            let model = model
                .or_else(|| config.llm.model.clone())
                .ok_or_else(|| CliError::Usage("remote llm needs --model-name".into()))?;
            LlmClient::remote(RemoteLlmConfig::new(url, model))
        }
        other => return Err(CliError::Usage(format!("unknown llm kind `{other}`"))),
    };
    Ok(client.with_max_in_flight(
        max_in_flight.or(config.llm.max_in_flight).unwrap_or(1),
    ))
}

fn template_arg(flag: Option<String>, config: &RunConfig) -> String {
    flag.or_else(|| config.template.clone())
        .unwrap_or_else(|| DEFAULT_TEMPLATE.to_string())
}

fn cmd_collect(args: CollectArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let split = parse_split(&args.split)?;
    let client = build_llm(
        args.llm,
        args.fixtures,
        args.llm_url,
        args.model_name,
        args.max_in_flight,
        config,
    )?;
    let template = template_arg(args.template, config);
    let wanted: Vec<Prompt> = match split {
        SplitTag::Train | SplitTag::TestQ => corpus.train_prompts().into_iter().cloned().collect(),
        SplitTag::TestP => corpus.heldout_prompts().into_iter().cloned().collect(),
    };
    let prompts: Vec<Prompt> = match &args.prompt_ids {
        None => wanted,
        Some(ids) => {
            let keep: BTreeSet<&str> = ids.split(',').map(str::trim).collect();
            wanted
                .into_iter()
                .filter(|p| keep.contains(p.id.as_str()))
                .collect()
        }
    };
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| args.out.clone());
    let _lock = LockFile::acquire(&checkpoint)?;
    let demos = collect_demonstrations(
        &client,
        &corpus,
        &prompts,
        &template,
        split,
        Some(&checkpoint),
    )?;
    if args.out != checkpoint {
        let lines: Vec<serde_json::Value> = demos
            .records()
            .iter()
            .map(|r| serde_json::to_value(r).expect("records serialize"))
            .collect();
        write_jsonl_atomic(&args.out, &lines)?;
    }
    eprintln!(
        "collected {} records into {} ({} split)",
        demos.len(),
        args.out.display(),
        split.as_str()
    );
    Ok(())
}

fn cmd_embed(args: EmbedArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let warm_path = args.warm.clone().unwrap_or_else(|| args.out.clone());
    let _lock = LockFile::acquire(&args.out)?;
    let warm_store = if warm_path.exists() {
        Some(EmbeddingStore::load(&warm_path)?)
    } else {
        None
    };

    // Warm entries short-circuit the provider so re-runs make no remote
    // calls and rewrite the same bytes.
    let embedder = build_embedder(&args.provider, args.seed, config, Some(&warm_path))?;
    let mut fresh = EmbeddingStore::new(embedder.dimension());
    let mut texts: Vec<&str> = Vec::new();
    for q in corpus.train_queries().iter().chain(corpus.test_queries()) {
        texts.push(&q.text);
    }
    for p in corpus.prompts() {
        texts.push(&p.text);
    }
    for text in texts {
        if let Some(hit) = warm_store.as_ref().and_then(|s| s.get_for_text(text)) {
            fresh.insert(hit.as_ref().clone())?;
        } else {
            let vector = embedder.embed_text(text)?;
            fresh.insert(vector.as_ref().clone())?;
        }
    }
    let mut buf = Vec::new();
    for entry in fresh.iter() {
        buf.extend_from_slice(
            serde_json::to_string(entry.as_ref())
                .expect("vectors serialize")
                .as_bytes(),
        );
        buf.push(b'\n');
    }
    write_atomic(&args.out, &buf)?;
    eprintln!("embedded {} distinct texts into {}", fresh.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let demos_path = require(args.demos, config.demos.as_ref(), "demos")?;
    let demos = corpus::load_demonstrations(&demos_path, &corpus)?;
    let store_path = require(args.embeddings, config.embeddings.as_ref(), "embeddings")?;
    if !store_path.exists() {
        return Err(Error::MissingEmbedding(store_path.display().to_string()).into());
    }
    let store = EmbeddingStore::load(&store_path)?;
    let boost = args.boost.resolve(&config.boost);
    let model = train_reward_model(&demos, &corpus, &store, &boost)?;
    let bytes = oirl_core::reward::model_to_bytes(&model)?;
    write_atomic(&args.out, &bytes)?;
    eprintln!(
        "trained {} trees on {} records, fingerprint {}",
        model.trees().len(),
        demos.len(),
        &model.training_fingerprint()[..12]
    );
    Ok(())
}

fn cmd_eval_reward(args: EvalRewardArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let demos_path = require(args.demos, config.demos.as_ref(), "demos")?;
    let demos = corpus::load_demonstrations(&demos_path, &corpus)?;
    let store_path = require(args.embeddings, config.embeddings.as_ref(), "embeddings")?;
    let store = EmbeddingStore::load(&store_path)?;
    let model_path = require(args.model, config.model.as_ref(), "model")?;
    let model = load_model(&model_path)?;
    let report = evaluate_reward_model(&model, &demos, &corpus, &store, args.threshold)?;
    let line = serde_json::to_value(&report).expect("report serializes");
    println!("{line}");
    if let Some(out) = args.out {
        write_jsonl_atomic(&out, &[line])?;
    }
    Ok(())
}

fn cmd_select(args: SelectArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let strategy =
        Strategy::parse(&args.strategy).map_err(|e| CliError::Usage(e.to_string()))?;
    let candidates: Vec<Prompt> = match args.candidates.as_str() {
        "train" => corpus.train_prompts().into_iter().cloned().collect(),
        "heldout" => corpus.heldout_prompts().into_iter().cloned().collect(),
        "all" => corpus.prompts().to_vec(),
        other => return Err(CliError::Usage(format!("unknown candidate pool `{other}`"))),
    };
    let template = template_arg(args.template, config);

    let store = match &args.embeddings.clone().or_else(|| config.embeddings.clone()) {
        Some(path) => Some(EmbeddingStore::load(path)?),
        None => None,
    };
    let model = match &args.model.clone().or_else(|| config.model.clone()) {
        Some(path) => Some(load_model(path)?),
        None => None,
    };
    let train_demos = match &args.train_demos.clone().or_else(|| config.demos.clone()) {
        Some(path) => Some(corpus::load_demonstrations(path, &corpus)?),
        None => None,
    };
    let eval_sets: Vec<DemonstrationSet> = args
        .eval_demos
        .iter()
        .map(|p| corpus::load_demonstrations(p, &corpus))
        .collect::<Result<_, _>>()?;

    let need = |opt: bool, what: &str| -> Result<(), CliError> {
        if opt {
            Ok(())
        } else {
            Err(CliError::Usage(format!("strategy {} needs {what}", strategy.as_str())))
        }
    };
    let llm_client;
    let ctx = match strategy {
        Strategy::Distributional => {
            need(train_demos.is_some(), "--train-demos")?;
            StrategyContext::Distributional {
                train_demos: train_demos.as_ref().unwrap(),
            }
        }
        Strategy::BestOfTrainQd => {
            need(model.is_some() && store.is_some(), "--model and --embeddings")?;
            StrategyContext::BestOfTrainQd {
                model: model.as_ref().unwrap(),
                store: store.as_ref().unwrap(),
            }
        }
        Strategy::PromptOirl => {
            need(model.is_some() && store.is_some(), "--model and --embeddings")?;
            StrategyContext::PromptOirl {
                model: model.as_ref().unwrap(),
                store: store.as_ref().unwrap(),
            }
        }
        Strategy::NearestNeighbor => {
            need(
                train_demos.is_some() && store.is_some(),
                "--train-demos and --embeddings",
            )?;
            StrategyContext::NearestNeighbor {
                train_demos: train_demos.as_ref().unwrap(),
                store: store.as_ref().unwrap(),
            }
        }
        Strategy::Oracle => StrategyContext::Oracle,
        Strategy::LlmConfidence => {
            llm_client = build_llm(None, args.fixtures.clone(), None, None, None, config)?;
            StrategyContext::LlmConfidence {
                client: &llm_client,
                template: &template,
            }
        }
    };

    // The evaluation pool doubles as the query source; selection-only runs
    // without eval sets iterate the corpus test queries via a synthetic
    // pool of unknown rewards, so the oracle genuinely needs eval demos.
    let pool = if eval_sets.is_empty() {
        if matches!(strategy, Strategy::Oracle) {
            return Err(CliError::Usage("oracle needs --eval-demos".into()));
        }
        None
    } else {
        let refs: Vec<&DemonstrationSet> = eval_sets.iter().collect();
        Some(EvalPool::new(&refs)?)
    };

    let mut lines = Vec::new();
    match pool {
        Some(pool) => {
            let (report, selections) =
                oirl_core::bench::run_policy_eval_traced(&ctx, &corpus, &candidates, &pool)?;
            for sel in &selections {
                lines.push(sel.to_trace_json());
            }
            eprintln!(
                "strategy {} success {:.4} over {} queries",
                report.strategy.as_str(),
                report.success_rate,
                report.n_queries
            );
        }
        None => {
            for query in corpus.test_queries() {
                let sel = match &ctx {
                    StrategyContext::Distributional { train_demos } => {
                        let stats = oirl_core::policy::train_prompt_stats(train_demos)?;
                        let mut sel = oirl_core::policy::select_distributional(&stats)?;
                        sel.query_id = Some(query.id.clone());
                        sel
                    }
                    StrategyContext::BestOfTrainQd { model, store } => {
                        oirl_core::policy::select_query_dependent(
                            model,
                            query,
                            &candidates,
                            store,
                            Strategy::BestOfTrainQd,
                        )?
                    }
                    StrategyContext::PromptOirl { model, store } => {
                        oirl_core::policy::select_query_dependent(
                            model,
                            query,
                            &candidates,
                            store,
                            Strategy::PromptOirl,
                        )?
                    }
                    StrategyContext::NearestNeighbor { train_demos, store } => {
                        oirl_core::policy::select_nearest_neighbor(
                            train_demos,
                            &corpus,
                            store,
                            query,
                            &candidates,
                        )?
                    }
                    StrategyContext::LlmConfidence { client, template } => {
                        oirl_core::policy::select_llm_confidence(
                            client, query, &candidates, template,
                        )?
                        .0
                    }
                    StrategyContext::Oracle => unreachable!("guarded above"),
                };
                lines.push(sel.to_trace_json());
            }
        }
    }
    write_jsonl_atomic(&args.out, &lines)?;
    eprintln!("wrote {} selections to {}", lines.len(), args.out.display());
    Ok(())
}

fn cmd_bench_sweep(args: BenchSweepArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus_arg(args.corpus, config)?;
    let train_path = require(args.train_demos, config.demos.as_ref(), "train-demos")?;
    let train_demos = corpus::load_demonstrations(&train_path, &corpus)?;
    let test_q_path =
        args.test_q_demos.ok_or_else(|| CliError::Usage("--test-q-demos is required".into()))?;
    let test_q_demos = corpus::load_demonstrations(&test_q_path, &corpus)?;
    let test_p_demos = match args.test_p_demos {
        Some(path) => Some(corpus::load_demonstrations(&path, &corpus)?),
        None => None,
    };
    let store_path = require(args.embeddings, config.embeddings.as_ref(), "embeddings")?;
    let store = EmbeddingStore::load(&store_path)?;
    let strategies = parse_strategies(&args.strategies)?;
    let boost = args.boost.resolve(&config.boost);
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;

    let inputs = SweepInputs {
        corpus: &corpus,
        train_demos: &train_demos,
        test_q_demos: &test_q_demos,
        test_p_demos: test_p_demos.as_ref(),
        store: &store,
        llm: None,
    };

    if let Some(fractions) = &args.scarcity {
        let fractions = parse_f64_list(fractions)?;
        let rows = sweep_scarcity(
            &inputs,
            &strategies,
            &fractions,
            &boost,
            args.seed.or(config.seed).unwrap_or(0),
        )?;
        let lines: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "fraction_removed": r.remove_fraction,
                    "kept_queries": r.kept_queries,
                    "strategy": r.strategy.as_str(),
                    "success_rate": r.success_rate,
                    "n_queries": r.n_queries,
                })
            })
            .collect();
        write_jsonl_atomic(&args.out_dir.join("scarcity.jsonl"), &lines)?;
        eprintln!("wrote {} scarcity rows", lines.len());
        return Ok(());
    }

    let ks = match &args.ks {
        Some(list) => parse_usize_list(list)?,
        None => (1..=corpus.k_train_prompts()).collect(),
    };
    let outcome = sweep_k(&inputs, &strategies, &ks, &boost)?;

    let report_lines: Vec<serde_json::Value> = outcome
        .rows
        .iter()
        .map(|r| {
            json!({
                "strategy": r.strategy.as_str(),
                "k": r.k,
                "subset": r.subset,
                "success_rate": r.success_rate,
                "n_queries": r.n_queries,
            })
        })
        .collect();
    write_jsonl_atomic(&args.out_dir.join("report.jsonl"), &report_lines)?;

    let mut curve_lines = Vec::new();
    for point in &outcome.curve.points {
        for (strategy, mean) in &point.means {
            curve_lines.push(json!({
                "k": point.k,
                "strategy": strategy.as_str(),
                "mean": mean,
                "combinations": point.combinations,
            }));
        }
    }
    write_jsonl_atomic(&args.out_dir.join("curve.jsonl"), &curve_lines)?;

    if let Some(normalization) = &outcome.curve.normalization {
        let lines: Vec<serde_json::Value> = normalization
            .iter()
            .map(|(k, oracle)| json!({"k": k, "oracle_mean": oracle}))
            .collect();
        write_jsonl_atomic(&args.out_dir.join("oracle_baseline.jsonl"), &lines)?;
    }
    eprintln!(
        "wrote {} report rows and {} curve rows to {}",
        report_lines.len(),
        curve_lines.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs, config: &RunConfig) -> Result<(), CliError> {
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let world = oirl_core::synth::generate_world(seed, args.dim, args.noise)?;
    let embedder = Embedder::mock(seed, args.dim);
    let bench = oirl_core::synth::generate_benchmark(
        &world,
        args.queries,
        args.test_queries,
        args.train_prompts,
        args.heldout_prompts,
        &embedder,
    )?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;
    corpus::save_corpus(&args.out_dir, &bench.corpus)?;
    for (name, set) in [
        ("demos_train.jsonl", &bench.train),
        ("demos_test_q.jsonl", &bench.test_q),
        ("demos_test_p.jsonl", &bench.test_p),
    ] {
        corpus::save_demonstration_records(&args.out_dir.join(name), set.records())?;
    }
    bench.store.save(&args.out_dir.join("embeddings.jsonl"))?;
    eprintln!(
        "synthetic benchmark written to {} (train {}, test_q {}, test_p {})",
        args.out_dir.display(),
        bench.train.len(),
        bench.test_q.len(),
        bench.test_p.len()
    );
    Ok(())
}

fn cmd_cost(args: CostArgs, config: &RunConfig) -> Result<(), CliError> {
    let sheet = match args.prices.or_else(|| config.prices.clone()) {
        Some(path) => PriceSheet::load(&path)?,
        None => {
            return Err(CliError::Usage("--prices is required".into()));
        }
    };
    sheet.validate()?;
    let profile = TokenProfile::load(&args.profile)?;
    let ks = parse_usize_list(&args.ks)?;
    let strategies = parse_strategies(&args.strategies)?;
    let rows = cost_report(&strategies, &ks, &profile, &sheet);
    let lines: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "strategy": r.strategy.as_str(),
                "k": r.k,
                "usd": r.usd(),
            })
        })
        .collect();
    match args.out {
        Some(path) => write_jsonl_atomic(&path, &lines)?,
        None => {
            for line in &lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}
