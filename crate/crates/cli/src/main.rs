//! `emocue`: train, evaluate, classify, analyze, serve and replay.

mod human;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use emocue_core::analytics::{
    corpus_stats, familiarity, familiarity_table, segment_sessions_scoped, ChatLog, FamiliarityOptions, TimeoutScope,
    DEFAULT_TIMEOUT_MS,
};
use emocue_core::classify::{load_with_embeddings, train_bundle, LabeledCorpus, SgdParams, TrainConfig};
use emocue_core::eval::evaluate;
use emocue_core::fixture::make_fixture;
use emocue_core::pipeline::ConversationSessions;
use emocue_core::vectorize::{EmbeddingTable, Language, VectorFormat};
use emocue_core::{CompactionMap, PipelineConfig};
use emocue_service::{engine_from_config, Engine, ReplaySpeed, ServiceConfig};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    /// Arguments parsed but do not make sense together.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] emocue_core::Error),

    #[error(transparent)]
    Service(#[from] emocue_service::ServiceError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "emocue", version, about = "Emotion cues for chat messages")]
struct Cli {
    /// Machine-readable JSON on stdout instead of tables.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a 40-model bundle from a labeled corpus.
    Train(TrainArgs),
    /// Score a bundle on the held-out side of a seeded split.
    Eval(EvalArgs),
    /// Annotate a text or a JSON-lines file of messages.
    Classify(ClassifyArgs),
    /// Split a chat log into sessions.
    Segment(LogArgs),
    /// Corpus statistics of a chat log.
    Stats(LogArgs),
    /// Message and session counts between pairs of users.
    Familiarity(FamiliarityArgs),
    /// Run the HTTP and WebSocket service.
    Serve(ServeArgs),
    /// Feed a chat log through the service pipeline offline.
    Replay(ReplayArgs),
    /// Generate the synthetic embeddings, corpora and bundles.
    MakeFixture(MakeFixtureArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "en")]
    language: Language,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    reg_c: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negative_ratio: usize,
    /// Timestamp stored in the bundle, in ms since the epoch.
    #[arg(long, default_value_t = 0)]
    trained_at: i64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Defaults to the file named in the bundle.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_ratio: f64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Bundle file; repeat for a second language.
    #[arg(long = "bundle", required = true)]
    bundles: Vec<PathBuf>,
    /// Embedding files matched to bundles by position; defaults to the
    /// file named in each bundle.
    #[arg(long = "embeddings")]
    embeddings: Vec<PathBuf>,
    /// TOML file with pipeline settings.
    #[arg(long)]
    pipeline: Option<PathBuf>,
}

impl ModelArgs {
    fn pipeline(&self) -> Result<PipelineConfig> {
        match &self.pipeline {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
            None => Ok(PipelineConfig::default()),
        }
    }

    fn service_config(&self) -> Result<ServiceConfig> {
        let mut config = ServiceConfig {
            pipeline: self.pipeline()?,
            ..Default::default()
        };
        config.set_bundles(&self.bundles, &self.embeddings)?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Text to annotate.
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// JSON-lines messages, annotated in order with sender smoothing.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: i64,
    /// Measure the timeout per sender instead of per conversation.
    #[arg(long)]
    per_sender: bool,
}

#[derive(Debug, Args)]
struct FamiliarityArgs {
    #[arg(long)]
    log: PathBuf,
    /// Report one pair instead of every pair.
    #[arg(long, num_args = 2, value_names = ["USER_A", "USER_B"])]
    pair: Option<Vec<String>>,
    #[arg(long, default_value_t = 100)]
    high_threshold: usize,
    #[arg(long)]
    include_groups: bool,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: i64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML service configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    /// TOML service configuration; --bundle flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "bundle")]
    bundles: Vec<PathBuf>,
    #[arg(long = "embeddings")]
    embeddings: Vec<PathBuf>,
    /// `max`, or a factor dividing the logged gaps.
    #[arg(long, default_value = "max", value_parser = parse_speed)]
    speed: ReplaySpeed,
    /// Annotated log to append to.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_speed(s: &str) -> Result<ReplaySpeed, String> {
    if s == "max" {
        return Ok(ReplaySpeed::Max);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() && f > 0.0 => Ok(ReplaySpeed::RealtimeFactor(f)),
        _ => Err(format!("expected `max` or a positive factor, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct MakeFixtureArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Pretty JSON followed by a newline.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(emocue_core::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce(&T) -> String) -> Result<()> {
    if json {
        print_json(value)
    } else {
        print!("{}", human(value));
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Train(a) => train(json, a),
        Command::Eval(a) => {
            let map = CompactionMap::builtin();
            let (bundle, table) = load_with_embeddings(&a.bundle, a.embeddings.as_deref(), &map)?;
            let corpus = LabeledCorpus::load(&a.corpus, &map)?;
            let report = evaluate(&bundle, &table, &corpus, &map, a.seed, a.train_ratio)?;
            emit(json, &report, human::eval)
        }
        Command::Classify(a) => classify(json, a),
        Command::Segment(a) => {
            let log = ChatLog::load(&a.log)?;
            let sessions = segment_sessions_scoped(log.messages(), a.timeout_ms, scope(a.per_sender));
            emit(json, &json!({ "sessions": sessions }), |_| human::sessions(&sessions))
        }
        Command::Stats(a) => {
            let log = ChatLog::load(&a.log)?;
            emit(json, &corpus_stats(&log, a.timeout_ms), human::stats)
        }
        Command::Familiarity(a) => {
            let log = ChatLog::load(&a.log)?;
            let options = FamiliarityOptions {
                high_threshold: a.high_threshold,
                include_groups: a.include_groups,
                timeout_ms: a.timeout_ms,
            };
            let reports = match &a.pair {
                Some(p) => vec![familiarity(&log, &p[0], &p[1], &options)],
                None => familiarity_table(&log, &options),
            };
            emit(json, &json!({ "pairs": reports }), |_| human::familiarity(&reports))
        }
        Command::Serve(a) => serve(json, a),
        Command::Replay(a) => replay(json, a),
        Command::MakeFixture(a) => make_fixture_cmd(json, a),
    }
}

fn scope(per_sender: bool) -> TimeoutScope {
    if per_sender {
        TimeoutScope::PerSender
    } else {
        TimeoutScope::AnyParty
    }
}

/// How a bundle written to `bundle` should name `embeddings`: the bare
/// file name when both share a directory, an absolute path otherwise.
fn embeddings_hint(bundle: &Path, embeddings: &Path) -> String {
    let dir = |p: &Path| {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::canonicalize(parent).ok()
    };
    match (dir(bundle), dir(embeddings), embeddings.file_name()) {
        (Some(a), Some(b), Some(name)) if a == b => name.to_string_lossy().into_owned(),
        _ => std::fs::canonicalize(embeddings)
            .unwrap_or_else(|_| embeddings.to_path_buf())
            .to_string_lossy()
            .into_owned(),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    bundle: PathBuf,
    language: Language,
    checksum: String,
    labels: usize,
    calibration_fallbacks: Vec<String>,
    skipped_oov: usize,
}

fn train(json: bool, a: TrainArgs) -> Result<()> {
    let map = CompactionMap::builtin();
    let table = EmbeddingTable::load(&a.embeddings, VectorFormat::from_path(&a.embeddings), a.language)?;
    let corpus = LabeledCorpus::load(&a.corpus, &map)?;
    let config = TrainConfig {
        sgd: SgdParams {
            reg_c: a.reg_c,
            epochs: a.epochs,
            seed: a.seed,
        },
        split_seed: a.seed,
        train_ratio: a.train_ratio,
        negative_ratio: a.negative_ratio,
        trained_at: a.trained_at,
        ..Default::default()
    };
    let outcome = train_bundle(&corpus, &table, &map, &config)?;
    let bundle = outcome.bundle.with_embeddings_hint(embeddings_hint(&a.out, &a.embeddings));
    bundle.save(&a.out)?;
    let summary = TrainSummary {
        bundle: a.out,
        language: bundle.language(),
        checksum: bundle.checksum(),
        labels: bundle.models().len(),
        calibration_fallbacks: outcome.calibration_fallbacks,
        skipped_oov: outcome.skipped_oov,
    };
    emit(json, &summary, |s| {
        format!(
            "wrote {} ({} labels, {:?})\nchecksum {}\nskipped {} all-OOV records\n",
            s.bundle.display(),
            s.labels,
            s.language,
            s.checksum,
            s.skipped_oov
        )
    })
}

fn classify(json: bool, a: ClassifyArgs) -> Result<()> {
    let annotator = a.model.service_config()?.build_annotator()?;
    match (&a.text, &a.input) {
        (Some(text), None) => {
            let annotation = annotator.annotate_text("text", text)?;
            emit(json, &annotation, human::annotation)
        }
        (None, Some(path)) => {
            let log = ChatLog::load(path)?;
            let mut sessions: BTreeMap<String, ConversationSessions> = BTreeMap::new();
            let mut out = BufWriter::new(std::io::stdout().lock());
            for entry in &log.entries {
                let m = &entry.message;
                let s = sessions
                    .entry(m.conversation_id.clone())
                    .or_insert_with(|| ConversationSessions::new(&m.conversation_id));
                let annotation = annotator.annotate(m, s)?;
                if json {
                    let line = json!({ "message": m, "annotation": annotation });
                    writeln!(out, "{line}")?;
                } else {
                    write!(out, "{}\t{}", m.id, human::annotation(&annotation))?;
                }
            }
            out.flush()?;
            if log.skipped > 0 {
                eprintln!("skipped {} malformed records", log.skipped);
            }
            Ok(())
        }
        _ => Err(CliError::Usage("classify needs --text or --input".into())),
    }
}

fn serve(json: bool, a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::load(a.config.as_deref())?;
    if let Some(listen) = a.listen {
        config.listen = listen;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let engine = Arc::new(engine_from_config(&config)?);
        let listener = tokio::net::TcpListener::bind(&config.listen).await?;
        let address = listener.local_addr()?.to_string();
        if json {
            println!("{}", json!({ "listening": address }));
        } else {
            println!("listening on {address}");
        }
        std::io::stdout().flush()?;
        emocue_service::serve(engine, listener, config.auth_token.clone(), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn replay(json: bool, a: ReplayArgs) -> Result<()> {
    let mut config = ServiceConfig::load(a.config.as_deref())?;
    if !a.bundles.is_empty() {
        config.set_bundles(&a.bundles, &a.embeddings)?;
    }
    if config.bundles.en.is_none() && config.bundles.zh.is_none() {
        return Err(CliError::Usage("replay needs --bundle or a --config naming bundles".into()));
    }
    if let Some(out) = a.out {
        config.log_path = Some(out);
    }
    let engine: Engine = engine_from_config(&config)?;
    let summary = engine.replay(&a.log, a.speed)?;
    emit(json, &summary, human::replay)
}

#[derive(Serialize)]
struct FixtureSummary {
    out: PathBuf,
    seed: u64,
    checksums: BTreeMap<String, String>,
    macro_auc: BTreeMap<&'static str, f64>,
}

fn make_fixture_cmd(json: bool, a: MakeFixtureArgs) -> Result<()> {
    let fixture = make_fixture(a.seed)?;
    fixture.write(&a.out)?;
    let checksums: BTreeMap<String, String> =
        serde_json::from_reader(File::open(a.out.join("checksums.json"))?).map_err(emocue_core::Error::from)?;
    let summary = FixtureSummary {
        out: a.out,
        seed: a.seed,
        checksums,
        macro_auc: [("en", fixture.en_report.macro_auc), ("zh", fixture.zh_report.macro_auc)]
            .into_iter()
            .collect(),
    };
    emit(json, &summary, |s| {
        let mut text = format!("wrote fixture seed {} to {}\n", s.seed, s.out.display());
        for (lang, auc) in &s.macro_auc {
            text.push_str(&format!("  {lang} macro AUC {auc:.4}\n"));
        }
        text
    })
}
