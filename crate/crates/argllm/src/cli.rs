//! Command-line front end: `serve`, `eval` and `ask`.
//!
//! stdout carries JSON only; diagnostics go to stderr as JSON objects
//! `{code, message, ...}`. Exit codes: 0 success, 2 invalid input
//! document, 3 language-model backend failure, 4 configuration or usage
//! error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::{json, Value};

use argllm_core::semantics::evaluate;
use argllm_core::{Semantics, StrengthMap};

use crate::builder::{build_qbaf, BuildError, GenerationConfig};
use crate::format::{self, FormatError, QbafDoc, StrengthsJson};
use crate::gateway::{BackendConfig, BackendKind, Gateway};
use crate::ingest::Document;
use crate::service::{self, ServiceConfig, Store, VerdictInfo};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "argllm", version, about = "Argument trees built by a language model and revised by people")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Evaluate a QBAF JSON file.
    Eval(EvalArgs),
    /// Build and evaluate a tree for one claim and print it.
    Ask(AskArgs),
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Use the deterministic offline backend.
    #[arg(long)]
    pub mock: bool,
    /// Seed for the offline backend.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, env = "LLM_ENDPOINT_URL")]
    pub endpoint_url: Option<String>,
    #[arg(long, env = "LLM_MODEL")]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Concurrent requests to the backend.
    #[arg(long)]
    pub max_concurrency: Option<usize>,
}

impl BackendArgs {
    /// The API key is read from `LLM_API_KEY` when the backend is used.
    pub fn config(&self) -> BackendConfig {
        let mut config = if self.mock { BackendConfig::mock(self.seed) } else { BackendConfig::default() };
        if let Some(url) = &self.endpoint_url {
            config.endpoint_url = url.clone();
        }
        if let Some(model) = &self.model {
            config.model = model.clone();
        }
        if let Some(t) = self.temperature {
            config.temperature = t;
        }
        if let Some(ms) = self.timeout_ms {
            config.timeout_ms = ms;
        }
        if let Some(n) = self.max_concurrency {
            config.max_concurrency = n;
        }
        config
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for session snapshots and uploaded documents.
    #[arg(long, default_value = "argllm-store")]
    pub store_dir: PathBuf,
    /// Allowed CORS origin; repeatable. Any origin when omitted.
    #[arg(long)]
    pub cors_origin: Vec<String>,
    /// Static UI build served under /ui.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub file: PathBuf,
    #[arg(long, default_value = "df-quad", conflicts_with = "all")]
    pub semantics: String,
    /// Evaluate under every semantics.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    pub claim: String,
    #[arg(long, default_value_t = 2)]
    pub depth: i64,
    #[arg(long, default_value_t = 1)]
    pub breadth: i64,
    #[arg(long, default_value = "df-quad")]
    pub semantics: String,
    /// PDF to use as grounding; repeatable. Later files count as more recent.
    #[arg(long)]
    pub pdf: Vec<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

/// A failed command: exit code plus a JSON diagnostic for stderr.
#[derive(Debug)]
pub struct Failure {
    pub exit: i32,
    pub body: Value,
}

impl Failure {
    fn new(exit: i32, code: &str, message: impl std::fmt::Display) -> Self {
        Failure { exit, body: json!({ "code": code, "message": message.to_string() }) }
    }

    fn config(code: &str, message: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_CONFIG, code, message)
    }
}

impl From<FormatError> for Failure {
    fn from(err: FormatError) -> Self {
        let mut f = Failure::new(EXIT_VALIDATION, err.code(), &err);
        if let FormatError::Invariant(report) = &err {
            f.body["violations"] = format::report_json(report);
        }
        f
    }
}

impl From<BuildError> for Failure {
    fn from(err: BuildError) -> Self {
        match &err {
            BuildError::Gateway { source, partial } => {
                let exit = if matches!(source, crate::gateway::GatewayError::Config(_)) { EXIT_CONFIG } else { EXIT_BACKEND };
                let mut f = Failure::new(exit, source.code(), &err);
                f.body["failed_node"] = json!(partial.failed_node.as_ref().map(|id| id.as_str()));
                f
            }
            _ => Failure::config(err.code(), &err),
        }
    }
}

fn parse_semantics(name: &str) -> Result<Semantics, Failure> {
    name.parse().map_err(|e| Failure::config("invalid-semantics", e))
}

fn print_json(value: &impl Serialize) {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).expect("stdout accepts JSON");
    writeln!(out).expect("stdout is writable");
    out.flush().expect("stdout is writable");
}

/// Strengths under several semantics, keyed by argument in canonical order.
struct SideBySide<'a>(&'a [StrengthMap]);

struct PerArgument<'a>(&'a [StrengthMap], &'a argllm_core::ArgumentId);

impl Serialize for PerArgument<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for m in self.0 {
            map.serialize_entry(m.semantics().as_str(), &m.get(self.1))?;
        }
        map.end()
    }
}

struct Rows<'a>(&'a [StrengthMap]);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let first = &self.0[0];
        let mut map = s.serialize_map(Some(first.len()))?;
        for (id, _) in first.iter() {
            map.serialize_entry(id.as_str(), &PerArgument(self.0, id))?;
        }
        map.end()
    }
}

impl Serialize for SideBySide<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        let names: Vec<&str> = self.0.iter().map(|m| m.semantics().as_str()).collect();
        map.serialize_entry("semantics", &names)?;
        map.serialize_entry("strengths", &Rows(self.0))?;
        map.end()
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&args.file)
        .map_err(|e| Failure::config("unreadable-input", format!("{}: {e}", args.file.display())))?;
    let qbaf = format::from_json(&bytes)?;
    let eval = |sem| evaluate(&qbaf, sem).map_err(|e| Failure::new(EXIT_VALIDATION, "evaluation-failure", e));
    if args.all {
        let maps = Semantics::ALL.iter().map(|s| eval(*s)).collect::<Result<Vec<_>, _>>()?;
        print_json(&SideBySide(&maps));
    } else {
        let map = eval(parse_semantics(&args.semantics)?)?;
        print_json(&StrengthsJson(&map));
    }
    Ok(())
}

#[derive(Serialize)]
struct DocumentSummary<'a> {
    filename: &'a str,
    page_count: usize,
    byte_size: usize,
    extraction_empty: bool,
}

#[derive(Serialize)]
struct AskDump<'a> {
    claim: &'a str,
    settings: AskSettings,
    documents: Vec<DocumentSummary<'a>>,
    document_context: bool,
    qbaf: QbafDoc,
    strengths: StrengthsJson<'a>,
    verdict: VerdictInfo,
}

#[derive(Serialize)]
struct AskSettings {
    semantics: Semantics,
    depth: u8,
    breadth: u8,
    backend: BackendConfig,
}

fn load_pdfs(paths: &[PathBuf]) -> Result<Vec<Document>, Failure> {
    paths
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let bytes = std::fs::read(path)
                .map_err(|e| Failure::config("unreadable-input", format!("{}: {e}", path.display())))?;
            let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            let mut doc = Document::ingest(&name, &bytes)
                .map_err(|e| Failure::config(e.code(), format!("{}: {e}", path.display())))?;
            // fixed ids and times keep the prompt, and so the output, reproducible
            doc.id = format!("d{i}");
            doc.uploaded_at = chrono::DateTime::from_timestamp(i as i64, 0).expect("small timestamps are valid");
            Ok(doc)
        })
        .collect()
}

pub async fn cmd_ask(args: &AskArgs) -> Result<(), Failure> {
    let semantics = parse_semantics(&args.semantics)?;
    let depth = u8::try_from(args.depth).unwrap_or(u8::MAX);
    let breadth = u8::try_from(args.breadth).unwrap_or(u8::MAX);
    let backend = args.backend.config();
    let config = GenerationConfig::new(semantics, depth, breadth, backend.clone());
    config.validate()?;
    let documents = load_pdfs(&args.pdf)?;
    let gateway = Gateway::from_config(&backend).map_err(|e| Failure::config(e.code(), e))?;
    let qbaf = build_qbaf(&gateway, &args.claim, &config, &documents).await?;
    let strengths = evaluate(&qbaf, semantics).map_err(|e| Failure::new(EXIT_VALIDATION, "evaluation-failure", e))?;
    let root = strengths.get(qbaf.root()).expect("every argument has a strength");
    let dump = AskDump {
        claim: args.claim.trim(),
        settings: AskSettings { semantics, depth, breadth, backend: backend.redacted() },
        document_context: documents.iter().any(|d| !d.markdown.trim().is_empty()),
        documents: documents
            .iter()
            .map(|d| DocumentSummary {
                filename: &d.filename,
                page_count: d.page_count,
                byte_size: d.byte_size,
                extraction_empty: d.extraction_empty,
            })
            .collect(),
        qbaf: QbafDoc::from(&qbaf),
        strengths: StrengthsJson(&strengths),
        verdict: VerdictInfo {
            root: qbaf.root().to_string(),
            strength: root,
            threshold: service::VERDICT_THRESHOLD,
            verdict: service::Verdict::of(root),
        },
    };
    print_json(&dump);
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

pub async fn cmd_serve(args: &ServeArgs) -> Result<(), Failure> {
    let backend = args.backend.config();
    if backend.kind == BackendKind::Http && backend.validate().is_err() {
        tracing::warn!("no usable default backend; sessions must configure one through their settings");
    }
    let store = Store::at(&args.store_dir)
        .map_err(|e| Failure::config("bad-store-dir", format!("{}: {e}", args.store_dir.display())))?;
    let config = ServiceConfig {
        store,
        default_backend: backend,
        cors_origins: args.cors_origin.clone(),
        ui_dir: args.ui_dir.clone(),
    };
    let (state, app) =
        service::app(&config).map_err(|e| Failure::config("bad-store-dir", format!("{}: {e}", args.store_dir.display())))?;
    let addr = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Failure::config("port-in-use", format!("cannot listen on {addr}: {e}")))?;
    let local: SocketAddr = listener.local_addr().map_err(|e| Failure::config("port-in-use", e))?;
    tracing::info!(sessions = state.session_count(), "loaded sessions");
    print_json(&json!({ "listening": local.to_string() }));
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| Failure::new(1, "server-failure", e))?;
    tracing::info!("shut down");
    Ok(())
}

fn init_tracing(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_tracing(if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" });
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("{}", json!({ "code": "runtime-failure", "message": e.to_string() }));
            return 1;
        }
    };
    let result = runtime.block_on(async {
        match &cli.command {
            Command::Serve(a) => cmd_serve(a).await,
            Command::Eval(a) => cmd_eval(a),
            Command::Ask(a) => cmd_ask(a).await,
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.body);
            f.exit
        }
    }
}
