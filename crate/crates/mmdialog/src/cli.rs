//! Command-line entry point.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmdialog_core::agent::AgentHyper;
use mmdialog_core::catalog::{VocabConfig, DEFAULT_IMAGE_NOISE};
use mmdialog_core::corrnet::CorrNetTrainConfig;
use mmdialog_core::simulator::FsaConfig;

use crate::engine::{AgentModel, EngineState, JointSpace, SessionStore};
use crate::error::{AppError, AppResult};
use crate::formats;
use crate::pipeline::{self, EvaluationReport, LoadedCatalog, PipelineConfig};
use crate::server;

#[derive(Debug, Parser)]
#[command(name = "mmdialog", version, about = "Multi-modal dialog browsing pipeline and service")]
pub struct Cli {
    /// Master seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file overriding vocab, image_noise, fsa, corrnet and agent settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file of the stage.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VocabScale {
    Full,
    Desk,
    Minimal,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic catalog (JSON lines plus a metadata sidecar).
    GenCatalog(GenCatalogArgs),
    /// Simulate dialog sessions over a catalog.
    GenDialogs(GenDialogsArgs),
    /// Train the joint text/image embedding.
    TrainCorrnet(TrainCorrnetArgs),
    /// Train the browsing agent on simulated sessions.
    TrainAgent(TrainAgentArgs),
    /// Compute metrics of trained models as JSON.
    Evaluate(EvaluateArgs),
    /// Serve live browsing sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenCatalogArgs {
    /// Number of products.
    #[arg(long = "n", default_value_t = 3500)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = VocabScale::Full)]
    pub vocab: VocabScale,
    /// Restrict categories to one family.
    #[arg(long)]
    pub family: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenDialogsArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub sessions: usize,
    #[arg(long)]
    pub fsa_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCorrnetArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainAgentArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub corrnet: PathBuf,
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub corrnet: PathBuf,
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long)]
    pub agent: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub corrnet: Option<PathBuf>,
    #[arg(long)]
    pub agent: Option<PathBuf>,
    #[arg(long)]
    pub fsa_config: Option<PathBuf>,
    /// Directory holding the built web UI (served at /).
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

struct Context {
    seed: u64,
    config: PipelineConfig,
    out: Option<PathBuf>,
}

impl Context {
    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn fsa(&self, flag: Option<&Path>) -> AppResult<FsaConfig> {
        match flag {
            Some(p) => formats::load_fsa_config(p),
            None => Ok(self.config.fsa.clone().unwrap_or_default()),
        }
    }
}

fn gen_catalog(ctx: &Context, args: &GenCatalogArgs) -> AppResult<()> {
    let vocab = ctx.config.vocab.clone().unwrap_or_else(|| match args.vocab {
        VocabScale::Full => VocabConfig::full(),
        VocabScale::Desk => VocabConfig::desk(),
        VocabScale::Minimal => VocabConfig::minimal(),
    });
    let noise = ctx.config.image_noise.unwrap_or(DEFAULT_IMAGE_NOISE);
    let (catalog, meta) = pipeline::generate_catalog_stage(args.n, &vocab, args.family.clone(), noise, ctx.seed)?;
    let out = ctx.out_or("catalog.jsonl");
    formats::save_catalog_bundle(&out, &catalog, &meta)?;
    log::info!("wrote {} products to {}", catalog.len(), out.display());
    Ok(())
}

fn gen_dialogs(ctx: &Context, args: &GenDialogsArgs) -> AppResult<()> {
    let loaded = LoadedCatalog::load(&args.catalog)?;
    let fsa = ctx.fsa(args.fsa_config.as_deref())?;
    let responder = loaded.responder()?;
    let sessions = pipeline::generate_dialogs_stage(&loaded, &responder, &fsa, args.sessions, ctx.seed)?;
    let out = ctx.out_or("sessions.jsonl");
    formats::save_sessions(&out, &sessions)?;
    let rounds: usize = sessions.iter().map(|s| s.rounds.len()).sum();
    log::info!("wrote {} sessions ({rounds} rounds) to {}", sessions.len(), out.display());
    Ok(())
}

fn train_corrnet_cmd(ctx: &Context, args: &TrainCorrnetArgs) -> AppResult<()> {
    let loaded = LoadedCatalog::load(&args.catalog)?;
    let mut cfg: CorrNetTrainConfig = ctx.config.corrnet.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    cfg.validate()?;
    let (model, report) = pipeline::train_corrnet_stage(&loaded, &cfg)?;
    let out = ctx.out_or("corrnet.bin");
    formats::save_corrnet(&out, &model)?;
    formats::write_json(&formats::sidecar_path(&out, ".json"), &report)?;
    log::info!(
        "CorrNet k={} final loss {:.4}, held-out corr {:.3}, precision@5 {:.3}",
        cfg.k,
        report.final_loss,
        report.metrics.heldout_corr,
        report.metrics.precision_at_5
    );
    Ok(())
}

fn train_agent_cmd(ctx: &Context, args: &TrainAgentArgs) -> AppResult<()> {
    let loaded = LoadedCatalog::load(&args.catalog)?;
    let model = formats::load_corrnet(&args.corrnet)?;
    let sessions = formats::load_sessions(&args.sessions)?;
    let mut hyper: AgentHyper = ctx.config.agent.clone().unwrap_or_default();
    hyper.seed = ctx.seed;
    if let Some(e) = args.epochs {
        hyper.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        hyper.learning_rate = lr;
    }
    hyper.validate()?;
    let data = pipeline::agent_dataset(&model, &loaded, &sessions, &hyper)?;
    let (params, report) = pipeline::train_agent_stage(&data, &hyper)?;
    let out = ctx.out_or("agent.bin");
    formats::save_agent(&out, &params, &hyper)?;
    formats::write_json(&formats::sidecar_path(&out, ".json"), &report)?;
    log::info!(
        "agent final loss {:.4}, test cosine {:.3} (untrained {:.3})",
        report.final_loss,
        report.metrics.test_cosine,
        report.metrics.baseline_cosine
    );
    Ok(())
}

fn evaluate_cmd(ctx: &Context, args: &EvaluateArgs) -> AppResult<()> {
    let loaded = LoadedCatalog::load(&args.catalog)?;
    let model = formats::load_corrnet(&args.corrnet)?;
    let sessions = formats::load_sessions(&args.sessions)?;
    let agent = args.agent.as_deref().map(formats::load_agent).transpose()?;
    let corrnet = pipeline::corrnet_metrics(&model, &loaded)?;
    let agent = match agent {
        Some((params, hyper)) => {
            let data = pipeline::agent_dataset(&model, &loaded, &sessions, &hyper)?;
            Some(pipeline::agent_metrics(&params, &hyper, &data)?)
        }
        None => None,
    };
    let report = EvaluationReport {
        products: loaded.catalog.len(),
        sessions: sessions.len(),
        corrnet,
        agent,
    };
    match &ctx.out {
        Some(out) => formats::write_json(out, &report),
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| AppError::Usage(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn serve_cmd(ctx: &Context, args: &ServeArgs) -> AppResult<()> {
    let loaded = LoadedCatalog::load(&args.catalog)?;
    let fsa = ctx.fsa(args.fsa_config.as_deref())?;
    let joint = match &args.corrnet {
        Some(p) => {
            let model = formats::load_corrnet(p)?;
            let image_embeddings = model.embed_catalog_images(&loaded.encoded)?;
            Some(JointSpace { model, image_embeddings })
        }
        None => None,
    };
    let agent = match &args.agent {
        Some(p) if joint.is_none() => {
            return Err(AppError::Usage(format!("{} needs --corrnet as well", p.display())));
        }
        Some(p) => {
            let (params, hyper) = formats::load_agent(p)?;
            Some(AgentModel { params, hyper })
        }
        None => None,
    };
    let responder = loaded.responder()?;
    let state = EngineState::new(loaded.vocab, responder, fsa, ctx.seed, joint, agent)
        .map_err(|e| AppError::Usage(e.to_string()))?;
    let router = server::router(
        server::Service { state, store: SessionStore::default() },
        args.static_dir.clone(),
    );
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::io("<runtime>", e))?;
    runtime
        .block_on(server::serve(router, addr))
        .map_err(|e| AppError::io(format!("{addr}"), e))
}

pub fn run(cli: Cli) -> AppResult<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let ctx = Context { seed: cli.seed.unwrap_or(0), config, out: cli.out.clone() };
    match &cli.command {
        Command::GenCatalog(a) => gen_catalog(&ctx, a),
        Command::GenDialogs(a) => gen_dialogs(&ctx, a),
        Command::TrainCorrnet(a) => train_corrnet_cmd(&ctx, a),
        Command::TrainAgent(a) => train_agent_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Serve(a) => serve_cmd(&ctx, a),
    }
}

/// Parses `argv`, runs the command and maps failures to exit codes: 2 for
/// usage errors, 1 for everything else.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, AppError::Usage(_)) { 2 } else { 1 })
        }
    }
}
