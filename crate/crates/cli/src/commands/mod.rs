//! Subcommand implementations.

mod bench;
mod bootstrap;

pub use bench::{cmd_bench, BenchArgs};
pub use bootstrap::{cmd_bootstrap, BootstrapArgs};

use std::path::PathBuf;

use clap::Args;

use claimcheck_core::atomic::AtomicFunctions;
use claimcheck_core::bootstrap::load_demos;
use claimcheck_core::corpus::{load_corpus, Index, QueryFields, RetrievalConfig};
use claimcheck_core::executor::{run_claim, ClaimRun};
use claimcheck_core::strategy::{initial_strategy, render_prompt, PromptMode, PromptVariant};

use crate::config::FileConfig;
use crate::CliError;

#[derive(Args)]
pub struct IndexArgs {
    /// JSON-lines corpus: one {"id", "title", "text"} object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output path for the index artifact.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Fields to index: title_and_body, body, or title.
    #[arg(long, default_value = "title_and_body")]
    query_fields: String,
}

pub fn cmd_index(args: IndexArgs) -> Result<(), CliError> {
    let query_fields = match args.query_fields.as_str() {
        "title_and_body" => QueryFields::TitleAndBody,
        "body" => QueryFields::Body,
        "title" => QueryFields::Title,
        other => return Err(CliError::config(format!("unknown query_fields `{other}`"))),
    };
    let config = RetrievalConfig {
        k1: args.k1,
        b: args.b,
        top_k: args.top_k,
        query_fields,
    };
    config.validate().map_err(CliError::config)?;
    let docs = load_corpus(&args.corpus)
        .map_err(|e| CliError::data(format!("corpus {}: {e}", args.corpus.display())))?;
    let index = Index::build(docs, config).map_err(|e| CliError::data(e.to_string()))?;
    index
        .save(&args.out)
        .map_err(|e| CliError::data(format!("writing {}: {e}", args.out.display())))?;
    println!("indexed {} documents -> {}", index.len(), args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    config: crate::ConfigArg,
    /// The claim to verify.
    #[arg(long)]
    claim: String,
    /// Also print the execution trace as JSON.
    #[arg(long)]
    trace: bool,
}

/// Renders the generation prompt for the configured mode and runs one claim.
pub fn run_one_claim(
    file_config: &FileConfig,
    index: &Index,
    gateway: &claimcheck_core::gateway::Gateway,
    claim: &str,
) -> Result<ClaimRun, CliError> {
    let strategy = initial_strategy();
    let demos;
    let variant = match file_config.prompt_mode()? {
        PromptMode::Zs => PromptVariant::Zs,
        PromptMode::Cot => PromptVariant::Cot,
        PromptMode::Fs => {
            let path = file_config.run.demos.as_ref().ok_or_else(|| {
                CliError::config("mode = \"fs\" needs [run].demos")
            })?;
            demos = load_demos(path)
                .map_err(|e| CliError::data(format!("demos {}: {e}", path.display())))?;
            if demos.is_empty() {
                return Err(CliError::data(format!(
                    "demos {}: no demonstrations",
                    path.display()
                )));
            }
            PromptVariant::Fs(&demos.demos)
        }
    };
    let prompt =
        render_prompt(&strategy, variant, claim).map_err(|e| CliError::config(e.to_string()))?;
    let atomics = AtomicFunctions::new(index, gateway);
    run_claim(claim, &prompt, &atomics).map_err(CliError::from)
}

pub fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let file_config = FileConfig::load(&args.config.config)?;
    let index = file_config.load_index()?;
    let gateway = file_config.build_gateway(None)?;
    let run = run_one_claim(&file_config, &index, &gateway, &args.claim)?;
    println!("{}", if run.prediction { "True" } else { "False" });
    if args.trace {
        println!("{}", run.trace.to_json());
        if let Some(fallback) = &run.fallback_trace {
            println!("fallback:");
            println!("{}", fallback.to_json());
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct TraceShowArgs {
    /// Run identifier (the run's directory name).
    run_id: String,
    /// Claim identifier: the record's 0-based position in the dataset.
    claim_id: String,
    /// Artifacts root directory.
    #[arg(long, default_value = "runs")]
    dir: PathBuf,
}

pub fn cmd_trace_show(args: TraceShowArgs) -> Result<(), CliError> {
    let path = args
        .dir
        .join(&args.run_id)
        .join("traces")
        .join(format!("claim_{}.json", args.claim_id));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let run: ClaimRun = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    println!("{}", run.trace.to_json());
    if let Some(fallback) = &run.fallback_trace {
        println!("fallback:");
        println!("{}", fallback.to_json());
    }
    Ok(())
}
