//! The `bootstrap run` subcommand: wraps the optimizer loop and lays down
//! its artifacts directory.

use std::path::PathBuf;

use clap::Args;

use claimcheck_core::atomic::AtomicFunctions;
use claimcheck_core::bootstrap::{run_optimizer, AnnotatedClaim, BootstrapError, OptimizerConfig};
use claimcheck_core::eval::load_dataset;

use crate::config::FileConfig;
use crate::CliError;

#[derive(Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    config: crate::ConfigArg,
    /// Seed for the run's random source; overrides [run].seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override [run].output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override [run].run_id.
    #[arg(long)]
    run_id: Option<String>,
}

fn bootstrap_error(err: BootstrapError) -> CliError {
    match err {
        BootstrapError::Gateway(e) => e.into(),
        BootstrapError::InsufficientData { .. }
        | BootstrapError::EmptySetAfterFiltering
        | BootstrapError::DemoFormat(_, _)
        | BootstrapError::Io(_) => CliError::data(err.to_string()),
        other => CliError::config(other.to_string()),
    }
}

pub fn cmd_bootstrap(args: BootstrapArgs) -> Result<(), CliError> {
    let mut file_config = FileConfig::load(&args.config.config)?;
    if let Some(dir) = args.out_dir {
        file_config.run.output_dir = Some(dir);
    }

    let dataset = file_config
        .dataset
        .clone()
        .ok_or_else(|| CliError::config("bootstrap needs a [dataset] section (training split)"))?;
    let format = file_config.dataset_format()?.expect("dataset section present");
    let records = load_dataset(&dataset.path, format)
        .map_err(|e| CliError::data(format!("dataset {}: {e}", dataset.path.display())))?;
    let train: Vec<AnnotatedClaim> = records
        .into_iter()
        .map(|r| AnnotatedClaim {
            claim: r.claim,
            label: r.label,
            gold_evidence: r.gold_doc_ids.unwrap_or_default(),
        })
        .collect();

    let defaults = OptimizerConfig::default();
    let seed = args.seed.or(file_config.run.seed).unwrap_or(defaults.seed);
    let run_id = args
        .run_id
        .or_else(|| file_config.run.run_id.clone())
        .unwrap_or_else(|| format!("bootstrap-seed{seed}"));
    let optimizer_config = OptimizerConfig {
        seed,
        iterations: file_config.run.iterations.unwrap_or(defaults.iterations),
        pool_size: file_config.run.pool_size.unwrap_or(defaults.pool_size),
        batch_size: file_config.run.batch_size.unwrap_or(defaults.batch_size),
        candidate_sets: file_config
            .run
            .candidate_sets
            .unwrap_or(defaults.candidate_sets),
        demo_set_size: file_config
            .run
            .demo_set_size
            .unwrap_or(defaults.demo_set_size),
        run_id: run_id.clone(),
    };

    let run_dir = file_config.output_dir().join(&run_id);
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::data(format!("creating {}: {e}", run_dir.display())))?;

    let index = file_config.load_index()?;
    let gateway = file_config.build_gateway(Some(&run_dir.join("call_log.jsonl")))?;
    let atomics = AtomicFunctions::new(&index, &gateway);

    let outcome = run_optimizer(&train, &optimizer_config, &atomics, Some(&run_dir))
        .map_err(bootstrap_error)?;

    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "best score {:.4} with strategy v{} and {} demonstrations",
        outcome.best_score,
        outcome.best_strategy.version,
        outcome.best_demos.demos.len()
    );
    println!("artifacts: {}", run_dir.display());
    Ok(())
}
