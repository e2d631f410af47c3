//! Benchmark runs: bounded-concurrency claim fan-out, a resumable progress
//! journal, metric report files, and per-claim CSV export.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use serde::{Deserialize, Serialize};

use claimcheck_core::corpus::recall_at_k;
use claimcheck_core::eval::{evaluate_run, load_dataset, BenchmarkRecord};

use crate::config::FileConfig;
use crate::CliError;

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    config: crate::ConfigArg,
    /// Override [run].output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override [run].run_id.
    #[arg(long)]
    run_id: Option<String>,
}

/// One completed claim in the progress journal.
#[derive(Debug, Serialize, Deserialize)]
struct JournalEntry {
    idx: usize,
    prediction: bool,
    retrieved: Vec<String>,
}

fn read_journal(path: &Path) -> Result<BTreeMap<usize, JournalEntry>, CliError> {
    let mut entries = BTreeMap::new();
    if !path.exists() {
        return Ok(entries);
    }
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("journal {}: {e}", path.display())))?;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(format!("journal read: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: JournalEntry = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("journal {} line {}: {e}", path.display(), i + 1)))?;
        entries.insert(entry.idx, entry);
    }
    Ok(entries)
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let mut file_config = FileConfig::load(&args.config.config)?;
    if let Some(dir) = args.out_dir {
        file_config.run.output_dir = Some(dir);
    }
    if let Some(run_id) = args.run_id {
        file_config.run.run_id = Some(run_id);
    }

    let dataset = file_config
        .dataset
        .clone()
        .ok_or_else(|| CliError::config("bench needs a [dataset] section"))?;
    let format = file_config.dataset_format()?.expect("dataset section present");
    let records = load_dataset(&dataset.path, format)
        .map_err(|e| CliError::data(format!("dataset {}: {e}", dataset.path.display())))?;
    if records.is_empty() {
        return Err(CliError::data(format!(
            "dataset {} holds no records",
            dataset.path.display()
        )));
    }

    let stem = dataset
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let run_id = file_config
        .run
        .run_id
        .clone()
        .unwrap_or_else(|| format!("bench-{stem}"));
    let run_dir = file_config.output_dir().join(&run_id);
    let traces_dir = run_dir.join("traces");
    std::fs::create_dir_all(&traces_dir)
        .map_err(|e| CliError::data(format!("creating {}: {e}", traces_dir.display())))?;

    let index = file_config.load_index()?;
    let gateway = file_config.build_gateway(Some(&run_dir.join("call_log.jsonl")))?;

    let journal_path = run_dir.join("journal.jsonl");
    let done = read_journal(&journal_path)?;
    let todo: Vec<usize> = (0..records.len()).filter(|i| !done.contains_key(i)).collect();
    if !done.is_empty() {
        println!("resuming: {} of {} claims already journaled", done.len(), records.len());
    }

    let journal_file = Mutex::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)
            .map_err(|e| CliError::data(format!("journal {}: {e}", journal_path.display())))?,
    );
    let results: Mutex<BTreeMap<usize, JournalEntry>> = Mutex::new(BTreeMap::new());
    let first_error: Mutex<Option<CliError>> = Mutex::new(None);
    let cursor = AtomicUsize::new(0);
    let workers = file_config.models.concurrency.unwrap_or(4).clamp(1, 64);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(todo.len().max(1)) {
            scope.spawn(|| loop {
                let slot = cursor.fetch_add(1, Ordering::SeqCst);
                if slot >= todo.len() || first_error.lock().unwrap().is_some() {
                    break;
                }
                let idx = todo[slot];
                let record = &records[idx];
                match super::run_one_claim(&file_config, &index, &gateway, &record.claim) {
                    Ok(run) => {
                        let entry = JournalEntry {
                            idx,
                            prediction: run.prediction,
                            retrieved: run.retrieved_doc_ids.iter().cloned().collect(),
                        };
                        let trace_path = traces_dir.join(format!("claim_{idx}.json"));
                        let serialized =
                            serde_json::to_string_pretty(&run).expect("claim run serializes");
                        if let Err(e) = std::fs::write(&trace_path, serialized) {
                            *first_error.lock().unwrap() =
                                Some(CliError::data(format!("trace write: {e}")));
                            break;
                        }
                        let mut journal = journal_file.lock().unwrap();
                        let line = serde_json::to_string(&entry).expect("entry serializes");
                        if let Err(e) = writeln!(journal, "{line}") {
                            *first_error.lock().unwrap() =
                                Some(CliError::data(format!("journal write: {e}")));
                            break;
                        }
                        drop(journal);
                        results.lock().unwrap().insert(idx, entry);
                    }
                    Err(err) => {
                        *first_error.lock().unwrap() = Some(err);
                        break;
                    }
                }
            });
        }
    });
    if let Some(err) = first_error.into_inner().unwrap() {
        return Err(err);
    }

    let mut all: BTreeMap<usize, JournalEntry> = done;
    all.append(&mut results.into_inner().unwrap());
    assert_eq!(all.len(), records.len(), "every claim must be journaled");

    let predictions: Vec<bool> = (0..records.len()).map(|i| all[&i].prediction).collect();
    let retrieved: Vec<BTreeSet<String>> = (0..records.len())
        .map(|i| all[&i].retrieved.iter().cloned().collect())
        .collect();
    let report = evaluate_run(&records, &predictions, Some(&retrieved))
        .map_err(|e| CliError::data(e.to_string()))?;

    let report_path = run_dir.join("report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| CliError::data(format!("report {}: {e}", report_path.display())))?;
    write_per_claim_csv(&run_dir.join("per_claim.csv"), &records, &predictions, &retrieved)?;

    print!("{}", report.render_table());
    println!("report: {}", report_path.display());
    Ok(())
}

fn write_per_claim_csv(
    path: &Path,
    records: &[BenchmarkRecord],
    predictions: &[bool],
    retrieved: &[BTreeSet<String>],
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("csv {}: {e}", path.display())))?;
    writer
        .write_record(["claim", "pred", "gold", "hop", "recall"])
        .map_err(|e| CliError::data(e.to_string()))?;
    for (i, record) in records.iter().enumerate() {
        let recall = record
            .gold_doc_ids
            .as_ref()
            .filter(|gold| !gold.is_empty())
            .map(|gold| {
                let gold: BTreeSet<String> = gold.iter().cloned().collect();
                recall_at_k(&retrieved[i], &gold).expect("gold non-empty")
            });
        writer
            .write_record([
                record.claim.as_str(),
                if predictions[i] { "True" } else { "False" },
                if record.label { "True" } else { "False" },
                &record.hops.map(|h| h.to_string()).unwrap_or_default(),
                &recall.map(|r| r.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::data(e.to_string()))?;
    Ok(())
}
