//! Dataset loading and the metric suite: macro F1, balanced accuracy, and
//! retrieval recall, with per-hop breakdowns.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::recall_at_k;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("prediction and gold lists differ in length ({preds} vs {golds})")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("metric inputs are empty")]
    EmptyInput,
    #[error("balanced accuracy needs both classes in the gold labels")]
    SingleClassGold,
}

/// One benchmark claim with its gold label and, when available, hop count
/// and gold evidence document ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub claim: String,
    pub label: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hops: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gold_doc_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Hover,
    FeverousS,
    Generic,
}

impl DatasetFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "hover" => Some(Self::Hover),
            "feverous_s" | "feverous-s" => Some(Self::FeverousS),
            "generic" => Some(Self::Generic),
            _ => None,
        }
    }

    /// Retrieval depth the benchmarks pair with each corpus.
    pub fn default_top_k(self) -> usize {
        match self {
            DatasetFormat::Hover | DatasetFormat::Generic => 10,
            DatasetFormat::FeverousS => 5,
        }
    }
}

fn parse_label(value: &serde_json::Value) -> Option<bool> {
    match value {
        serde_json::Value::Bool(b) => Some(*b),
        serde_json::Value::String(s) => match s.to_uppercase().replace(' ', "_").as_str() {
            "TRUE" | "SUPPORTED" | "SUPPORTS" => Some(true),
            "FALSE" | "NOT_SUPPORTED" | "REFUTES" | "REFUTED" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Reads a JSON-lines dataset, normalizing dataset-native label strings to
/// booleans.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<BenchmarkRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| EvalError::Schema {
                line: i + 1,
                reason: e.to_string(),
            })?;
        records.push(parse_record(&value, format).map_err(|reason| EvalError::Schema {
            line: i + 1,
            reason,
        })?);
    }
    Ok(records)
}

fn parse_record(
    value: &serde_json::Value,
    format: DatasetFormat,
) -> Result<BenchmarkRecord, String> {
    let claim = value["claim"]
        .as_str()
        .filter(|c| !c.is_empty())
        .ok_or("missing or empty `claim`")?
        .to_string();
    let label = parse_label(&value["label"]).ok_or("missing or unrecognized `label`")?;

    let hops = value["num_hops"]
        .as_u64()
        .or_else(|| value["hops"].as_u64())
        .map(|h| h as u8);

    let gold_doc_ids = match format {
        DatasetFormat::Hover => {
            // supporting_facts: [["Title", sentence], ...] — unique titles in order.
            value["supporting_facts"].as_array().map(|facts| {
                let mut seen = BTreeSet::new();
                facts
                    .iter()
                    .filter_map(|f| f[0].as_str())
                    .filter(|t| seen.insert(t.to_string()))
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
        }
        DatasetFormat::FeverousS | DatasetFormat::Generic => ["gold_doc_ids", "gold_evidence", "evidence"]
            .iter()
            .find_map(|key| value[*key].as_array())
            .map(|ids| {
                ids.iter()
                    .filter_map(|v| v.as_str())
                    .map(str::to_string)
                    .collect()
            }),
    };

    Ok(BenchmarkRecord {
        claim,
        label,
        hops,
        gold_doc_ids,
    })
}

struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn confusion(preds: &[bool], golds: &[bool], class: bool) -> Confusion {
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
    };
    for (&p, &g) in preds.iter().zip(golds) {
        match (p == class, g == class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

fn check_lengths(preds: &[bool], golds: &[bool]) -> Result<(), MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

/// Mean of per-class F1 over the two classes. A class with zero precision
/// and recall contributes F1 = 0.
pub fn macro_f1(preds: &[bool], golds: &[bool]) -> Result<f64, MetricError> {
    check_lengths(preds, golds)?;
    let f1 = |class: bool| {
        let c = confusion(preds, golds, class);
        let denom = 2 * c.tp + c.fp + c.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * c.tp as f64 / denom as f64
        }
    };
    Ok((f1(true) + f1(false)) / 2.0)
}

/// Mean of per-class recall. Requires both classes in the gold labels.
pub fn balanced_accuracy(preds: &[bool], golds: &[bool]) -> Result<f64, MetricError> {
    check_lengths(preds, golds)?;
    let recall = |class: bool| {
        let c = confusion(preds, golds, class);
        let support = c.tp + c.fn_;
        if support == 0 {
            None
        } else {
            Some(c.tp as f64 / support as f64)
        }
    };
    match (recall(true), recall(false)) {
        (Some(r_true), Some(r_false)) => Ok((r_true + r_false) / 2.0),
        _ => Err(MetricError::SingleClassGold),
    }
}

/// Metrics over one hop bucket. `bacc` is omitted when the bucket's gold
/// labels are single-class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopMetrics {
    pub macro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bacc: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub macro_f1: f64,
    pub bacc: f64,
    pub per_hop: BTreeMap<u8, HopMetrics>,
    pub n: usize,
    /// Mean per-claim evidence recall; present when gold ids and retrieved
    /// sets are both available.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
}

impl MetricReport {
    /// Plain-text table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10} {:>8} {:>8} {:>6}\n", "subset", "f1", "bacc", "n"));
        out.push_str(&format!(
            "{:<10} {:>8.4} {:>8.4} {:>6}\n",
            "all", self.macro_f1, self.bacc, self.n
        ));
        for (hop, metrics) in &self.per_hop {
            let bacc = metrics
                .bacc
                .map_or_else(|| "     n/a".to_string(), |b| format!("{b:>8.4}"));
            out.push_str(&format!(
                "{:<10} {:>8.4} {} {:>6}\n",
                format!("{hop}-hop"),
                metrics.macro_f1,
                bacc,
                metrics.n
            ));
        }
        if let Some(recall) = self.recall {
            out.push_str(&format!("recall@k   {recall:>8.4}\n"));
        }
        out
    }
}

/// Overall and per-hop metrics for a run; adds mean evidence recall when
/// retrieved document ids are supplied.
pub fn evaluate_run(
    records: &[BenchmarkRecord],
    predictions: &[bool],
    retrieved: Option<&[BTreeSet<String>]>,
) -> Result<MetricReport, EvalError> {
    let golds: Vec<bool> = records.iter().map(|r| r.label).collect();
    check_lengths(predictions, &golds).map_err(EvalError::Metric)?;
    if let Some(retrieved) = retrieved {
        if retrieved.len() != records.len() {
            return Err(EvalError::Metric(MetricError::LengthMismatch {
                preds: retrieved.len(),
                golds: records.len(),
            }));
        }
    }

    let mut by_hop: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        if let Some(hop) = record.hops {
            by_hop.entry(hop).or_default().push(i);
        }
    }
    let mut per_hop = BTreeMap::new();
    for (hop, indices) in by_hop {
        let sub_preds: Vec<bool> = indices.iter().map(|&i| predictions[i]).collect();
        let sub_golds: Vec<bool> = indices.iter().map(|&i| golds[i]).collect();
        per_hop.insert(
            hop,
            HopMetrics {
                macro_f1: macro_f1(&sub_preds, &sub_golds)?,
                bacc: balanced_accuracy(&sub_preds, &sub_golds).ok(),
                n: indices.len(),
            },
        );
    }

    let recall = retrieved.and_then(|retrieved| {
        let per_claim: Vec<f64> = records
            .iter()
            .zip(retrieved)
            .filter_map(|(record, hits)| {
                let gold: BTreeSet<String> = record.gold_doc_ids.as_ref()?.iter().cloned().collect();
                recall_at_k(hits, &gold).ok()
            })
            .collect();
        if per_claim.is_empty() {
            None
        } else {
            Some(per_claim.iter().sum::<f64>() / per_claim.len() as f64)
        }
    });

    Ok(MetricReport {
        macro_f1: macro_f1(predictions, &golds)?,
        bacc: balanced_accuracy(predictions, &golds)?,
        per_hop,
        n: records.len(),
        recall,
    })
}
