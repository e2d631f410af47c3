//! Iterative strategy refinement plus demonstration bootstrapping.
//!
//! Each iteration runs a mini-batch of annotated claims, critiques the
//! results, refines the strategy, bootstraps candidate claim sets, generates
//! demonstrations for each, scores every candidate by macro F1 over the
//! whole pool, and keeps the best (strategy, demonstration-set) pair seen so
//! far under a strict-improvement guard. All randomness flows through one
//! seeded generator, so a run is fully reproducible from (seed, config,
//! backend).

mod critique;

pub use critique::{
    critique_batch, evaluation_text, parse_critique, refine_strategy, render_critique_prompt,
    render_refine_prompt, BatchRunResult, Critique, CRITIQUE_TEMPLATE,
    DECOMPOSITION_ERROR_LABELS, NO_SUGGESTIONS, REFINE_TEMPLATE, RETRIEVAL_ERROR_LABELS,
};

use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::AtomicFunctions;
use crate::dsl::{extract_program, pretty_print, validate};
use crate::eval::{macro_f1, MetricError};
use crate::executor::run_claim;
use crate::gateway::{CompletionRequest, GatewayError, ModelRole};
use crate::strategy::{
    initial_strategy, render_prompt, save_strategy, Demonstration, PromptVariant, Strategy,
    StrategyError,
};

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("not enough data: need {need}, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("no demonstrations survived validation filtering")]
    EmptySetAfterFiltering,
    #[error("cannot refine with an empty critique list")]
    NoCritiques,
    #[error("critique response unusable: {0}")]
    CritiqueParse(String),
    #[error("refinement response unusable: {0}")]
    RefineParse(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("demonstration file {0}: {1}")]
    DemoFormat(String, String),
}

/// A training claim with its veracity label and gold evidence (texts or
/// document ids; whatever the dataset provides).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedClaim {
    pub claim: String,
    pub label: bool,
    #[serde(default)]
    pub gold_evidence: Vec<String>,
}

/// A set of claim→program exemplars plus the pool score it earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DemonstrationSet {
    pub demos: Vec<Demonstration>,
    pub score: Option<f64>,
}

impl DemonstrationSet {
    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }
}

/// Uniform sample of `n` claims without replacement, in shuffled order.
/// Mini-batches are consecutive chunks of this order.
pub fn sample_pool(
    train: &[AnnotatedClaim],
    n: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<AnnotatedClaim>, BootstrapError> {
    if train.len() < n {
        return Err(BootstrapError::InsufficientData {
            need: n,
            have: train.len(),
        });
    }
    Ok(sample_indices(rng, train.len(), n)
        .into_iter()
        .map(|i| train[i].clone())
        .collect())
}

/// Partial Fisher–Yates over `0..len`, first `k` positions.
fn sample_indices(rng: &mut impl RngCore, len: usize, k: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = i + (rng.next_u64() as usize) % (len - i);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

/// Mini-batch for a 1-based iteration; cycles once the pool is exhausted.
pub fn next_minibatch(pool: &[AnnotatedClaim], iteration: usize, size: usize) -> &[AnnotatedClaim] {
    assert!(iteration >= 1, "iterations are 1-based");
    let batches = (pool.len() / size).max(1);
    let index = (iteration - 1) % batches;
    let start = index * size;
    let end = (start + size).min(pool.len());
    &pool[start..end]
}

/// `n_sets` independent without-replacement samples of `set_size` claims.
/// Sets may overlap each other; claims within one set are distinct.
pub fn bootstrap_candidates(
    pool: &[AnnotatedClaim],
    n_sets: usize,
    set_size: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<Vec<AnnotatedClaim>>, BootstrapError> {
    if pool.len() < set_size {
        return Err(BootstrapError::InsufficientData {
            need: set_size,
            have: pool.len(),
        });
    }
    Ok((0..n_sets)
        .map(|_| {
            sample_indices(rng, pool.len(), set_size)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect()
        })
        .collect())
}

/// Generates one zero-shot program per claim under the given strategy.
/// A program that fails to parse or validate is regenerated once; if it
/// fails again the claim is dropped. Demonstrations store the normalized
/// pretty-printed program.
pub fn generate_demonstrations(
    strategy: &Strategy,
    claims: &[AnnotatedClaim],
    atomics: &AtomicFunctions<'_>,
) -> Result<DemonstrationSet, BootstrapError> {
    let mut demos = Vec::new();
    for claim in claims {
        let prompt = render_prompt(strategy, PromptVariant::Zs, &claim.claim)?;
        for _attempt in 0..2 {
            let output = atomics
                .gateway()
                .complete(&CompletionRequest::new(ModelRole::Generator, prompt.clone()))?;
            let source = extract_program(&output);
            let Ok(ast) = source.parse() else { continue };
            if !validate(&ast).ok {
                continue;
            }
            demos.push(Demonstration {
                claim: claim.claim.clone(),
                program_code: pretty_print(&ast),
            });
            break;
        }
    }
    if demos.is_empty() {
        return Err(BootstrapError::EmptySetAfterFiltering);
    }
    Ok(DemonstrationSet { demos, score: None })
}

/// Runs every pool claim with the few-shot prompt built from `(strategy,
/// demos)` and returns the macro F1 of the predictions.
pub fn evaluate_config(
    strategy: &Strategy,
    demos: &DemonstrationSet,
    pool: &[AnnotatedClaim],
    atomics: &AtomicFunctions<'_>,
) -> Result<f64, BootstrapError> {
    let mut preds = Vec::with_capacity(pool.len());
    let mut golds = Vec::with_capacity(pool.len());
    for claim in pool {
        let prompt = render_prompt(strategy, PromptVariant::Fs(&demos.demos), &claim.claim)?;
        let run = run_claim(&claim.claim, &prompt, atomics)?;
        preds.push(run.prediction);
        golds.push(claim.label);
    }
    Ok(macro_f1(&preds, &golds)?)
}

/// Knobs of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    /// Mini-batch iterations; the default walks the pool once.
    pub iterations: usize,
    pub pool_size: usize,
    pub batch_size: usize,
    /// Candidate claim sets bootstrapped per iteration after the first.
    pub candidate_sets: usize,
    pub demo_set_size: usize,
    pub run_id: String,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            iterations: 8,
            pool_size: 40,
            batch_size: 5,
            candidate_sets: 3,
            demo_set_size: 5,
            run_id: "bootstrap".into(),
        }
    }
}

/// Mutable state of the optimization loop.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub current_strategy: Strategy,
    pub current_demos: DemonstrationSet,
    pub best_strategy: Strategy,
    pub best_demos: DemonstrationSet,
    pub best_score: f64,
    pub iteration: usize,
}

/// What happened in one iteration, for the score history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub strategy_version: u32,
    pub candidate_scores: Vec<f64>,
    /// 0-based index into `candidate_scores`.
    pub selected_candidate: usize,
    pub selected_score: f64,
    pub best_score_after: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizerOutcome {
    pub best_strategy: Strategy,
    pub best_demos: DemonstrationSet,
    pub best_score: f64,
    pub history: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

struct Artifacts {
    root: Option<PathBuf>,
}

impl Artifacts {
    fn dir(&self, sub: &str) -> Result<Option<PathBuf>, BootstrapError> {
        match &self.root {
            None => Ok(None),
            Some(root) => {
                let dir = root.join(sub);
                std::fs::create_dir_all(&dir)?;
                Ok(Some(dir))
            }
        }
    }

    fn strategy(
        &self,
        strategy: &Strategy,
        parent: Option<u32>,
        run_id: &str,
    ) -> Result<(), BootstrapError> {
        if let Some(dir) = self.dir("strategies")? {
            save_strategy(&dir, strategy, parent, run_id)?;
        }
        Ok(())
    }

    fn demos(&self, name: &str, set: &DemonstrationSet) -> Result<(), BootstrapError> {
        if let Some(dir) = self.dir("demos")? {
            save_demos(&dir.join(format!("{name}.jsonl")), set)?;
        }
        Ok(())
    }

    fn transcript(&self, name: &str, exchanges: &[(String, String)]) -> Result<(), BootstrapError> {
        if exchanges.is_empty() {
            return Ok(());
        }
        if let Some(dir) = self.dir("transcripts")? {
            let mut text = String::new();
            for (i, (prompt, response)) in exchanges.iter().enumerate() {
                if i > 0 {
                    text.push_str("\n\n════════════════════════════════\n\n");
                }
                text.push_str(prompt);
                text.push_str("\n\n=== RESPONSE ===\n\n");
                text.push_str(response);
            }
            std::fs::write(dir.join(format!("{name}.txt")), text)?;
        }
        Ok(())
    }

    fn scores_csv(&self, history: &[IterationRecord]) -> Result<(), BootstrapError> {
        if let Some(root) = &self.root {
            let mut csv = String::from(
                "iteration,strategy_version,candidate_scores,selected_candidate,selected_score,best_score\n",
            );
            for record in history {
                let scores = record
                    .candidate_scores
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    record.iteration,
                    record.strategy_version,
                    scores,
                    record.selected_candidate,
                    record.selected_score,
                    record.best_score_after
                ));
            }
            std::fs::write(root.join("scores.csv"), csv)?;
        }
        Ok(())
    }

    fn summary(&self, outcome: &OptimizerOutcome) -> Result<(), BootstrapError> {
        if let Some(root) = &self.root {
            let summary = serde_json::json!({
                "best_score": outcome.best_score,
                "best_strategy_version": outcome.best_strategy.version,
                "iterations": outcome.history.len(),
                "warnings": outcome.warnings,
            });
            std::fs::write(
                root.join("summary.json"),
                serde_json::to_string_pretty(&summary).expect("summary serializes"),
            )?;
            let best = root.join("best");
            std::fs::create_dir_all(&best)?;
            save_strategy(&best, &outcome.best_strategy, None, "best")?;
            save_demos(&best.join("demos.jsonl"), &outcome.best_demos)?;
        }
        Ok(())
    }
}

/// Runs a batch of claims zero-shot under `strategy` and packages the
/// diagnostics the critique template needs.
pub fn run_batch_for_critique(
    strategy: &Strategy,
    batch: &[AnnotatedClaim],
    atomics: &AtomicFunctions<'_>,
) -> Result<Vec<BatchRunResult>, BootstrapError> {
    batch
        .iter()
        .map(|claim| {
            let prompt = render_prompt(strategy, PromptVariant::Zs, &claim.claim)?;
            let run = run_claim(&claim.claim, &prompt, atomics)?;
            Ok(BatchRunResult {
                claim: claim.clone(),
                program_code: run.program.code.clone(),
                prediction: run.prediction,
                trace_json: run.trace.to_json(),
            })
        })
        .collect()
}

/// The full bootstrapping loop.
///
/// Iteration 1 refines the initial strategy against the first mini-batch,
/// generates demonstrations from that same batch, and seeds the best score.
/// Every later iteration refines the current strategy, bootstraps
/// `candidate_sets` claim sets, generates and scores a demonstration set for
/// each, adopts the iteration's argmax as the current set, and promotes it
/// to best only on strict improvement.
pub fn run_optimizer(
    train: &[AnnotatedClaim],
    config: &OptimizerConfig,
    atomics: &AtomicFunctions<'_>,
    artifacts_dir: Option<&Path>,
) -> Result<OptimizerOutcome, BootstrapError> {
    let artifacts = Artifacts {
        root: artifacts_dir.map(Path::to_path_buf),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool = sample_pool(train, config.pool_size, &mut rng)?;

    let initial = initial_strategy();
    artifacts.strategy(&initial, None, &config.run_id)?;

    let mut state = OptimizerState {
        current_strategy: initial.clone(),
        current_demos: DemonstrationSet::default(),
        best_strategy: initial,
        best_demos: DemonstrationSet::default(),
        best_score: 0.0,
        iteration: 0,
    };
    let mut history = Vec::new();
    let mut warnings = Vec::new();

    for iteration in 1..=config.iterations {
        state.iteration = iteration;
        let batch = next_minibatch(&pool, iteration, config.batch_size);

        let results = run_batch_for_critique(&state.current_strategy, batch, atomics)?;
        let (critiques, exchanges) =
            critique_batch(&state.current_strategy, &results, atomics.gateway(), &mut warnings)?;
        artifacts.transcript(&format!("iter_{iteration:03}_critique"), &exchanges)?;

        let refined = if critiques.is_empty() {
            warnings.push(format!(
                "iteration {iteration}: no usable critiques; strategy kept at v{}",
                state.current_strategy.version
            ));
            state.current_strategy.clone()
        } else {
            match refine_strategy(&state.current_strategy, &critiques, atomics.gateway()) {
                Ok((refined, exchange)) => {
                    artifacts
                        .transcript(&format!("iter_{iteration:03}_refine"), &[exchange])?;
                    artifacts.strategy(
                        &refined,
                        Some(state.current_strategy.version),
                        &config.run_id,
                    )?;
                    refined
                }
                Err(BootstrapError::RefineParse(reason)) => {
                    warnings.push(format!(
                        "iteration {iteration}: refinement unparseable ({reason}); strategy kept at v{}",
                        state.current_strategy.version
                    ));
                    state.current_strategy.clone()
                }
                Err(other) => return Err(other),
            }
        };

        if iteration == 1 {
            let mut demos = generate_demonstrations(&refined, batch, atomics)?;
            let score = evaluate_config(&refined, &demos, &pool, atomics)?;
            demos.score = Some(score);
            artifacts.demos("iter_001_selected", &demos)?;

            state.best_strategy = refined.clone();
            state.best_demos = demos.clone();
            state.best_score = score;
            state.current_strategy = refined;
            state.current_demos = demos;
            history.push(IterationRecord {
                iteration,
                strategy_version: state.current_strategy.version,
                candidate_scores: vec![score],
                selected_candidate: 0,
                selected_score: score,
                best_score_after: state.best_score,
                improved: true,
            });
            continue;
        }

        let candidates = bootstrap_candidates(
            &pool,
            config.candidate_sets,
            config.demo_set_size,
            &mut rng,
        )?;
        let mut scored: Vec<DemonstrationSet> = Vec::with_capacity(candidates.len());
        let mut scores = Vec::with_capacity(candidates.len());
        for (j, claims) in candidates.iter().enumerate() {
            let mut demos = generate_demonstrations(&refined, claims, atomics)?;
            let score = evaluate_config(&refined, &demos, &pool, atomics)?;
            demos.score = Some(score);
            artifacts.demos(&format!("iter_{iteration:03}_candidate_{}", j + 1), &demos)?;
            scored.push(demos);
            scores.push(score);
        }
        // argmax; earliest candidate wins ties.
        let selected = scores
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("candidate_sets >= 1");
        let selected_score = scores[selected];
        let improved = selected_score > state.best_score;
        if improved {
            state.best_score = selected_score;
            state.best_strategy = refined.clone();
            state.best_demos = scored[selected].clone();
        }
        state.current_strategy = refined;
        state.current_demos = scored.swap_remove(selected);
        artifacts.demos(&format!("iter_{iteration:03}_selected"), &state.current_demos)?;

        history.push(IterationRecord {
            iteration,
            strategy_version: state.current_strategy.version,
            candidate_scores: scores,
            selected_candidate: selected,
            selected_score,
            best_score_after: state.best_score,
            improved,
        });
    }

    let outcome = OptimizerOutcome {
        best_strategy: state.best_strategy,
        best_demos: state.best_demos,
        best_score: state.best_score,
        history,
        warnings,
    };
    artifacts.scores_csv(&outcome.history)?;
    artifacts.summary(&outcome)?;
    Ok(outcome)
}

/// On-disk demonstration record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DemoRecord {
    claim: String,
    program_code: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    score_context: Option<f64>,
}

/// Writes a demonstration set as JSON-lines `{claim, program_code,
/// score_context}` records.
pub fn save_demos(path: &Path, set: &DemonstrationSet) -> Result<(), BootstrapError> {
    let mut out = String::new();
    for demo in &set.demos {
        let record = DemoRecord {
            claim: demo.claim.clone(),
            program_code: demo.program_code.clone(),
            score_context: set.score,
        };
        out.push_str(&serde_json::to_string(&record).expect("demo serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_demos(path: &Path) -> Result<DemonstrationSet, BootstrapError> {
    let file = std::fs::File::open(path)?;
    let mut demos = Vec::new();
    let mut score = None;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DemoRecord = serde_json::from_str(&line)
            .map_err(|e| BootstrapError::DemoFormat(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        score = score.or(record.score_context);
        demos.push(Demonstration {
            claim: record.claim,
            program_code: record.program_code,
        });
    }
    Ok(DemonstrationSet { demos, score })
}
