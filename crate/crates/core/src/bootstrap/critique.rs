//! Critique and refinement calls of the strategy-optimization loop.
//!
//! Each batch claim gets one optimizer-role critique call whose prompt
//! carries the claim, the raw prompt backbone, the current strategy texts,
//! the generated program, the serialized execution trace, the gold evidence,
//! and the prediction's correctness. Critique responses feed one refinement
//! call that rewrites the two strategy texts.

use serde::{Deserialize, Serialize};

use crate::gateway::{CompletionRequest, Gateway, ModelRole};
use crate::strategy::{Strategy, BACKBONE_TEMPLATE};
use crate::template::fill;

use super::{AnnotatedClaim, BootstrapError};

pub const CRITIQUE_TEMPLATE: &str = include_str!("../../assets/critique.txt");
pub const REFINE_TEMPLATE: &str = include_str!("../../assets/refine.txt");

/// Literal a critique or refinement may use to signal "nothing to change".
pub const NO_SUGGESTIONS: &str = "no suggestions";
const REMAIN_UNCHANGED: &str = "remain unchanged";

/// Closed set of decomposition error labels.
pub const DECOMPOSITION_ERROR_LABELS: [&str; 3] = [
    "bridging fact missing",
    "ambiguous decomposition",
    "unnecessary decomposition",
];

/// Closed set of information-gathering error labels.
pub const RETRIEVAL_ERROR_LABELS: [&str; 4] = [
    "misguided retrieval",
    "irrelevant query",
    "suboptimal query format",
    "insufficient evidence synthesis",
];

/// Parsed critique of one claim's reasoning program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    /// The optimizer's reconstruction of the correct reasoning path.
    pub reconstructed_path: String,
    pub decomposition_errors: Vec<String>,
    pub retrieval_errors: Vec<String>,
    pub decomposition_suggestions: String,
    pub info_gathering_suggestions: String,
}

/// Everything the critique prompt needs about one batch claim's run.
#[derive(Debug, Clone)]
pub struct BatchRunResult {
    pub claim: AnnotatedClaim,
    pub program_code: String,
    pub prediction: bool,
    pub trace_json: String,
}

impl BatchRunResult {
    pub fn correct(&self) -> bool {
        self.prediction == self.claim.label
    }
}

fn label_text(label: bool) -> &'static str {
    if label {
        "True"
    } else {
        "False"
    }
}

/// `{evaluation}` field: correctness plus both labels.
pub fn evaluation_text(prediction: bool, gold: bool) -> String {
    format!(
        "{} (predicted {}, gold {})",
        if prediction == gold { "correct" } else { "incorrect" },
        label_text(prediction),
        label_text(gold)
    )
}

pub fn render_critique_prompt(strategy: &Strategy, result: &BatchRunResult) -> String {
    let evaluation = evaluation_text(result.prediction, result.claim.label);
    let gold = result.claim.gold_evidence.join("\n");
    fill(
        CRITIQUE_TEMPLATE,
        &[
            ("claim", result.claim.claim.as_str()),
            ("current_prompt", BACKBONE_TEMPLATE),
            ("claim_decomposition_strategy", strategy.decomposition_text.as_str()),
            ("information_gathering_strategy", strategy.info_gathering_text.as_str()),
            ("reasoning_program", result.program_code.as_str()),
            ("Trace", result.trace_json.as_str()),
            ("final_prediction", label_text(result.prediction)),
            ("ground_truth_evidence", gold.as_str()),
            ("evaluation", evaluation.as_str()),
        ],
    )
}

pub fn render_refine_prompt(
    strategy: &Strategy,
    decomposition_suggestions: &str,
    info_gathering_suggestions: &str,
) -> String {
    fill(
        REFINE_TEMPLATE,
        &[
            ("current_prompt", BACKBONE_TEMPLATE),
            ("claim_decomposition_strategy", strategy.decomposition_text.as_str()),
            ("information_gathering_strategy", strategy.info_gathering_text.as_str()),
            ("decomposition_suggestions", decomposition_suggestions),
            ("information_gathering_suggestions", info_gathering_suggestions),
        ],
    )
}

/// First `<tag>...</tag>` span in `text`.
fn find_tag<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close)? + start;
    Some(&text[start..end])
}

/// Parses a critique response. The `<suggestions>` block is mandatory; a
/// missing inner section means "no suggestions" for that strategy.
pub fn parse_critique(response: &str) -> Result<Critique, BootstrapError> {
    let suggestions = find_tag(response, "suggestions").ok_or_else(|| {
        BootstrapError::CritiqueParse("response has no <suggestions> block".into())
    })?;
    let decomposition_suggestions = find_tag(suggestions, "decomposition")
        .map(str::trim)
        .unwrap_or(NO_SUGGESTIONS)
        .to_string();
    let info_gathering_suggestions = find_tag(suggestions, "information_gathering")
        .map(str::trim)
        .unwrap_or(NO_SUGGESTIONS)
        .to_string();

    let mut decomposition_errors = Vec::new();
    let mut retrieval_errors = Vec::new();
    let mut rest = response;
    while let Some(start) = rest.find("<error_label>") {
        let tail = &rest[start + "<error_label>".len()..];
        let Some(end) = tail.find("</error_label>") else {
            break;
        };
        let label = tail[..end].trim().to_string();
        if DECOMPOSITION_ERROR_LABELS.contains(&label.as_str()) {
            if !decomposition_errors.contains(&label) {
                decomposition_errors.push(label);
            }
        } else if RETRIEVAL_ERROR_LABELS.contains(&label.as_str())
            && !retrieval_errors.contains(&label)
        {
            retrieval_errors.push(label);
        }
        rest = &tail[end..];
    }

    Ok(Critique {
        reconstructed_path: extract_reasoning_path(response),
        decomposition_errors,
        retrieval_errors,
        decomposition_suggestions,
        info_gathering_suggestions,
    })
}

/// Best-effort extraction of the "reconstruct the reasoning path" section:
/// everything between that heading and the next `##` heading.
fn extract_reasoning_path(response: &str) -> String {
    const HEADING: &str = "Reconstruct the Ground-Truth Reasoning Path";
    let Some(at) = response.find(HEADING) else {
        return String::new();
    };
    let body = &response[at + HEADING.len()..];
    let body = body.strip_prefix("**").unwrap_or(body);
    let end = body.find("\n##").unwrap_or(body.len());
    body[..end].trim().to_string()
}

/// A prompt/response pair kept for transcripts.
pub type Exchange = (String, String);

/// One critique call per batch claim. Unparseable critiques are dropped with
/// a warning pushed to `warnings`; the prompt/response pairs of every call
/// are returned for transcripts.
pub fn critique_batch(
    strategy: &Strategy,
    results: &[BatchRunResult],
    gateway: &Gateway,
    warnings: &mut Vec<String>,
) -> Result<(Vec<Critique>, Vec<Exchange>), BootstrapError> {
    let mut critiques = Vec::new();
    let mut exchanges = Vec::new();
    for result in results {
        let prompt = render_critique_prompt(strategy, result);
        let response = gateway
            .complete(&CompletionRequest::new(ModelRole::Optimizer, prompt.clone()))
            .map_err(BootstrapError::Gateway)?;
        match parse_critique(&response) {
            Ok(critique) => critiques.push(critique),
            Err(err) => warnings.push(format!(
                "critique dropped for claim `{}`: {err}",
                result.claim.claim
            )),
        }
        exchanges.push((prompt, response));
    }
    Ok((critiques, exchanges))
}

/// Concatenates per-claim suggestions, issues one refinement call, and
/// parses the `<refined_prompt>` response. A section containing
/// "remain unchanged" keeps the parent text verbatim. The refined strategy's
/// version is the parent's plus one.
pub fn refine_strategy(
    strategy: &Strategy,
    critiques: &[Critique],
    gateway: &Gateway,
) -> Result<(Strategy, (String, String)), BootstrapError> {
    if critiques.is_empty() {
        return Err(BootstrapError::NoCritiques);
    }
    let decomposition_suggestions = critiques
        .iter()
        .map(|c| c.decomposition_suggestions.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let info_gathering_suggestions = critiques
        .iter()
        .map(|c| c.info_gathering_suggestions.as_str())
        .collect::<Vec<_>>()
        .join("\n");

    let prompt = render_refine_prompt(strategy, &decomposition_suggestions, &info_gathering_suggestions);
    let response = gateway
        .complete(&CompletionRequest::new(ModelRole::Optimizer, prompt.clone()))
        .map_err(BootstrapError::Gateway)?;

    let refined = find_tag(&response, "refined_prompt")
        .ok_or_else(|| BootstrapError::RefineParse("response has no <refined_prompt> block".into()))?;
    let decomposition = find_tag(refined, "decomposition")
        .ok_or_else(|| BootstrapError::RefineParse("missing <decomposition> section".into()))?
        .trim();
    let info_gathering = find_tag(refined, "information_gathering")
        .ok_or_else(|| BootstrapError::RefineParse("missing <information_gathering> section".into()))?
        .trim();

    let keep = |text: &str| text.to_lowercase().contains(REMAIN_UNCHANGED);
    let new_decomposition = if keep(decomposition) {
        strategy.decomposition_text.clone()
    } else {
        decomposition.to_string()
    };
    let new_info = if keep(info_gathering) {
        strategy.info_gathering_text.clone()
    } else {
        info_gathering.to_string()
    };
    Ok((strategy.refined(new_decomposition, new_info), (prompt, response)))
}
