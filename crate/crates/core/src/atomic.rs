//! The three atomic functions callable from reasoning programs: retrieve,
//! question, and verify.
//!
//! `retrieve` runs BM25 top-k and joins the hit bodies with `"\n"`.
//! `question` and `answer` prompt the function-role model with fixed
//! templates; `verify` additionally parses a chain-of-thought rationale and
//! a True/False label out of the response.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Index, RankedHit};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, ModelRole};
use crate::template::fill;

pub const QUESTION_TEMPLATE: &str = include_str!("../assets/question.txt");
pub const VERIFY_TEMPLATE: &str = include_str!("../assets/verify.txt");

#[derive(Debug, Error)]
pub enum AtomicError {
    #[error(transparent)]
    Retrieval(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no True/False label could be extracted from the verification response")]
    UnparseableVerdict { response: String },
}

/// Boolean verification outcome plus the model's reasoning text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: bool,
    pub rationale: String,
}

/// Retrieved evidence pieces joined with a single newline, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvidenceBlob {
    pub text: String,
}

impl EvidenceBlob {
    pub fn from_documents(bodies: &[&str]) -> Self {
        Self {
            text: bodies.join("\n"),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

pub fn render_question_prompt(question: &str, evidence: &str) -> String {
    fill(
        QUESTION_TEMPLATE,
        &[("question", question), ("evidence", evidence)],
    )
}

pub fn render_verify_prompt(claim: &str, evidence: &str) -> String {
    fill(VERIFY_TEMPLATE, &[("evidence", evidence), ("claim", claim)])
}

/// Extracts the text after the final `Answer:` marker; without a marker the
/// whole response is used. Either way the result is trimmed.
pub fn extract_answer(response: &str) -> String {
    match response.rfind("Answer:") {
        Some(pos) => response[pos + "Answer:".len()..].trim().to_string(),
        None => response.trim().to_string(),
    }
}

/// Parses a verify response: rationale after `Reasoning:`, label after the
/// last `Verification Result:`. The label word is matched case-insensitively
/// against `True`/`False`; anything else is an error, never a guess.
pub fn parse_verdict(response: &str) -> Result<Verdict, AtomicError> {
    let unparseable = || AtomicError::UnparseableVerdict {
        response: response.to_string(),
    };
    let marker = "Verification Result:";
    let label_pos = response.rfind(marker).ok_or_else(unparseable)?;
    let label_text = &response[label_pos + marker.len()..];
    let label = label_text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|w| {
            if w.eq_ignore_ascii_case("true") {
                Some(true)
            } else if w.eq_ignore_ascii_case("false") {
                Some(false)
            } else {
                None
            }
        })
        .ok_or_else(unparseable)?;

    let head = &response[..label_pos];
    let rationale = match head.find("Reasoning:") {
        Some(pos) => head[pos + "Reasoning:".len()..].trim().to_string(),
        None => head.trim().to_string(),
    };
    Ok(Verdict { label, rationale })
}

/// The atomic functions bound to a corpus index and a model gateway.
/// Stateless between calls; safe to share across claims and threads.
pub struct AtomicFunctions<'a> {
    index: &'a Index,
    gateway: &'a Gateway,
}

impl<'a> AtomicFunctions<'a> {
    pub fn new(index: &'a Index, gateway: &'a Gateway) -> Self {
        Self { index, gateway }
    }

    pub fn index(&self) -> &Index {
        self.index
    }

    pub fn gateway(&self) -> &Gateway {
        self.gateway
    }

    /// Top-k retrieval at the index's configured depth.
    pub fn retrieve(&self, query: &str) -> Result<EvidenceBlob, AtomicError> {
        Ok(self.retrieve_with_hits(query)?.0)
    }

    /// Like [`Self::retrieve`] but also reports which documents were hit,
    /// for recall accounting.
    pub fn retrieve_with_hits(
        &self,
        query: &str,
    ) -> Result<(EvidenceBlob, Vec<RankedHit>), AtomicError> {
        let hits = self.index.retrieve(query)?;
        let bodies: Vec<&str> = hits
            .iter()
            .map(|h| {
                self.index
                    .document(&h.doc_id)
                    .expect("hit ids come from the index")
                    .text
                    .as_str()
            })
            .collect();
        Ok((EvidenceBlob::from_documents(&bodies), hits))
    }

    pub fn question(&self, question: &str, evidence: &EvidenceBlob) -> Result<String, AtomicError> {
        let prompt = render_question_prompt(question, &evidence.text);
        let response = self
            .gateway
            .complete(&CompletionRequest::new(ModelRole::FunctionLlm, prompt))?;
        Ok(extract_answer(&response))
    }

    pub fn verify(&self, claim: &str, evidence: &EvidenceBlob) -> Result<Verdict, AtomicError> {
        let prompt = render_verify_prompt(claim, &evidence.text);
        let response = self
            .gateway
            .complete(&CompletionRequest::new(ModelRole::FunctionLlm, prompt))?;
        parse_verdict(&response)
    }
}
