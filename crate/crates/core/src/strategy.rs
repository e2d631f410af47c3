//! Versioned decomposition / information-gathering strategies and the
//! generation-prompt backbone.
//!
//! A [`Strategy`] pairs the two instruction texts that fill the backbone's
//! placeholders. Rendering is pure; the zs/cot/fs variants differ only in a
//! chain-of-thought suffix and an inserted demonstrations section.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::fill;

pub const BACKBONE_TEMPLATE: &str = include_str!("../assets/backbone.txt");
const INITIAL_DECOMPOSITION: &str = include_str!("../assets/decomposition_strategy.txt");
const INITIAL_INFO_GATHERING: &str = include_str!("../assets/info_gathering_strategy.txt");

/// Split point where the fs variant inserts demonstrations: just before the
/// closing input-claim section.
const INPUT_SECTION_MARKER: &str =
    "---\nNow, follow the above guidelines to generate a Python-like reasoning program";

const COT_SUFFIX: &str = "---\n# Chain-of-Thought:\nFirst reason step by step about how to decompose the claim and gather evidence, writing this reasoning as `#` comments at the top of the reasoning program. Then emit the program statements, keeping everything inside one fenced code block.\n";

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("few-shot rendering requires a non-empty demonstration set")]
    MissingDemonstrations,
    #[error("claim is empty")]
    EmptyClaim,
    #[error("strategy file {0}: {1}")]
    Format(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    Refined,
}

/// A claim-decomposition text and an information-gathering text, versioned
/// by refinement generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub decomposition_text: String,
    pub info_gathering_text: String,
    pub version: u32,
    pub provenance: Provenance,
}

impl Strategy {
    /// Next generation of this strategy with replacement texts.
    pub fn refined(&self, decomposition_text: String, info_gathering_text: String) -> Strategy {
        Strategy {
            decomposition_text,
            info_gathering_text,
            version: self.version + 1,
            provenance: Provenance::Refined,
        }
    }
}

/// The version-0 strategy texts.
pub fn initial_strategy() -> Strategy {
    Strategy {
        decomposition_text: INITIAL_DECOMPOSITION.trim_end().to_string(),
        info_gathering_text: INITIAL_INFO_GATHERING.trim_end().to_string(),
        version: 0,
        provenance: Provenance::Initial,
    }
}

/// One few-shot exemplar: a claim and its normalized reasoning program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub claim: String,
    pub program_code: String,
}

/// Prompting mode for generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Zs,
    Cot,
    Fs,
}

/// Mode plus the demonstrations few-shot requires.
#[derive(Debug, Clone, Copy)]
pub enum PromptVariant<'a> {
    Zs,
    Cot,
    Fs(&'a [Demonstration]),
}

impl PromptVariant<'_> {
    pub fn mode(&self) -> PromptMode {
        match self {
            PromptVariant::Zs => PromptMode::Zs,
            PromptVariant::Cot => PromptMode::Cot,
            PromptVariant::Fs(_) => PromptMode::Fs,
        }
    }
}

/// Renders the generation prompt for a claim. Pure: identical inputs yield
/// byte-identical prompts.
pub fn render_prompt(
    strategy: &Strategy,
    variant: PromptVariant<'_>,
    claim: &str,
) -> Result<String, StrategyError> {
    if claim.is_empty() {
        return Err(StrategyError::EmptyClaim);
    }
    let vars = [
        ("claim_decomposition_strategy", strategy.decomposition_text.as_str()),
        ("information_gathering_strategy", strategy.info_gathering_text.as_str()),
        ("input", claim),
    ];
    match variant {
        PromptVariant::Zs => Ok(fill(BACKBONE_TEMPLATE, &vars)),
        PromptVariant::Cot => Ok(fill(BACKBONE_TEMPLATE, &vars) + COT_SUFFIX),
        PromptVariant::Fs(demos) => {
            if demos.is_empty() {
                return Err(StrategyError::MissingDemonstrations);
            }
            let (head, tail) = BACKBONE_TEMPLATE
                .split_once(INPUT_SECTION_MARKER)
                .expect("backbone contains the input-claim section");
            let mut prompt = fill(head, &vars);
            prompt.push_str("---\n# Demonstrations:\n");
            for (i, demo) in demos.iter().enumerate() {
                prompt.push_str(&format!("## Example {}\nClaim:\n```\n{}\n```\nReasoning Program:\n```python\n{}", i + 1, demo.claim, demo.program_code));
                if !demo.program_code.ends_with('\n') {
                    prompt.push('\n');
                }
                prompt.push_str("```\n");
            }
            prompt.push_str(INPUT_SECTION_MARKER);
            prompt.push_str(&fill(tail, &vars));
            Ok(prompt)
        }
    }
}

/// On-disk manifest accompanying each persisted strategy version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyManifest {
    pub version: u32,
    pub provenance: Provenance,
    pub parent_version: Option<u32>,
    pub run_id: String,
}

/// Writes `<dir>/v<N>/{decomposition.txt,information_gathering.txt,manifest.json}`.
pub fn save_strategy(
    dir: &Path,
    strategy: &Strategy,
    parent_version: Option<u32>,
    run_id: &str,
) -> Result<(), StrategyError> {
    let version_dir = dir.join(format!("v{}", strategy.version));
    std::fs::create_dir_all(&version_dir)?;
    std::fs::write(version_dir.join("decomposition.txt"), &strategy.decomposition_text)?;
    std::fs::write(
        version_dir.join("information_gathering.txt"),
        &strategy.info_gathering_text,
    )?;
    let manifest = StrategyManifest {
        version: strategy.version,
        provenance: strategy.provenance,
        parent_version,
        run_id: run_id.to_string(),
    };
    std::fs::write(
        version_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

pub fn load_strategy(dir: &Path, version: u32) -> Result<Strategy, StrategyError> {
    let version_dir = dir.join(format!("v{version}"));
    let manifest_path = version_dir.join("manifest.json");
    let manifest: StrategyManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .map_err(|e| StrategyError::Format(manifest_path.display().to_string(), e.to_string()))?;
    Ok(Strategy {
        decomposition_text: std::fs::read_to_string(version_dir.join("decomposition.txt"))?,
        info_gathering_text: std::fs::read_to_string(version_dir.join("information_gathering.txt"))?,
        version: manifest.version,
        provenance: manifest.provenance,
    })
}
