//! The restricted reasoning-program language.
//!
//! Generated programs are Python-like but deliberately tiny: assignments,
//! calls to the three atomic functions, string literals and f-strings, `+`
//! concatenation, `and`/`or`/`not`, boolean literals, and comments. Loops,
//! conditionals, imports, definitions, numbers, and subscripts are rejected
//! at parse time; execution of a rejected program routes through the
//! verification fallback instead of a bigger interpreter.

mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::{Ast, BoolOpKind, Expr, FmtPart, Statement, StatementKind, ATOMIC_FN_NAMES, FINAL_PREDICTION};
pub use printer::pretty_print;
pub use validate::{validate, ValidationReport, Violation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw generator output plus the fence-stripped code extracted from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSource {
    pub raw_llm_output: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, reason: impl Into<String>) -> Self {
        Self {
            line,
            reason: reason.into(),
        }
    }
}

/// Pulls the program text out of generator output.
///
/// Preference order: the first ```` ```python ```` block, then the first
/// fenced block with any tag, then the whole output verbatim. An unclosed
/// fence swallows everything to the end (truncated generations).
pub fn extract_program(llm_output: &str) -> ProgramSource {
    #[derive(PartialEq)]
    struct Block {
        tag: String,
        body: String,
    }

    let mut blocks: Vec<Block> = Vec::new();
    let mut current: Option<Block> = None;
    for line in llm_output.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => {
                    current = Some(Block {
                        tag: rest.trim().to_string(),
                        body: String::new(),
                    })
                }
            }
            continue;
        }
        if let Some(block) = current.as_mut() {
            if !block.body.is_empty() {
                block.body.push('\n');
            }
            block.body.push_str(line);
        }
    }
    if let Some(block) = current {
        blocks.push(block);
    }

    let code = blocks
        .iter()
        .find(|b| b.tag == "python")
        .or_else(|| blocks.first())
        .map(|b| b.body.clone())
        .unwrap_or_else(|| llm_output.to_string());
    ProgramSource {
        raw_llm_output: llm_output.to_string(),
        code,
    }
}

/// Parses program code into an [`Ast`]. Any construct outside the grammar is
/// a [`ParseError`]; there are no partial ASTs.
pub fn parse(code: &str) -> Result<Ast, ParseError> {
    let tokens = lexer::lex(code)?;
    parser::parse_tokens(tokens)
}

impl ProgramSource {
    pub fn parse(&self) -> Result<Ast, ParseError> {
        parse(&self.code)
    }
}
