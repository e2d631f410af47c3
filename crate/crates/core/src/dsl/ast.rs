//! Syntax tree for the restricted program language.

use serde::{Deserialize, Serialize};

/// Variable name of the program's final boolean result.
pub const FINAL_PREDICTION: &str = "final_prediction";

/// The three callable atomic function names.
pub const ATOMIC_FN_NAMES: [&str; 3] = ["retrieve", "question", "verify"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    /// 1-based source line.
    pub line: usize,
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatementKind {
    Assign {
        name: String,
        value: Expr,
        trailing_comment: Option<String>,
    },
    ExprStmt {
        value: Expr,
        trailing_comment: Option<String>,
    },
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    /// A function call; only the atomic names survive validation.
    Call { name: String, args: Vec<Expr> },
    Var(String),
    StrLit(String),
    /// f-string: interleaved literal text and variable references.
    FmtStr(Vec<FmtPart>),
    /// `a + b + ...` concatenation chain, at least two operands.
    Concat(Vec<Expr>),
    /// `and`/`or` chain, at least two operands.
    BoolOp { op: BoolOpKind, operands: Vec<Expr> },
    Not(Box<Expr>),
    BoolLit(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FmtPart {
    Lit(String),
    Var(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoolOpKind {
    And,
    Or,
}

impl BoolOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BoolOpKind::And => "and",
            BoolOpKind::Or => "or",
        }
    }
}

impl Ast {
    /// Lines of `Call` nodes in evaluation order, mostly for diagnostics.
    pub fn call_count(&self) -> usize {
        fn count(expr: &Expr) -> usize {
            match expr {
                Expr::Call { args, .. } => 1 + args.iter().map(count).sum::<usize>(),
                Expr::Concat(ops) => ops.iter().map(count).sum(),
                Expr::BoolOp { operands, .. } => operands.iter().map(count).sum(),
                Expr::Not(inner) => count(inner),
                _ => 0,
            }
        }
        self.statements
            .iter()
            .map(|s| match &s.kind {
                StatementKind::Assign { value, .. } | StatementKind::ExprStmt { value, .. } => {
                    count(value)
                }
                StatementKind::Comment(_) => 0,
            })
            .sum()
    }
}
