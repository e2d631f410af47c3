//! Static checks on parsed programs.
//!
//! The checker runs simple two-type (string/boolean) inference over the
//! statement list. A program that validates cleanly cannot hit unbound
//! variables, unknown functions, or operand type errors at run time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{Ast, Expr, FmtPart, StatementKind, ATOMIC_FN_NAMES, FINAL_PREDICTION};

pub const RULE_MISSING_FINAL: &str = "missing-final-prediction";
pub const RULE_DUPLICATE_FINAL: &str = "duplicate-final-prediction";
pub const RULE_FINAL_NOT_BOOLEAN: &str = "final-prediction-not-boolean";
pub const RULE_UNKNOWN_FUNCTION: &str = "unknown-function";
pub const RULE_READ_BEFORE_ASSIGN: &str = "read-before-assign";
pub const RULE_TYPE_MISMATCH: &str = "type-mismatch";
pub const RULE_CALL_ARITY: &str = "call-arity";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
    /// 1-based source line; 0 for program-level violations.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Type {
    Str,
    Bool,
}

impl Type {
    fn name(self) -> &'static str {
        match self {
            Type::Str => "string",
            Type::Bool => "boolean",
        }
    }
}

struct Checker {
    env: BTreeMap<String, Type>,
    violations: Vec<Violation>,
}

impl Checker {
    fn report(&mut self, rule: &str, line: usize, message: impl Into<String>) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            message: message.into(),
            line,
        });
    }

    /// Returns the expression's type, or `None` when a violation inside it
    /// makes the type unknowable (avoids cascading noise).
    fn check_expr(&mut self, expr: &Expr, line: usize) -> Option<Type> {
        match expr {
            Expr::StrLit(_) => Some(Type::Str),
            Expr::BoolLit(_) => Some(Type::Bool),
            Expr::Var(name) => match self.env.get(name) {
                Some(t) => Some(*t),
                None => {
                    self.report(
                        RULE_READ_BEFORE_ASSIGN,
                        line,
                        format!("variable `{name}` is read before it is assigned"),
                    );
                    None
                }
            },
            Expr::FmtStr(parts) => {
                for part in parts {
                    if let FmtPart::Var(name) = part {
                        match self.env.get(name) {
                            None => self.report(
                                RULE_READ_BEFORE_ASSIGN,
                                line,
                                format!("variable `{name}` is read before it is assigned"),
                            ),
                            Some(Type::Bool) => self.report(
                                RULE_TYPE_MISMATCH,
                                line,
                                format!("f-string interpolates boolean variable `{name}`"),
                            ),
                            Some(Type::Str) => {}
                        }
                    }
                }
                Some(Type::Str)
            }
            Expr::Concat(operands) => {
                for operand in operands {
                    if let Some(Type::Bool) = self.check_expr(operand, line) {
                        self.report(
                            RULE_TYPE_MISMATCH,
                            line,
                            "`+` concatenation requires string operands",
                        );
                    }
                }
                Some(Type::Str)
            }
            Expr::BoolOp { op, operands } => {
                for operand in operands {
                    if let Some(Type::Str) = self.check_expr(operand, line) {
                        self.report(
                            RULE_TYPE_MISMATCH,
                            line,
                            format!("`{}` requires boolean operands", op.keyword()),
                        );
                    }
                }
                Some(Type::Bool)
            }
            Expr::Not(inner) => {
                if let Some(Type::Str) = self.check_expr(inner, line) {
                    self.report(RULE_TYPE_MISMATCH, line, "`not` requires a boolean operand");
                }
                Some(Type::Bool)
            }
            Expr::Call { name, args } => {
                for arg in args {
                    if let Some(Type::Bool) = self.check_expr(arg, line) {
                        self.report(
                            RULE_TYPE_MISMATCH,
                            line,
                            format!("`{name}` takes string arguments"),
                        );
                    }
                }
                let (arity, ret) = match name.as_str() {
                    "retrieve" => (1, Type::Str),
                    "question" => (2, Type::Str),
                    "verify" => (2, Type::Bool),
                    _ => {
                        self.report(
                            RULE_UNKNOWN_FUNCTION,
                            line,
                            format!(
                                "`{name}` is not one of the atomic functions ({})",
                                ATOMIC_FN_NAMES.join(", ")
                            ),
                        );
                        return None;
                    }
                };
                if args.len() != arity {
                    self.report(
                        RULE_CALL_ARITY,
                        line,
                        format!("`{name}` takes {arity} argument(s), found {}", args.len()),
                    );
                }
                Some(ret)
            }
        }
    }
}

/// Checks the parsed program against the language's semantic rules. A clean
/// report means the executor cannot fail on unbound names or bad call
/// targets, and `final_prediction` is assigned exactly once with a boolean.
pub fn validate(ast: &Ast) -> ValidationReport {
    let mut checker = Checker {
        env: BTreeMap::new(),
        violations: Vec::new(),
    };
    let mut final_assignments = 0usize;

    for statement in &ast.statements {
        match &statement.kind {
            StatementKind::Comment(_) => {}
            StatementKind::ExprStmt { value, .. } => {
                checker.check_expr(value, statement.line);
            }
            StatementKind::Assign { name, value, .. } => {
                let value_type = checker.check_expr(value, statement.line);
                if name == FINAL_PREDICTION {
                    final_assignments += 1;
                    if final_assignments > 1 {
                        checker.report(
                            RULE_DUPLICATE_FINAL,
                            statement.line,
                            format!("`{FINAL_PREDICTION}` is assigned more than once"),
                        );
                    }
                    if value_type == Some(Type::Str) {
                        checker.report(
                            RULE_FINAL_NOT_BOOLEAN,
                            statement.line,
                            format!("`{FINAL_PREDICTION}` must be assigned a boolean expression"),
                        );
                    }
                }
                if let Some(t) = value_type {
                    if let Some(prev) = checker.env.insert(name.clone(), t) {
                        if prev != t {
                            checker.report(
                                RULE_TYPE_MISMATCH,
                                statement.line,
                                format!(
                                    "variable `{name}` changes type from {} to {}",
                                    prev.name(),
                                    t.name()
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    if final_assignments == 0 {
        checker.report(
            RULE_MISSING_FINAL,
            0,
            format!("no assignment to `{FINAL_PREDICTION}`"),
        );
    }
    ValidationReport::from_violations(checker.violations)
}
