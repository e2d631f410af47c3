//! Canonical formatter for the restricted language.
//!
//! Printing then reparsing any parsed program reproduces the same tree;
//! demonstrations stored on disk are normalized through this printer.

use super::ast::{Ast, BoolOpKind, Expr, FmtPart, Statement, StatementKind};

/// Operator tightness, loosest to tightest. An operand whose own level is
/// below its context requirement gets parenthesized.
fn level(expr: &Expr) -> u8 {
    match expr {
        Expr::BoolOp {
            op: BoolOpKind::Or, ..
        } => 1,
        Expr::BoolOp {
            op: BoolOpKind::And,
            ..
        } => 2,
        Expr::Not(_) => 3,
        Expr::Concat(_) => 4,
        _ => 5,
    }
}

pub fn pretty_print(ast: &Ast) -> String {
    let mut out = String::new();
    for statement in &ast.statements {
        print_statement(statement, &mut out);
        out.push('\n');
    }
    out
}

fn print_statement(statement: &Statement, out: &mut String) {
    match &statement.kind {
        StatementKind::Assign {
            name,
            value,
            trailing_comment,
        } => {
            out.push_str(name);
            out.push_str(" = ");
            print_expr(value, 0, out);
            if let Some(comment) = trailing_comment {
                out.push_str("  #");
                out.push_str(comment);
            }
        }
        StatementKind::ExprStmt {
            value,
            trailing_comment,
        } => {
            print_expr(value, 0, out);
            if let Some(comment) = trailing_comment {
                out.push_str("  #");
                out.push_str(comment);
            }
        }
        StatementKind::Comment(text) => {
            out.push('#');
            out.push_str(text);
        }
    }
}

fn print_expr(expr: &Expr, min_level: u8, out: &mut String) {
    let needs_parens = level(expr) < min_level;
    if needs_parens {
        out.push('(');
    }
    match expr {
        Expr::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(arg, 0, out);
            }
            out.push(')');
        }
        Expr::Var(name) => out.push_str(name),
        Expr::StrLit(value) => print_string(value, out),
        Expr::FmtStr(parts) => {
            out.push_str("f\"");
            for part in parts {
                match part {
                    FmtPart::Lit(text) => {
                        for c in text.chars() {
                            match c {
                                '{' => out.push_str("{{"),
                                '}' => out.push_str("}}"),
                                _ => push_escaped(c, out),
                            }
                        }
                    }
                    FmtPart::Var(name) => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
            }
            out.push('"');
        }
        Expr::Concat(operands) => {
            for (i, operand) in operands.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                print_expr(operand, 5, out);
            }
        }
        Expr::BoolOp { op, operands } => {
            let child_min = match op {
                BoolOpKind::Or => 2,
                BoolOpKind::And => 3,
            };
            for (i, operand) in operands.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    out.push_str(op.keyword());
                    out.push(' ');
                }
                print_expr(operand, child_min, out);
            }
        }
        Expr::Not(inner) => {
            out.push_str("not ");
            print_expr(inner, 3, out);
        }
        Expr::BoolLit(value) => out.push_str(if *value { "True" } else { "False" }),
    }
    if needs_parens {
        out.push(')');
    }
}

fn print_string(value: &str, out: &mut String) {
    out.push('"');
    for c in value.chars() {
        push_escaped(c, out);
    }
    out.push('"');
}

fn push_escaped(c: char, out: &mut String) {
    match c {
        '\\' => out.push_str("\\\\"),
        '"' => out.push_str("\\\""),
        '\n' => out.push_str("\\n"),
        '\t' => out.push_str("\\t"),
        '\r' => out.push_str("\\r"),
        _ => out.push(c),
    }
}
