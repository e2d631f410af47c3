//! Recursive-descent parser producing the restricted [`Ast`].
//!
//! Precedence, loosest to tightest: `or`, `and`, `not`, `+`. Parentheses
//! group. Rejection is total — any token sequence outside the grammar is a
//! `ParseError`, never a partial tree.

use super::ast::{Ast, BoolOpKind, Expr, Statement, StatementKind};
use super::lexer::{Spanned, Tok};
use super::ParseError;

pub(super) fn parse_tokens(tokens: Vec<Spanned>) -> Result<Ast, ParseError> {
    let mut parser = Parser { tokens, pos: 0 };
    parser.program()
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |s| s.line)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        tok
    }

    fn expect(&mut self, expected: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(expected) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::new(
                self.line(),
                format!("expected {what}, found {}", describe(self.peek())),
            ))
        }
    }

    fn program(&mut self) -> Result<Ast, ParseError> {
        let mut statements = Vec::new();
        while self.peek().is_some() {
            // Skip blank lines.
            if self.peek() == Some(&Tok::Newline) {
                self.pos += 1;
                continue;
            }
            statements.push(self.statement()?);
        }
        Ok(Ast { statements })
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let line = self.line();

        if let Some(Tok::Comment(text)) = self.peek() {
            let text = text.clone();
            self.pos += 1;
            self.end_of_line()?;
            return Ok(Statement {
                line,
                kind: StatementKind::Comment(text),
            });
        }

        // Assignment requires ident '=' lookahead; otherwise expression statement.
        let kind = if let (Some(Tok::Ident(name)), Some(Tok::Assign)) = (
            self.peek(),
            self.tokens.get(self.pos + 1).map(|s| &s.tok),
        ) {
            let name = name.clone();
            self.pos += 2;
            let value = self.expr()?;
            StatementKind::Assign {
                name,
                value,
                trailing_comment: self.trailing_comment(),
            }
        } else {
            let value = self.expr()?;
            StatementKind::ExprStmt {
                value,
                trailing_comment: self.trailing_comment(),
            }
        };
        self.end_of_line()?;
        Ok(Statement { line, kind })
    }

    fn trailing_comment(&mut self) -> Option<String> {
        if let Some(Tok::Comment(text)) = self.peek() {
            let text = text.clone();
            self.pos += 1;
            Some(text)
        } else {
            None
        }
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some(Tok::Newline) | None => Ok(()),
            other => Err(ParseError::new(
                self.tokens[self.pos - 1].line,
                format!("expected end of line, found {}", describe(other.as_ref())),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.and_expr()?;
        if self.peek() != Some(&Tok::Or) {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            operands.push(self.and_expr()?);
        }
        Ok(Expr::BoolOp {
            op: BoolOpKind::Or,
            operands,
        })
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.unary()?;
        if self.peek() != Some(&Tok::And) {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            operands.push(self.unary()?);
        }
        Ok(Expr::BoolOp {
            op: BoolOpKind::And,
            operands,
        })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.concat()
    }

    fn concat(&mut self) -> Result<Expr, ParseError> {
        let first = self.atom()?;
        if self.peek() != Some(&Tok::Plus) {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            operands.push(self.atom()?);
        }
        Ok(Expr::Concat(operands))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let line = self.line();
        match self.bump() {
            Some(Tok::Str(value)) => Ok(Expr::StrLit(value)),
            Some(Tok::FmtStr(parts)) => Ok(Expr::FmtStr(parts)),
            Some(Tok::True) => Ok(Expr::BoolLit(true)),
            Some(Tok::False) => Ok(Expr::BoolLit(false)),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let args = self.call_args()?;
                    Ok(Expr::Call { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => Err(ParseError::new(
                line,
                format!("expected an expression, found {}", describe(other.as_ref())),
            )),
        }
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.bump() {
                Some(Tok::Comma) => {
                    // Allow a trailing comma before the closing paren.
                    if self.peek() == Some(&Tok::RParen) {
                        self.pos += 1;
                        return Ok(args);
                    }
                }
                Some(Tok::RParen) => return Ok(args),
                other => {
                    return Err(ParseError::new(
                        self.line(),
                        format!("expected `,` or `)`, found {}", describe(other.as_ref())),
                    ))
                }
            }
        }
    }
}

fn describe(tok: Option<&Tok>) -> String {
    match tok {
        None => "end of input".into(),
        Some(Tok::Newline) => "end of line".into(),
        Some(Tok::Ident(name)) => format!("`{name}`"),
        Some(Tok::Str(_)) => "a string literal".into(),
        Some(Tok::FmtStr(_)) => "an f-string".into(),
        Some(Tok::True) => "`True`".into(),
        Some(Tok::False) => "`False`".into(),
        Some(Tok::And) => "`and`".into(),
        Some(Tok::Or) => "`or`".into(),
        Some(Tok::Not) => "`not`".into(),
        Some(Tok::Assign) => "`=`".into(),
        Some(Tok::Plus) => "`+`".into(),
        Some(Tok::LParen) => "`(`".into(),
        Some(Tok::RParen) => "`)`".into(),
        Some(Tok::Comma) => "`,`".into(),
        Some(Tok::Comment(_)) => "a comment".into(),
    }
}
