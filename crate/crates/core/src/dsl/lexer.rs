//! Tokenizer for the restricted program language.
//!
//! Newlines are statement separators except inside parentheses (implicit
//! continuation, as in Python). Anything outside the token set below is a
//! `ParseError` naming the construct.

use super::ast::FmtPart;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Str(String),
    FmtStr(Vec<FmtPart>),
    True,
    False,
    And,
    Or,
    Not,
    Assign,
    Plus,
    LParen,
    RParen,
    Comma,
    Comment(String),
    Newline,
}

#[derive(Debug, Clone)]
pub(super) struct Spanned {
    pub tok: Tok,
    pub line: usize,
}

/// Python keywords whose constructs the language rejects outright.
const REJECTED_KEYWORDS: [&str; 26] = [
    "for", "while", "if", "elif", "else", "import", "from", "def", "class", "return", "lambda",
    "in", "is", "pass", "break", "continue", "with", "try", "except", "finally", "raise",
    "global", "nonlocal", "assert", "yield", "del",
];

pub(super) fn lex(code: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = code.chars().peekable();
    let mut line = 1usize;
    let mut paren_depth = 0usize;

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                if paren_depth == 0 {
                    tokens.push(Spanned {
                        tok: Tok::Newline,
                        line,
                    });
                }
                line += 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
            }
            '#' => {
                chars.next();
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    text.push(c);
                    chars.next();
                }
                tokens.push(Spanned {
                    tok: Tok::Comment(text),
                    line,
                });
            }
            '=' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    return Err(ParseError::new(
                        line,
                        "comparison operators are not supported",
                    ));
                }
                tokens.push(Spanned {
                    tok: Tok::Assign,
                    line,
                });
            }
            '+' => {
                chars.next();
                tokens.push(Spanned {
                    tok: Tok::Plus,
                    line,
                });
            }
            '(' => {
                chars.next();
                paren_depth += 1;
                tokens.push(Spanned {
                    tok: Tok::LParen,
                    line,
                });
            }
            ')' => {
                chars.next();
                paren_depth = paren_depth.saturating_sub(1);
                tokens.push(Spanned {
                    tok: Tok::RParen,
                    line,
                });
            }
            ',' => {
                chars.next();
                tokens.push(Spanned {
                    tok: Tok::Comma,
                    line,
                });
            }
            '"' | '\'' => {
                let value = lex_string(&mut chars, line)?;
                tokens.push(Spanned {
                    tok: Tok::Str(value),
                    line,
                });
            }
            c if c.is_ascii_digit() => {
                return Err(ParseError::new(
                    line,
                    "numeric literals are not part of the language",
                ));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                // f-string prefix?
                if ident == "f" && matches!(chars.peek(), Some('"') | Some('\'')) {
                    let parts = lex_fmt_string(&mut chars, line)?;
                    tokens.push(Spanned {
                        tok: Tok::FmtStr(parts),
                        line,
                    });
                    continue;
                }
                let tok = match ident.as_str() {
                    "True" => Tok::True,
                    "False" => Tok::False,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "None" => {
                        return Err(ParseError::new(line, "`None` is not part of the language"))
                    }
                    kw if REJECTED_KEYWORDS.contains(&kw) => {
                        return Err(ParseError::new(
                            line,
                            format!("unsupported construct `{kw}`"),
                        ))
                    }
                    _ => Tok::Ident(ident),
                };
                tokens.push(Spanned { tok, line });
            }
            other => {
                return Err(ParseError::new(
                    line,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    tokens.push(Spanned {
        tok: Tok::Newline,
        line,
    });
    Ok(tokens)
}

fn lex_escape(chars: &mut std::iter::Peekable<std::str::Chars>, line: usize) -> Result<char, ParseError> {
    match chars.next() {
        Some('n') => Ok('\n'),
        Some('t') => Ok('\t'),
        Some('r') => Ok('\r'),
        Some('\\') => Ok('\\'),
        Some('"') => Ok('"'),
        Some('\'') => Ok('\''),
        Some(other) => Err(ParseError::new(line, format!("unknown escape `\\{other}`"))),
        None => Err(ParseError::new(line, "unterminated string literal")),
    }
}

fn lex_string(
    chars: &mut std::iter::Peekable<std::str::Chars>,
    line: usize,
) -> Result<String, ParseError> {
    let quote = chars.next().expect("caller saw a quote");
    let mut value = String::new();
    loop {
        match chars.next() {
            Some(c) if c == quote => return Ok(value),
            Some('\\') => value.push(lex_escape(chars, line)?),
            Some('\n') | None => return Err(ParseError::new(line, "unterminated string literal")),
            Some(c) => value.push(c),
        }
    }
}

fn lex_fmt_string(
    chars: &mut std::iter::Peekable<std::str::Chars>,
    line: usize,
) -> Result<Vec<FmtPart>, ParseError> {
    let quote = chars.next().expect("caller saw a quote");
    let mut parts: Vec<FmtPart> = Vec::new();
    let mut lit = String::new();
    let flush = |lit: &mut String, parts: &mut Vec<FmtPart>| {
        if !lit.is_empty() {
            parts.push(FmtPart::Lit(std::mem::take(lit)));
        }
    };
    loop {
        match chars.next() {
            Some(c) if c == quote => {
                flush(&mut lit, &mut parts);
                return Ok(parts);
            }
            Some('\\') => lit.push(lex_escape(chars, line)?),
            Some('{') => {
                if chars.peek() == Some(&'{') {
                    chars.next();
                    lit.push('{');
                    continue;
                }
                flush(&mut lit, &mut parts);
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) if c.is_alphanumeric() || c == '_' => name.push(c),
                        Some(c) => {
                            return Err(ParseError::new(
                                line,
                                format!(
                                    "only plain variable references are allowed in f-strings, found `{c}`"
                                ),
                            ))
                        }
                        None => return Err(ParseError::new(line, "unterminated f-string")),
                    }
                }
                if name.is_empty() || name.chars().next().unwrap().is_ascii_digit() {
                    return Err(ParseError::new(line, "invalid f-string placeholder name"));
                }
                parts.push(FmtPart::Var(name));
            }
            Some('}') => {
                if chars.peek() == Some(&'}') {
                    chars.next();
                    lit.push('}');
                } else {
                    return Err(ParseError::new(line, "single `}` in f-string"));
                }
            }
            Some('\n') | None => return Err(ParseError::new(line, "unterminated f-string")),
            Some(c) => lit.push(c),
        }
    }
}
