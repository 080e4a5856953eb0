//! Tokenizer and expression parser for the shared term grammar:
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := base ('^' nonneg-int)?
//! base     := rational | identifier | '(' expr ')'
//! rational := int ('/' positive-int)?
//! ```
//!
//! Identifiers are `[A-Za-z_][A-Za-z0-9_]*`. The parser produces an untyped
//! syntax tree; callers interpret identifiers as scalar symbols or graded
//! generators.

use num_bigint::BigInt;

use crate::error::{CoreError, Result};
use crate::scalar::poly::Rat;

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Rat(Rat),
    Ident { name: String, pos: usize },
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = text[start..i].parse().expect("digits");
                out.push((Tok::Int(n), start));
            }
            'A'..='Z' | 'a'..='z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(CoreError::Parse {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Ast::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast> {
        let base = self.base()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let pos = self.here();
            match self.bump() {
                Some(Tok::Int(n)) => {
                    let e: u32 = n.try_into().map_err(|_| CoreError::Parse {
                        pos,
                        msg: "exponent out of range".into(),
                    })?;
                    return Ok(Ast::Pow(Box::new(base), e));
                }
                _ => {
                    return Err(CoreError::Parse {
                        pos,
                        msg: "expected nonnegative integer exponent after `^`".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Ast> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Ast::Rat(Rat::from_integer(n))),
            Some(Tok::Minus) => {
                // A negative integer literal; binary minus is consumed in expr().
                let pos2 = self.here();
                match self.bump() {
                    Some(Tok::Int(n)) => Ok(Ast::Rat(Rat::from_integer(-n))),
                    _ => Err(CoreError::Parse {
                        pos: pos2,
                        msg: "expected integer after unary `-`".into(),
                    }),
                }
            }
            Some(Tok::Ident(name)) => Ok(Ast::Ident { name, pos }),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                let pos2 = self.here();
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(CoreError::Parse {
                        pos: pos2,
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Some(t) => Err(CoreError::Parse {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
            None => Err(CoreError::Parse {
                pos,
                msg: "unexpected end of expression".into(),
            }),
        }
    }
}

/// Parses a complete expression; trailing tokens are an error.
pub fn parse_expr(text: &str) -> Result<Ast> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: text.len(),
    };
    let ast = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(CoreError::Parse {
            pos: p.here(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(ast)
}
