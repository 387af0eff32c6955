//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | symbol | name '(' expr ')' | '(' expr ')'
//! ```

use std::fmt;

use num_traits::{CheckedDiv, Zero};

use super::{Func, JetIndex, ScalarExpr, Symbol};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownFunction(String),
    BadJetIndex(String),
    BadNumber(String),
    BadIdentifier(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}")?,
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input")?,
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token `{t}`")?,
            ParseErrorKind::UnknownFunction(n) => write!(f, "unknown function `{n}`")?,
            ParseErrorKind::BadJetIndex(s) => write!(f, "invalid jet variable `{s}`")?,
            ParseErrorKind::BadNumber(s) => write!(f, "invalid number `{s}`")?,
            ParseErrorKind::BadIdentifier(s) => write!(f, "invalid identifier `{s}`")?,
        }
        write!(f, " at byte {}", self.offset)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(self.src[start..self.pos].to_string())));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((start, Tok::Op(c as char)));
        }
        let ch = self.src[start..].chars().next().unwrap();
        Err(ParseError {
            offset: start,
            kind: ParseErrorKind::UnexpectedChar(ch),
        })
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        let mut is_float = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            is_float = true;
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut look = self.pos + 1;
            if matches!(bytes.get(look), Some(b'+' | b'-')) {
                look += 1;
            }
            if matches!(bytes.get(look), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                self.pos = look;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[start..self.pos];
        let bad = || ParseError {
            offset: start,
            kind: ParseErrorKind::BadNumber(text.to_string()),
        };
        if is_float {
            let v: f64 = text.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok((start, Tok::Float(v)))
        } else {
            Ok((start, Tok::Int(text.parse().map_err(|_| bad())?)))
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn offset(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.at].clone();
        if t.1 != Tok::End {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let kind = match self.peek() {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            Tok::Int(n) => ParseErrorKind::UnexpectedToken(n.to_string()),
            Tok::Float(x) => ParseErrorKind::UnexpectedToken(x.to_string()),
            Tok::Ident(s) => ParseErrorKind::UnexpectedToken(s.clone()),
            Tok::Op(c) => ParseErrorKind::UnexpectedToken(c.to_string()),
        };
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    let t = self.term()?;
                    acc = ScalarExpr::sum(vec![acc, t]);
                }
                Tok::Op('-') => {
                    self.bump();
                    let t = self.term()?;
                    acc = ScalarExpr::sum(vec![acc, ScalarExpr::neg(t)]);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    let f = self.unary()?;
                    acc = ScalarExpr::product(vec![acc, f]);
                }
                Tok::Op('/') => {
                    self.bump();
                    let f = self.unary()?;
                    acc = match (acc.as_rational(), f.as_rational()) {
                        // literal fractions such as `1/2` stay exact constants
                        (Some(p), Some(q)) if !q.is_zero() => match p.checked_div(&q) {
                            Some(r) => ScalarExpr::rational(r),
                            None => divide(acc, f),
                        },
                        _ => divide(acc, f),
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(ScalarExpr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(ScalarExpr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        let (offset, tok) = self.bump();
        match tok {
            Tok::Int(n) => Ok(ScalarExpr::int(n)),
            Tok::Float(x) => Ok(ScalarExpr::float(x)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(ParseError {
                            offset,
                            kind: ParseErrorKind::UnknownFunction(name),
                        });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(ScalarExpr::func(f, arg));
                }
                identifier(&name, offset)
            }
            _ => {
                self.at -= 1;
                Err(self.unexpected())
            }
        }
    }
}

fn divide(num: ScalarExpr, den: ScalarExpr) -> ScalarExpr {
    ScalarExpr::product(vec![num, ScalarExpr::pow(den, ScalarExpr::int(-1))])
}

fn identifier(name: &str, offset: usize) -> Result<ScalarExpr, ParseError> {
    match name {
        "x1" => return Ok(ScalarExpr::x(1)),
        "x2" => return Ok(ScalarExpr::x(2)),
        "lambda" => return Ok(ScalarExpr::lambda()),
        "i" => return Ok(ScalarExpr::imag()),
        _ => {}
    }
    if Func::from_name(name).is_some() {
        return Err(ParseError {
            offset,
            kind: ParseErrorKind::UnexpectedToken(name.to_string()),
        });
    }
    if let Some(rest) = name.strip_prefix("theta") {
        return jet(rest, name, offset).map(ScalarExpr::jet);
    }
    let mut chars = name.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if !ok {
        return Err(ParseError {
            offset,
            kind: ParseErrorKind::BadIdentifier(name.to_string()),
        });
    }
    Ok(ScalarExpr::symbol(Symbol::Param(name.to_string())))
}

fn jet(rest: &str, name: &str, offset: usize) -> Result<JetIndex, ParseError> {
    let bad = || ParseError {
        offset,
        kind: ParseErrorKind::BadJetIndex(name.to_string()),
    };
    let (field, derivs) = match rest.split_once('_') {
        Some((f, d)) => (f, Some(d)),
        None => (rest, None),
    };
    let field: usize = match field.as_bytes() {
        [c @ b'1'..=b'9'] => (c - b'0') as usize,
        _ => return Err(bad()),
    };
    let mut idx = JetIndex::field_var(field);
    if let Some(d) = derivs {
        if d.is_empty() {
            return Err(bad());
        }
        for c in d.bytes() {
            idx = match c {
                b'1' => idx.raised(1),
                b'2' => idx.raised(2),
                _ => return Err(bad()),
            };
        }
    }
    Ok(idx)
}

/// Parse DSL text into an expression.
pub fn parse_expr(text: &str) -> Result<ScalarExpr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}
