//! Recursive-descent parser for objective strings.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := base ('^' exponent)?
//! exponent := ('-' | '+')? number | '(' expr ')'      -- must fold to a constant
//! base     := number | ident | func '(' expr ')' | '(' expr ')'
//! func     := exp | log | sqrt
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` reads as `-(x^2)`.

use thiserror::Error;

use super::{Expr, UnaryOp};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected {found}, expected {expected}")]
    UnexpectedToken { found: String, expected: &'static str },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(&'static str),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("unsupported function {0:?}")]
    UnsupportedFunction(String),
    #[error("invalid number literal {0:?}")]
    InvalidNumber(String),
    #[error("exponent must be a constant")]
    NonConstantExponent,
    #[error("expression nested too deeply")]
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {position}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                    position: start,
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), position: start });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { kind, position: self.offset() }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken { found: t.describe(), expected }),
            None => self.err(ParseErrorKind::UnexpectedEnd(expected)),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err(ParseErrorKind::TooDeep));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = Expr::add(acc, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = Expr::mul(acc, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    acc = Expr::div(acc, self.unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                self.enter()?;
                let e = Expr::neg(self.unary()?);
                self.depth -= 1;
                Ok(e)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.enter()?;
                let e = self.unary()?;
                self.depth -= 1;
                Ok(e)
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = self.exponent()?;
        Ok(Expr::pow(base, exponent))
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        let sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(sign * v)
            }
            Some(Tok::LParen) => {
                let at = self.offset();
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                match e.as_const() {
                    Some(v) => Ok(sign * v),
                    None => Err(ParseError { kind: ParseErrorKind::NonConstantExponent, position: at }),
                }
            }
            _ => Err(self.unexpected("a numeric exponent")),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    let op = match name.as_str() {
                        "exp" => UnaryOp::Exp,
                        "log" => UnaryOp::Log,
                        "sqrt" => UnaryOp::Sqrt,
                        _ => return Err(ParseError { kind: ParseErrorKind::UnsupportedFunction(name), position: at }),
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::unary(op, arg));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError { kind: ParseErrorKind::UnknownIdentifier(name), position: at }),
                }
            }
            _ => Err(self.unexpected("a number, variable, function or '('")),
        }
    }
}

/// Parse `text` with identifiers bound positionally to `var_names`.
pub fn parse(text: &str, var_names: &[String]) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), vars: var_names, depth: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}
