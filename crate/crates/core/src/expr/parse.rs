use std::fmt;

use thiserror::Error;

use super::{Expr, ExprKind, Func, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    Unexpected { found: String, expected: Vec<String> },
    UnknownFunction(String),
    UnknownVariable(String),
    InvalidNumber(String),
}

/// Syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn expected(&self) -> &[String] {
        match &self.kind {
            ParseErrorKind::Unexpected { expected, .. } => expected,
            _ => &[],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::Unexpected { found, expected } => write!(
                f,
                "syntax error at offset {}: found {found}, expected one of {}",
                self.offset,
                expected.join(", ")
            ),
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function `{name}` at offset {}", self.offset)
            }
            ParseErrorKind::UnknownVariable(name) => {
                write!(f, "unknown variable `{name}` at offset {}", self.offset)
            }
            ParseErrorKind::InvalidNumber(s) => {
                write!(f, "invalid number `{s}` at offset {}", self.offset)
            }
        }
    }
}

/// Names admitted by [`parse_in`]: the state dimension and declared
/// parameters (`pi` is always admitted).
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub dim: Option<usize>,
    pub params: Option<Vec<String>>,
}

impl Scope {
    pub fn new(dim: usize, params: impl IntoIterator<Item = String>) -> Self {
        Scope {
            dim: Some(dim),
            params: Some(params.into_iter().collect()),
        }
    }
}

/// Parses with an open scope: any unknown identifier becomes a parameter.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parse_in(src, &Scope::default())
}

pub fn parse_in(src: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let tokens = lex(src)?;
    if tokens.len() == 1 {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        scope,
    };
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
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
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "\"+\"".into(),
            Tok::Minus => "\"-\"".into(),
            Tok::Star => "\"*\"".into(),
            Tok::Slash => "\"/\"".into(),
            Tok::Caret => "\"^\"".into(),
            Tok::LParen => "\"(\"".into(),
            Tok::RParen => "\")\"".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, start, start + 1));
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                kind: ParseErrorKind::InvalidNumber(text.to_string()),
            })?;
            out.push((Tok::Num(v), start, i));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start, i));
        } else {
            let ch = src[start..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: start,
                kind: ParseErrorKind::Unexpected {
                    found: format!("character {ch:?}"),
                    expected: vec!["expression".into()],
                },
            });
        }
    }
    out.push((Tok::End, src.len(), src.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize, usize)>,
    pos: usize,
    scope: &'a Scope,
}

const OPERAND: [&str; 4] = ["number", "identifier", "\"(\"", "\"-\""];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn prev_end(&self) -> usize {
        self.tokens[self.pos - 1].2
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind: ParseErrorKind::Unexpected {
                found: self.peek().describe(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.unexpected(&["operator", "end of input"]))
        }
    }

    fn node(kind: ExprKind, start: usize, end: usize) -> Expr {
        Expr {
            kind,
            span: Some(Span { start, end }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        let mut lhs = self.term()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Plus && op != Tok::Minus {
                return Ok(lhs);
            }
            self.pos += 1;
            let rhs = self.term()?;
            let end = self.prev_end();
            let kind = if op == Tok::Plus {
                ExprKind::Add(Box::new(lhs), Box::new(rhs))
            } else {
                ExprKind::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Self::node(kind, start, end);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        let mut lhs = self.unary()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Star && op != Tok::Slash {
                return Ok(lhs);
            }
            self.pos += 1;
            let rhs = self.unary()?;
            let end = self.prev_end();
            let kind = if op == Tok::Star {
                ExprKind::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                ExprKind::Div(Box::new(lhs), Box::new(rhs))
            };
            lhs = Self::node(kind, start, end);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        if *self.peek() == Tok::Minus {
            self.pos += 1;
            let inner = self.unary()?;
            let end = self.prev_end();
            return Ok(Self::node(ExprKind::Neg(Box::new(inner)), start, end));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.pos += 1;
            let exp = self.unary()?;
            let end = self.prev_end();
            return Ok(Self::node(
                ExprKind::Pow(Box::new(base), Box::new(exp)),
                start,
                end,
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, start, end) = self.tokens[self.pos].clone();
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Self::node(ExprKind::Num(v), start, end))
            }
            Tok::LParen => {
                self.pos += 1;
                let mut inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["\")\""]));
                }
                self.pos += 1;
                inner.span = Some(Span {
                    start,
                    end: self.prev_end(),
                });
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        offset: start,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected(&["\")\""]));
                    }
                    self.pos += 1;
                    let end = self.prev_end();
                    return Ok(Self::node(ExprKind::Call(func, Box::new(arg)), start, end));
                }
                let kind = self.identifier(&name, start)?;
                Ok(Self::node(kind, start, end))
            }
            _ => Err(self.unexpected(&OPERAND)),
        }
    }

    fn identifier(&self, name: &str, offset: usize) -> Result<ExprKind, ParseError> {
        let unknown = || ParseError {
            offset,
            kind: ParseErrorKind::UnknownVariable(name.to_string()),
        };
        if name == "t" {
            return Ok(ExprKind::Time);
        }
        if Func::from_name(name).is_some() {
            return Err(unknown());
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| unknown())?;
                if index == 0 || self.scope.dim.is_some_and(|k| index > k) {
                    return Err(unknown());
                }
                return Ok(ExprKind::Var(index - 1));
            }
        }
        if name == "pi" {
            return Ok(ExprKind::Param(name.into()));
        }
        match &self.scope.params {
            Some(list) if !list.iter().any(|p| p == name) => Err(unknown()),
            _ => Ok(ExprKind::Param(name.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbalanced_paren_reports_offset_and_expectation() {
        let err = parse("sin(t").unwrap_err();
        assert_eq!(err.offset, 5);
        assert_eq!(err.expected(), ["\")\""]);
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::Empty);
        assert!(matches!(
            parse("foo(x1)").unwrap_err().kind,
            ParseErrorKind::UnknownFunction(ref n) if n == "foo"
        ));
        let err = parse("x1 +").unwrap_err();
        assert_eq!(err.offset, 4);
        let err = parse("x1 x2").unwrap_err();
        assert_eq!(err.offset, 3);
        let scope = Scope::new(2, ["lam".to_string()]);
        assert!(parse_in("x2 + lam", &scope).is_ok());
        assert!(matches!(
            parse_in("x3", &scope).unwrap_err().kind,
            ParseErrorKind::UnknownVariable(_)
        ));
        assert!(matches!(
            parse_in("mu*x1", &scope).unwrap_err().kind,
            ParseErrorKind::UnknownVariable(_)
        ));
        assert!(parse("x0").is_err());
        assert!(parse("1 $ 2").is_err());
    }

    #[test]
    fn spans_cover_source() {
        let src = "x1 + sin(2*t)";
        let e = parse(src).unwrap();
        let span = e.span.unwrap();
        assert_eq!((span.start, span.end), (0, src.len()));
        if let ExprKind::Add(_, rhs) = &e.kind {
            let s = rhs.span.unwrap();
            assert_eq!(&src[s.start..s.end], "sin(2*t)");
        } else {
            panic!("expected sum");
        }
    }

    #[test]
    fn scientific_literals() {
        let e = parse("1.5e-3*x1 + 2E2").unwrap();
        let v = e.eval(0.0, &[2.0], &Default::default()).unwrap();
        assert!((v - 200.003).abs() < 1e-12);
    }
}
