//! A minimal arithmetic expression grammar for definition files, plus the
//! loaders for metric and system files built on it.
//!
//! Grammar (see the book chapter on file formats for the full reference):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := NUMBER | 'pi' | xN | FUNC '(' expr ')' | '(' expr ')'
//! FUNC   := sin | cos | tan | exp | ln | sqrt
//! ```
//!
//! Coordinates are named `x1..xN` for a declared dimension N. Definition
//! files are `key = value` lines with `#` comments:
//!
//! - metric files: `dim`, `g[i,j] = <expr>` entries (unset entries mirror the
//!   transposed entry, then default to zero), and optional `domain = <expr>
//!   <cmp> <expr>` constraints;
//! - system files: `dim`, either `canonical = true` or explicit `J[i,j]`
//!   entries (unset entries mirror with negation — set both sides explicitly
//!   to bypass that), optional `s`, and `H`.

use std::path::Path;

use nalgebra::DMatrix;

use crate::bracket::{StructuralMatrix, StructuralSystem};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::manifold::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(k) => x[*k],
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Call(f, e) => f.apply(e.eval(x)),
        }
    }

    /// True when no coordinate appears anywhere in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Coord(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            // accept the unicode minus sign too
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] as char == '+'
                            || bytes[i + 1] as char == '-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number literal '{text}'")))?;
                out.push(Token::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token::Ident(src[start..i].to_string()));
            }
            _ => {
                // tolerate the unicode minus some editors insert
                if src[i..].starts_with('\u{2212}') {
                    out.push(Token::Minus);
                    i += '\u{2212}'.len_utf8();
                } else {
                    return Err(Error::Parse(format!("unexpected character '{c}'")));
                }
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Token) -> Result<()> {
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse(format!("expected {tok:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            let exponent = self.unary()?; // right-associative, allows -3
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => self.ident(&name),
            other => Err(Error::Parse(format!("expected a value, found {other:?}"))),
        }
    }

    fn ident(&mut self, name: &str) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tan" => Some(Func::Tan),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(f) = func {
            self.expect(Token::LParen)?;
            let arg = self.expr()?;
            self.expect(Token::RParen)?;
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if idx >= 1 && idx <= self.dim {
                    return Ok(Expr::Coord(idx - 1));
                }
                return Err(Error::Parse(format!(
                    "coordinate {name} out of range for dim {}",
                    self.dim
                )));
            }
        }
        Err(Error::Parse(format!("unknown identifier '{name}'")))
    }
}

/// Parse one expression over coordinates x1..x`dim`.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        dim,
    };
    let e = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(Error::Parse(format!(
            "trailing tokens after expression in '{src}'"
        )));
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

/// One `domain` constraint: `lhs cmp rhs`.
#[derive(Debug, Clone)]
pub struct Inequality {
    pub lhs: Expr,
    pub cmp: Cmp,
    pub rhs: Expr,
}

impl Inequality {
    pub fn holds(&self, x: &[f64]) -> bool {
        let l = self.lhs.eval(x);
        let r = self.rhs.eval(x);
        match self.cmp {
            Cmp::Lt => l < r,
            Cmp::Le => l <= r,
            Cmp::Gt => l > r,
            Cmp::Ge => l >= r,
        }
    }
}

fn parse_inequality(src: &str, dim: usize) -> Result<Inequality> {
    for (pat, cmp) in [
        ("<=", Cmp::Le),
        (">=", Cmp::Ge),
        ("<", Cmp::Lt),
        (">", Cmp::Gt),
    ] {
        if let Some(at) = src.find(pat) {
            let lhs = parse_expr(&src[..at], dim)?;
            let rhs = parse_expr(&src[at + pat.len()..], dim)?;
            return Ok(Inequality { lhs, cmp, rhs });
        }
    }
    Err(Error::Parse(format!(
        "domain constraint '{src}' has no comparison operator"
    )))
}

fn parse_index_pair(
    key: &str,
    head: char,
    dim: usize,
    line: usize,
) -> Result<Option<(usize, usize)>> {
    let mut chars = key.chars();
    if chars.next() != Some(head) {
        return Ok(None);
    }
    let rest: String = chars.collect();
    let inner = rest
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("line {line}: expected {head}[i,j]")))?;
    let mut parts = inner.split(',');
    let i: usize = parts
        .next()
        .and_then(|p| p.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad index in {key}")))?;
    let j: usize = parts
        .next()
        .and_then(|p| p.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad index in {key}")))?;
    if parts.next().is_some() {
        return Err(Error::Parse(format!(
            "line {line}: too many indices in {key}"
        )));
    }
    if i < 1 || i > dim || j < 1 || j > dim {
        return Err(Error::Parse(format!(
            "line {line}: index out of range in {key} (dim {dim})"
        )));
    }
    Ok(Some((i - 1, j - 1)))
}

struct RawFile {
    dim: usize,
    lines: Vec<(usize, String, String)>, // (line number, key, value)
}

fn split_lines(text: &str) -> Result<RawFile> {
    let mut dim = None;
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let stripped = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let at = stripped
            .find('=')
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected key = value")))?;
        let key = stripped[..at].trim().to_string();
        let value = stripped[at + 1..].trim().to_string();
        if key == "dim" {
            let d: usize = value
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad dim '{value}'")))?;
            if d == 0 {
                return Err(Error::Parse(format!("line {lineno}: dim must be positive")));
            }
            dim = Some(d);
        } else {
            lines.push((lineno, key, value));
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("definition file must declare dim".into()))?;
    Ok(RawFile { dim, lines })
}

/// Parse a metric definition from text.
pub fn parse_metric(text: &str) -> Result<Metric> {
    let raw = split_lines(text)?;
    let dim = raw.dim;
    let mut entries: Vec<Vec<Option<Expr>>> = vec![vec![None; dim]; dim];
    let mut constraints = Vec::new();
    let mut region = vec![(-1.0, 1.0); dim];

    for (lineno, key, value) in &raw.lines {
        if key == "domain" {
            constraints.push(parse_inequality(value, dim)?);
        } else if let Some(axis) = parse_sample_axis(key, dim, *lineno)? {
            let parts: Vec<&str> = value.split(',').collect();
            let bad = || Error::Parse(format!("line {lineno}: expected sample[i] = lo, hi"));
            if parts.len() != 2 {
                return Err(bad());
            }
            let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            if !(hi > lo) {
                return Err(bad());
            }
            region[axis] = (lo, hi);
        } else if let Some((i, j)) = parse_index_pair(key, 'g', dim, *lineno)? {
            entries[i][j] = Some(parse_expr(value, dim)?);
        } else {
            return Err(Error::Parse(format!(
                "line {lineno}: '{key}' is not a metric key (expected g[i,j], domain, or sample[i])"
            )));
        }
    }

    // symmetric completion: unset entries take the mirrored expression
    for i in 0..dim {
        for j in 0..dim {
            if entries[i][j].is_none() && entries[j][i].is_some() {
                entries[i][j] = entries[j][i].clone();
            }
        }
    }

    let table: Vec<Vec<Option<Expr>>> = entries;
    let metric = Metric::new(dim, move |x| {
        DMatrix::from_fn(dim, dim, |i, j| match &table[i][j] {
            Some(e) => e.eval(x),
            None => 0.0,
        })
    })
    .with_sample_region(region);
    let metric = if constraints.is_empty() {
        metric
    } else {
        metric.with_guard(move |x| constraints.iter().all(|c| c.holds(x)))
    };
    Ok(metric.named("custom"))
}

fn parse_sample_axis(key: &str, dim: usize, line: usize) -> Result<Option<usize>> {
    let Some(rest) = key.strip_prefix("sample") else {
        return Ok(None);
    };
    let inner = rest
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("line {line}: expected sample[i]")))?;
    let axis: usize = inner
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad axis in {key}")))?;
    if axis < 1 || axis > dim {
        return Err(Error::Parse(format!(
            "line {line}: sample axis out of range (dim {dim})"
        )));
    }
    Ok(Some(axis - 1))
}

/// Parse a structural-system definition from text. `fd_step` overrides the
/// finite-difference scale of the s and H fields when set.
pub fn parse_system(text: &str, fd_step: Option<f64>) -> Result<StructuralSystem> {
    let raw = split_lines(text)?;
    let dim = raw.dim;
    let mut j_entries: Vec<Vec<Option<Expr>>> = vec![vec![None; dim]; dim];
    let mut any_j = false;
    let mut canonical = false;
    let mut s_expr: Option<Expr> = None;
    let mut h_expr: Option<Expr> = None;

    for (lineno, key, value) in &raw.lines {
        match key.as_str() {
            "canonical" => {
                canonical = match value.as_str() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {lineno}: canonical must be true or false, got '{other}'"
                        )))
                    }
                };
            }
            "s" => s_expr = Some(parse_expr(value, dim)?),
            "H" => h_expr = Some(parse_expr(value, dim)?),
            _ => {
                if let Some((i, j)) = parse_index_pair(key, 'J', dim, *lineno)? {
                    j_entries[i][j] = Some(parse_expr(value, dim)?);
                    any_j = true;
                } else {
                    return Err(Error::Parse(format!(
                        "line {lineno}: '{key}' is not a system key (expected J[i,j], s, H, canonical)"
                    )));
                }
            }
        }
    }

    if canonical && any_j {
        return Err(Error::Parse(
            "system file sets canonical = true and explicit J entries; pick one".into(),
        ));
    }
    if !canonical && !any_j {
        return Err(Error::Parse(
            "system file must define J entries or canonical = true".into(),
        ));
    }
    let h_expr = h_expr.ok_or_else(|| Error::Parse("system file must define H".into()))?;

    let j = if canonical {
        if !dim.is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "canonical = true needs an even dim, got {dim}"
            )));
        }
        StructuralMatrix::canonical(dim / 2)
    } else {
        // antisymmetric completion only where the mirror entry is unset;
        // explicitly setting both sides bypasses it
        for i in 0..dim {
            for k in 0..dim {
                if j_entries[i][k].is_none() {
                    if let Some(e) = j_entries[k][i].clone() {
                        j_entries[i][k] = Some(Expr::Neg(Box::new(e)));
                    }
                }
            }
        }
        let all_constant = j_entries
            .iter()
            .flatten()
            .flatten()
            .all(|e| e.is_constant());
        if all_constant {
            let zeros = vec![0.0; dim];
            let m = DMatrix::from_fn(dim, dim, |i, k| match &j_entries[i][k] {
                Some(e) => e.eval(&zeros),
                None => 0.0,
            });
            StructuralMatrix::constant(m)
        } else {
            let table = j_entries;
            StructuralMatrix::from_fn(dim, move |x| {
                DMatrix::from_fn(dim, dim, |i, k| match &table[i][k] {
                    Some(e) => e.eval(x),
                    None => 0.0,
                })
            })
        }
    };

    let mut s = match s_expr {
        Some(e) if e.is_constant() => ScalarField::constant(e.eval(&vec![0.0; dim])),
        Some(e) => ScalarField::new(move |x| e.eval(x)),
        None => ScalarField::constant(0.0),
    }
    .named("s");
    let mut h = ScalarField::new(move |x| h_expr.eval(x)).named("H");
    if let Some(step) = fd_step {
        s = s.with_fd_scale(step);
        h = h.with_fd_scale(step);
    }

    let sys = StructuralSystem::new(j, s, h);
    if canonical {
        sys.with_canonical_split()
    } else {
        Ok(sys)
    }
}

pub fn load_metric(path: &Path) -> Result<Metric> {
    parse_metric(&std::fs::read_to_string(path)?)
}

pub fn load_system(path: &Path, fd_step: Option<f64>) -> Result<StructuralSystem> {
    parse_system(&std::fs::read_to_string(path)?, fd_step)
}
