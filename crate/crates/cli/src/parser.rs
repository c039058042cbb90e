//! The expression DSL: tokens, a recursive-descent parser, and rendering.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' INT)?
//! atom   := NUMBER | 'x' | 'iota' '(' dist ')' | 'sigma' '(' expr ')'
//!         | 'd' '(' expr ')' | 'bump' '(' expr ')' | 'cutoff' '(' expr ')'
//!         | '(' expr ')'
//! dist   := 'delta' '\''* ('@' SIGNED)? | 'H' ('@' SIGNED)?
//!         | 'pp' '[' piece (';' piece)* ']'
//! piece  := '(' BOUND ',' BOUND ')' ':' SIGNED (',' SIGNED)*
//! ```

use std::collections::BTreeSet;
use std::fmt;

use colombeau::assoc::Mode;
use colombeau::distribution::Piece;
use colombeau::{Combination, Distribution, PiecewisePoly, Representative, SmoothExpr};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", expected_list(.expected))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: BTreeSet<String>,
    pub found: String,
}

fn expected_list(set: &BTreeSet<String>) -> String {
    let items: Vec<&str> = set.iter().map(String::as_str).collect();
    match items.len() {
        0 => "nothing".into(),
        1 => items[0].into(),
        _ => format!("one of {}", items.join(" ")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    X,
    Bump(Box<ExprAst>),
    Cutoff(Box<ExprAst>),
    Iota(Distribution),
    Sigma(Box<ExprAst>),
    D(Box<ExprAst>),
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(u32),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Int(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Sym(c) => write!(f, "'{c}'"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
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
            let tok = if text.bytes().all(|b| b.is_ascii_digit()) {
                match text.parse::<u32>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => Tok::Num(text.parse().unwrap_or(f64::INFINITY)),
                }
            } else {
                match text.parse::<f64>() {
                    Ok(v) => Tok::Num(v),
                    Err(_) => {
                        return Err(SyntaxError {
                            offset: start,
                            expected: ["number".to_string()].into(),
                            found: format!("'{text}'"),
                        })
                    }
                }
            };
            out.push((tok, start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*^()[],:;@'".contains(&c) {
            out.push((Tok::Sym(c as char), start));
            i += 1;
        } else {
            let ch = src[start..].chars().next().unwrap();
            return Err(SyntaxError {
                offset: start,
                expected: BTreeSet::new(),
                found: format!("'{ch}'"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    /// Alternatives tried at the current position, for error messages.
    expected: BTreeSet<String>,
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            expected: BTreeSet::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        self.expected.clear();
        t
    }

    fn error(&mut self) -> SyntaxError {
        SyntaxError {
            offset: self.offset(),
            expected: std::mem::take(&mut self.expected),
            found: self.peek().to_string(),
        }
    }

    fn check_sym(&mut self, c: char) -> bool {
        self.expected.insert(format!("'{c}'"));
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.check_sym(c) {
            Ok(())
        } else {
            Err(self.error())
        }
    }

    fn check_ident(&mut self, name: &str) -> bool {
        self.expected.insert(format!("'{name}'"));
        if matches!(self.peek(), Tok::Ident(s) if s == name) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        self.expected.insert("end of input".into());
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.error())
        }
    }

    fn expr(&mut self) -> Result<ExprAst, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            if self.check_sym('+') {
                lhs = ExprAst::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.check_sym('-') {
                lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.check_sym('*') {
            lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst, SyntaxError> {
        if self.check_sym('-') {
            return Ok(ExprAst::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.check_sym('^') {
            self.expected.insert("integer".into());
            return match self.peek().clone() {
                Tok::Int(k) => {
                    self.bump();
                    Ok(ExprAst::Pow(Box::new(base), k))
                }
                _ => Err(self.error()),
            };
        }
        Ok(base)
    }

    fn call(&mut self) -> Result<ExprAst, SyntaxError> {
        self.expect_sym('(')?;
        let e = self.expr()?;
        self.expect_sym(')')?;
        Ok(e)
    }

    fn atom(&mut self) -> Result<ExprAst, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                return Ok(ExprAst::Num(v));
            }
            Tok::Int(n) => {
                self.bump();
                return Ok(ExprAst::Num(n as f64));
            }
            _ => {}
        }
        self.expected.insert("number".into());
        if self.check_ident("x") {
            return Ok(ExprAst::X);
        }
        if self.check_ident("iota") {
            self.expect_sym('(')?;
            let u = self.dist()?;
            self.expect_sym(')')?;
            return Ok(ExprAst::Iota(u));
        }
        if self.check_ident("sigma") {
            return Ok(ExprAst::Sigma(Box::new(self.call()?)));
        }
        if self.check_ident("d") {
            return Ok(ExprAst::D(Box::new(self.call()?)));
        }
        if self.check_ident("bump") {
            return Ok(ExprAst::Bump(Box::new(self.call()?)));
        }
        if self.check_ident("cutoff") {
            return Ok(ExprAst::Cutoff(Box::new(self.call()?)));
        }
        if self.check_sym('(') {
            let e = self.expr()?;
            self.expect_sym(')')?;
            return Ok(e);
        }
        Err(self.error())
    }

    fn signed(&mut self) -> Result<f64, SyntaxError> {
        let neg = self.check_sym('-');
        self.expected.insert("number".into());
        let v = match self.peek().clone() {
            Tok::Num(v) => v,
            Tok::Int(n) => n as f64,
            _ => return Err(self.error()),
        };
        self.bump();
        Ok(if neg { -v } else { v })
    }

    fn bound(&mut self) -> Result<f64, SyntaxError> {
        let neg = self.check_sym('-');
        let v = if self.check_ident("inf") {
            f64::INFINITY
        } else {
            self.expected.insert("number".into());
            match self.peek().clone() {
                Tok::Num(v) => v,
                Tok::Int(n) => n as f64,
                _ => return Err(self.error()),
            }
        };
        if v.is_finite() {
            self.bump();
        }
        Ok(if neg { -v } else { v })
    }

    fn at(&mut self) -> Result<f64, SyntaxError> {
        if self.check_sym('@') {
            self.signed()
        } else {
            Ok(0.0)
        }
    }

    fn dist(&mut self) -> Result<Distribution, SyntaxError> {
        if self.check_ident("delta") {
            let mut order = 0;
            while self.check_sym('\'') {
                order += 1;
            }
            let at = self.at()?;
            return Ok(Distribution::dirac(order, at));
        }
        if self.check_ident("H") {
            let at = self.at()?;
            return Ok(Distribution::heaviside(at));
        }
        let start = self.offset();
        if self.check_ident("pp") {
            self.expect_sym('[')?;
            let mut pieces = vec![self.piece()?];
            while self.check_sym(';') {
                pieces.push(self.piece()?);
            }
            self.expect_sym(']')?;
            return PiecewisePoly::new(pieces)
                .map(Distribution::PiecewisePoly)
                .map_err(|e| SyntaxError {
                    offset: start,
                    expected: ["valid pieces".to_string()].into(),
                    found: e.to_string(),
                });
        }
        Err(self.error())
    }

    fn piece(&mut self) -> Result<Piece, SyntaxError> {
        self.expect_sym('(')?;
        let lo = self.bound()?;
        self.expect_sym(',')?;
        let hi = self.bound()?;
        self.expect_sym(')')?;
        self.expect_sym(':')?;
        let mut coeffs = vec![self.signed()?];
        while self.check_sym(',') {
            coeffs.push(self.signed()?);
        }
        Ok(Piece::new(lo, hi, coeffs))
    }

    fn combination(&mut self) -> Result<Combination, SyntaxError> {
        let mut terms = Vec::new();
        let mut sign = if self.check_sym('-') { -1.0 } else { 1.0 };
        loop {
            terms.push(self.comb_term(sign)?);
            if self.check_sym('+') {
                sign = 1.0;
            } else if self.check_sym('-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        terms.retain(|(c, _)| *c != 0.0);
        Ok(Combination::new(terms))
    }

    fn comb_term(&mut self, sign: f64) -> Result<(f64, Distribution), SyntaxError> {
        let coeff = match self.peek().clone() {
            Tok::Num(v) => Some(v),
            Tok::Int(n) => Some(n as f64),
            _ => None,
        };
        if let Some(c) = coeff {
            self.bump();
            if self.check_sym('*') {
                return Ok((sign * c, self.dist()?));
            }
            // a bare number is a constant function
            return Ok((sign * c, Distribution::polynomial(&[1.0])));
        }
        self.expected.insert("number".into());
        Ok((sign, self.dist()?))
    }
}

/// Parses a representative expression.
pub fn parse(src: &str) -> Result<ExprAst, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a candidate: a linear combination like `0.5*delta - H@1`, or `0`.
pub fn parse_candidate(src: &str) -> Result<Combination, SyntaxError> {
    let mut p = Parser::new(src)?;
    let c = p.combination()?;
    p.finish()?;
    Ok(c)
}

/// Parses `plain`, `strong:B`, `s:S` or `ck:K`.
pub fn parse_mode(src: &str) -> Result<Mode, String> {
    let src = src.trim();
    let (kind, arg) = match src.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (src, None),
    };
    let num = |a: Option<&str>| -> Result<f64, String> {
        let a = a.ok_or_else(|| format!("mode '{kind}' needs a value"))?;
        a.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad mode value '{a}'"))
    };
    match kind {
        "plain" if arg.is_none() => Ok(Mode::Plain),
        "strong" => Ok(Mode::Strong { beta0: num(arg)? }),
        "s" => Ok(Mode::SAssoc { s: num(arg)? }),
        "ck" => {
            let a = arg.ok_or("mode 'ck' needs a value")?;
            a.parse::<u32>()
                .map(|k| Mode::Ck { k })
                .map_err(|_| format!("bad derivative order '{a}'"))
        }
        _ => Err(format!("unknown mode '{src}' (plain, strong:B, s:S, ck:K)")),
    }
}

fn prec(e: &ExprAst) -> u8 {
    match e {
        ExprAst::Add(..) | ExprAst::Sub(..) => 1,
        ExprAst::Mul(..) => 2,
        ExprAst::Neg(_) => 3,
        ExprAst::Pow(..) => 4,
        _ => 5,
    }
}

fn render_into(e: &ExprAst, min: u8, out: &mut String) {
    let wrap = prec(e) < min;
    if wrap {
        out.push('(');
    }
    match e {
        ExprAst::Num(v) => out.push_str(&format!("{v}")),
        ExprAst::X => out.push('x'),
        ExprAst::Bump(a) => call("bump", a, out),
        ExprAst::Cutoff(a) => call("cutoff", a, out),
        ExprAst::Iota(u) => out.push_str(&format!("iota({u})")),
        ExprAst::Sigma(a) => call("sigma", a, out),
        ExprAst::D(a) => call("d", a, out),
        ExprAst::Neg(a) => {
            out.push('-');
            render_into(a, 3, out);
        }
        ExprAst::Add(a, b) | ExprAst::Sub(a, b) => {
            render_into(a, 1, out);
            out.push_str(if matches!(e, ExprAst::Add(..)) { " + " } else { " - " });
            render_into(b, 2, out);
        }
        ExprAst::Mul(a, b) => {
            render_into(a, 2, out);
            out.push('*');
            render_into(b, 3, out);
        }
        ExprAst::Pow(a, k) => {
            render_into(a, 5, out);
            out.push_str(&format!("^{k}"));
        }
    }
    if wrap {
        out.push(')');
    }
}

fn call(name: &str, arg: &ExprAst, out: &mut String) {
    out.push_str(name);
    out.push('(');
    render_into(arg, 0, out);
    out.push(')');
}

/// Canonical text; `parse(&render(t)) == Ok(t)`.
pub fn render(e: &ExprAst) -> String {
    let mut out = String::new();
    render_into(e, 0, &mut out);
    out
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowerError {
    #[error("iota(...) is not a smooth function")]
    IotaInSmooth,
    #[error("the argument of {0}(...) must be affine in x")]
    NotAffine(&'static str),
}

/// Coefficients `[c0, c1, ...]` when `e` is a polynomial in `x`.
fn as_poly(e: &ExprAst) -> Option<Vec<f64>> {
    use colombeau::poly;
    Some(match e {
        ExprAst::Num(v) => vec![*v],
        ExprAst::X => vec![0.0, 1.0],
        ExprAst::Neg(a) => poly::scale(&as_poly(a)?, -1.0),
        ExprAst::Add(a, b) => poly::add(&as_poly(a)?, &as_poly(b)?),
        ExprAst::Sub(a, b) => poly::add(&as_poly(a)?, &poly::scale(&as_poly(b)?, -1.0)),
        ExprAst::Mul(a, b) => poly::mul(&as_poly(a)?, &as_poly(b)?),
        ExprAst::Pow(a, k) => {
            let p = as_poly(a)?;
            (0..*k).fold(vec![1.0], |acc, _| poly::mul(&acc, &p))
        }
        ExprAst::D(a) => poly::derivative(&as_poly(a)?),
        ExprAst::Sigma(a) => as_poly(a)?,
        _ => return None,
    })
}

fn composed(base: SmoothExpr, name: &'static str, arg: &ExprAst) -> Result<SmoothExpr, LowerError> {
    let p = colombeau::poly::trim(as_poly(arg).ok_or(LowerError::NotAffine(name))?);
    match p.as_slice() {
        [] => Ok(base.affine(0.0, 0.0)),
        [b] => Ok(base.affine(0.0, *b)),
        [b, a] => Ok(base.affine(*a, *b)),
        _ => Err(LowerError::NotAffine(name)),
    }
}

/// Lowers an expression without `iota` to a smooth function of `x`.
pub fn to_smooth(e: &ExprAst) -> Result<SmoothExpr, LowerError> {
    Ok(match e {
        ExprAst::Num(v) => SmoothExpr::constant(*v),
        ExprAst::X => SmoothExpr::var(),
        ExprAst::Bump(a) => composed(SmoothExpr::bump(), "bump", a)?,
        ExprAst::Cutoff(a) => composed(SmoothExpr::cutoff(), "cutoff", a)?,
        ExprAst::Iota(_) => return Err(LowerError::IotaInSmooth),
        ExprAst::Sigma(a) => to_smooth(a)?,
        ExprAst::D(a) => to_smooth(a)?.derive(),
        ExprAst::Neg(a) => -to_smooth(a)?,
        ExprAst::Add(a, b) => to_smooth(a)? + to_smooth(b)?,
        ExprAst::Sub(a, b) => to_smooth(a)? - to_smooth(b)?,
        ExprAst::Mul(a, b) => to_smooth(a)? * to_smooth(b)?,
        ExprAst::Pow(a, k) => to_smooth(a)?.powi(*k),
    })
}

/// Lowers an expression to a representative.
pub fn to_representative(e: &ExprAst) -> Result<Representative, LowerError> {
    Ok(match e {
        ExprAst::Num(v) => Representative::constant(*v),
        ExprAst::X => Representative::var(),
        ExprAst::Bump(_) | ExprAst::Cutoff(_) | ExprAst::Sigma(_) => Representative::sigma(to_smooth(e)?),
        ExprAst::Iota(u) => Representative::iota(u.clone()),
        ExprAst::D(a) => to_representative(a)?.deriv(),
        ExprAst::Neg(a) => -to_representative(a)?,
        ExprAst::Add(a, b) => to_representative(a)? + to_representative(b)?,
        ExprAst::Sub(a, b) => to_representative(a)? - to_representative(b)?,
        ExprAst::Mul(a, b) => to_representative(a)? * to_representative(b)?,
        ExprAst::Pow(a, k) => to_representative(a)?.powi(*k),
    })
}
