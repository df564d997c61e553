//! Text grammar and JSON form of symbols.
//!
//! ```text
//! expr    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := primary ('^' integer)?
//! primary := number | 'i' | xiK | etaK | '(' expr ')'
//! ```
//!
//! `xi1..xiN` are good variables and `eta1..etaM` bad variables. Division is
//! only allowed by a nonzero constant.


use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::coeff::{exact_rational, format_rational};
use super::{Coeff, MultiIndex, SymbolPoly, VariableSplit};
use crate::error::{Error, Result};

/// Optional constraints applied while parsing.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParseContext {
    /// Ambient dimension when no split is given; must cover every `xiK`.
    pub dimension: Option<usize>,
    pub split: Option<VariableSplit>,
}

impl ParseContext {
    pub fn with_dimension(dimension: usize) -> Self {
        ParseContext {
            dimension: Some(dimension),
            split: None,
        }
    }

    pub fn with_split(split: VariableSplit) -> Self {
        ParseContext {
            dimension: Some(split.dimension()),
            split: Some(split),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    I,
    Xi(usize),
    Eta(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let ch = bytes[pos];
        if ch.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let tok = match ch {
            b'+' => {
                pos += 1;
                Tok::Plus
            }
            b'-' => {
                pos += 1;
                Tok::Minus
            }
            b'*' => {
                pos += 1;
                Tok::Star
            }
            b'/' => {
                pos += 1;
                Tok::Slash
            }
            b'^' => {
                pos += 1;
                Tok::Caret
            }
            b'(' => {
                pos += 1;
                Tok::LParen
            }
            b')' => {
                pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let (value, end) = scan_number(text, pos)?;
                pos = end;
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                while pos < bytes.len() && bytes[pos].is_ascii_alphanumeric() {
                    pos += 1;
                }
                let word = &text[start..pos];
                ident_token(word).ok_or_else(|| Error::Syntax {
                    pos: start,
                    msg: format!("unknown identifier `{word}`"),
                })?
            }
            _ => {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("unexpected character `{}`", ch as char),
                })
            }
        };
        out.push((start, tok));
    }
    Ok(out)
}

fn ident_token(word: &str) -> Option<Tok> {
    if word == "i" {
        return Some(Tok::I);
    }
    let (prefix, digits) = if let Some(d) = word.strip_prefix("xi") {
        ("xi", d)
    } else if let Some(d) = word.strip_prefix("eta") {
        ("eta", d)
    } else {
        return None;
    };
    let k: usize = digits.parse().ok().filter(|&k| k >= 1)?;
    Some(if prefix == "xi" { Tok::Xi(k) } else { Tok::Eta(k) })
}

fn scan_number(text: &str, start: usize) -> Result<(BigRational, usize)> {
    let bytes = text.as_bytes();
    let mut pos = start;
    let mut mantissa = String::new();
    let mut frac_digits = 0i64;
    let mut seen_dot = false;
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
        if bytes[pos] == b'.' {
            if seen_dot {
                return Err(Error::Syntax {
                    pos,
                    msg: "second decimal point".into(),
                });
            }
            seen_dot = true;
        } else {
            mantissa.push(bytes[pos] as char);
            if seen_dot {
                frac_digits += 1;
            }
        }
        pos += 1;
    }
    if mantissa.is_empty() {
        return Err(Error::Syntax {
            pos: start,
            msg: "malformed number".into(),
        });
    }
    let mut exponent = 0i64;
    if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
        let mut p = pos + 1;
        let mut sign = 1;
        if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
            if bytes[p] == b'-' {
                sign = -1;
            }
            p += 1;
        }
        let exp_start = p;
        while p < bytes.len() && bytes[p].is_ascii_digit() {
            p += 1;
        }
        if p == exp_start {
            return Err(Error::Syntax {
                pos,
                msg: "malformed exponent".into(),
            });
        }
        exponent = sign * text[exp_start..p].parse::<i64>().map_err(|_| Error::Syntax {
            pos,
            msg: "exponent out of range".into(),
        })?;
        pos = p;
    }
    let m: BigInt = mantissa.parse().expect("digits only");
    let shift = exponent - frac_digits;
    let ten = BigInt::from(10);
    let value = if shift >= 0 {
        BigRational::from_integer(m * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(m, num_traits::pow(ten, (-shift) as usize))
    };
    Ok((value, pos))
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    dim: usize,
    good: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Syntax {
            pos: self.here(),
            msg: msg.to_string(),
        })
    }

    fn expr(&mut self) -> Result<SymbolPoly> {
        let mut negate = false;
        match self.peek() {
            Some(Tok::Plus) => self.pos += 1,
            Some(Tok::Minus) => {
                negate = true;
                self.pos += 1;
            }
            _ => {}
        }
        let mut acc = self.term()?;
        if negate {
            acc = -&acc;
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc + &t;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc - &t;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<SymbolPoly> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = &acc * &f;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let at = self.here();
                    let f = self.factor()?;
                    if !f.is_constant() || f.is_zero() {
                        return Err(Error::Syntax {
                            pos: at,
                            msg: "division only by a nonzero constant".into(),
                        });
                    }
                    let inv = f.coeff(&MultiIndex::zeros(self.dim)).recip().expect("nonzero");
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<SymbolPoly> {
        let base = self.primary()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Num(k)) if k.is_integer() => {
                    self.pos += 1;
                    let k: u32 = k
                        .to_integer()
                        .try_into()
                        .map_err(|_| Error::Syntax {
                            pos: self.here(),
                            msg: "exponent too large".into(),
                        })?;
                    if k == 0 {
                        return Ok(SymbolPoly::constant(self.dim, Coeff::one()));
                    }
                    return base.power(k);
                }
                _ => return self.err("expected a non-negative integer exponent"),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<SymbolPoly> {
        let tok = match self.peek().cloned() {
            Some(t) => t,
            None => return self.err("unexpected end of input"),
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(SymbolPoly::constant(self.dim, Coeff::real(v))),
            Tok::I => Ok(SymbolPoly::constant(self.dim, Coeff::i())),
            Tok::Xi(k) => Ok(SymbolPoly::variable(self.dim, k - 1)),
            Tok::Eta(k) => Ok(SymbolPoly::variable(self.dim, self.good + k - 1)),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.err("expected `)`"),
                }
            }
            _ => {
                self.pos -= 1;
                self.err("expected a number, `i`, a variable or `(`")
            }
        }
    }
}

/// Parses a symbol, inferring the dimension from the variables used.
pub fn parse(text: &str) -> Result<SymbolPoly> {
    parse_with(text, ParseContext::default())
}

/// Parses a symbol under explicit dimension / split constraints.
pub fn parse_with(text: &str, ctx: ParseContext) -> Result<SymbolPoly> {
    let toks = tokenize(text)?;
    let max_xi = toks
        .iter()
        .filter_map(|(_, t)| if let Tok::Xi(k) = t { Some(*k) } else { None })
        .max()
        .unwrap_or(0);
    let max_eta = toks
        .iter()
        .filter_map(|(_, t)| if let Tok::Eta(k) = t { Some(*k) } else { None })
        .max()
        .unwrap_or(0);
    let split = match ctx.split {
        Some(s) => {
            if max_xi > s.good {
                return Err(Error::DimensionMismatch {
                    expected: s.good,
                    got: max_xi,
                });
            }
            if max_eta > s.bad {
                return Err(Error::DimensionMismatch {
                    expected: s.bad,
                    got: max_eta,
                });
            }
            Some(s)
        }
        None if max_eta > 0 => Some(VariableSplit::new(max_xi.max(1), max_eta)?),
        None => None,
    };
    let dim = match (split, ctx.dimension) {
        (Some(s), Some(d)) if d != s.dimension() => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dimension(),
            })
        }
        (Some(s), _) => s.dimension(),
        (None, Some(d)) => {
            if max_xi > d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: max_xi,
                });
            }
            d
        }
        (None, None) => max_xi.max(1),
    };
    let good = split.map(|s| s.good).unwrap_or(dim);
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        dim,
        good,
    };
    if toks.is_empty() {
        return parser.err("empty symbol");
    }
    let poly = parser.expr()?;
    if parser.pos != toks.len() {
        return parser.err("unexpected token");
    }
    let poly = poly.without_split();
    match split {
        Some(s) => poly.with_split(s),
        None => Ok(poly),
    }
}

fn variable_name(j: usize, split: Option<VariableSplit>) -> String {
    match split {
        Some(s) if j >= s.good => format!("eta{}", j - s.good + 1),
        _ => format!("xi{}", j + 1),
    }
}

fn monomial_text(alpha: &MultiIndex, split: Option<VariableSplit>) -> String {
    alpha
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(j, &k)| {
            let v = variable_name(j, split);
            if k == 1 {
                v
            } else {
                format!("{v}^{k}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// Renders a symbol in the text grammar; `parse_with` under the same
/// dimension/split reproduces the terms exactly.
pub fn serialize(p: &SymbolPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut terms: Vec<(&MultiIndex, &Coeff)> = p.terms().collect();
    terms.sort_by(|(a, _), (b, _)| b.order().cmp(&a.order()).then_with(|| b.cmp(a)));
    let mut out = String::new();
    for (k, (alpha, c)) in terms.into_iter().enumerate() {
        let negative = (c.im.is_zero() && c.re < BigRational::zero())
            || (c.re.is_zero() && c.im < BigRational::zero());
        let body_coeff = if negative { -c } else { c.clone() };
        let mono = monomial_text(alpha, p.split());
        let body = if mono.is_empty() {
            body_coeff.to_string()
        } else if body_coeff.is_one() {
            mono
        } else {
            format!("{body_coeff}*{mono}")
        };
        match (k, negative) {
            (0, false) => out.push_str(&body),
            (0, true) => {
                out.push('-');
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
        }
    }
    out
}

impl std::fmt::Display for SymbolPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl std::str::FromStr for SymbolPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub alpha: Vec<u32>,
    pub re: f64,
    pub im: f64,
    /// Exact rational parts (`p/q`), written so that round trips are lossless.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolJson {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<VariableSplit>,
    pub terms: Vec<TermJson>,
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Syntax {
        pos: 0,
        msg: format!("malformed rational `{s}`"),
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

impl SymbolPoly {
    pub fn to_json(&self) -> SymbolJson {
        SymbolJson {
            dimension: self.dimension(),
            split: self.split(),
            terms: self
                .terms()
                .map(|(a, c)| {
                    let z = c.to_c64();
                    TermJson {
                        alpha: a.entries().to_vec(),
                        re: z.re,
                        im: z.im,
                        re_exact: Some(format_rational(&c.re)),
                        im_exact: Some(format_rational(&c.im)),
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(j: &SymbolJson) -> Result<Self> {
        let terms = j
            .terms
            .iter()
            .map(|t| {
                let re = match &t.re_exact {
                    Some(s) => parse_rational(s)?,
                    None => exact_rational(t.re)
                        .ok_or_else(|| Error::InvalidArgument("non-finite coefficient".into()))?,
                };
                let im = match &t.im_exact {
                    Some(s) => parse_rational(s)?,
                    None => exact_rational(t.im)
                        .ok_or_else(|| Error::InvalidArgument("non-finite coefficient".into()))?,
                };
                Ok((MultiIndex::new(t.alpha.clone()), Coeff::new(re, im)))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = SymbolPoly::from_terms(j.dimension, terms)?;
        match j.split {
            Some(s) => p.with_split(s),
            None => Ok(p),
        }
    }
}

/// Collects terms into a map keyed by exponent, for structural comparisons.
#[cfg(test)]
pub(crate) fn term_map(p: &SymbolPoly) -> std::collections::BTreeMap<MultiIndex, Coeff> {
    p.terms().map(|(a, c)| (a.clone(), c.clone())).collect()
}
