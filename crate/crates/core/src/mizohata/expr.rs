//! Scalar coefficient fields: closed-form expressions and tabulated grids.
//!
//! Expressions use `x1..xN` for good spatial variables and `y1..yM` for bad
//! ones, the constants `pi` and `i`, the operators `+ - * / ^`, and the
//! functions `sin cos exp sqrt abs tanh bump`. `bump(t)` is the smooth
//! compactly supported function `exp(1 - 1/(1 - t²))` on `|t| < 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(Complex64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Tanh,
    Bump,
}

/// A parsed closed-form coefficient expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    uses_vars: bool,
}

pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    good: usize,
    bad: usize,
}

impl Lexer<'_> {
    fn skip(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Coefficient(format!("position {}: {}", self.pos, msg.into())))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = Node::Bin(op as char, Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Node> {
        let mut acc = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = Node::Bin(op as char, Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of expression");
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err("expected `)`");
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
                let save = self.pos;
                self.pos += 1;
                if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                    self.pos += 1;
                }
                let digits = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos == digits {
                    self.pos = save;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            return match text.parse::<f64>() {
                Ok(v) => Ok(Node::Num(Complex64::new(v, 0.0))),
                Err(_) => self.err(format!("malformed number `{text}`")),
            };
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            let func = match word {
                "sin" => Some(Func::Sin),
                "cos" => Some(Func::Cos),
                "exp" => Some(Func::Exp),
                "sqrt" => Some(Func::Sqrt),
                "abs" => Some(Func::Abs),
                "tanh" => Some(Func::Tanh),
                "bump" => Some(Func::Bump),
                _ => None,
            };
            if let Some(f) = func {
                if self.peek() != Some(b'(') {
                    return self.err(format!("`{word}` needs parentheses"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                return Ok(Node::Call(f, Box::new(arg)));
            }
            return match word {
                "pi" => Ok(Node::Num(Complex64::new(std::f64::consts::PI, 0.0))),
                "i" => Ok(Node::Num(Complex64::new(0.0, 1.0))),
                _ => {
                    let (kind, digits) = word.split_at(1);
                    let k: usize = match digits.parse() {
                        Ok(k) if k >= 1 => k,
                        _ => return self.err(format!("unknown name `{word}`")),
                    };
                    match kind {
                        "x" if k <= self.good => Ok(Node::Var(k - 1)),
                        "y" if k <= self.bad => Ok(Node::Var(self.good + k - 1)),
                        _ => self.err(format!("variable `{word}` outside the split")),
                    }
                }
            };
        }
        self.err(format!("unexpected character `{}`", c as char))
    }
}

fn has_vars(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) | Node::Call(_, a) => has_vars(a),
        Node::Bin(_, a, b) => has_vars(a) || has_vars(b),
    }
}

fn eval(n: &Node, p: &[f64]) -> Complex64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(k) => Complex64::new(p[*k], 0.0),
        Node::Neg(a) => -eval(a, p),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, p), eval(b, p));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => {
                    if a.im == 0.0 && b.im == 0.0 && (a.re >= 0.0 || b.re.fract() == 0.0) {
                        Complex64::new(a.re.powf(b.re), 0.0)
                    } else {
                        a.powc(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, p);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => Complex64::new(v.norm(), 0.0),
                Func::Tanh => v.tanh(),
                Func::Bump => Complex64::new(bump(v.re), 0.0),
            }
        }
    }
}

impl Expr {
    pub fn parse(text: &str, good: usize, bad: usize) -> Result<Self> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
            good,
            bad,
        };
        let root = lx.expr()?;
        if lx.peek().is_some() {
            return lx.err("trailing input");
        }
        Ok(Expr {
            source: text.to_string(),
            uses_vars: has_vars(&root),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_constant(&self) -> bool {
        !self.uses_vars
    }

    pub fn eval(&self, point: &[f64]) -> Complex64 {
        eval(&self.root, point)
    }
}

/// Samples on a rectangular grid with multilinear interpolation; queries
/// outside the grid are clamped to its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedField {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
}

impl TabulatedField {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lower.len() != dim || self.upper.len() != dim || self.shape.len() != dim {
            return Err(Error::Coefficient(format!("tabulated field must have {dim} axes")));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::Coefficient("tabulated field needs >= 2 samples per axis".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(u > l)) {
            return Err(Error::Coefficient("tabulated field has an empty axis range".into()));
        }
        let count: usize = self.shape.iter().product();
        if count != self.values.len() {
            return Err(Error::Coefficient(format!(
                "tabulated field has {} values, shape needs {count}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Coefficient("tabulated field has non-finite values".into()));
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let dim = self.shape.len();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for k in 0..dim {
            let n = self.shape[k];
            let t = ((point[k] - self.lower[k]) / (self.upper[k] - self.lower[k])).clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (t.floor() as usize).min(n - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..dim {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * self.shape[k] + base[k] + bit;
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }
}

/// A variable coefficient `c(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CoeffField {
    Expr(Expr),
    Grid(TabulatedField),
}

impl CoeffField {
    pub fn eval(&self, point: &[f64]) -> Complex64 {
        match self {
            CoeffField::Expr(e) => e.eval(point),
            CoeffField::Grid(g) => Complex64::new(g.eval(point), 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CoeffField::Expr(e) => e.is_constant(),
            CoeffField::Grid(g) => g.is_constant(),
        }
    }
}
