//! Exact polynomial symbols `P(ξ)` with complex-rational coefficients.
//!
//! Coefficients are kept exact so that derivative identities, translations
//! and lineality computations are decided without rounding. A double
//! precision copy of every term is cached at construction and used for
//! evaluation on grids and spheres.

mod coeff;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use coeff::Coeff;
pub use parse::{parse, parse_with, serialize, ParseContext, SymbolJson, TermJson};

use crate::error::{Error, Result};

/// Default bound on the number of terms produced by [`SymbolPoly::power`].
pub const DEFAULT_TERM_CAP: usize = 100_000;

/// Exponent vector of a monomial, one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, j: usize) -> Self {
        let mut v = vec![0; dim];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|α| = Σ α_j`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// All multi-indices `β ≤ self` (componentwise), in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zeros(self.dim())];
        for (j, &a) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
            for base in &out {
                for k in 0..=a {
                    let mut b = base.clone();
                    b.0[j] = k;
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    /// Real monomial `ξ^α`.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(xi)
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Split `ξ = (ξ', ξ'')` into `good` variables (regularity is gained) and
/// `bad` variables. Good variables come first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSplit {
    #[serde(rename = "n")]
    pub good: usize,
    #[serde(rename = "m")]
    pub bad: usize,
}

impl VariableSplit {
    pub fn new(good: usize, bad: usize) -> Result<Self> {
        if good == 0 {
            return Err(Error::InvalidSplit(
                "at least one good variable is required".into(),
            ));
        }
        Ok(VariableSplit { good, bad })
    }

    pub fn dimension(&self) -> usize {
        self.good + self.bad
    }
}

/// An affine form `Σ_k a_k y_k + b` used by [`SymbolPoly::substitute_affine`].
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub linear: Vec<Coeff>,
    pub constant: Coeff,
}

impl AffineForm {
    pub fn variable(dim: usize, j: usize) -> Self {
        let mut linear = vec![Coeff::zero(); dim];
        linear[j] = Coeff::one();
        AffineForm {
            linear,
            constant: Coeff::zero(),
        }
    }
}

/// A polynomial symbol in `dimension` variables.
#[derive(Clone)]
pub struct SymbolPoly {
    dimension: usize,
    split: Option<VariableSplit>,
    terms: BTreeMap<MultiIndex, Coeff>,
    numeric: Vec<(Vec<u32>, Complex64)>,
}

impl PartialEq for SymbolPoly {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.terms == other.terms
    }
}

impl fmt::Debug for SymbolPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolPoly")
            .field("dimension", &self.dimension)
            .field("split", &self.split)
            .field("text", &self.to_string())
            .finish()
    }
}

impl SymbolPoly {
    fn from_map(dimension: usize, split: Option<VariableSplit>, mut terms: BTreeMap<MultiIndex, Coeff>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        let numeric = terms
            .iter()
            .map(|(a, c)| (a.0.clone(), c.to_c64()))
            .collect();
        SymbolPoly {
            dimension,
            split,
            terms,
            numeric,
        }
    }

    pub fn zero(dimension: usize) -> Self {
        SymbolPoly::from_map(dimension, None, BTreeMap::new())
    }

    pub fn constant(dimension: usize, c: Coeff) -> Self {
        SymbolPoly::monomial(MultiIndex::zeros(dimension), c)
    }

    pub fn monomial(alpha: MultiIndex, c: Coeff) -> Self {
        let dimension = alpha.dim();
        let mut terms = BTreeMap::new();
        terms.insert(alpha, c);
        SymbolPoly::from_map(dimension, None, terms)
    }

    /// The coordinate function `ξ_j`.
    pub fn variable(dimension: usize, j: usize) -> Self {
        SymbolPoly::monomial(MultiIndex::unit(dimension, j), Coeff::one())
    }

    /// Builds a polynomial from `(α, c)` pairs; repeated exponents are summed.
    pub fn from_terms<I>(dimension: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Coeff)>,
    {
        let mut map: BTreeMap<MultiIndex, Coeff> = BTreeMap::new();
        for (alpha, c) in terms {
            if alpha.dim() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: alpha.dim(),
                });
            }
            *map.entry(alpha).or_insert_with(Coeff::zero) += &c;
        }
        Ok(SymbolPoly::from_map(dimension, None, map))
    }

    pub fn with_split(mut self, split: VariableSplit) -> Result<Self> {
        if split.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: split.dimension(),
            });
        }
        self.split = Some(split);
        Ok(self)
    }

    pub fn without_split(mut self) -> Self {
        self.split = None;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn split(&self) -> Option<VariableSplit> {
        self.split
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Coeff)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Coeff {
        self.terms.get(alpha).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|a| a.is_zero())
    }

    /// Total degree; `0` for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.order()).max().unwrap_or(0)
    }

    /// Degree in the variables listed in `vars`.
    pub fn degree_in(&self, vars: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|a| vars.iter().map(|&j| a.0[j]).sum())
            .max()
            .unwrap_or(0)
    }

    /// Largest exponent of each variable.
    pub fn max_exponents(&self) -> MultiIndex {
        let mut m = vec![0u32; self.dimension];
        for a in self.terms.keys() {
            for (mj, &aj) in m.iter_mut().zip(&a.0) {
                *mj = (*mj).max(aj);
            }
        }
        MultiIndex(m)
    }

    pub fn scale(&self, c: &Coeff) -> SymbolPoly {
        let terms = self
            .terms
            .iter()
            .map(|(a, v)| (a.clone(), v * c))
            .collect();
        SymbolPoly::from_map(self.dimension, self.split, terms)
    }

    /// Polynomial whose coefficients are the real parts of `self`'s; equals `Re P(ξ)` for real `ξ`.
    pub fn re_part(&self) -> SymbolPoly {
        let terms = self
            .terms
            .iter()
            .map(|(a, c)| (a.clone(), Coeff::real(c.re.clone())))
            .collect();
        SymbolPoly::from_map(self.dimension, self.split, terms)
    }

    pub fn im_part(&self) -> SymbolPoly {
        let terms = self
            .terms
            .iter()
            .map(|(a, c)| (a.clone(), Coeff::real(c.im.clone())))
            .collect();
        SymbolPoly::from_map(self.dimension, self.split, terms)
    }

    pub fn has_real_coefficients(&self) -> bool {
        self.terms.values().all(Coeff::is_real)
    }

    /// Exact evaluation up to the final conversion to double precision.
    pub fn evaluate(&self, xi: &[Complex64]) -> Result<Complex64> {
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        Ok(self
            .numeric
            .iter()
            .map(|(a, c)| {
                a.iter()
                    .zip(xi)
                    .fold(*c, |acc, (&k, &x)| acc * x.powu(k))
            })
            .sum())
    }

    /// Evaluation at a real point. The caller guarantees `xi.len() == dimension`.
    #[inline]
    pub fn eval_real(&self, xi: &[f64]) -> Complex64 {
        debug_assert_eq!(xi.len(), self.dimension);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, c) in &self.numeric {
            let mut m = 1.0;
            for (&k, &x) in a.iter().zip(xi) {
                if k > 0 {
                    m *= x.powi(k as i32);
                }
            }
            acc += c * m;
        }
        acc
    }

    /// `∂^α P` with exact coefficients.
    pub fn derive(&self, alpha: &MultiIndex) -> SymbolPoly {
        assert_eq!(alpha.dim(), self.dimension, "multi-index dimension");
        let mut terms = BTreeMap::new();
        for (beta, c) in &self.terms {
            if let Some(rest) = beta.checked_sub(alpha) {
                let mut factor: u64 = 1;
                for (&b, &a) in beta.0.iter().zip(&alpha.0) {
                    for k in 0..a {
                        factor *= u64::from(b - k);
                    }
                }
                terms.insert(rest, c.scale_int(factor));
            }
        }
        SymbolPoly::from_map(self.dimension, self.split, terms)
    }

    /// All nonzero derivatives `(α, P^(α))`, including `α = 0`.
    pub fn derivative_table(&self) -> DerivativeTable {
        let entries = self
            .max_exponents()
            .below()
            .into_iter()
            .map(|alpha| {
                let d = self.derive(&alpha);
                (alpha, d)
            })
            .filter(|(_, d)| !d.is_zero())
            .collect();
        DerivativeTable { entries }
    }

    /// `P̃(ξ) = (Σ_α |P^(α)(ξ)|²)^{1/2}` at a real point.
    pub fn tilde_strength(&self, xi: &[f64]) -> f64 {
        self.derivative_table().tilde(xi)
    }

    /// Substitutes each variable `ξ_j` by the affine form `forms[j]` in `new_dim` variables.
    pub fn substitute_affine(&self, forms: &[AffineForm], new_dim: usize) -> Result<SymbolPoly> {
        if forms.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: forms.len(),
            });
        }
        let form_polys: Vec<SymbolPoly> = forms
            .iter()
            .map(|f| {
                if f.linear.len() != new_dim {
                    return Err(Error::DimensionMismatch {
                        expected: new_dim,
                        got: f.linear.len(),
                    });
                }
                let mut terms: Vec<(MultiIndex, Coeff)> = f
                    .linear
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (MultiIndex::unit(new_dim, k), a.clone()))
                    .collect();
                terms.push((MultiIndex::zeros(new_dim), f.constant.clone()));
                SymbolPoly::from_terms(new_dim, terms)
            })
            .collect::<Result<_>>()?;
        let max_exp = self.max_exponents();
        let powers: Vec<Vec<SymbolPoly>> = form_polys
            .iter()
            .zip(max_exp.entries())
            .map(|(p, &k)| {
                let mut pw = vec![SymbolPoly::constant(new_dim, Coeff::one())];
                for _ in 0..k {
                    let next = pw.last().unwrap() * p;
                    pw.push(next);
                }
                pw
            })
            .collect();
        let mut out = SymbolPoly::zero(new_dim);
        for (alpha, c) in &self.terms {
            let mut term = SymbolPoly::constant(new_dim, c.clone());
            for (j, &k) in alpha.0.iter().enumerate() {
                if k > 0 {
                    term = &term * &powers[j][k as usize];
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// `ξ ↦ P(ξ + tη)` by exact Taylor re-expansion.
    pub fn translate(&self, eta: &[Coeff], t: &Coeff) -> Result<SymbolPoly> {
        if eta.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: eta.len(),
            });
        }
        let forms: Vec<AffineForm> = eta
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let mut f = AffineForm::variable(self.dimension, j);
                f.constant = e * t;
                f
            })
            .collect();
        let mut out = self.substitute_affine(&forms, self.dimension)?;
        out.split = self.split;
        Ok(out)
    }

    /// `(ξ, t) ↦ P(ξ + tη)` as a polynomial in `dimension + 1` variables, `t` last.
    pub fn translate_symbolic(&self, eta: &[Coeff]) -> Result<SymbolPoly> {
        if eta.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: eta.len(),
            });
        }
        let d = self.dimension + 1;
        let forms: Vec<AffineForm> = eta
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let mut f = AffineForm::variable(d, j);
                f.linear[self.dimension] = e.clone();
                f
            })
            .collect();
        self.substitute_affine(&forms, d)
    }

    /// Places variable `j` of `self` at position `positions[j]` of a `new_dim`-variable polynomial.
    pub fn embed(&self, new_dim: usize, positions: &[usize]) -> Result<SymbolPoly> {
        if positions.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: positions.len(),
            });
        }
        let mut terms = BTreeMap::new();
        for (a, c) in &self.terms {
            let mut e = vec![0u32; new_dim];
            for (j, &p) in positions.iter().enumerate() {
                if p >= new_dim {
                    return Err(Error::InvalidArgument(format!(
                        "embedding position {p} outside dimension {new_dim}"
                    )));
                }
                e[p] += a.0[j];
            }
            terms.insert(MultiIndex(e), c.clone());
        }
        Ok(SymbolPoly::from_map(new_dim, None, terms))
    }

    /// `P^N`, failing when an intermediate product exceeds [`DEFAULT_TERM_CAP`] terms.
    pub fn power(&self, n: u32) -> Result<SymbolPoly> {
        self.power_capped(n, DEFAULT_TERM_CAP)
    }

    pub fn power_capped(&self, n: u32, cap: usize) -> Result<SymbolPoly> {
        if n == 0 {
            return Err(Error::InvalidArgument("power exponent must be >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = &acc * self;
            if acc.term_count() > cap {
                return Err(Error::TermCap {
                    count: acc.term_count(),
                    cap,
                });
            }
        }
        acc.split = self.split;
        Ok(acc)
    }

    /// Coefficients `c_0, …, c_d` (ascending) of `s ↦ P(origin + s·dir)`.
    pub fn along_line(&self, origin: &[f64], dir: &[f64]) -> Vec<Complex64> {
        let deg = self.degree() as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); deg + 1];
        let mut scratch = Vec::with_capacity(deg + 1);
        for (a, c) in &self.numeric {
            scratch.clear();
            scratch.push(*c);
            for (j, &k) in a.iter().enumerate() {
                for _ in 0..k {
                    // multiply by (origin_j + s·dir_j)
                    scratch.push(Complex64::new(0.0, 0.0));
                    for i in (0..scratch.len()).rev() {
                        let lower = if i > 0 { scratch[i - 1] } else { Complex64::new(0.0, 0.0) };
                        scratch[i] = scratch[i] * origin[j] + lower * dir[j];
                    }
                }
            }
            for (o, s) in out.iter_mut().zip(&scratch) {
                *o += s;
            }
        }
        out
    }

    fn binary(&self, rhs: &SymbolPoly, sign: i8) -> SymbolPoly {
        assert_eq!(self.dimension, rhs.dimension, "symbol dimension mismatch");
        let mut terms = self.terms.clone();
        for (a, c) in &rhs.terms {
            let e = terms.entry(a.clone()).or_insert_with(Coeff::zero);
            if sign > 0 {
                *e += c;
            } else {
                *e = &*e - c;
            }
        }
        SymbolPoly::from_map(self.dimension, self.split.or(rhs.split), terms)
    }
}

impl<'a> Add<&'a SymbolPoly> for &'a SymbolPoly {
    type Output = SymbolPoly;
    fn add(self, rhs: &SymbolPoly) -> SymbolPoly {
        self.binary(rhs, 1)
    }
}

impl<'a> Sub<&'a SymbolPoly> for &'a SymbolPoly {
    type Output = SymbolPoly;
    fn sub(self, rhs: &SymbolPoly) -> SymbolPoly {
        self.binary(rhs, -1)
    }
}

impl<'a> Mul<&'a SymbolPoly> for &'a SymbolPoly {
    type Output = SymbolPoly;
    fn mul(self, rhs: &SymbolPoly) -> SymbolPoly {
        assert_eq!(self.dimension, rhs.dimension, "symbol dimension mismatch");
        let mut terms: BTreeMap<MultiIndex, Coeff> = BTreeMap::new();
        for (a, c) in &self.terms {
            for (b, d) in &rhs.terms {
                *terms.entry(a.add(b)).or_insert_with(Coeff::zero) += &(c * d);
            }
        }
        SymbolPoly::from_map(self.dimension, self.split.or(rhs.split), terms)
    }
}

impl Neg for &SymbolPoly {
    type Output = SymbolPoly;
    fn neg(self) -> SymbolPoly {
        self.scale(&Coeff::from_int(-1))
    }
}

/// Nonzero derivatives of one polynomial, precomputed for repeated `P̃` evaluation.
#[derive(Clone, Debug)]
pub struct DerivativeTable {
    entries: Vec<(MultiIndex, SymbolPoly)>,
}

impl DerivativeTable {
    pub fn entries(&self) -> &[(MultiIndex, SymbolPoly)] {
        &self.entries
    }

    pub fn tilde(&self, xi: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|(_, d)| d.eval_real(xi).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::parse::{parse, parse_with};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        let p = parse("xi1^2").unwrap();
        assert_eq!(p.evaluate(&[c(3.0, 0.0)]).unwrap(), c(9.0, 0.0));
        let heat = parse("xi1^2 + i*xi2").unwrap();
        assert_eq!(heat.evaluate(&[c(1.0, 0.0), c(2.0, 0.0)]).unwrap(), c(1.0, 2.0));
        let z = SymbolPoly::zero(3);
        assert_eq!(z.evaluate(&[c(1.0, 1.0); 3]).unwrap(), c(0.0, 0.0));
        assert!(matches!(
            heat.evaluate(&[c(1.0, 0.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn derive_examples() {
        let p = parse("xi1^2").unwrap();
        assert_eq!(p.derive(&MultiIndex::new(vec![1])), parse("2*xi1").unwrap());
        assert!(p.derive(&MultiIndex::new(vec![3])).is_zero());
        assert_eq!(p.derive(&MultiIndex::zeros(1)), p);
        let q = parse("xi1^2*xi2").unwrap();
        assert_eq!(q.derive(&MultiIndex::new(vec![1, 1])), parse_with("2*xi1", ParseContext::with_dimension(2)).unwrap());
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(parse("xi1").unwrap().tilde_strength(&[0.0]), 1.0);
        assert!((parse("xi1^2").unwrap().tilde_strength(&[1.0]) - 3.0).abs() < 1e-15);
        assert_eq!(SymbolPoly::zero(1).tilde_strength(&[2.0]), 0.0);
    }

    #[test]
    fn translate_examples() {
        let p = parse("xi1^2").unwrap();
        let t = p.translate(&[Coeff::one()], &Coeff::one()).unwrap();
        assert_eq!(t, parse("xi1^2 + 2*xi1 + 1").unwrap());
        let q = parse("xi1^2 + xi2").unwrap();
        assert_eq!(q.translate(&[Coeff::one(), Coeff::zero()], &Coeff::zero()).unwrap(), q);
        let s = q.translate(&[Coeff::zero(), Coeff::one()], &Coeff::i()).unwrap();
        assert_eq!(s, parse("xi1^2 + xi2 + i").unwrap());
    }

    #[test]
    fn power_examples() {
        assert_eq!(parse("xi1").unwrap().power(3).unwrap(), parse("xi1^3").unwrap());
        assert_eq!(
            parse("xi1 + 1").unwrap().power(2).unwrap(),
            parse("xi1^2 + 2*xi1 + 1").unwrap()
        );
        assert_eq!(
            parse("xi1^2 + i*xi2").unwrap().power(2).unwrap(),
            parse("xi1^4 + 2*i*xi1^2*xi2 - xi2^2").unwrap()
        );
        let big = parse("xi1 + xi2 + xi3 + 1").unwrap();
        assert!(matches!(big.power_capped(6, 50), Err(Error::TermCap { .. })));
    }

    #[test]
    fn along_line_matches_evaluation() {
        let p = parse("xi1^3 - 2*i*xi1*xi2 + xi2^2 + 5").unwrap();
        let coeffs = p.along_line(&[0.5, -1.5], &[2.0, 0.25]);
        for s in [-1.0, 0.0, 0.3, 2.0] {
            let direct = p.eval_real(&[0.5 + 2.0 * s, -1.5 + 0.25 * s]);
            let via: Complex64 = coeffs.iter().rev().fold(c(0.0, 0.0), |acc, k| acc * s + k);
            assert!((direct - via).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    fn small_poly() -> impl Strategy<Value = SymbolPoly> {
        prop::collection::vec(((0u32..3, 0u32..3), (-3i64..4, -2i64..3)), 1..5).prop_map(|ts| {
            SymbolPoly::from_terms(
                2,
                ts.into_iter().map(|((a, b), (re, im))| {
                    (
                        MultiIndex::new(vec![a, b]),
                        Coeff::new(
                            num_rational::BigRational::from_integer(re.into()),
                            num_rational::BigRational::from_integer(im.into()),
                        ),
                    )
                }),
            )
            .unwrap()
        })
    }

    fn brute_tilde_sq(p: &SymbolPoly, xi: &[f64]) -> f64 {
        // Term-by-term: ∂^α of c·ξ^β is c·β!/(β-α)!·ξ^(β-α); sum |·|² over every α up to degree.
        let deg = p.degree();
        let mut total = 0.0;
        for a0 in 0..=deg {
            for a1 in 0..=deg {
                let mut val = c(0.0, 0.0);
                for (beta, coef) in p.terms() {
                    let (b0, b1) = (beta.entries()[0], beta.entries()[1]);
                    if b0 < a0 || b1 < a1 {
                        continue;
                    }
                    let ff = |b: u32, a: u32| ((b - a + 1)..=b).map(f64::from).product::<f64>();
                    val += coef.to_c64()
                        * ff(b0, a0)
                        * ff(b1, a1)
                        * xi[0].powi((b0 - a0) as i32)
                        * xi[1].powi((b1 - a1) as i32);
                }
                total += val.norm_sqr();
            }
        }
        total
    }

    proptest! {
        #[test]
        fn derive_composes(p in small_poly(), a in (0u32..3, 0u32..3), b in (0u32..3, 0u32..3)) {
            let alpha = MultiIndex::new(vec![a.0, a.1]);
            let beta = MultiIndex::new(vec![b.0, b.1]);
            prop_assert_eq!(p.derive(&alpha).derive(&beta), p.derive(&alpha.add(&beta)));
        }

        #[test]
        fn translate_composes(p in small_poly(), e in (-3i64..4, -3i64..4), s in -3i64..4, t in -3i64..4) {
            let eta = [Coeff::from_int(e.0), Coeff::from_ratio(e.1, 2)];
            let once = p.translate(&eta, &Coeff::from_int(s + t)).unwrap();
            let twice = p
                .translate(&eta, &Coeff::from_int(s)).unwrap()
                .translate(&eta, &Coeff::from_int(t)).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn power_evaluates_as_power(p in small_poly(), n in 1u32..5, x in -10.0f64..10.0, y in -10.0f64..10.0) {
            prop_assume!((x * x + y * y).sqrt() <= 10.0);
            let lhs = p.power(n).unwrap().eval_real(&[x, y]);
            let rhs = p.eval_real(&[x, y]).powu(n);
            // Relative to the size of the summed terms, not the (possibly cancelling) value.
            let scale: f64 = p.terms()
                .map(|(a, c)| c.to_c64().norm() * a.monomial(&[x.abs(), y.abs()]))
                .sum::<f64>()
                .powi(n as i32);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn tilde_matches_brute_force(p in small_poly(), x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let t = p.tilde_strength(&[x, y]);
            let b = brute_tilde_sq(&p, &[x, y]);
            prop_assert!((t * t - b).abs() <= 1e-10 * b.max(1.0));
        }
    }
}
