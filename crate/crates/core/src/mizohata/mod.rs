//! Mizohata representations, variable-coefficient operator descriptions,
//! frozen operators and the constant-strength form around a point.

pub mod expr;

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use expr::{bump, CoeffField, Expr, TabulatedField};

use crate::classify::{compare_strength, eta_coefficients, ClassifyOptions, StrengthOrder};
use crate::error::{Error, Result};
use crate::symbol::{parse_with, Coeff, MultiIndex, ParseContext, SymbolPoly, VariableSplit};

/// One `(P_j, Q_j)` pair: `P_j` over the good variables, `Q_j = η^α` monic.
#[derive(Clone, Debug, PartialEq)]
pub struct MizohataTerm {
    pub p: SymbolPoly,
    pub q: SymbolPoly,
    pub alpha: MultiIndex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MizohataForm {
    pub split: VariableSplit,
    pub p0: SymbolPoly,
    pub terms: Vec<MizohataTerm>,
    pub origin: Option<Vec<f64>>,
}

impl MizohataForm {
    /// `P₀ + Σ P_j Q_j` in the full set of variables.
    pub fn reassemble(&self) -> SymbolPoly {
        let nu = self.split.dimension();
        let good: Vec<usize> = (0..self.split.good).collect();
        let bad: Vec<usize> = (self.split.good..nu).collect();
        let mut acc = self.p0.embed(nu, &good).expect("good positions in range");
        for t in &self.terms {
            let p = t.p.embed(nu, &good).expect("good positions in range");
            let q = t.q.embed(nu, &bad).expect("bad positions in range");
            acc = &acc + &(&p * &q);
        }
        acc.with_split(self.split).expect("split matches dimension")
    }
}

/// Exact extraction of `P(ξ, η) = P₀(ξ) + Σ_{α≠0} P_α(ξ) η^α`.
pub fn decompose_constant(p: &SymbolPoly) -> Result<MizohataForm> {
    let (split, coeffs) = eta_coefficients(p)?;
    let mut p0 = SymbolPoly::zero(split.good);
    let mut terms = Vec::new();
    for (alpha, pa) in coeffs {
        if alpha.is_zero() {
            p0 = pa;
        } else {
            terms.push(MizohataTerm {
                q: SymbolPoly::monomial(alpha.clone(), Coeff::one()),
                p: pa,
                alpha,
            });
        }
    }
    Ok(MizohataForm {
        split,
        p0,
        terms,
        origin: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    pub holds: bool,
    pub p0_order: StrengthOrder,
    pub term_orders: Vec<StrengthOrder>,
}

/// Checks `P₀ ~ M` and `P_j ≺≺ M` for every term.
pub fn verify_type(form: &MizohataForm, m: &SymbolPoly, opts: &ClassifyOptions) -> Result<TypeReport> {
    if m.dimension() != form.split.good {
        return Err(Error::DimensionMismatch {
            expected: form.split.good,
            got: m.dimension(),
        });
    }
    let p0_order = if form.p0.is_zero() {
        StrengthOrder::StrictlyWeaker
    } else {
        compare_strength(&form.p0, m, opts)?.order
    };
    let term_orders = form
        .terms
        .iter()
        .map(|t| compare_strength(&t.p, m, opts).map(|r| r.order))
        .collect::<Result<Vec<_>>>()?;
    Ok(TypeReport {
        holds: p0_order == StrengthOrder::Equivalent && term_orders.iter().all(|o| *o == StrengthOrder::StrictlyWeaker),
        p0_order,
        term_orders,
    })
}

/// Serialized operator description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDescription {
    pub type_symbol: String,
    pub split: VariableSplit,
    pub compact_set: CompactSet,
    pub terms: Vec<TermDescription>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    /// `[lo, hi]` per spatial coordinate, good coordinates first.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDescription {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff_expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff_grid: Option<TabulatedField>,
    pub symbol: String,
}

/// `c(x, y)·S(ξ, η)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableTerm {
    pub coeff: CoeffField,
    pub symbol: SymbolPoly,
}

/// `L(x, y, D) = Σ_j c_j(x, y) S_j(D)` inside the compact set, the type
/// operator `M(D_x)` outside.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableOperator {
    pub split: VariableSplit,
    pub type_symbol: SymbolPoly,
    pub compact: Vec<[f64; 2]>,
    pub terms: Vec<VariableTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrozenOperator {
    pub point: Vec<f64>,
    pub symbol: SymbolPoly,
}

/// `d_j(x, y) = c_j(x, y) - c_j(x₀, y₀)` paired with `R_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub field: CoeffField,
    pub offset: Complex64,
    pub symbol: SymbolPoly,
}

impl Perturbation {
    pub fn d(&self, point: &[f64]) -> Complex64 {
        self.field.eval(point) - self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantStrengthForm {
    pub frozen: FrozenOperator,
    pub perturbations: Vec<Perturbation>,
}

impl VariableOperator {
    pub fn from_description(desc: &OperatorDescription) -> Result<Self> {
        let split = VariableSplit::new(desc.split.good, desc.split.bad)?;
        let nu = split.dimension();
        let type_symbol = parse_with(&desc.type_symbol, ParseContext::with_dimension(split.good))?;
        if desc.compact_set.bounds.len() != nu {
            return Err(Error::InvalidArgument(format!(
                "compact set has {} axes, operator has {nu}",
                desc.compact_set.bounds.len()
            )));
        }
        if desc.compact_set.bounds.iter().any(|[lo, hi]| !(hi > lo)) {
            return Err(Error::InvalidArgument("compact set has an empty axis".into()));
        }
        if desc.terms.is_empty() {
            return Err(Error::InvalidArgument("operator has no terms".into()));
        }
        let terms = desc
            .terms
            .iter()
            .map(|t| {
                let coeff = match (&t.coeff_expr, &t.coeff_grid) {
                    (Some(e), None) => CoeffField::Expr(Expr::parse(e, split.good, split.bad)?),
                    (None, Some(g)) => {
                        g.validate(nu)?;
                        CoeffField::Grid(g.clone())
                    }
                    (None, None) => CoeffField::Expr(Expr::parse("1", split.good, split.bad)?),
                    (Some(_), Some(_)) => {
                        return Err(Error::Coefficient("term has both coeff_expr and coeff_grid".into()))
                    }
                };
                let symbol = parse_with(&t.symbol, ParseContext::with_split(split))?;
                Ok(VariableTerm { coeff, symbol })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VariableOperator {
            split,
            type_symbol,
            compact: desc.compact_set.bounds.clone(),
            terms,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let desc: OperatorDescription = serde_json::from_str(&text)?;
        VariableOperator::from_description(&desc)
    }

    /// A constant-coefficient operator `P` with type symbol `m`.
    pub fn constant(p: &SymbolPoly, m: &SymbolPoly, half_width: f64) -> Result<Self> {
        let split = p.split().unwrap_or(VariableSplit {
            good: p.dimension(),
            bad: 0,
        });
        Ok(VariableOperator {
            split,
            type_symbol: m.clone(),
            compact: vec![[-half_width, half_width]; split.dimension()],
            terms: vec![VariableTerm {
                coeff: CoeffField::Expr(Expr::parse("1", split.good, split.bad)?),
                symbol: p.clone().with_split(split)?,
            }],
        })
    }

    pub fn in_compact(&self, point: &[f64]) -> bool {
        point.iter().zip(&self.compact).all(|(x, [lo, hi])| *x >= *lo && *x <= *hi)
    }

    pub fn has_constant_coefficients(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_constant())
    }

    /// Coefficient values `c_j(point)`, checked finite.
    pub fn coefficients_at(&self, point: &[f64]) -> Result<Vec<Complex64>> {
        if point.len() != self.split.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.split.dimension(),
                got: point.len(),
            });
        }
        self.terms
            .iter()
            .map(|t| {
                let v = t.coeff.eval(point);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Coefficient(format!("coefficient undefined at {point:?}")))
                }
            })
            .collect()
    }

    /// The type symbol in the full set of variables.
    pub fn type_symbol_full(&self) -> SymbolPoly {
        let good: Vec<usize> = (0..self.split.good).collect();
        self.type_symbol
            .embed(self.split.dimension(), &good)
            .expect("good positions")
            .with_split(self.split)
            .expect("split")
    }

    /// The frozen symbol at a point; the type symbol outside the compact set.
    pub fn freeze(&self, point: &[f64]) -> Result<FrozenOperator> {
        let nu = self.split.dimension();
        if !self.in_compact(point) {
            return Ok(FrozenOperator {
                point: point.to_vec(),
                symbol: self.type_symbol_full(),
            });
        }
        let cs = self.coefficients_at(point)?;
        let mut acc = SymbolPoly::zero(nu);
        for (t, c) in self.terms.iter().zip(cs) {
            let c = Coeff::from_c64(c).ok_or_else(|| Error::Coefficient("non-finite coefficient".into()))?;
            acc = &acc + &t.symbol.scale(&c);
        }
        Ok(FrozenOperator {
            point: point.to_vec(),
            symbol: acc.with_split(self.split)?,
        })
    }

    /// `L(x, ξ)` numerically, honoring the outside-K rule.
    pub fn symbol_at(&self, point: &[f64], xi: &[f64]) -> Result<Complex64> {
        if !self.in_compact(point) {
            return Ok(self.type_symbol.eval_real(&xi[..self.split.good]));
        }
        let cs = self.coefficients_at(point)?;
        Ok(self.terms.iter().zip(cs).map(|(t, c)| c * t.symbol.eval_real(xi)).sum())
    }

    /// `L = L(x₀, D) + Σ d_j(x) R_j(D)` with `d_j(x₀) = 0`.
    pub fn constant_strength_form(&self, point: &[f64]) -> Result<ConstantStrengthForm> {
        if !self.in_compact(point) {
            return Err(Error::InvalidArgument(
                "constant-strength form is taken at a point of the compact set".into(),
            ));
        }
        let frozen = self.freeze(point)?;
        let cs = self.coefficients_at(point)?;
        let perturbations: Vec<Perturbation> = self
            .terms
            .iter()
            .zip(cs)
            .filter(|(t, _)| !t.coeff.is_constant())
            .map(|(t, c)| Perturbation {
                field: t.coeff.clone(),
                offset: c,
                symbol: t.symbol.clone(),
            })
            .collect();
        for p in &perturbations {
            let d0 = p.d(point).norm();
            if d0 > 1e-12 {
                return Err(Error::Coefficient(format!("perturbation does not vanish at the point ({d0})")));
            }
        }
        Ok(ConstantStrengthForm { frozen, perturbations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{is_partially_hypoelliptic, Verdict};
    use proptest::prelude::*;

    fn split11(s: &str) -> SymbolPoly {
        parse_with(s, ParseContext::with_split(VariableSplit::new(1, 1).unwrap())).unwrap()
    }

    fn one(s: &str) -> SymbolPoly {
        parse_with(s, ParseContext::with_dimension(1)).unwrap()
    }

    fn desc(terms: &[(&str, &str)]) -> OperatorDescription {
        OperatorDescription {
            type_symbol: "xi1^2".into(),
            split: VariableSplit { good: 1, bad: 1 },
            compact_set: CompactSet {
                bounds: vec![[-2.0, 2.0], [-2.0, 2.0]],
            },
            terms: terms
                .iter()
                .map(|(c, s)| TermDescription {
                    coeff_expr: Some(c.to_string()),
                    coeff_grid: None,
                    symbol: s.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn decompose_examples() {
        let f = decompose_constant(&split11("xi1^2 + xi1*eta1")).unwrap();
        assert_eq!(f.p0, one("xi1^2"));
        assert_eq!(f.terms.len(), 1);
        assert_eq!((f.terms[0].p.clone(), f.terms[0].q.clone()), (one("xi1"), one("xi1")));
        let f = decompose_constant(&split11("xi1^2 + i*eta1")).unwrap();
        assert_eq!(f.terms[0].p, one("i"));
        let f = decompose_constant(&split11("xi1^2")).unwrap();
        assert!(f.terms.is_empty());
    }

    #[test]
    fn verify_type_examples() {
        let o = ClassifyOptions::default();
        let f = decompose_constant(&split11("xi1^2 + xi1*eta1")).unwrap();
        assert!(verify_type(&f, &one("xi1^2"), &o).unwrap().holds);
        assert!(!verify_type(&f, &one("xi1^4"), &o).unwrap().holds);
        let f = decompose_constant(&split11("xi1^2")).unwrap();
        assert!(verify_type(&f, &one("xi1^2"), &o).unwrap().holds);
    }

    #[test]
    fn freeze_examples() {
        let op = VariableOperator::from_description(&desc(&[("1", "xi1^2"), ("cos(x1)", "xi1*eta1")])).unwrap();
        assert_eq!(op.freeze(&[0.0, 0.0]).unwrap().symbol, split11("xi1^2 + xi1*eta1"));
        assert_eq!(op.freeze(&[5.0, 0.0]).unwrap().symbol, split11("xi1^2"));
        let constant = VariableOperator::from_description(&desc(&[("1", "xi1^2 + eta1")])).unwrap();
        assert_eq!(constant.freeze(&[1.0, -1.0]).unwrap().symbol, split11("xi1^2 + eta1"));
        let undefined = VariableOperator::from_description(&desc(&[("1/x1", "xi1^2")])).unwrap();
        assert!(matches!(undefined.freeze(&[0.0, 0.0]), Err(Error::Coefficient(_))));
    }

    #[test]
    fn constant_strength_examples() {
        let mut d = desc(&[("1 + x1^2", "xi1^2")]);
        d.split = VariableSplit { good: 1, bad: 0 };
        d.compact_set.bounds.truncate(1);
        let op = VariableOperator::from_description(&d).unwrap();
        let f = op.constant_strength_form(&[0.0]).unwrap();
        assert_eq!(f.frozen.symbol, one("xi1^2"));
        assert_eq!(f.perturbations.len(), 1);
        assert!((f.perturbations[0].d(&[1.5]).re - 2.25).abs() < 1e-15);
        let op = VariableOperator::from_description(&desc(&[("2", "xi1^2"), ("3", "eta1")])).unwrap();
        assert!(op.constant_strength_form(&[0.3, 0.2]).unwrap().perturbations.is_empty());
        let op = VariableOperator::from_description(&desc(&[("1", "xi1^2"), ("sin(x1)", "xi1*eta1")])).unwrap();
        let f = op.constant_strength_form(&[0.0, 0.0]).unwrap();
        assert_eq!(f.frozen.symbol, split11("xi1^2"));
        assert_eq!(f.perturbations[0].symbol, split11("xi1*eta1"));
    }

    #[test]
    fn description_roundtrip_and_grid_terms() {
        let mut d = desc(&[("1", "xi1^2")]);
        d.terms.push(TermDescription {
            coeff_expr: None,
            coeff_grid: Some(TabulatedField {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
                shape: vec![2, 2],
                values: vec![0.0, 1.0, 1.0, 2.0],
            }),
            symbol: "xi1*eta1".into(),
        });
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"box\""));
        let back: OperatorDescription = serde_json::from_str(&text).unwrap();
        let op = VariableOperator::from_description(&back).unwrap();
        assert!(!op.has_constant_coefficients());
        let v = op.symbol_at(&[0.0, 0.0], &[2.0, 3.0]).unwrap();
        assert!((v.re - (4.0 + 1.0 * 6.0)).abs() < 1e-12);
    }

    #[test]
    fn verify_type_holds_for_partially_hypoelliptic() {
        let o = ClassifyOptions::default();
        for s in ["xi1^2 + xi1*eta1", "xi1^2 + eta1^2", "xi1^2 + i*eta1"] {
            let sym = split11(s);
            assert_eq!(is_partially_hypoelliptic(&sym, &o).unwrap().verdict, Verdict::Yes);
            let f = decompose_constant(&sym).unwrap();
            assert!(verify_type(&f, &f.p0, &o).unwrap().holds, "{s}");
        }
    }

    proptest! {
        #[test]
        fn reassembly_is_exact(ts in prop::collection::vec(((0u32..4, 0u32..3), -4i64..5), 1..7)) {
            let sym = SymbolPoly::from_terms(2, ts.into_iter().map(|((a, b), c)| (MultiIndex::new(vec![a, b]), Coeff::from_int(c))))
                .unwrap()
                .with_split(VariableSplit::new(1, 1).unwrap())
                .unwrap();
            let f = decompose_constant(&sym).unwrap();
            prop_assert_eq!(f.reassemble(), sym);
            prop_assert!(f.terms.iter().all(|t| !t.p.is_zero()));
        }

        #[test]
        fn constant_strength_residual(x in -1.9f64..1.9, y in -1.9f64..1.9, xi in -10f64..10.0, eta in -10f64..10.0) {
            let op = VariableOperator::from_description(&desc(&[
                ("1 + 0.3*bump(x1/2)", "xi1^2"),
                ("sin(x1)*cos(y1)", "xi1*eta1"),
                ("2", "eta1^2"),
            ])).unwrap();
            let f = op.constant_strength_form(&[0.4, -0.2]).unwrap();
            let full = op.symbol_at(&[x, y], &[xi, eta]).unwrap();
            let mut rebuilt = f.frozen.symbol.eval_real(&[xi, eta]);
            for p in &f.perturbations {
                rebuilt += p.d(&[x, y]) * p.symbol.eval_real(&[xi, eta]);
            }
            prop_assert!((full - rebuilt).norm() <= 1e-10 * (1.0 + full.norm()));
        }
    }
}
