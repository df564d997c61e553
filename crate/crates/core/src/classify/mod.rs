//! Hypoellipticity, partial hypoellipticity, strength comparison, lineality
//! and exponent estimates for polynomial symbols.
//!
//! Limit statements are decided by sampling expanding spheres and fitting
//! log-log slopes; negative answers come with exact or numerically verified
//! witnesses.

pub mod design;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

pub use design::{log_profile, maximize_on_sphere, trend, RadiusSchedule, Sample, SphereDesign, Trend};

use crate::error::{Error, Result};
use crate::numeric::{linear_fit, rational_null_space, rational_to_f64, real_roots, LinearFit};
use crate::symbol::{AffineForm, Coeff, DerivativeTable, MultiIndex, SymbolPoly, VariableSplit};

/// Knobs shared by all sampling-based decisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub radii: RadiusSchedule,
    /// Log-log slopes within `±slope_tol` count as flat.
    pub slope_tol: f64,
    /// Largest power tried by [`hypoelliptic_iteration_index`] inside [`classify`].
    pub iteration_cap: u32,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            radii: RadiusSchedule::default(),
            slope_tol: 0.05,
            iteration_cap: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrengthOrder {
    Equivalent,
    StrictlyWeaker,
    Weaker,
    NotWeaker,
    Inconclusive,
}

/// Evidence attached to a negative (or degenerate) verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The symbol is constant.
    Constant,
    /// `P` is invariant along `base_point + t·direction`, so `P^(α)/P` is
    /// constant there and equal to `ratio`.
    Lineality {
        direction: Vec<f64>,
        base_point: Vec<f64>,
        alpha: MultiIndex,
        ratio: f64,
    },
    /// `P(t·direction) = 0` identically in `t` (exact).
    ZeroRay { direction: Vec<i64> },
    /// Real zeros of `P` found on expanding spheres.
    RealZeros { points: Vec<Vec<f64>> },
    /// `min |P|` on spheres does not grow.
    MinModulusBounded { slope: f64 },
    /// `max |P^(α)/P|` on spheres does not tend to zero.
    RatioNotVanishing { alpha: MultiIndex, slope: Option<f64>, last_ratio: f64 },
    /// The η-free part `P₀` vanishes identically.
    ZeroP0,
    /// The η-free part is not hypoelliptic.
    P0NotHypoelliptic,
    /// The coefficient of `η^α` is not strictly weaker than `P₀`.
    NotStrictlyWeaker { alpha: MultiIndex, order: StrengthOrder },
}

/// The sampled sphere extremum of one ratio, with its fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioProfile {
    pub alpha: MultiIndex,
    pub samples: Vec<Sample>,
    pub fit: Option<LinearFit>,
    pub trend: Trend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypoReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub min_modulus: Vec<Sample>,
    pub ratios: Vec<RatioProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthReport {
    pub order: StrengthOrder,
    /// `max Q̃/P̃` on spheres.
    pub forward: RatioProfile,
    /// `max P̃/Q̃`, sampled when the forward ratio is bounded.
    pub reverse: Option<RatioProfile>,
}

/// `P(ξ, η) = Σ_α P_α(ξ) η^α` split into its η-coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaCoefficient {
    /// Exponent over the bad variables.
    pub alpha: MultiIndex,
    /// Coefficient polynomial over the good variables, as text.
    pub symbol: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub decomposition: Vec<EtaCoefficient>,
    pub p0: Option<HypoReport>,
    pub strengths: Vec<(MultiIndex, StrengthReport)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentDiagnostics {
    pub radii: Vec<f64>,
    pub rho_fit: Option<LinearFit>,
    /// Worst (α, ray) pair behind `b` and its regression residual.
    pub b_alpha: Option<MultiIndex>,
    pub b_direction: Option<Vec<f64>>,
    pub b_residual: f64,
    pub c_alpha: Option<MultiIndex>,
    pub c_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExponents {
    pub rho: f64,
    pub b: f64,
    pub sigma: f64,
    pub c: f64,
    pub confidence: ExponentDiagnostics,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinealitySpace {
    pub basis: Vec<Vec<f64>>,
    pub is_reduced: bool,
    pub complex_directions: bool,
    #[serde(skip)]
    pub exact_basis: Vec<Vec<BigRational>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    /// `+1`, `-1`, or `0` when undetermined.
    pub sign: i8,
    pub per_symbol: Vec<i8>,
    /// Indices of two frozen symbols with opposite signs.
    pub conflict: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub symbol: String,
    pub dimension: usize,
    pub split: Option<VariableSplit>,
    pub hypoelliptic: HypoReport,
    pub partially_hypoelliptic: Option<PartialReport>,
    pub exponents: Option<AsymptoticExponents>,
    pub lineality: LinealitySpace,
    pub iteration_index: Option<u32>,
    pub sign_at_infinity: SignReport,
}

impl ClassificationReport {
    /// True when any verdict in the report is inconclusive.
    pub fn has_inconclusive(&self) -> bool {
        self.hypoelliptic.verdict == Verdict::Inconclusive
            || self
                .partially_hypoelliptic
                .as_ref()
                .is_some_and(|p| p.verdict == Verdict::Inconclusive)
    }
}

fn log_abs(z: Complex64) -> f64 {
    z.norm().ln()
}

fn ratio_trend(samples: &[Sample], opts: &ClassifyOptions) -> (Option<LinearFit>, Trend) {
    let top = &samples[samples.len() / 2..];
    trend(top, opts.slope_tol)
}

/// Sum of `|c_α ξ^α|`: the scale against which a value of `P` counts as zero.
fn term_scale(p: &SymbolPoly, xi: &[f64]) -> f64 {
    p.terms()
        .map(|(a, c)| c.to_c64().norm() * a.monomial(xi).abs())
        .sum()
}

/// Nonzero primitive integer vectors in `{-2..2}^ν` with a positive first
/// nonzero entry, ordered by size and then with `+k` before `-k`.
fn small_integer_directions(dim: usize) -> Vec<Vec<i64>> {
    let order = [0i64, 1, -1, 2, -2];
    let mut out = Vec::new();
    let total = 5usize.pow(dim as u32);
    for code in 0..total {
        let mut c = code;
        let v: Vec<i64> = (0..dim)
            .map(|_| {
                let d = order[c % 5];
                c /= 5;
                d
            })
            .collect();
        let Some(first) = v.iter().find(|x| **x != 0) else {
            continue;
        };
        if *first < 0 {
            continue;
        }
        let g = v.iter().fold(0i64, |g, &x| num_integer::gcd(g, x));
        if g != 1 {
            continue;
        }
        out.push(v);
    }
    let key = |v: &Vec<i64>| -> (i64, Vec<usize>) {
        let m = v.iter().map(|x| x.abs()).max().unwrap_or(0);
        (m, v.iter().map(|x| order.iter().position(|o| o == x).unwrap()).collect())
    };
    out.sort_by_key(key);
    out
}

/// Exact zero ray: `P(t·v) ≡ 0` for a small integer direction `v`.
pub fn exact_zero_ray(p: &SymbolPoly) -> Option<Vec<i64>> {
    let dim = p.dimension();
    if dim > 5 || p.is_zero() {
        return None;
    }
    for v in small_integer_directions(dim) {
        let vf: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let probe = |t: f64| {
            let x: Vec<f64> = vf.iter().map(|c| c * t).collect();
            (p.eval_real(&x).norm(), term_scale(p, &x))
        };
        let (a, sa) = probe(1.37);
        let (b, sb) = probe(-0.61);
        if a > 1e-10 * sa.max(1e-300) || b > 1e-10 * sb.max(1e-300) {
            continue;
        }
        let forms: Vec<AffineForm> = v
            .iter()
            .map(|&c| AffineForm {
                linear: vec![Coeff::from_int(c)],
                constant: Coeff::zero(),
            })
            .collect();
        if p.substitute_affine(&forms, 1).map(|q| q.is_zero()).unwrap_or(false) {
            return Some(v);
        }
    }
    None
}

/// Real zeros of `P` on coordinate lines through design points of radius `R`,
/// kept when they lie at distance at least `R/4` from the origin.
fn real_zeros_at_radius(p: &SymbolPoly, design: &SphereDesign, r: f64) -> Option<Vec<f64>> {
    let dim = p.dimension();
    for d in &design.points {
        let origin: Vec<f64> = d.iter().map(|x| r * x).collect();
        for j in 0..dim {
            let mut dir = vec![0.0; dim];
            dir[j] = 1.0;
            let coeffs = p.along_line(&origin, &dir);
            for s in real_roots(&coeffs, 1e-9) {
                let mut q = origin.clone();
                q[j] += s;
                let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 0.25 * r {
                    continue;
                }
                let val = p.eval_real(&q).norm();
                if val <= 1e-8 * term_scale(p, &q).max(1e-300) {
                    return Some(q);
                }
            }
        }
    }
    None
}

fn lineality_witness(p: &SymbolPoly, space: &LinealitySpace) -> Witness {
    let dim = p.dimension();
    let base: Vec<f64> = (0..dim).map(|j| 0.5 + 0.37 * j as f64).collect();
    let value = p.eval_real(&base);
    let table = p.derivative_table();
    let (alpha, ratio) = table
        .entries()
        .iter()
        .filter(|(a, _)| !a.is_zero())
        .map(|(a, d)| (a.clone(), d.eval_real(&base)))
        .find(|(_, v)| v.norm() > 0.0)
        .map(|(a, v)| (a, if value.norm() > 0.0 { (v / value).norm() } else { f64::INFINITY }))
        .unwrap_or((MultiIndex::zeros(dim), f64::NAN));
    Witness::Lineality {
        direction: space.basis[0].clone(),
        base_point: base,
        alpha,
        ratio,
    }
}

/// Decides hypoellipticity of a constant-coefficient symbol.
pub fn is_hypoelliptic(p: &SymbolPoly, opts: &ClassifyOptions) -> HypoReport {
    let no = |w: Witness, min_modulus: Vec<Sample>, ratios: Vec<RatioProfile>| HypoReport {
        verdict: Verdict::No,
        witness: Some(w),
        min_modulus,
        ratios,
    };
    if p.is_constant() {
        return no(Witness::Constant, Vec::new(), Vec::new());
    }
    let space = lineality(p, false);
    if !space.is_reduced {
        return no(lineality_witness(p, &space), Vec::new(), Vec::new());
    }
    if let Some(v) = exact_zero_ray(p) {
        return no(Witness::ZeroRay { direction: v }, Vec::new(), Vec::new());
    }
    let dim = p.dimension();
    let design = SphereDesign::new(dim);
    let top = opts.radii.top_half();
    let zero_points: Vec<Vec<f64>> = top
        .iter()
        .rev()
        .take(4)
        .filter_map(|&r| real_zeros_at_radius(p, &design, r))
        .collect();
    if zero_points.len() >= 3 {
        return no(Witness::RealZeros { points: zero_points }, Vec::new(), Vec::new());
    }

    let (min_modulus, _) = log_profile(&design, &opts.radii.radii, false, |x| log_abs(p.eval_real(x)));
    let (min_fit, min_trend) = ratio_trend(&min_modulus, opts);
    let mut ratios = Vec::new();
    let mut verdict = Verdict::Yes;
    let mut witness = None;
    match min_trend {
        Trend::Growing => {}
        Trend::Ambiguous => verdict = Verdict::Inconclusive,
        _ => {
            verdict = Verdict::No;
            witness = Some(Witness::MinModulusBounded {
                slope: min_fit.map(|f| f.slope).unwrap_or(f64::NEG_INFINITY),
            });
        }
    }
    for (alpha, d) in p.derivative_table().entries() {
        if alpha.is_zero() {
            continue;
        }
        let (samples, _) = log_profile(&design, &opts.radii.radii, true, |x| {
            log_abs(d.eval_real(x)) - log_abs(p.eval_real(x))
        });
        let (fit, t) = ratio_trend(&samples, opts);
        if t != Trend::Vanishing && verdict != Verdict::No {
            if t == Trend::Ambiguous {
                verdict = Verdict::Inconclusive;
            } else {
                verdict = Verdict::No;
                witness = Some(Witness::RatioNotVanishing {
                    alpha: alpha.clone(),
                    slope: fit.map(|f| f.slope),
                    last_ratio: samples.last().map(|s| s.value).unwrap_or(f64::NAN),
                });
            }
        }
        ratios.push(RatioProfile {
            alpha: alpha.clone(),
            samples,
            fit,
            trend: t,
        });
    }
    HypoReport {
        verdict,
        witness,
        min_modulus,
        ratios,
    }
}

fn tilde_profile(num: &DerivativeTable, den: &DerivativeTable, dim: usize, opts: &ClassifyOptions) -> RatioProfile {
    let design = SphereDesign::new(dim);
    let (samples, _) = log_profile(&design, &opts.radii.radii, true, |x| num.tilde(x).ln() - den.tilde(x).ln());
    let (fit, t) = ratio_trend(&samples, opts);
    RatioProfile {
        alpha: MultiIndex::zeros(dim),
        samples,
        fit,
        trend: t,
    }
}

/// Compares the strength of `Q` against `P` through `max Q̃/P̃` on expanding spheres.
pub fn compare_strength(q: &SymbolPoly, p: &SymbolPoly, opts: &ClassifyOptions) -> Result<StrengthReport> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial("compare_strength needs P != 0".into()));
    }
    if q.dimension() != p.dimension() {
        return Err(Error::DimensionMismatch {
            expected: p.dimension(),
            got: q.dimension(),
        });
    }
    let dim = p.dimension();
    let (tq, tp) = (q.derivative_table(), p.derivative_table());
    let forward = tilde_profile(&tq, &tp, dim, opts);
    let (order, reverse) = match forward.trend {
        Trend::Vanishing => (StrengthOrder::StrictlyWeaker, None),
        Trend::Growing => (StrengthOrder::NotWeaker, None),
        Trend::Ambiguous => (StrengthOrder::Inconclusive, None),
        Trend::Bounded => {
            let rev = tilde_profile(&tp, &tq, dim, opts);
            let order = match rev.trend {
                Trend::Bounded => StrengthOrder::Equivalent,
                Trend::Growing => StrengthOrder::Weaker,
                Trend::Ambiguous => StrengthOrder::Inconclusive,
                // reverse ratio cannot vanish while the forward one stays flat
                Trend::Vanishing => StrengthOrder::Inconclusive,
            };
            (order, Some(rev))
        }
    };
    Ok(StrengthReport { order, forward, reverse })
}

/// Exact η-coefficients `P_α(ξ)` of a split symbol, sorted by `α`.
pub fn eta_coefficients(p: &SymbolPoly) -> Result<(VariableSplit, Vec<(MultiIndex, SymbolPoly)>)> {
    let split = p
        .split()
        .ok_or_else(|| Error::InvalidSplit("symbol has no good/bad variable split".into()))?;
    let n = split.good;
    let mut groups: std::collections::BTreeMap<MultiIndex, Vec<(MultiIndex, Coeff)>> = Default::default();
    for (a, c) in p.terms() {
        let (good, bad) = a.entries().split_at(n);
        groups
            .entry(MultiIndex::new(bad.to_vec()))
            .or_default()
            .push((MultiIndex::new(good.to_vec()), c.clone()));
    }
    let mut out = Vec::new();
    for (alpha, terms) in groups {
        out.push((alpha, SymbolPoly::from_terms(n, terms)?));
    }
    Ok((split, out))
}

/// Partial hypoellipticity in the good variables.
pub fn is_partially_hypoelliptic(p: &SymbolPoly, opts: &ClassifyOptions) -> Result<PartialReport> {
    let (split, coeffs) = eta_coefficients(p)?;
    let good: Vec<usize> = (0..split.good).collect();
    if p.degree_in(&good) == 0 {
        return Err(Error::InvalidSplit("degree in the good variables is zero".into()));
    }
    let decomposition = coeffs
        .iter()
        .map(|(a, s)| EtaCoefficient {
            alpha: a.clone(),
            symbol: s.to_string(),
        })
        .collect();
    let zero_alpha = MultiIndex::zeros(split.bad);
    let p0 = coeffs
        .iter()
        .find(|(a, _)| *a == zero_alpha)
        .map(|(_, s)| s.clone())
        .unwrap_or_else(|| SymbolPoly::zero(split.good));
    let mut report = PartialReport {
        verdict: Verdict::Yes,
        witness: None,
        decomposition,
        p0: None,
        strengths: Vec::new(),
    };
    if p0.is_zero() {
        report.verdict = Verdict::No;
        report.witness = Some(Witness::ZeroP0);
        return Ok(report);
    }
    let he = is_hypoelliptic(&p0, opts);
    let he_verdict = he.verdict;
    report.p0 = Some(he);
    match he_verdict {
        Verdict::No => {
            report.verdict = Verdict::No;
            report.witness = Some(Witness::P0NotHypoelliptic);
            return Ok(report);
        }
        Verdict::Inconclusive => report.verdict = Verdict::Inconclusive,
        Verdict::Yes => {}
    }
    for (alpha, pa) in &coeffs {
        if alpha.is_zero() {
            continue;
        }
        let s = compare_strength(pa, &p0, opts)?;
        match s.order {
            StrengthOrder::StrictlyWeaker => {}
            StrengthOrder::Inconclusive => {
                if report.verdict == Verdict::Yes {
                    report.verdict = Verdict::Inconclusive;
                }
            }
            order => {
                if report.verdict != Verdict::No {
                    report.verdict = Verdict::No;
                    report.witness = Some(Witness::NotStrictlyWeaker {
                        alpha: alpha.clone(),
                        order,
                    });
                }
            }
        }
        report.strengths.push((alpha.clone(), s));
    }
    Ok(report)
}

/// Exact lineality space `{η : Σ_j η_j ∂_j P ≡ 0}` over real directions.
///
/// The condition is the same for the complex translations `ξ + itη`, so
/// `complex_directions` only labels the result.
pub fn lineality(p: &SymbolPoly, complex_directions: bool) -> LinealitySpace {
    let dim = p.dimension();
    let partials: Vec<SymbolPoly> = (0..dim).map(|j| p.derive(&MultiIndex::unit(dim, j))).collect();
    let mut monomials: Vec<MultiIndex> = partials.iter().flat_map(|d| d.terms().map(|(a, _)| a.clone())).collect();
    monomials.sort();
    monomials.dedup();
    let mut rows = Vec::with_capacity(2 * monomials.len());
    for m in &monomials {
        let coeffs: Vec<Coeff> = partials.iter().map(|d| d.coeff(m)).collect();
        rows.push(coeffs.iter().map(|c| c.re.clone()).collect());
        rows.push(coeffs.iter().map(|c| c.im.clone()).collect());
    }
    let exact_basis = rational_null_space(&rows, dim);
    let basis = exact_basis
        .iter()
        .map(|v| v.iter().map(rational_to_f64).collect())
        .collect();
    LinealitySpace {
        is_reduced: exact_basis.is_empty(),
        basis,
        complex_directions,
        exact_basis,
    }
}

/// Smallest `N ≤ n_max` with `P^N` hypoelliptic.
pub fn hypoelliptic_iteration_index(p: &SymbolPoly, n_max: u32, opts: &ClassifyOptions) -> Result<Option<u32>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("iteration cap must be >= 1".into()));
    }
    for n in 1..=n_max {
        let pn = p.power(n)?;
        if is_hypoelliptic(&pn, opts).verdict == Verdict::Yes {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Common sign of `Re L(ξ, η)` for large good frequencies and bounded bad ones.
pub fn re_sign_at_infinity(frozen: &[SymbolPoly], opts: &ClassifyOptions) -> Result<SignReport> {
    let split = match frozen.first() {
        None => return Err(Error::InvalidArgument("no frozen symbols".into())),
        Some(f) => f.split().unwrap_or(VariableSplit {
            good: f.dimension(),
            bad: 0,
        }),
    };
    let good_design = SphereDesign::new(split.good);
    let bad_points: Vec<Vec<f64>> = if split.bad == 0 {
        vec![Vec::new()]
    } else {
        let mut pts = vec![vec![0.0; split.bad]];
        pts.extend(SphereDesign::new(split.bad).points);
        pts
    };
    let radii: Vec<f64> = opts.radii.top_half().iter().rev().take(3).copied().collect();
    let mut per_symbol = Vec::with_capacity(frozen.len());
    for f in frozen {
        let s = f.split().unwrap_or(VariableSplit {
            good: f.dimension(),
            bad: 0,
        });
        if s != split {
            return Err(Error::InvalidSplit("frozen symbols do not share one split".into()));
        }
        let re = f.re_part();
        let (mut pos, mut neg) = (false, false);
        for &r in &radii {
            for d in &good_design.points {
                for eta in &bad_points {
                    let x: Vec<f64> = d.iter().map(|v| r * v).chain(eta.iter().copied()).collect();
                    let v = re.eval_real(&x).re;
                    pos |= v > 0.0;
                    neg |= v <= 0.0;
                }
            }
        }
        per_symbol.push(match (pos, neg) {
            (true, false) => 1,
            (false, true) => -1,
            _ => 0,
        });
    }
    let plus = per_symbol.iter().position(|&s| s == 1);
    let minus = per_symbol.iter().position(|&s| s == -1);
    let (sign, conflict) = if per_symbol.iter().any(|&s| s == 0) {
        (0, None)
    } else {
        match (plus, minus) {
            (Some(i), Some(j)) => (0, Some((i.min(j), i.max(j)))),
            (Some(_), None) => (1, None),
            _ => (-1, None),
        }
    };
    Ok(SignReport {
        sign,
        per_symbol,
        conflict,
    })
}

/// Growth, derivative-decay and class exponents of a (hypoelliptic) type symbol.
pub fn estimate_exponents(m: &SymbolPoly, opts: &ClassifyOptions) -> Result<AsymptoticExponents> {
    if m.is_constant() {
        return Err(Error::DegenerateFit("constant symbol has no growth exponents".into()));
    }
    let mut warnings = Vec::new();
    let he = is_hypoelliptic(m, opts);
    if he.verdict != Verdict::Yes {
        warnings.push(format!("symbol is not confirmed hypoelliptic ({:?})", he.verdict));
    }
    let dim = m.dimension();
    let design = SphereDesign::new(dim);
    let top = opts.radii.top_half();
    let log_r: Vec<f64> = top.iter().map(|r| r.ln()).collect();

    let (min_mod, _) = log_profile(&design, top, false, |x| log_abs(m.eval_real(x)));
    let log_min: Vec<f64> = min_mod.iter().map(|s| s.value.max(1e-300).ln()).collect();
    let rho_fit = linear_fit(&log_r, &log_min).ok();
    let rho = rho_fit.map(|f| f.slope).unwrap_or(0.0).max(0.0);
    let sigma = log_r
        .windows(2)
        .zip(log_min.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .fold(f64::INFINITY, f64::min);

    let table = m.derivative_table();
    let mut b = 1.0f64;
    let (mut b_alpha, mut b_direction, mut b_residual) = (None, None, 0.0);
    let mut c = f64::INFINITY;
    let (mut c_alpha, mut c_residual) = (None, 0.0);
    for (alpha, d) in table.entries() {
        if alpha.is_zero() {
            continue;
        }
        let order = alpha.order() as f64;
        for dir in &design.points {
            let mut xs = Vec::with_capacity(top.len());
            let mut ys = Vec::with_capacity(top.len());
            for &r in top {
                let x: Vec<f64> = dir.iter().map(|v| r * v).collect();
                let dv = d.eval_real(&x).norm();
                if dv == 0.0 {
                    break;
                }
                xs.push((1.0 + m.eval_real(&x).norm()).ln());
                ys.push(dv.ln());
            }
            if xs.len() < top.len() || xs.last().unwrap() - xs[0] < 1.0 {
                continue;
            }
            if let Ok(fit) = linear_fit(&xs, &ys) {
                let cand = (1.0 - fit.slope) / order;
                if cand < b {
                    b = cand;
                    b_alpha = Some(alpha.clone());
                    b_direction = Some(dir.clone());
                    b_residual = fit.residual;
                }
            }
        }
        let (prof, _) = log_profile(&design, top, false, |x| {
            (1.0 + m.eval_real(x).norm_sqr()).ln() - d.eval_real(x).norm_sqr().ln()
        });
        let xs: Vec<f64> = top.iter().map(|r| (1.0 + r * r).ln()).collect();
        let ys: Vec<f64> = prof.iter().map(|s| s.value.ln()).collect();
        if let Ok(fit) = linear_fit(&xs, &ys) {
            if fit.slope < c {
                c = fit.slope;
                c_alpha = Some(alpha.clone());
                c_residual = fit.residual;
            }
        }
    }
    if !c.is_finite() {
        c = 0.0;
    }
    Ok(AsymptoticExponents {
        rho,
        b,
        sigma,
        c,
        confidence: ExponentDiagnostics {
            radii: top.to_vec(),
            rho_fit,
            b_alpha,
            b_direction,
            b_residual,
            c_alpha,
            c_residual,
        },
        warnings,
    })
}

/// Runs every decision procedure on one symbol.
pub fn classify(p: &SymbolPoly, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let hypoelliptic = is_hypoelliptic(p, opts);
    let partially_hypoelliptic = match p.split() {
        Some(s) if s.bad > 0 => Some(is_partially_hypoelliptic(p, opts)?),
        _ => None,
    };
    let exponents = if hypoelliptic.verdict == Verdict::Yes {
        Some(estimate_exponents(p, opts)?)
    } else {
        None
    };
    let iteration_index = match (&hypoelliptic.verdict, &partially_hypoelliptic) {
        (Verdict::Yes, _) => Some(1),
        (_, Some(r)) if r.verdict == Verdict::Yes => hypoelliptic_iteration_index(p, opts.iteration_cap, opts)?,
        _ => None,
    };
    Ok(ClassificationReport {
        symbol: p.to_string(),
        dimension: p.dimension(),
        split: p.split(),
        lineality: lineality(p, false),
        sign_at_infinity: re_sign_at_infinity(std::slice::from_ref(p), opts)?,
        hypoelliptic,
        partially_hypoelliptic,
        exponents,
        iteration_index,
    })
}

#[cfg(test)]
mod tests;
