//! Anisotropic Sobolev norms, `p_s`-weighted norms, operator graph norms,
//! the `M_α` family and probe-based estimates of `N^{α,β}`.
//!
//! Sobolev-type norms integrate `|û|²` against `đξ = dξ/(2π)^ν`, so
//! `sobolev_norm(u, 0, 0)` is the `L²` norm. `M_α` integrates `|û|` against
//! plain `dξ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::design::{log_profile, trend, RadiusSchedule, SphereDesign, Trend};
use crate::classify::{estimate_exponents, ClassifyOptions};
use crate::error::{Error, Result};
pub use crate::grid::{GridFunction, GridSpec, IntegralOperator, Spectrum};
use crate::numeric::linear_fit;
use crate::symbol::{MultiIndex, SymbolPoly};

/// A named norm value with the weights that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub name: String,
    pub value: f64,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub order: Option<f64>,
    pub alpha: Option<MultiIndex>,
}

impl NormReport {
    pub fn sobolev(u: &GridFunction, s: f64, t: f64) -> Self {
        NormReport {
            name: "sobolev".into(),
            value: sobolev_norm(u, s, t),
            s: Some(s),
            t: Some(t),
            order: None,
            alpha: None,
        }
    }

    pub fn m_alpha(u: &GridFunction, alpha: &MultiIndex) -> Result<Self> {
        Ok(NormReport {
            name: "M_alpha".into(),
            value: m_alpha(u, alpha)?,
            s: None,
            t: None,
            order: None,
            alpha: Some(alpha.clone()),
        })
    }
}

/// Evaluates a symbol over either all grid variables or the good block only.
pub(crate) fn eval_on(p: &SymbolPoly, spec: &GridSpec, xi: &[f64]) -> Result<Complex64> {
    if p.dimension() == xi.len() {
        Ok(p.eval_real(xi))
    } else if p.dimension() == spec.split.good {
        Ok(p.eval_real(&xi[..spec.split.good]))
    } else {
        Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: p.dimension(),
        })
    }
}

fn block_sq(xi: &[f64], good: usize) -> (f64, f64) {
    let a = xi[..good].iter().map(|x| x * x).sum();
    let b = xi[good..].iter().map(|x| x * x).sum();
    (a, b)
}

/// `Σ_k |û_k|² w(ξ_k) đξ`, square-rooted.
fn weighted_l2<F: Fn(&[f64]) -> f64>(s: &Spectrum, w: F) -> f64 {
    let spec = &s.spec;
    let cell = spec.freq_cell_volume() / (2.0 * PI).powi(spec.dimension() as i32);
    let sum: f64 = s
        .values
        .iter()
        .enumerate()
        .map(|(k, z)| z.norm_sqr() * w(&spec.freq_coords(k)))
        .sum();
    (sum * cell).sqrt()
}

/// `‖u‖_{s,t}` with weight `(1+|ξ|²)^s (1+|η|²)^t` on the good/bad blocks.
pub fn sobolev_norm(u: &GridFunction, s: f64, t: f64) -> f64 {
    let good = u.spec.split.good;
    weighted_l2(&u.forward(), |xi| {
        let (a, b) = block_sq(xi, good);
        (1.0 + a).powf(s) * (1.0 + b).powf(t)
    })
}

/// Norm with weight `p_s(ξ)² (1+|η|²)^t`, `p_s(ξ) = (1+|ξ|²)^{s/2} (1+|M(ξ)|²)`.
pub fn weighted_norm_ps(u: &GridFunction, m: &SymbolPoly, s: f64, t: f64) -> Result<f64> {
    let spec = &u.spec;
    if m.dimension() != spec.split.good {
        return Err(Error::DimensionMismatch {
            expected: spec.split.good,
            got: m.dimension(),
        });
    }
    let good = spec.split.good;
    Ok(weighted_l2(&u.forward(), |xi| {
        let (a, b) = block_sq(xi, good);
        let ps = (1.0 + a).powf(s / 2.0) * (1.0 + m.eval_real(&xi[..good]).norm_sqr());
        ps * ps * (1.0 + b).powf(t)
    }))
}

/// An operator entering a graph norm.
#[derive(Clone, Debug)]
pub enum NormOperator {
    /// Constant coefficients, over all variables or the good block.
    Multiplier(SymbolPoly),
    /// `c(x)·S(D)`, with `c` sampled on the same grid.
    Variable { coeff: GridFunction, symbol: SymbolPoly },
}

impl NormOperator {
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        match self {
            NormOperator::Multiplier(p) => apply_symbol_any(u, p),
            NormOperator::Variable { coeff, symbol } => apply_symbol_any(u, symbol)?.mul(coeff),
        }
    }
}

pub(crate) fn apply_symbol_any(u: &GridFunction, p: &SymbolPoly) -> Result<GridFunction> {
    let spec = &u.spec;
    eval_on(p, spec, &vec![0.0; spec.dimension()])?;
    Ok(u.apply_multiplier(|xi| eval_on(p, spec, xi).expect("dimension checked")))
}

/// `(‖u‖²_{s,t} + Σ ‖P_j u‖²_{s,t})^{1/2}`.
pub fn generalized_norm(u: &GridFunction, ops: &[NormOperator], s: f64, t: f64) -> Result<f64> {
    let mut sq = sobolev_norm(u, s, t).powi(2);
    for op in ops {
        sq += sobolev_norm(&op.apply(u)?, s, t).powi(2);
    }
    Ok(sq.sqrt())
}

/// `∫ |ξ|^α |û(ξ)| dξ` with `|ξ|^α = Σ_{β≤α} |ξ^β|`.
pub fn m_alpha(u: &GridFunction, alpha: &MultiIndex) -> Result<f64> {
    spectral_m_alpha(&u.forward(), alpha)
}

pub(crate) fn spectral_m_alpha(s: &Spectrum, alpha: &MultiIndex) -> Result<f64> {
    let spec = &s.spec;
    if alpha.dim() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: alpha.dim(),
        });
    }
    let below = alpha.below();
    let sum: f64 = s
        .values
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let xi = spec.freq_coords(k);
            let w: f64 = below.iter().map(|b| b.monomial(&xi).abs()).sum();
            w * z.norm()
        })
        .sum();
    Ok(sum * spec.freq_cell_volume())
}

/// Probe-based lower estimate of an operator norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    /// Set when every probe was mapped to zero.
    pub annihilated: bool,
    /// Index of the probe attaining the maximum.
    pub argmax: usize,
}

/// `max_u M_β(Ku) / M_α(u)` over the probes.
pub fn n_alpha_beta(
    k: &(dyn IntegralOperator + Sync),
    alpha: &MultiIndex,
    beta: &MultiIndex,
    probes: &[GridFunction],
) -> Result<NormEstimate> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes".into()));
    }
    let ratios: Vec<Result<f64>> = probes
        .par_iter()
        .map(|u| {
            let den = m_alpha(u, alpha)?;
            if den == 0.0 {
                return Err(Error::InvalidArgument("zero probe".into()));
            }
            Ok(m_alpha(&k.apply(u)?, beta)? / den)
        })
        .collect();
    let mut best = NormEstimate {
        value: 0.0,
        annihilated: true,
        argmax: 0,
    };
    for (i, r) in ratios.into_iter().enumerate() {
        let r = r?;
        if r > 0.0 {
            best.annihilated = false;
        }
        if r > best.value {
            best.value = r;
            best.argmax = i;
        }
    }
    Ok(best)
}

/// Variable block a smoothing operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Good,
    Bad,
}

/// `(1 - Δ)^{-N/2}` in the chosen block.
pub fn bessel_smooth(u: &GridFunction, order: f64, block: Block) -> GridFunction {
    let good = u.spec.split.good;
    u.apply_multiplier(|xi| {
        let (a, b) = block_sq(xi, good);
        let r = match block {
            Block::Good => a,
            Block::Bad => b,
        };
        Complex64::new((1.0 + r).powf(-order / 2.0), 0.0)
    })
}

/// One member of a probe family.
#[derive(Clone, Debug)]
pub struct Probe {
    pub width: f64,
    /// Modulation frequency along the first axis.
    pub frequency: f64,
    pub shift: f64,
    pub u: GridFunction,
}

/// Gaussian envelope of relative width `width` (fraction of each half-width),
/// shifted along the first axis and modulated by `e^{i k x_1}`.
pub fn gaussian_probe(spec: &GridSpec, width: f64, frequency: f64, shift: f64) -> Probe {
    let hw = spec.half_width.clone();
    let u = GridFunction::from_fn(spec, |x| {
        let mut q = 0.0;
        for (a, xa) in x.iter().enumerate() {
            let c = if a == 0 { shift } else { 0.0 };
            let w = width * hw[a];
            q += (xa - c) * (xa - c) / (2.0 * w * w);
        }
        Complex64::from_polar((-q).exp(), frequency * x[0])
    });
    Probe {
        width,
        frequency,
        shift,
        u,
    }
}

/// Relative widths of the standard family.
pub const PROBE_WIDTHS: [f64; 3] = [1.0 / 24.0, 1.0 / 16.0, 1.0 / 12.0];
/// Modulations as fractions of the first axis' Nyquist frequency.
pub const PROBE_MODULATIONS: [f64; 5] = [0.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0];
/// Shifts as fractions of the first axis' half-width.
pub const PROBE_SHIFTS: [f64; 3] = [0.0, 0.125, -0.125];

/// The deterministic 3 × 5 × 3 Gaussian probe family.
pub fn standard_probes(spec: &GridSpec) -> Vec<Probe> {
    let nyq = spec.nyquist(0);
    let l = spec.half_width[0];
    let mut out = Vec::new();
    for w in PROBE_WIDTHS {
        for m in PROBE_MODULATIONS {
            for s in PROBE_SHIFTS {
                out.push(gaussian_probe(spec, w, m * nyq, s * l));
            }
        }
    }
    out
}

/// Modulated copies `e^{ikx_1}ψ(x)` of one envelope.
pub fn modulated_sweep(spec: &GridSpec, width: f64, frequencies: &[f64]) -> Vec<Probe> {
    frequencies.iter().map(|&k| gaussian_probe(spec, width, k, 0.0)).collect()
}

/// Outcome of the strictly-weaker inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub holds: bool,
    pub worst_ratio: f64,
    /// Log-log growth of the ratio against probe frequency.
    pub growth_exponent: f64,
    pub ratios: Vec<(f64, f64)>,
}

/// Largest growth exponent of the ratio still read as bounded.
pub const GROWTH_TOL: f64 = 0.25;

/// Tests `‖N f‖_{s+σ,t} ≤ C ‖f‖_{H(M)}` on probes of increasing frequency.
pub fn check_strict_weak_inequality(
    n_sym: &SymbolPoly,
    m_sym: &SymbolPoly,
    sigma: f64,
    probes: &[Probe],
    s: f64,
    t: f64,
) -> Result<InequalityReport> {
    if n_sym.is_zero() {
        return Ok(InequalityReport {
            holds: true,
            worst_ratio: 0.0,
            growth_exponent: f64::NEG_INFINITY,
            ratios: probes.iter().map(|p| (p.frequency, 0.0)).collect(),
        });
    }
    let ops = [NormOperator::Multiplier(m_sym.clone())];
    let ratios: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|p| {
            let lhs = sobolev_norm(&apply_symbol_any(&p.u, n_sym)?, s + sigma, t);
            let rhs = generalized_norm(&p.u, &ops, s, t)?;
            Ok((p.frequency, lhs / rhs))
        })
        .collect::<Result<_>>()?;
    let worst = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = ratios
        .iter()
        .filter(|r| r.0 > 0.0 && r.1 > 0.0)
        .map(|r| (r.0.ln(), r.1.ln()))
        .collect();
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData("need probes at two or more positive frequencies".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(InequalityReport {
        holds: worst.is_finite() && fit.slope <= GROWTH_TOL,
        worst_ratio: worst,
        growth_exponent: fit.slope,
        ratios,
    })
}

/// Two-sided comparison of the graph norm of `M` with the `p_s` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub c: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub fn ps_equivalence(probes: &[Probe], m: &SymbolPoly, s: f64, t: f64) -> Result<EquivalenceReport> {
    let ops = [NormOperator::Multiplier(m.clone())];
    let ratios: Vec<f64> = probes
        .par_iter()
        .map(|p| Ok(generalized_norm(&p.u, &ops, s, t)? / weighted_norm_ps(&p.u, m, s, t)?))
        .collect::<Result<_>>()?;
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        c: hi.max(1.0 / lo),
        min_ratio: lo,
        max_ratio: hi,
    })
}

/// `(1+|ξ|²)^{kr} ≤ C (1+|M(ξ)|²)^r` with `k = ρ̂/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Report {
    pub k: f64,
    pub r: f64,
    /// Sup of the ratio over the frequency grid.
    pub c_grid: f64,
    /// Trend of the sphere maximum of the ratio along expanding radii.
    pub far_trend: Trend,
    pub holds: bool,
}

pub fn check_m1(m: &SymbolPoly, spec: &GridSpec, r: f64, opts: &ClassifyOptions) -> Result<M1Report> {
    let n = m.dimension();
    if spec.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: spec.dimension(),
        });
    }
    let k = estimate_exponents(m, opts)?.rho / 2.0;
    let ratio_ln = |xi: &[f64]| {
        let a: f64 = xi.iter().map(|x| x * x).sum();
        k * r * (1.0 + a).ln() - r * (1.0 + m.eval_real(xi).norm_sqr()).ln()
    };
    let c_grid = (0..spec.len())
        .map(|f| ratio_ln(&spec.freq_coords(f)).exp())
        .fold(0.0, f64::max);
    let design = SphereDesign::new(n);
    let radii = RadiusSchedule::default();
    let (samples, _) = log_profile(&design, &radii.radii, true, ratio_ln);
    let (_, far) = trend(&samples[samples.len() / 2..], opts.slope_tol);
    Ok(M1Report {
        k,
        r,
        c_grid,
        far_trend: far,
        holds: c_grid.is_finite() && matches!(far, Trend::Bounded | Trend::Vanishing),
    })
}
