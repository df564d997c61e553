//! Spectral-function diagonals and their asymptotics.
//!
//! A [`SpectralDiagonal`] holds raw sublevel moments
//! `∫_{Re P < λ} ξ^{2α} dξ` together with the factor `(2π)^{-n}` that turns
//! them into diagonal values of the spectral function. Green kernels are
//! formed from the raw moments, so they carry no `2π` factors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{estimate_exponents, ClassifyOptions};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Spectrum};
use crate::io::Table;
use crate::mizohata::VariableOperator;
use crate::numeric::{gauss_legendre, halton, linear_fit, real_roots};
use crate::symbol::{AffineForm, Coeff, MultiIndex, SymbolPoly};

/// Pipeline a diagonal came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalSource {
    Frozen,
    Variable,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagonal {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<Vec<u32>>,
    /// `moments[k][i]` for `alphas[k]` at `lambdas[i]`.
    pub moments: Vec<Vec<f64>>,
    /// Factor from moments to spectral-function values.
    pub scale: f64,
    pub source: DiagonalSource,
}

impl SpectralDiagonal {
    /// Validates ascending `λ` and non-negative, non-decreasing moments.
    pub fn new(lambdas: Vec<f64>, alphas: Vec<Vec<u32>>, moments: Vec<Vec<f64>>, scale: f64, source: DiagonalSource) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InsufficientData("empty λ grid".into()));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("λ grid must be finite and strictly ascending".into()));
        }
        if moments.len() != alphas.len() {
            return Err(Error::DimensionMismatch {
                expected: alphas.len(),
                got: moments.len(),
            });
        }
        for (k, row) in moments.iter().enumerate() {
            if row.len() != lambdas.len() {
                return Err(Error::DimensionMismatch {
                    expected: lambdas.len(),
                    got: row.len(),
                });
            }
            let top = row.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let slack = 1e-10 * top;
            if row.iter().any(|v| *v < -slack || !v.is_finite()) {
                return Err(Error::NonMonotone(format!("negative diagonal for α = {:?}", alphas[k])));
            }
            if let Some(i) = row.windows(2).position(|w| w[1] < w[0] - slack) {
                return Err(Error::NonMonotone(format!(
                    "diagonal for α = {:?} decreases between λ = {} and {}",
                    alphas[k],
                    lambdas[i],
                    lambdas[i + 1]
                )));
            }
        }
        Ok(SpectralDiagonal {
            lambdas,
            alphas,
            moments,
            scale,
            source,
        })
    }

    /// Spectral-function diagonal values for `alphas[k]`.
    pub fn values(&self, k: usize) -> Vec<f64> {
        self.moments[k].iter().map(|m| m * self.scale).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["lambda".to_string()];
        header.extend(self.alphas.iter().map(|a| {
            format!("alpha_{}", a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_"))
        }));
        let mut t = Table::new(&header);
        for i in 0..self.lambdas.len() {
            let mut row = vec![self.lambdas[i]];
            row.extend((0..self.alphas.len()).map(|k| self.moments[k][i] * self.scale));
            t.push_floats(&row);
        }
        t
    }
}

/// Quadrature settings of [`sublevel_moments`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentOptions {
    /// Fixed frequency box half-width; chosen per λ when absent.
    pub half_width: Option<f64>,
    /// Samples used to locate the support on each outer axis.
    pub scan: usize,
    /// Gauss–Legendre nodes per outer panel.
    pub nodes: usize,
    pub panels: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            half_width: None,
            scan: 128,
            nodes: 32,
            panels: 2,
        }
    }
}

/// `P(s·ξ)`.
pub fn rescale_symbol(p: &SymbolPoly, s: f64) -> Result<SymbolPoly> {
    let c = Coeff::from_f64(s, 0.0).ok_or_else(|| Error::InvalidArgument(format!("scale {s}")))?;
    let n = p.dimension();
    let forms: Vec<AffineForm> = (0..n)
        .map(|j| {
            let mut f = AffineForm::variable(n, j);
            f.linear[j] = c.clone();
            f
        })
        .collect();
    p.substitute_affine(&forms, n)
}

struct MomentProblem<'a> {
    p: &'a SymbolPoly,
    n: usize,
    lambda: f64,
    alpha: &'a [u32],
    half_width: f64,
    opts: &'a MomentOptions,
    rule: (Vec<f64>, Vec<f64>),
}

impl MomentProblem<'_> {
    fn truncated(&self) -> Error {
        Error::TruncatedSublevel {
            lambda: self.lambda,
            half_width: self.half_width,
        }
    }

    /// Exact integral over the last axis.
    fn innermost(&self, prefix: &[f64]) -> Result<f64> {
        let n = self.n;
        let mut origin = prefix.to_vec();
        origin.push(0.0);
        let mut dir = vec![0.0; n];
        dir[n - 1] = 1.0;
        let mut c: Vec<f64> = self.p.along_line(&origin, &dir).iter().map(|z| z.re).collect();
        c[0] -= self.lambda;
        let mag = c.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        while c.len() > 1 && c.last().is_some_and(|v| v.abs() <= 1e-13 * mag) {
            c.pop();
        }
        let eval = |t: f64| c.iter().rev().fold(0.0, |acc, v| acc * t + v);
        let deg = c.len() - 1;
        let lead = c[deg];
        let neg_at = |sign: f64| if deg % 2 == 0 { lead < 0.0 } else { lead * sign < 0.0 };
        if deg == 0 {
            return if c[0] < 0.0 { Err(self.truncated()) } else { Ok(0.0) };
        }
        if neg_at(1.0) || neg_at(-1.0) {
            return Err(self.truncated());
        }
        let cc: Vec<Complex64> = c.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let roots = real_roots(&cc, 1e-9);
        let a = self.alpha[n - 1] as i32;
        let anti = |t: f64| t.powi(2 * a + 1) / (2 * a + 1) as f64;
        let mut total = 0.0;
        for w in roots.windows(2) {
            if w[1] > w[0] && eval(0.5 * (w[0] + w[1])) < 0.0 {
                if w[0] < -0.8 * self.half_width || w[1] > 0.8 * self.half_width {
                    return Err(self.truncated());
                }
                total += anti(w[1]) - anti(w[0]);
            }
        }
        let weight: f64 = prefix
            .iter()
            .zip(self.alpha)
            .map(|(t, a)| t.powi(2 * *a as i32))
            .product();
        Ok(total * weight)
    }

    fn level(&self, prefix: &mut Vec<f64>) -> Result<f64> {
        if prefix.len() == self.n - 1 {
            return self.innermost(prefix);
        }
        let r = self.half_width;
        let s = self.opts.scan.max(8);
        let ts: Vec<f64> = (0..=s).map(|i| -r + 2.0 * r * i as f64 / s as f64).collect();
        let f = |t: f64, prefix: &mut Vec<f64>| -> Result<f64> {
            prefix.push(t);
            let v = self.level(prefix);
            prefix.pop();
            v
        };
        let mut vals = Vec::with_capacity(ts.len());
        for &t in &ts {
            vals.push(f(t, prefix)?);
        }
        if ts.iter().zip(&vals).any(|(t, v)| *v > 0.0 && t.abs() > 0.8 * r) {
            return Err(self.truncated());
        }
        let mut total = 0.0;
        let mut i = 0;
        while i < vals.len() {
            if vals[i] <= 0.0 {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < vals.len() && vals[i + 1] > 0.0 {
                i += 1;
            }
            let end = i;
            let edge = |inside: f64, outside: f64, prefix: &mut Vec<f64>| -> Result<f64> {
                let (mut a, mut b) = (inside, outside);
                for _ in 0..48 {
                    let m = 0.5 * (a + b);
                    if f(m, prefix)? > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                Ok(0.5 * (a + b))
            };
            let lo = edge(ts[start], ts[start.saturating_sub(1)], prefix)?;
            let hi = edge(ts[end], ts[(end + 1).min(ts.len() - 1)], prefix)?;
            // t = mid - half cos θ absorbs square-root behaviour at the edges
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let panels = self.opts.panels.max(1);
            let width = PI / panels as f64;
            for pnl in 0..panels {
                let c = (pnl as f64 + 0.5) * width;
                for (x, w) in self.rule.0.iter().zip(&self.rule.1) {
                    let th = c + 0.5 * width * x;
                    let t = mid - half * th.cos();
                    total += 0.5 * width * w * half * th.sin() * f(t, prefix)?;
                }
            }
            i += 1;
        }
        Ok(total)
    }
}

/// Extent of `{P < λ}` along the coordinate axes through the origin.
fn axis_extent(p: &SymbolPoly, lambda: f64) -> f64 {
    let n = p.dimension();
    let mut r = 0.0f64;
    for j in 0..n {
        let mut dir = vec![0.0; n];
        dir[j] = 1.0;
        let mut c: Vec<Complex64> = p.along_line(&vec![0.0; n], &dir).iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        c[0] -= lambda;
        for root in real_roots(&c, 1e-9) {
            r = r.max(root.abs());
        }
    }
    r
}

fn single_moment(p: &SymbolPoly, lambda: f64, alpha: &[u32], opts: &MomentOptions) -> Result<f64> {
    let n = p.dimension();
    let rule = gauss_legendre(opts.nodes.max(2));
    let solve = |q: &SymbolPoly, half_width: f64| {
        let prob = MomentProblem {
            p: q,
            n,
            lambda,
            alpha,
            half_width,
            opts,
            rule: rule.clone(),
        };
        prob.level(&mut Vec::new())
    };
    if let Some(h) = opts.half_width {
        return solve(p, h);
    }
    // rescale so the sublevel set sits in the unit box
    let r0 = axis_extent(p, lambda);
    let mut k = if r0 > 0.0 { r0.log2().ceil() as i32 } else { 0 };
    let weight_power = n as i32 + 2 * alpha.iter().sum::<u32>() as i32;
    for _ in 0..64 {
        let s = 2f64.powi(k);
        let q = rescale_symbol(p, s)?;
        match solve(&q, 1.25) {
            Ok(v) => return Ok(v * s.powi(weight_power)),
            Err(Error::TruncatedSublevel { .. }) => k += 1,
            Err(e) => return Err(e),
        }
    }
    Err(Error::TruncatedSublevel {
        lambda,
        half_width: f64::INFINITY,
    })
}

/// `∫_{Re P < λ} ξ^{2α} dξ` for every λ and α.
pub fn sublevel_moments(p: &SymbolPoly, lambdas: &[f64], alphas: &[MultiIndex], opts: &MomentOptions) -> Result<SpectralDiagonal> {
    let re = p.re_part();
    let n = p.dimension();
    for a in alphas {
        if a.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
        }
    }
    let moments = alphas
        .iter()
        .map(|a| {
            lambdas
                .par_iter()
                .map(|&l| single_moment(&re, l, a.entries(), opts))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralDiagonal::new(
        lambdas.to_vec(),
        alphas.iter().map(|a| a.entries().to_vec()).collect(),
        moments,
        (2.0 * PI).powi(-(n as i32)),
        DiagonalSource::Frozen,
    )
}

/// Monte-Carlo estimate of the same moments from uniform samples in `[-h, h]^n`.
pub fn sublevel_moments_mc(
    p: &SymbolPoly,
    lambdas: &[f64],
    alphas: &[MultiIndex],
    half_width: f64,
    samples: usize,
    seed: u64,
) -> Result<SpectralDiagonal> {
    let re = p.re_part();
    let n = p.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![vec![0.0; lambdas.len()]; alphas.len()];
    let mut xi = vec![0.0; n];
    for _ in 0..samples {
        for v in xi.iter_mut() {
            *v = rng.gen_range(-half_width..half_width);
        }
        let val = re.eval_real(&xi).re;
        for (k, a) in alphas.iter().enumerate() {
            let w = a.monomial(&xi).powi(2);
            for (i, l) in lambdas.iter().enumerate() {
                if val < *l {
                    sums[k][i] += w;
                }
            }
        }
    }
    let vol = (2.0 * half_width).powi(n as i32) / samples as f64;
    SpectralDiagonal::new(
        lambdas.to_vec(),
        alphas.iter().map(|a| a.entries().to_vec()).collect(),
        sums.into_iter().map(|r| r.into_iter().map(|s| s * vol).collect()).collect(),
        (2.0 * PI).powi(-(n as i32)),
        DiagonalSource::Frozen,
    )
}

/// `C λ^a (log λ)^t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub c: f64,
    pub a: f64,
    pub t: u32,
    pub residual: f64,
    /// RMS residual of the fit for each candidate `t`.
    pub candidates: Vec<f64>,
}

/// Fits the diagonal `values(k)`; prefers smaller `t` unless a larger one halves the residual.
pub fn fit_asymptotics(diag: &SpectralDiagonal, k: usize) -> Result<AsymptoticFit> {
    let lam = &diag.lambdas;
    if lam.len() < 6 {
        return Err(Error::InsufficientData(format!("{} λ points; need at least 6", lam.len())));
    }
    if lam[0] <= 0.0 || lam[lam.len() - 1] / lam[0] < 100.0 - 1e-9 {
        return Err(Error::InsufficientData("λ grid must be positive and span two decades".into()));
    }
    let vals = diag.values(k);
    if vals.iter().any(|v| *v <= 0.0) {
        return Err(Error::DegenerateFit("diagonal vanishes on part of the grid".into()));
    }
    let n = diag.alphas[k].len().max(1);
    let x: Vec<f64> = lam.iter().map(|l| l.ln()).collect();
    let mut best: Option<AsymptoticFit> = None;
    let mut candidates = Vec::new();
    for t in 0..n as u32 {
        if t > 0 && lam[0] <= 1.0 {
            break;
        }
        let y: Vec<f64> = vals
            .iter()
            .zip(&x)
            .map(|(v, lx)| if t == 0 { v.ln() } else { v.ln() - t as f64 * lx.ln() })
            .collect();
        let f = linear_fit(&x, &y)?;
        candidates.push(f.residual);
        let cand = AsymptoticFit {
            c: f.intercept.exp(),
            a: f.slope,
            t,
            residual: f.residual,
            candidates: Vec::new(),
        };
        best = match best {
            Some(b) if cand.residual >= 0.5 * b.residual => Some(b),
            _ => Some(cand),
        };
    }
    let mut best = best.expect("t = 0 is always tried");
    best.candidates = candidates;
    Ok(best)
}

/// `G(λ) = ∫ dE_μ / (μ - λ)` from the raw moments of `alphas[k]`, with a
/// power-law tail beyond the last grid point.
pub fn stieltjes_green(diag: &SpectralDiagonal, k: usize, lambda: f64) -> Result<f64> {
    let mu = &diag.lambdas;
    if !(lambda < mu[0]) {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} must lie below the first grid point {}",
            mu[0]
        )));
    }
    let e = &diag.moments[k];
    let mut total = e[0] / (mu[0] - lambda);
    for i in 1..mu.len() {
        let mid = 0.5 * (mu[i] + mu[i - 1]);
        total += (e[i] - e[i - 1]) / (mid - lambda);
    }
    let top = *mu.last().expect("nonempty");
    let decade: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] >= top / 10.0 && mu[i] > 0.0).collect();
    if decade.len() < 3 || e[decade[0]] >= *e.last().expect("nonempty") {
        return Ok(total);
    }
    let x: Vec<f64> = decade.iter().map(|&i| mu[i].ln()).collect();
    let y: Vec<f64> = decade.iter().map(|&i| e[i].max(f64::MIN_POSITIVE).ln()).collect();
    let f = linear_fit(&x, &y)?;
    let a = f.slope;
    if a >= 1.0 - 1e-6 {
        return Err(Error::Divergent(format!("Stieltjes tail with growth exponent {a:.3} ≥ 1")));
    }
    let c = e.last().expect("nonempty") / top.powf(a);
    Ok(total + stieltjes_tail(c, a, top, lambda))
}

/// `∫_{μ₀}^∞ d(Cμ^a)/(μ - λ)` for `0 < a < 1`, via `μ = μ₀ t^{-1/(1-a)}`.
fn stieltjes_tail(c: f64, a: f64, mu0: f64, lambda: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let p = 1.0 / (1.0 - a);
    let q = -lambda / mu0;
    let rule = gauss_legendre(32);
    let integral = crate::numeric::integrate(|t| p / (1.0 + q * t.powf(p)), 0.0, 1.0, 8, &rule);
    c * a * mu0.powf(a - 1.0) * integral
}

/// Relative Green-kernel difference between two pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenDifference {
    pub lambdas: Vec<f64>,
    pub green_frozen: Vec<f64>,
    pub green_variable: Vec<f64>,
    pub relative: Vec<f64>,
    /// `σ(t) = ẽ_var(t) - ẽ_frozen(t)` is non-decreasing.
    pub sigma_monotone: bool,
    pub c: Option<f64>,
    pub residual: Option<f64>,
    pub identical: bool,
}

pub fn green_difference_check(frozen: &SpectralDiagonal, variable: &SpectralDiagonal, k: usize, lambdas: &[f64]) -> Result<GreenDifference> {
    if frozen.lambdas != variable.lambdas {
        return Err(Error::SpecMismatch("diagonals are on different λ grids".into()));
    }
    let sigma: Vec<f64> = frozen.moments[k]
        .iter()
        .zip(&variable.moments[k])
        .map(|(f, v)| v - f)
        .collect();
    let scale = frozen.moments[k].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let sigma_monotone = sigma.windows(2).all(|w| w[1] >= w[0] - 1e-10 * scale);
    let gf = lambdas
        .iter()
        .map(|&l| stieltjes_green(frozen, k, l))
        .collect::<Result<Vec<_>>>()?;
    let gv = lambdas
        .iter()
        .map(|&l| stieltjes_green(variable, k, l))
        .collect::<Result<Vec<_>>>()?;
    let relative: Vec<f64> = gf.iter().zip(&gv).map(|(f, v)| ((v - f) / f).abs()).collect();
    let identical = relative.iter().all(|r| *r <= 1e-14);
    let (c, residual) = if identical {
        (None, None)
    } else {
        let pts: Vec<(f64, f64)> = lambdas
            .iter()
            .zip(&relative)
            .filter(|(_, r)| **r > 0.0)
            .map(|(l, r)| (l.abs().ln(), r.ln()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        match linear_fit(&x, &y) {
            Ok(f) => (Some(-f.slope), Some(f.residual)),
            Err(_) => (None, None),
        }
    };
    Ok(GreenDifference {
        lambdas: lambdas.to_vec(),
        green_frozen: gf,
        green_variable: gv,
        relative,
        sigma_monotone,
        c,
        residual,
        identical,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckVerdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauberianReport {
    pub lambdas: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Fitted `K` in `sup_{μ≤λ} |ratio - 1| log μ ≈ K (log λ)^s` over the top decade.
    pub correction: f64,
    /// Fitted `s`; bounded correction needs `s ≤ 1/2`.
    pub log_growth: f64,
    pub residual: f64,
    pub verdict: CheckVerdict,
}

/// Largest `s` treated as bounded.
pub const TAUBERIAN_GROWTH: f64 = 0.5;
/// Largest RMS residual of the log fit.
pub const TAUBERIAN_RESIDUAL: f64 = 0.3;

/// Checks `ratio = ẽ_var / ẽ_frozen = 1 + O(1/log λ)` over the top decade.
pub fn tauberian_compare(frozen: &SpectralDiagonal, variable: &SpectralDiagonal, k: usize) -> Result<TauberianReport> {
    if frozen.lambdas != variable.lambdas {
        return Err(Error::SpecMismatch("diagonals are on different λ grids".into()));
    }
    let lam = &frozen.lambdas;
    let vf = frozen.values(k);
    let vv = variable.values(k);
    let ratio: Vec<f64> = vf.iter().zip(&vv).map(|(f, v)| if *f > 0.0 { v / f } else { f64::NAN }).collect();
    let top = *lam.last().expect("nonempty");
    let idx: Vec<usize> = (0..lam.len())
        .filter(|&i| lam[i] >= top / 10.0 && lam[i] > 1.0 && ratio[i].is_finite())
        .collect();
    let mut report = TauberianReport {
        lambdas: lam.clone(),
        ratio: ratio.clone(),
        correction: 0.0,
        log_growth: 0.0,
        residual: 0.0,
        verdict: CheckVerdict::Pass,
    };
    let q: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (lam[i].ln(), (ratio[i] - 1.0).abs() * lam[i].ln()))
        .collect();
    if q.iter().all(|(_, v)| *v <= 1e-9) {
        return Ok(report);
    }
    // Running supremum over the decade: lattice steps make q itself oscillate through zero.
    let env: Vec<f64> = q
        .iter()
        .scan(0.0_f64, |run, (_, v)| {
            *run = run.max(*v);
            Some(*run)
        })
        .collect();
    let pts: Vec<(f64, f64)> = q
        .iter()
        .zip(&env)
        .filter(|(_, e)| **e > 0.0)
        .map(|((l, _), e)| (l.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("Tauberian fit needs 3 points in the top decade".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let f = linear_fit(&x, &y)?;
    report.log_growth = f.slope;
    report.correction = (f.intercept + f.slope * (x.iter().sum::<f64>() / x.len() as f64)).exp();
    report.residual = f.residual;
    report.verdict = if f.slope <= TAUBERIAN_GROWTH && f.residual < TAUBERIAN_RESIDUAL {
        CheckVerdict::Pass
    } else {
        CheckVerdict::Fail
    };
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub exponent: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Growth exponent of the diagonal against `1 + λ`; passes when `≤ 1/r + 0.1`.
pub fn apriori_bound_check(diag: &SpectralDiagonal, k: usize, r: u32) -> Result<AprioriReport> {
    if r == 0 {
        return Err(Error::InvalidArgument("iteration order r must be at least 1".into()));
    }
    let bound = 1.0 / r as f64 + 0.1;
    let vals = diag.values(k);
    let pts: Vec<(f64, f64)> = diag
        .lambdas
        .iter()
        .zip(&vals)
        .filter(|(l, v)| **v > 0.0 && **l > -1.0)
        .map(|(l, v)| ((1.0 + l).ln(), v.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(AprioriReport {
            exponent: 0.0,
            bound,
            pass: true,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let exponent = linear_fit(&x, &y)?.slope;
    Ok(AprioriReport {
        exponent,
        bound,
        pass: exponent <= bound,
    })
}

fn slice_mask(m: &SymbolPoly, spec: &GridSpec, interval: (f64, f64)) -> Vec<bool> {
    let (l1, l2) = interval;
    let width_zero = l1 == l2;
    let tol = 1e-12 * l2.abs().max(1.0);
    (0..spec.len())
        .map(|k| {
            let v = m.eval_real(&spec.freq_coords(k)).re;
            if width_zero {
                (v - l2).abs() <= tol
            } else {
                v > l1 && v <= l2
            }
        })
        .collect()
}

/// Generic functions projected onto the discrete slice `λ₁ < Re M ≤ λ₂`
/// (`|M - λ| ≤ tol` for a zero-width interval).
pub fn slice_probes(m: &SymbolPoly, interval: (f64, f64), spec: &GridSpec, count: usize) -> Result<Vec<GridFunction>> {
    let mask = slice_mask(m, spec, interval);
    if !mask.iter().any(|b| *b) {
        return Err(Error::EmptySlice(format!("no grid frequency with {} < M ≤ {}", interval.0, interval.1)));
    }
    Ok((0..count)
        .map(|j| {
            let values = (0..spec.len())
                .map(|k| {
                    if mask[k] {
                        let i = (j * spec.len() + k + 1) as u64;
                        Complex64::new(halton(i, 2) - 0.5, halton(i, 3) - 0.5)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            Spectrum {
                spec: spec.clone(),
                values,
            }
            .inverse()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorBound {
    pub lambda_mid: f64,
    pub worst_ratio: f64,
    /// `(λ₂ - λ₁)/2`.
    pub half_width: f64,
    pub holds: bool,
}

/// `max ‖(M(D) - λ_mid) u‖ / ‖u‖` over probes lying in the slice.
pub fn approx_eigenvector_bound(m: &SymbolPoly, interval: (f64, f64), probes: &[GridFunction]) -> Result<EigenvectorBound> {
    if probes.is_empty() {
        return Err(Error::InsufficientData("no probes".into()));
    }
    let mid = 0.5 * (interval.0 + interval.1);
    let mut worst = 0.0f64;
    for u in probes {
        let mask = slice_mask(m, &u.spec, interval);
        let s = u.forward();
        let total: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
        let outside: f64 = s.values.iter().zip(&mask).filter(|(_, m)| !**m).map(|(v, _)| v.norm_sqr()).sum();
        if total == 0.0 || outside > 1e-20 * total {
            return Err(Error::EmptySlice("probe is not supported in the spectral slice".into()));
        }
        let r: f64 = s
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (v * (m.eval_real(&u.spec.freq_coords(k)) - mid)).norm_sqr())
            .sum();
        worst = worst.max((r / total).sqrt());
    }
    let half_width = 0.5 * (interval.1 - interval.0);
    Ok(EigenvectorBound {
        lambda_mid: mid,
        worst_ratio: worst,
        half_width,
        holds: worst <= half_width + 1e-9 * mid.abs().max(1.0),
    })
}

/// Largest excess of `|var δ^{αβ} e(x,y)|` over `(var δ^{αα} e(x,x) var δ^{ββ} e(y,y))^{1/2}`
/// across the offsets `x - y`, for the variation over `(μ₁, μ₂]`.
pub fn cauchy_schwarz_excess(
    m: &SymbolPoly,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    interval: (f64, f64),
    offsets: &[Vec<f64>],
    spec: &GridSpec,
) -> Result<f64> {
    let mask = slice_mask(m, spec, interval);
    let cell = spec.freq_cell_volume() / (2.0 * PI).powi(spec.dimension() as i32);
    let mut aa = 0.0;
    let mut bb = 0.0;
    let mut terms = Vec::new();
    for k in (0..spec.len()).filter(|&k| mask[k]) {
        let xi = spec.freq_coords(k);
        let (a, b) = (alpha.monomial(&xi), beta.monomial(&xi));
        aa += a * a * cell;
        bb += b * b * cell;
        terms.push((xi, a * b * cell));
    }
    let bound = (aa * bb).sqrt();
    let mut worst = f64::NEG_INFINITY;
    for d in offsets {
        let v: Complex64 = terms
            .iter()
            .map(|(xi, w)| Complex64::from_polar(*w, xi.iter().zip(d).map(|(a, b)| a * b).sum()))
            .sum();
        worst = worst.max(v.norm() - bound);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BojReport {
    pub c: f64,
    pub k: f64,
    pub taus: Vec<f64>,
    /// Largest `|Q| / (C τ^{-k} (1+|ξ|)^{-k} (τ + |M|))` per τ.
    pub worst: Vec<f64>,
    pub holds: bool,
}

/// `|Q| ≤ C τ^{-k} (1+|ξ|)^{-k} (τ + |M|)` on the frequency grid.
///
/// `k` starts at half the fitted decay exponent of `|Q|/(1+|M|)` and is
/// halved until the constant fitted at the smallest τ covers every τ.
pub fn boj_check(q: &SymbolPoly, m: &SymbolPoly, spec: &GridSpec, taus: &[f64]) -> Result<BojReport> {
    if taus.is_empty() || taus.iter().any(|t| *t < 1.0) {
        return Err(Error::InvalidArgument("τ values must be ≥ 1".into()));
    }
    let pts: Vec<(f64, f64, f64)> = (0..spec.len())
        .map(|k| {
            let xi = spec.freq_coords(k);
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            (r, q.eval_real(&xi).norm(), m.eval_real(&xi).norm())
        })
        .collect();
    // decay exponent of the shell maxima of |Q|/(1+|M|)
    let rmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let shells = 12;
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    for s in 0..shells {
        let lo = rmax * 2f64.powi(-(shells as i32) + s as i32);
        let hi = 2.0 * lo;
        let best = pts
            .iter()
            .filter(|p| p.0 > lo && p.0 <= hi && p.0 >= 1.0)
            .map(|p| p.1 / (1.0 + p.2))
            .fold(0.0, f64::max);
        if best > 0.0 {
            sx.push((1.0 + hi).ln());
            sy.push(best.ln());
        }
    }
    let k_hat = if sx.len() >= 3 { (-linear_fit(&sx, &sy)?.slope).max(0.0) } else { 0.0 };
    let mut k = 0.5 * k_hat;
    let tau0 = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    loop {
        let lhs = |p: &(f64, f64, f64), tau: f64| p.1 / (tau.powf(-k) * (1.0 + p.0).powf(-k) * (tau + p.2));
        let c = pts.iter().map(|p| lhs(p, tau0)).fold(0.0, f64::max);
        let worst: Vec<f64> = taus
            .iter()
            .map(|&t| pts.iter().map(|p| lhs(p, t) / c.max(f64::MIN_POSITIVE)).fold(0.0, f64::max))
            .collect();
        let holds = worst.iter().all(|w| *w <= 1.0 + 1e-12);
        if holds || k < 1e-3 {
            return Ok(BojReport {
                c,
                k,
                taus: taus.to_vec(),
                worst,
                holds: holds && k > 0.0,
            });
        }
        k *= 0.5;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub sigma_plus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    pub holds: bool,
}

/// `σ̂` of `M ± λ` against `σ̂` of `M`, within 10%.
pub fn param_check(m: &SymbolPoly, lambdas: &[f64], opts: &ClassifyOptions) -> Result<ParamReport> {
    let sigma = estimate_exponents(m, opts)?.sigma;
    let shifted = |l: f64| -> Result<f64> {
        let c = Coeff::from_f64(l, 0.0).ok_or_else(|| Error::InvalidArgument(format!("λ = {l}")))?;
        let p = m + &SymbolPoly::constant(m.dimension(), c);
        Ok(estimate_exponents(&p, opts)?.sigma)
    };
    let sigma_plus = lambdas.iter().map(|&l| shifted(l)).collect::<Result<Vec<_>>>()?;
    let sigma_minus = lambdas.iter().map(|&l| shifted(-l)).collect::<Result<Vec<_>>>()?;
    let holds = sigma_plus
        .iter()
        .chain(&sigma_minus)
        .all(|s| (s - sigma).abs() <= 0.1 * sigma.abs());
    Ok(ParamReport {
        sigma,
        lambdas: lambdas.to_vec(),
        sigma_plus,
        sigma_minus,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub lambdas: Vec<f64>,
    /// `‖ũ‖` on the inner region.
    pub inner: Vec<f64>,
    /// `e^{-κλ^b} ‖u‖` on the outer region.
    pub outer_term: Vec<f64>,
    /// `λ^{-c} ‖(M + λ) u‖` on the inner region.
    pub resolvent_term: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Largest `inner / (c1 outer + c2 resolvent)`.
    pub max_excess: f64,
    pub holds: bool,
}

/// Non-negative least squares for two columns.
fn nnls2(a1: &[f64], a2: &[f64], y: &[f64]) -> (f64, f64) {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (s11, s12, s22) = (dot(a1, a1), dot(a1, a2), dot(a2, a2));
    let (t1, t2) = (dot(a1, y), dot(a2, y));
    let det = s11 * s22 - s12 * s12;
    if det > 1e-14 * s11 * s22 {
        let c1 = (s22 * t1 - s12 * t2) / det;
        let c2 = (s11 * t2 - s12 * t1) / det;
        if c1 >= 0.0 && c2 >= 0.0 {
            return (c1, c2);
        }
    }
    let cost = |c1: f64, c2: f64| {
        y.iter()
            .zip(a1.iter().zip(a2))
            .map(|(y, (a, b))| (y - c1 * a - c2 * b).powi(2))
            .sum::<f64>()
    };
    let only1 = if s11 > 0.0 { (t1 / s11).max(0.0) } else { 0.0 };
    let only2 = if s22 > 0.0 { (t2 / s22).max(0.0) } else { 0.0 };
    if cost(only1, 0.0) <= cost(0.0, only2) {
        (only1, 0.0)
    } else {
        (0.0, only2)
    }
}

/// Localized-eigenvector decay for probes in the slice `λ - w < M ≤ λ` (w = 1, doubled while the grid slice is empty):
/// `‖ũ‖_inner ≤ C₁ e^{-κλ^b} ‖u‖_outer + C₂ λ^{-c} ‖(M + λ) u‖_inner`.
pub fn representation_check(
    m: &SymbolPoly,
    spec: &GridSpec,
    lambdas: &[f64],
    kappa: f64,
    b: f64,
    c: f64,
) -> Result<RepresentationReport> {
    let n = spec.dimension();
    let inner_r: Vec<f64> = (0..n).map(|a| 0.25 * spec.half_width[a]).collect();
    let outer_r: Vec<f64> = (0..n).map(|a| 0.5 * spec.half_width[a]).collect();
    let inside = |p: &[f64], r: &[f64]| p.iter().zip(r).all(|(x, r)| x.abs() <= *r);
    let cutoff = GridFunction::from_real_fn(spec, |p| {
        p.iter()
            .zip(&outer_r)
            .map(|(x, r)| crate::mizohata::bump(x / r))
            .product()
    });
    let norm_on = |u: &GridFunction, pred: &dyn Fn(&[f64]) -> bool| -> f64 {
        let h = spec.cell_volume();
        (0..spec.len())
            .filter(|&i| pred(&spec.coords(i)))
            .map(|i| u.values[i].norm_sqr() * h)
            .sum::<f64>()
            .sqrt()
    };
    let mut inner = Vec::new();
    let mut outer_term = Vec::new();
    let mut resolvent_term = Vec::new();
    for &l in lambdas {
        let mut width = 1.0;
        let probe = loop {
            match slice_probes(m, (l - width, l), spec, 1) {
                Ok(mut p) => break p.remove(0),
                Err(Error::EmptySlice(_)) if width < l => width *= 2.0,
                Err(e) => return Err(e),
            }
        };
        let u = probe.mul(&cutoff)?;
        let shifted = u
            .forward()
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * (m.eval_real(&spec.freq_coords(k)) + l))
            .collect();
        let mu = Spectrum {
            spec: spec.clone(),
            values: shifted,
        }
        .inverse();
        inner.push(norm_on(&u, &|p| inside(p, &inner_r)));
        outer_term.push((-kappa * l.powf(b)).exp() * norm_on(&u, &|p| !inside(p, &inner_r)));
        resolvent_term.push(l.powf(-c) * norm_on(&mu, &|p| inside(p, &inner_r)));
    }
    let (c1, c2) = nnls2(&outer_term, &resolvent_term, &inner);
    let max_excess = inner
        .iter()
        .zip(outer_term.iter().zip(&resolvent_term))
        .map(|(y, (a, b))| y / (c1 * a + c2 * b))
        .fold(0.0, f64::max);
    Ok(RepresentationReport {
        lambdas: lambdas.to_vec(),
        inner,
        outer_term,
        resolvent_term,
        c1,
        c2,
        max_excess,
        holds: max_excess.is_finite() && max_excess <= 2.0,
    })
}

/// Diagonals at `x` of the spectral functions of the variable good operator
/// (bad frequency 0, `y''` frozen at `x''`) and of its frozen symbol, on a grid.
///
/// The variable one comes from the Hermitian part of the collocation matrix.
pub fn variable_diagonal(op: &VariableOperator, x: &[f64], lambdas: &[f64], spec: &GridSpec) -> Result<(SpectralDiagonal, SpectralDiagonal)> {
    let n = op.split.good;
    let good = spec.good_block();
    if x.len() != op.split.dimension() {
        return Err(Error::DimensionMismatch {
            expected: op.split.dimension(),
            got: x.len(),
        });
    }
    let xb = &x[n..];
    let ng = good.len();
    let nodes: Vec<Vec<f64>> = good.all_coords();
    let zero_eta = vec![0.0; op.split.bad];
    let mut symbols: Vec<&SymbolPoly> = op.terms.iter().map(|t| &t.symbol).collect();
    let full_type = op.type_symbol_full();
    symbols.push(&full_type);
    let coeff = |z: &[f64]| -> Result<Vec<Complex64>> {
        let mut p = z.to_vec();
        p.extend_from_slice(xb);
        let jt = symbols.len();
        if op.in_compact(&p) {
            let mut c = op.coefficients_at(&p)?;
            c.push(Complex64::new(0.0, 0.0));
            Ok(c)
        } else {
            let mut c = vec![Complex64::new(0.0, 0.0); jt];
            c[jt - 1] = Complex64::new(1.0, 0.0);
            Ok(c)
        }
    };
    let coeffs = nodes.iter().map(|z| coeff(z)).collect::<Result<Vec<_>>>()?;
    let sym_at = |j: usize, k: usize| {
        let mut xi = good.freq_coords(k);
        xi.extend_from_slice(&zero_eta);
        symbols[j].eval_real(&xi).re
    };
    // columns of Σ_j c_j(z) Re S_j(D) applied to unit vectors
    let mut a = DMatrix::<Complex64>::zeros(ng, ng);
    let mults: Vec<Vec<f64>> = (0..symbols.len()).map(|j| (0..ng).map(|k| sym_at(j, k)).collect()).collect();
    for l in 0..ng {
        let mut e = GridFunction::zeros(&good);
        e.values[l] = Complex64::new(1.0, 0.0);
        let ehat = e.forward().values;
        for (j, mj) in mults.iter().enumerate() {
            let col = Spectrum {
                spec: good.clone(),
                values: ehat.iter().zip(mj).map(|(v, s)| v * s).collect(),
            }
            .inverse();
            for z in 0..ng {
                a[(z, l)] += coeffs[z][j] * col.values[z];
            }
        }
    }
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let ix = good.nearest_node(&x[..n])?;
    let cell = good.cell_volume();
    let norm = (2.0 * PI).powi(n as i32);
    let density: Vec<(f64, f64)> = (0..ng)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors[(ix, j)].norm_sqr() / cell * norm))
        .collect();
    let var: Vec<f64> = lambdas
        .iter()
        .map(|&l| density.iter().filter(|(mu, _)| *mu < l).map(|(_, d)| d).sum())
        .collect();
    let cx = coeff(&x[..n])?;
    let frozen_vals: Vec<f64> = (0..ng)
        .map(|k| cx.iter().enumerate().map(|(j, c)| (c * sym_at(j, k)).re).sum())
        .collect();
    let dxi = good.freq_cell_volume();
    let fro: Vec<f64> = lambdas
        .iter()
        .map(|&l| frozen_vals.iter().filter(|v| **v < l).count() as f64 * dxi)
        .collect();
    let scale = (2.0 * PI).powi(-(n as i32));
    let zero = vec![vec![0u32; n]];
    Ok((
        SpectralDiagonal::new(lambdas.to_vec(), zero.clone(), vec![var], scale, DiagonalSource::Variable)?,
        SpectralDiagonal::new(lambdas.to_vec(), zero, vec![fro], scale, DiagonalSource::Frozen)?,
    ))
}

/// Picks λ points geometrically between `lo` and `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let r = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * r.powi(i as i32)).collect()
}
