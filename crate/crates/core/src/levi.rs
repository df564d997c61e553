//! Levi parametrix for variable-coefficient operators in Mizohata form.
//!
//! For a singularity `x = (x', x'')` the bad coordinate `x''` is frozen in the
//! coefficients, so every kernel is translation invariant in the bad
//! variables and splits into good-block two-point kernels, one per bad
//! frequency `η`. With `h^x` the fundamental solution of the frozen good
//! symbol `P^x(ξ') = L(x, ξ', 0)`,
//!
//! ```text
//! K⁺_η(x', z') = h^x(z' - x')
//! α_η(x', z') = [P^x(D_{z'}) - L(z', x'', D_{z'}, η)] K⁺_η(x', z')
//! u_η = α̃_η + [u_η, α̃_η]
//! g̃_η = φ̂(η) (K⁺_η + [u_η, K⁺_η])
//! ```
//!
//! where `φ` is the bad-variable mollifier. On bad frequencies where the
//! remainder is too large for the plain series, `α̃_η = α_0 + φ̂(η)² (α_η - α_0)`
//! replaces `α_η`; elsewhere `α̃_η = α_η`.
//! Two-point kernels act on functions of `z` and every operator acts in `z`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{estimate_exponents, ClassifyOptions};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, IntegralOperator, Spectrum};
use crate::kernels::{green_kernel_frozen, mollifier};
use crate::mizohata::{CoeffField, VariableOperator, VariableTerm};
use crate::mizohata::expr::Expr;
use crate::norms::{spectral_m_alpha, standard_probes};
use crate::numeric::{linear_fit, LinearFit};
use crate::symbol::{parse_with, MultiIndex, ParseContext, SymbolPoly, VariableSplit};

/// Dense kernel `K(x, z)` on a good-variable grid, acting by
/// `(Ku)(x) = Σ_z K(x, z) u(z) h^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPointKernel {
    pub spec: GridSpec,
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl TwoPointKernel {
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.len();
        TwoPointKernel {
            spec: spec.clone(),
            re: DMatrix::zeros(n, n),
            im: DMatrix::zeros(n, n),
        }
    }

    /// The grid delta `δ(x - z)`, the identity for [`bracket`].
    pub fn delta(spec: &GridSpec) -> Self {
        let n = spec.len();
        TwoPointKernel {
            spec: spec.clone(),
            re: DMatrix::identity(n, n) / spec.cell_volume(),
            im: DMatrix::zeros(n, n),
        }
    }

    pub fn from_fn<F: Fn(&[f64], &[f64]) -> Complex64>(spec: &GridSpec, f: F) -> Self {
        let coords = spec.all_coords();
        let n = spec.len();
        let mut k = TwoPointKernel::zeros(spec);
        for i in 0..n {
            for j in 0..n {
                let v = f(&coords[i], &coords[j]);
                k.re[(i, j)] = v.re;
                k.im[(i, j)] = v.im;
            }
        }
        k
    }

    /// Builds a kernel from its rows `K(x_i, ·)`.
    pub fn from_rows(spec: &GridSpec, rows: &[Vec<Complex64>]) -> Self {
        let n = spec.len();
        let mut k = TwoPointKernel::zeros(spec);
        for (i, r) in rows.iter().enumerate() {
            for j in 0..n {
                k.re[(i, j)] = r[j].re;
                k.im[(i, j)] = r[j].im;
            }
        }
        k
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn row(&self, i: usize) -> GridFunction {
        GridFunction {
            spec: self.spec.clone(),
            values: (0..self.spec.len()).map(|j| self.get(i, j)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| *v == 0.0)
    }

    fn is_real(&self) -> bool {
        self.im.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(self.im.iter())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &TwoPointKernel) -> Result<TwoPointKernel> {
        self.spec.ensure_same(&other.spec)?;
        Ok(TwoPointKernel {
            spec: self.spec.clone(),
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        })
    }

    pub fn sub(&self, other: &TwoPointKernel) -> Result<TwoPointKernel> {
        self.spec.ensure_same(&other.spec)?;
        Ok(TwoPointKernel {
            spec: self.spec.clone(),
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        })
    }

    pub fn scale(&self, c: Complex64) -> TwoPointKernel {
        TwoPointKernel {
            spec: self.spec.clone(),
            re: &self.re * c.re - &self.im * c.im,
            im: &self.re * c.im + &self.im * c.re,
        }
    }

    /// Multiplies entrywise by `w(x, z)`.
    pub fn weighted<F: Fn(&[f64], &[f64]) -> f64>(&self, w: F) -> TwoPointKernel {
        let coords = self.spec.all_coords();
        let mut out = self.clone();
        let n = self.spec.len();
        for i in 0..n {
            for j in 0..n {
                let f = w(&coords[i], &coords[j]);
                out.re[(i, j)] *= f;
                out.im[(i, j)] *= f;
            }
        }
        out
    }

    /// `K · U` for a batch of column vectors, including the cell volume.
    fn apply_matrix(&self, ur: &DMatrix<f64>, ui: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = self.spec.cell_volume();
        let ui_zero = ui.iter().all(|v| *v == 0.0);
        if self.is_real() {
            let r = &self.re * ur * h;
            let i = if ui_zero { DMatrix::zeros(r.nrows(), r.ncols()) } else { &self.re * ui * h };
            return (r, i);
        }
        if ui_zero {
            return (&self.re * ur * h, &self.im * ur * h);
        }
        ((&self.re * ur - &self.im * ui) * h, (&self.re * ui + &self.im * ur) * h)
    }

    fn apply_batch(&self, us: &[GridFunction]) -> Vec<GridFunction> {
        let n = self.spec.len();
        let ur = DMatrix::from_fn(n, us.len(), |i, j| us[j].values[i].re);
        let ui = DMatrix::from_fn(n, us.len(), |i, j| us[j].values[i].im);
        let (r, i) = self.apply_matrix(&ur, &ui);
        (0..us.len())
            .map(|j| GridFunction {
                spec: self.spec.clone(),
                values: (0..n).map(|k| Complex64::new(r[(k, j)], i[(k, j)])).collect(),
            })
            .collect()
    }
}

impl IntegralOperator for TwoPointKernel {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&u.spec)?;
        Ok(self.apply_batch(std::slice::from_ref(u)).remove(0))
    }
}

/// `[f, g](x, z) = ∫ f(x, y) g(y, z) dy`.
pub fn bracket(f: &TwoPointKernel, g: &TwoPointKernel) -> Result<TwoPointKernel> {
    f.spec.ensure_same(&g.spec)?;
    let h = f.spec.cell_volume();
    let (re, im) = if f.is_real() && g.is_real() {
        (&f.re * &g.re * h, DMatrix::zeros(f.re.nrows(), g.re.ncols()))
    } else {
        (
            (&f.re * &g.re - &f.im * &g.im) * h,
            (&f.re * &g.im + &f.im * &g.re) * h,
        )
    };
    Ok(TwoPointKernel {
        spec: f.spec.clone(),
        re,
        im,
    })
}

/// Probe set for `N^{0,0}` estimates on a grid.
pub fn norm_probes(spec: &GridSpec) -> Vec<GridFunction> {
    standard_probes(spec).into_iter().map(|p| p.u).collect()
}

/// `max_u M_0(Ku) / M_0(u)` over the probes.
pub fn n00_estimate(k: &TwoPointKernel, probes: &[GridFunction], probe_m0: &[f64]) -> f64 {
    if k.is_zero() {
        return 0.0;
    }
    let zero = MultiIndex::zeros(k.spec.dimension());
    k.apply_batch(probes)
        .iter()
        .zip(probe_m0)
        .map(|(ku, m0)| spectral_m_alpha(&ku.forward(), &zero).expect("dimension") / m0)
        .fold(0.0, f64::max)
}

fn probe_m0(probes: &[GridFunction]) -> Vec<f64> {
    probes
        .iter()
        .map(|u| spectral_m_alpha(&u.forward(), &MultiIndex::zeros(u.spec.dimension())).expect("dimension"))
        .collect()
}

/// Result of summing `u = α + [α,α] + [[α,α],α] + …`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeumannSeries {
    /// Number of bracket terms in the partial sum.
    pub terms: usize,
    pub sum: TwoPointKernel,
    /// Probe norm of `α`, then of each added term.
    pub norm_history: Vec<f64>,
    pub converged: bool,
    /// `N^{0,0}` estimate of `u - α - [u, α]`.
    pub fixed_point_residual: f64,
    /// Largest relative mismatch between successive partial sums and the bracket term.
    pub recursion_error: f64,
    /// Fitted geometric ratio of the term norms.
    pub fitted_ratio: Option<f64>,
}

/// Summary of a series without the kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub terms: usize,
    pub norm_history: Vec<f64>,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub recursion_error: f64,
    pub fitted_ratio: Option<f64>,
}

impl NeumannSeries {
    pub fn summary(&self) -> SeriesSummary {
        SeriesSummary {
            terms: self.terms,
            norm_history: self.norm_history.clone(),
            converged: self.converged,
            fixed_point_residual: self.fixed_point_residual,
            recursion_error: self.recursion_error,
            fitted_ratio: self.fitted_ratio,
        }
    }
}

/// Solves `u = α + [u, α]` by Neumann iteration, controlled by probe norms.
pub fn neumann_u(alpha: &TwoPointKernel, tol: f64, n_max: usize) -> Result<NeumannSeries> {
    let probes = norm_probes(&alpha.spec);
    neumann_with_probes(alpha, tol, n_max, &probes)
}

fn neumann_with_probes(alpha: &TwoPointKernel, tol: f64, n_max: usize, probes: &[GridFunction]) -> Result<NeumannSeries> {
    let m0 = probe_m0(probes);
    let q0 = n00_estimate(alpha, probes, &m0);
    let mut series = NeumannSeries {
        terms: 0,
        sum: TwoPointKernel::zeros(&alpha.spec),
        norm_history: vec![q0],
        converged: false,
        fixed_point_residual: 0.0,
        recursion_error: 0.0,
        fitted_ratio: None,
    };
    if alpha.is_zero() {
        series.converged = true;
        return Ok(series);
    }
    if q0 >= 1.0 {
        return Ok(series);
    }
    let mut u = alpha.clone();
    let mut term = alpha.clone();
    series.terms = 1;
    let mut rising = 0;
    while series.terms < n_max.max(1) && *series.norm_history.last().expect("nonempty") >= tol {
        let next_term = bracket(&term, alpha)?;
        let next_u = alpha.add(&bracket(&u, alpha)?)?;
        let diff = next_u.sub(&u)?.sub(&next_term)?.max_abs();
        series.recursion_error = series.recursion_error.max(diff / next_u.max_abs().max(f64::MIN_POSITIVE));
        let qn = n00_estimate(&next_term, probes, &m0);
        let last = *series.norm_history.last().expect("nonempty");
        rising = if qn >= last { rising + 1 } else { 0 };
        series.norm_history.push(qn);
        u = next_u;
        term = next_term;
        series.terms += 1;
        if rising >= 3 {
            return Err(Error::NonConvergence(format!(
                "Neumann term norms rose for 3 consecutive terms: {:?}",
                &series.norm_history[series.norm_history.len() - 4..]
            )));
        }
    }
    series.converged = *series.norm_history.last().expect("nonempty") < tol;
    let resid = u.sub(alpha)?.sub(&bracket(&u, alpha)?)?;
    series.fixed_point_residual = n00_estimate(&resid, probes, &m0);
    let pts: Vec<(f64, f64)> = series
        .norm_history
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(k, q)| (k as f64, q.ln()))
        .collect();
    if pts.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        series.fitted_ratio = linear_fit(&x, &y).ok().map(|f| f.slope.exp());
    }
    series.sum = u;
    Ok(series)
}

/// Tunables of the Levi construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeviConfig {
    /// Mollifier radius in bad-grid cells.
    pub mollifier_cells: f64,
    pub tol: f64,
    pub n_max: usize,
    /// Bad frequencies whose plain remainder has probe norm above this use `α̃_η`.
    pub regularize_above: f64,
}

impl Default for LeviConfig {
    fn default() -> Self {
        LeviConfig {
            mollifier_cells: 4.0,
            tol: 1e-6,
            n_max: 50,
            regularize_above: 0.5,
        }
    }
}

/// The operator restricted to the slice `z'' = x''`, with the type operator
/// appended as a last term whose coefficient is the indicator of the
/// complement of the compact set.
struct SliceOperator {
    good: GridSpec,
    bad: Option<GridSpec>,
    symbols: Vec<SymbolPoly>,
    /// `coeffs[node][term]`
    coeffs: Vec<Vec<Complex64>>,
    /// `S_j(ξ', 0)` on the good frequency grid.
    s0: Vec<Vec<Complex64>>,
    eta_dependent: Vec<bool>,
}

impl SliceOperator {
    fn new(op: &VariableOperator, spec: &GridSpec, x_bad: &[f64]) -> Result<Self> {
        if spec.split != op.split {
            return Err(Error::SpecMismatch(format!(
                "grid split {}+{} against operator split {}+{}",
                spec.split.good, spec.split.bad, op.split.good, op.split.bad
            )));
        }
        let n = op.split.good;
        let nu = op.split.dimension();
        let good = spec.good_block();
        let mut symbols: Vec<SymbolPoly> = op.terms.iter().map(|t| t.symbol.clone()).collect();
        symbols.push(op.type_symbol_full());
        let jt = symbols.len();
        let coeffs = (0..good.len())
            .map(|i| {
                let mut p = good.coords(i);
                p.extend_from_slice(x_bad);
                if op.in_compact(&p) {
                    let mut c = op.coefficients_at(&p)?;
                    c.push(Complex64::new(0.0, 0.0));
                    Ok(c)
                } else {
                    let mut c = vec![Complex64::new(0.0, 0.0); jt];
                    c[jt - 1] = Complex64::new(1.0, 0.0);
                    Ok(c)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let zeros_bad = vec![0.0; nu - n];
        let s0 = symbols
            .iter()
            .map(|s| {
                (0..good.len())
                    .map(|k| {
                        let mut xi = good.freq_coords(k);
                        xi.extend_from_slice(&zeros_bad);
                        s.eval_real(&xi)
                    })
                    .collect()
            })
            .collect();
        let bad_vars: Vec<usize> = (n..nu).collect();
        let eta_dependent = symbols.iter().map(|s| s.degree_in(&bad_vars) > 0).collect();
        Ok(SliceOperator {
            good,
            bad: spec.bad_block(),
            symbols,
            coeffs,
            s0,
            eta_dependent,
        })
    }

    fn etas(&self) -> Vec<Vec<f64>> {
        match &self.bad {
            None => vec![Vec::new()],
            Some(b) => b.all_frequencies(),
        }
    }

    fn symbol_at_eta(&self, j: usize, eta: &[f64]) -> Vec<Complex64> {
        (0..self.good.len())
            .map(|k| {
                let mut xi = self.good.freq_coords(k);
                xi.extend_from_slice(eta);
                self.symbols[j].eval_real(&xi)
            })
            .collect()
    }

    /// Frozen good symbol at node `i`, minus λ, on the frequency grid.
    fn frozen_minus_lambda(&self, i: usize, lambda: f64) -> Result<Vec<Complex64>> {
        let c = &self.coeffs[i];
        let d: Vec<Complex64> = (0..self.good.len())
            .map(|k| c.iter().zip(&self.s0).map(|(cj, s)| cj * s[k]).sum::<Complex64>() - lambda)
            .collect();
        let real = d.iter().all(|v| v.im.abs() <= 1e-14 * v.re.abs().max(1.0));
        let min_re = d.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        let min_abs = d.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if (real && min_re <= 0.0) || min_abs <= 1e-12 * lambda.abs().max(1.0) {
            return Err(Error::ResolventSingular {
                lambda,
                min_value: min_re + lambda,
            });
        }
        Ok(d)
    }

    /// `e^{-i x'·ξ}` for node `i`.
    fn phase(&self, i: usize) -> Vec<Complex64> {
        let x = self.good.coords(i);
        (0..self.good.len())
            .map(|k| {
                let xi = self.good.freq_coords(k);
                let dot: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, -dot)
            })
            .collect()
    }

    fn inverse(&self, values: Vec<Complex64>) -> Vec<Complex64> {
        Spectrum {
            spec: self.good.clone(),
            values,
        }
        .inverse()
        .values
    }

    /// `(L(z, D', η) - λ) f` for a function of `z'`.
    fn apply(&self, f: &[Complex64], eta: &[f64], lambda: f64) -> Vec<Complex64> {
        let fhat = GridFunction {
            spec: self.good.clone(),
            values: f.to_vec(),
        }
        .forward()
        .values;
        let mut out: Vec<Complex64> = f.iter().map(|v| -v * lambda).collect();
        for j in 0..self.symbols.len() {
            let s = self.symbol_at_eta(j, eta);
            let g = self.inverse(fhat.iter().zip(&s).map(|(a, b)| a * b).collect());
            for (z, o) in out.iter_mut().enumerate() {
                *o += self.coeffs[z][j] * g[z];
            }
        }
        out
    }
}

/// Remainder kernels on every bad frequency of one singular slice.
#[derive(Clone, Debug)]
pub struct RemainderSlices {
    pub spec: GridSpec,
    pub x_bad: Vec<f64>,
    pub etas: Vec<Vec<f64>>,
    /// `φ̂(η)` of the bad-variable mollifier (1 without bad variables).
    pub phi_hat: Vec<Complex64>,
    pub kplus: TwoPointKernel,
    /// `α_0`, the η-free remainder.
    pub alpha0: TwoPointKernel,
    /// `α_η - α_0` per bad frequency.
    pub alpha_eta: Vec<TwoPointKernel>,
    /// Largest `|c_j(x) - c_j(z)|` at `z = x`.
    pub vanish_check: f64,
}

impl RemainderSlices {
    /// Unregularized `α_η`.
    pub fn alpha(&self, k: usize) -> Result<TwoPointKernel> {
        self.alpha0.add(&self.alpha_eta[k])
    }

    /// `α̃_η = α_0 + φ̂(η)² (α_η - α_0)`.
    pub fn regularized(&self, k: usize) -> Result<TwoPointKernel> {
        let p2 = self.phi_hat[k] * self.phi_hat[k];
        self.alpha0.add(&self.alpha_eta[k].scale(p2))
    }

    /// `φ̂(η)² α_η`: the remainder convolved with `φ` and `ψ = φ` in the bad variables.
    pub fn mollified(&self, k: usize) -> Result<TwoPointKernel> {
        let p2 = self.phi_hat[k] * self.phi_hat[k];
        Ok(self.alpha(k)?.scale(p2))
    }

    pub fn sup_abs(&self) -> Result<f64> {
        let mut s = self.alpha0.max_abs();
        for k in 0..self.etas.len() {
            s = s.max(self.alpha(k)?.max_abs());
        }
        Ok(s)
    }
}

fn phi_hat(spec: &GridSpec, cells: f64) -> Result<Vec<Complex64>> {
    match spec.bad_block() {
        None => Ok(vec![Complex64::new(1.0, 0.0)]),
        Some(b) => Ok(mollifier(&b, cells)?.forward().values),
    }
}

/// Builds `K⁺` and `α_η` for the singular slice through `x''` (every good node
/// serves as a singularity `x'`).
pub fn remainder_alpha(op: &VariableOperator, lambda: f64, x_bad: &[f64], spec: &GridSpec, mollifier_cells: f64) -> Result<RemainderSlices> {
    if x_bad.len() != spec.split.bad {
        return Err(Error::DimensionMismatch {
            expected: spec.split.bad,
            got: x_bad.len(),
        });
    }
    let so = SliceOperator::new(op, spec, x_bad)?;
    let ng = so.good.len();
    let jt = so.symbols.len();
    let etas = so.etas();
    let phi = phi_hat(spec, mollifier_cells)?;
    // per row: multiplier 1/(P^x - λ) with the shift to x'
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..ng)
        .into_par_iter()
        .map(|i| {
            let d = so.frozen_minus_lambda(i, lambda)?;
            let base: Vec<Complex64> = so.phase(i).iter().zip(&d).map(|(p, d)| p / d).collect();
            let h = so.inverse(base.clone());
            let mut alpha = vec![Complex64::new(0.0, 0.0); ng];
            for j in 0..jt {
                let cx = so.coeffs[i][j];
                let any = (0..ng).any(|z| so.coeffs[z][j] != cx);
                if !any {
                    continue;
                }
                let a = so.inverse(base.iter().zip(&so.s0[j]).map(|(b, s)| b * s).collect());
                for z in 0..ng {
                    alpha[z] += (cx - so.coeffs[z][j]) * a[z];
                }
            }
            Ok((h, alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    let vanish_check = (0..ng)
        .flat_map(|i| so.coeffs[i].iter().zip(&so.coeffs[i]).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    let kplus = TwoPointKernel::from_rows(&so.good, &rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>());
    let alpha0 = TwoPointKernel::from_rows(&so.good, &rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let dependent: Vec<usize> = (0..jt).filter(|&j| so.eta_dependent[j]).collect();
    let alpha_eta = etas
        .par_iter()
        .map(|eta| {
            if dependent.is_empty() || eta.iter().all(|e| *e == 0.0) {
                return Ok(TwoPointKernel::zeros(&so.good));
            }
            let diffs: Vec<(usize, Vec<Complex64>)> = dependent
                .iter()
                .map(|&j| {
                    let s = so.symbol_at_eta(j, eta);
                    (j, s.iter().zip(&so.s0[j]).map(|(a, b)| a - b).collect())
                })
                .collect();
            let mut out = Vec::with_capacity(ng);
            for i in 0..ng {
                let d = so.frozen_minus_lambda(i, lambda)?;
                let base: Vec<Complex64> = so.phase(i).iter().zip(&d).map(|(p, d)| p / d).collect();
                let mut row = vec![Complex64::new(0.0, 0.0); ng];
                for (j, ds) in &diffs {
                    let b = so.inverse(base.iter().zip(ds).map(|(b, s)| b * s).collect());
                    for z in 0..ng {
                        row[z] -= so.coeffs[z][*j] * b[z];
                    }
                }
                out.push(row);
            }
            Ok(TwoPointKernel::from_rows(&so.good, &out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RemainderSlices {
        spec: spec.clone(),
        x_bad: x_bad.to_vec(),
        etas,
        phi_hat: phi,
        kplus,
        alpha0,
        alpha_eta,
        vanish_check,
    })
}

/// A kernel given per bad frequency: `K(x', x''; z', z'') =
/// (2π)^{-m} Σ_η w(η) K_η(x', z') e^{iη(z''-x'')} Δη`.
#[derive(Clone, Debug)]
pub struct SlicedKernel {
    pub spec: GridSpec,
    pub x_bad: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub slices: Vec<TwoPointKernel>,
}

impl SlicedKernel {
    fn bad_spec(&self) -> Option<GridSpec> {
        self.spec.bad_block()
    }

    /// `K(x, ·)` on the full grid for the good node `i`.
    pub fn physical_row(&self, i: usize) -> GridFunction {
        let good = self.spec.good_block();
        let ng = good.len();
        let Some(bad) = self.bad_spec() else {
            return self.slices[0].row(i);
        };
        let nb = bad.len();
        let shift: Vec<Complex64> = (0..nb)
            .map(|k| {
                let eta = bad.freq_coords(k);
                let dot: f64 = eta.iter().zip(&self.x_bad).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, -dot)
            })
            .collect();
        let mut out = GridFunction::zeros(&self.spec);
        for z in 0..ng {
            let vals: Vec<Complex64> = (0..nb)
                .map(|k| self.weights[k] * self.slices[k].get(i, z) * shift[k])
                .collect();
            let col = Spectrum {
                spec: bad.clone(),
                values: vals,
            }
            .inverse();
            for (b, v) in col.values.iter().enumerate() {
                out.values[z * nb + b] = *v;
            }
        }
        out
    }

    /// `K(x, x)` for the good node `i`.
    pub fn diagonal(&self, i: usize) -> Complex64 {
        let Some(bad) = self.bad_spec() else {
            return self.slices[0].get(i, i);
        };
        let cell = bad.freq_cell_volume() / (2.0 * PI).powi(bad.dimension() as i32);
        (0..bad.len())
            .map(|k| self.weights[k] * self.slices[k].get(i, i))
            .sum::<Complex64>()
            * cell
    }
}

impl IntegralOperator for SlicedKernel {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    /// `(Ku)(x) = ∫ K(x, z) u(z) dz`, the bad convolution done per frequency.
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&u.spec)?;
        let Some(bad) = self.bad_spec() else {
            return self.slices[0].apply(u);
        };
        let good = self.spec.good_block();
        let (ng, nb) = (good.len(), bad.len());
        // û(z', ζ) per good node
        let uhat: Vec<Vec<Complex64>> = (0..ng)
            .map(|z| {
                GridFunction {
                    spec: bad.clone(),
                    values: u.values[z * nb..(z + 1) * nb].to_vec(),
                }
                .forward()
                .values
            })
            .collect();
        let neg: Vec<usize> = (0..nb)
            .map(|k| {
                let idx: Vec<usize> = bad
                    .unflatten(k)
                    .iter()
                    .zip(&bad.points)
                    .map(|(&i, &n)| (n - i) % n)
                    .collect();
                bad.flatten(&idx)
            })
            .collect();
        let cols: Vec<Vec<Complex64>> = (0..nb)
            .into_par_iter()
            .map(|k| {
                let kk = neg[k];
                let v = GridFunction {
                    spec: good.clone(),
                    values: (0..ng).map(|z| uhat[z][k]).collect(),
                };
                let out = self.slices[kk].apply_batch(std::slice::from_ref(&v)).remove(0);
                out.values.iter().map(|x| x * self.weights[kk]).collect()
            })
            .collect();
        let mut res = GridFunction::zeros(&self.spec);
        for x in 0..ng {
            let back = Spectrum {
                spec: bad.clone(),
                values: (0..nb).map(|k| cols[k][x]).collect(),
            }
            .inverse();
            res.values[x * nb..(x + 1) * nb].copy_from_slice(&back.values);
        }
        Ok(res)
    }
}

/// Residual of `(L - λ) g̃ = φ ⊗ δ_x` for the singular row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Relative `L²` residual over the full grid.
    pub l2: f64,
    /// Relative sup residual over the full grid.
    pub sup: f64,
    /// Largest relative `L²` residual of any single bad frequency.
    pub worst_slice: f64,
}

/// `g̃_λ` with its diagnostics.
#[derive(Clone, Debug)]
pub struct VariableSolution {
    pub lambda: f64,
    pub singularity: Vec<f64>,
    /// Good node of the singularity.
    pub row: usize,
    pub g: SlicedKernel,
    pub kplus: SlicedKernel,
    pub series: Vec<SeriesSummary>,
    pub residual: ResidualReport,
    pub vanish_check: f64,
    pub remainder: RemainderSlices,
}

impl VariableSolution {
    pub fn converged(&self) -> bool {
        self.series.iter().all(|s| s.converged)
    }
}

fn singular_row(spec: &GridSpec, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    if x.len() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: x.len(),
        });
    }
    let n = spec.split.good;
    let i = spec.good_block().nearest_node(&x[..n])?;
    let x_bad: Vec<f64> = match spec.bad_block() {
        None => Vec::new(),
        Some(b) => {
            let j = b.nearest_node(&x[n..])?;
            b.coords(j)
        }
    };
    Ok((i, x_bad))
}

/// `g̃_λ = φ̂ (K⁺ + [u, K⁺])` per bad frequency, for the slice through `x`.
pub fn fundamental_solution_variable(
    op: &VariableOperator,
    lambda: f64,
    x: &[f64],
    spec: &GridSpec,
    cfg: &LeviConfig,
) -> Result<VariableSolution> {
    let (row, x_bad) = singular_row(spec, x)?;
    let rem = remainder_alpha(op, lambda, &x_bad, spec, cfg.mollifier_cells)?;
    let good = spec.good_block();
    let probes = norm_probes(&good);
    // bad frequencies share u whenever the remainder does not depend on η
    let free = rem.alpha_eta.iter().all(|a| a.is_zero());
    let m0 = probe_m0(&probes);
    let solve = |k: usize| -> Result<(NeumannSeries, TwoPointKernel)> {
        let plain = rem.alpha(k)?;
        let a = if n00_estimate(&plain, &probes, &m0) > cfg.regularize_above {
            rem.regularized(k)?
        } else {
            plain
        };
        let s = neumann_with_probes(&a, cfg.tol, cfg.n_max, &probes)?;
        if !s.converged {
            return Err(Error::NonConvergence(format!(
                "Neumann series at λ = {lambda}, bad frequency {:?}: term norms {:?}",
                rem.etas[k], s.norm_history
            )));
        }
        let g = rem.kplus.add(&bracket(&s.sum, &rem.kplus)?)?;
        Ok((s, g))
    };
    let per_eta: Vec<(NeumannSeries, TwoPointKernel)> = if free {
        let one = solve(0)?;
        vec![one; rem.etas.len()]
    } else {
        (0..rem.etas.len()).into_par_iter().map(solve).collect::<Result<Vec<_>>>()?
    };
    let so = SliceOperator::new(op, spec, &x_bad)?;
    // residual of the singular row, per η: (L - λ) g̃_η - φ̂ δ
    let delta = 1.0 / good.cell_volume();
    let slice_res: Vec<(Vec<Complex64>, f64)> = rem
        .etas
        .par_iter()
        .enumerate()
        .map(|(k, eta)| {
            let g = &per_eta[k].1;
            let rowv: Vec<Complex64> = (0..good.len()).map(|z| g.get(row, z) * rem.phi_hat[k]).collect();
            let mut r = so.apply(&rowv, eta, lambda);
            r[row] -= rem.phi_hat[k] * delta;
            let num: f64 = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let den = rem.phi_hat[k].norm() * delta;
            (r, if den > 0.0 { num / den } else { num })
        })
        .collect();
    let num_sq: f64 = slice_res.iter().map(|(r, _)| r.iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
    let den_sq: f64 = rem.phi_hat.iter().map(|p| p.norm_sqr() * delta * delta).sum();
    let worst_slice = slice_res.iter().map(|s| s.1).fold(0.0, f64::max);
    let residual_kernel = SlicedKernel {
        spec: spec.clone(),
        x_bad: x_bad.clone(),
        weights: vec![Complex64::new(1.0, 0.0); rem.etas.len()],
        slices: slice_res
            .iter()
            .map(|(r, _)| {
                let mut rows = vec![vec![Complex64::new(0.0, 0.0); good.len()]; good.len()];
                rows[row] = r.clone();
                TwoPointKernel::from_rows(&good, &rows)
            })
            .collect(),
    };
    let target = SlicedKernel {
        spec: spec.clone(),
        x_bad: x_bad.clone(),
        weights: rem.phi_hat.clone(),
        slices: vec![TwoPointKernel::delta(&good); rem.etas.len()],
    };
    let sup = residual_kernel.physical_row(row).sup_norm() / target.physical_row(row).sup_norm();
    let residual = ResidualReport {
        l2: (num_sq / den_sq).sqrt(),
        sup,
        worst_slice,
    };
    let g = SlicedKernel {
        spec: spec.clone(),
        x_bad: x_bad.clone(),
        weights: rem.phi_hat.clone(),
        slices: per_eta.iter().map(|p| p.1.clone()).collect(),
    };
    let kplus = SlicedKernel {
        spec: spec.clone(),
        x_bad: x_bad.clone(),
        weights: rem.phi_hat.clone(),
        slices: vec![rem.kplus.clone(); rem.etas.len()],
    };
    let series = if free {
        vec![per_eta[0].0.summary()]
    } else {
        per_eta.iter().map(|p| p.0.summary()).collect()
    };
    Ok(VariableSolution {
        lambda,
        singularity: x.to_vec(),
        row,
        g,
        kplus,
        series,
        residual,
        vanish_check: rem.vanish_check,
        remainder: rem,
    })
}

/// `K_λ = (h + [u, h]) ⊗ δ_{x''}` for operators without bad derivatives.
#[derive(Clone, Debug)]
pub struct GoodKernel {
    pub kernel: TwoPointKernel,
    pub singularity: Vec<f64>,
    pub series: SeriesSummary,
}

pub fn variable_good_kernel(op: &VariableOperator, lambda: f64, x: &[f64], spec: &GridSpec, cfg: &LeviConfig) -> Result<GoodKernel> {
    let n = op.split.good;
    let bad_vars: Vec<usize> = (n..op.split.dimension()).collect();
    if op.terms.iter().any(|t| t.symbol.degree_in(&bad_vars) > 0) {
        return Err(Error::InvalidArgument("operator has bad-variable derivatives".into()));
    }
    let (_, x_bad) = singular_row(spec, x)?;
    let rem = remainder_alpha(op, lambda, &x_bad, spec, cfg.mollifier_cells)?;
    let s = neumann_u(&rem.alpha0, cfg.tol, cfg.n_max)?;
    if !s.converged {
        return Err(Error::NonConvergence(format!("Neumann series at λ = {lambda}: term norms {:?}", s.norm_history)));
    }
    let kernel = rem.kplus.add(&bracket(&s.sum, &rem.kplus)?)?;
    Ok(GoodKernel {
        kernel,
        singularity: x.to_vec(),
        series: s.summary(),
    })
}

/// Relative sup difference of `g̃` on an annulus when the mollifier width halves.
pub fn mollifier_sensitivity(
    op: &VariableOperator,
    lambda: f64,
    x: &[f64],
    spec: &GridSpec,
    cfg: &LeviConfig,
    annulus: [f64; 2],
) -> Result<f64> {
    let a = fundamental_solution_variable(op, lambda, x, spec, cfg)?;
    let half = LeviConfig {
        mollifier_cells: cfg.mollifier_cells / 2.0,
        ..cfg.clone()
    };
    let b = fundamental_solution_variable(op, lambda, x, spec, &half)?;
    let ra = a.g.physical_row(a.row);
    let rb = b.g.physical_row(b.row);
    Ok(annulus_sup(&ra.sub(&rb)?, x, annulus))
}

/// `sup |f(z)|` over `r_lo ≤ |z' - x'| ≤ r_hi` (periodic distance, any `z''`).
pub fn annulus_sup(f: &GridFunction, x: &[f64], annulus: [f64; 2]) -> f64 {
    let spec = &f.spec;
    let n = spec.split.good;
    let mut best = 0.0f64;
    for (i, v) in f.values.iter().enumerate() {
        let z = spec.coords(i);
        let r = (0..n)
            .map(|a| spec.periodic_diff(a, x[a], z[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        if r >= annulus[0] && r <= annulus[1] {
            best = best.max(v.norm());
        }
    }
    best
}

/// Residual of the coarse solution of a good-variable operator evaluated
/// on the doubled grid, away from the singularity.
pub fn refined_residual(op: &VariableOperator, lambda: f64, x: &[f64], spec: &GridSpec, cfg: &LeviConfig, exclude: f64) -> Result<f64> {
    if spec.split.bad != 0 {
        return Err(Error::InvalidArgument("refined residual is taken on good-variable grids".into()));
    }
    let k = variable_good_kernel(op, lambda, x, spec, cfg)?;
    let i = spec.nearest_node(x)?;
    let row = k.kernel.row(i);
    let fine_spec = GridSpec::new(spec.split, spec.points.iter().map(|p| 2 * p).collect(), spec.half_width.clone())?;
    let fine = refine(&row, &fine_spec)?;
    let delta = refine(&GridFunction::delta(spec, &spec.coords(i))?, &fine_spec)?;
    let so = SliceOperator::new(op, &fine_spec, &[])?;
    let r = so.apply(&fine.values, &[], lambda);
    let xi = spec.coords(i);
    let mut worst = 0.0f64;
    for (z, v) in r.iter().enumerate() {
        let c = fine_spec.coords(z);
        let dist = (0..c.len())
            .map(|a| fine_spec.periodic_diff(a, xi[a], c[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist >= exclude {
            worst = worst.max((v - delta.values[z]).norm());
        }
    }
    Ok(worst / row.sup_norm())
}

/// Trigonometric interpolation onto a finer grid over the same box.
pub fn refine(u: &GridFunction, fine: &GridSpec) -> Result<GridFunction> {
    let coarse = &u.spec;
    if fine.half_width != coarse.half_width || fine.dimension() != coarse.dimension() {
        return Err(Error::SpecMismatch("refinement keeps the box".into()));
    }
    let s = u.forward();
    let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
    for (k, v) in s.values.iter().enumerate() {
        let idx = coarse.unflatten(k);
        // Nyquist bins are split evenly between ±π/h
        let mut targets: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for (a, &i) in idx.iter().enumerate() {
            let n = coarse.points[a];
            let nf = fine.points[a];
            let mut next = Vec::new();
            for (t, w) in &targets {
                if i == n / 2 {
                    let mut p = t.clone();
                    p.push(nf - n / 2);
                    next.push((p, w * 0.5));
                    let mut q = t.clone();
                    q.push(n / 2);
                    next.push((q, w * 0.5));
                } else {
                    let mut p = t.clone();
                    p.push(if i < n / 2 { i } else { nf - (n - i) });
                    next.push((p, *w));
                }
            }
            targets = next;
        }
        for (t, w) in targets {
            out[fine.flatten(&t)] += v * w;
        }
    }
    Ok(Spectrum {
        spec: fine.clone(),
        values: out,
    }
    .inverse())
}

/// `A - κ|λ|^b` fitted to `ln sup` by a grid search on `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchedFit {
    pub a: f64,
    pub kappa: f64,
    pub b: f64,
    pub residual: f64,
}

pub fn fit_stretched(lambdas: &[f64], sups: &[f64]) -> Result<StretchedFit> {
    if lambdas.len() < 4 || sups.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InsufficientData("stretched fit needs 4 positive samples".into()));
    }
    let y: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let mut best: Option<StretchedFit> = None;
    let mut b = 0.05;
    while b <= 1.5 + 1e-12 {
        let x: Vec<f64> = lambdas.iter().map(|l| l.abs().powf(b)).collect();
        if let Ok(f) = linear_fit(&x, &y) {
            let cand = StretchedFit {
                a: f.intercept,
                kappa: -f.slope,
                b,
                residual: f.residual,
            };
            if best.as_ref().map_or(true, |bf| cand.residual < bf.residual) {
                best = Some(cand);
            }
        }
        b += 0.005;
    }
    best.ok_or_else(|| Error::DegenerateFit("stretched-exponential fit".into()))
}

/// `ln y = ln C - c ln|λ|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub c: f64,
    pub log_c: f64,
    pub residual: f64,
}

pub fn fit_power(lambdas: &[f64], values: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(l, v)| (l.abs().ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData("power fit needs 3 positive samples".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let f: LinearFit = linear_fit(&x, &y)?;
    Ok(PowerFit {
        c: -f.slope,
        log_c: f.intercept,
        residual: f.residual,
    })
}

/// Settings of a decay study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    pub levi: LeviConfig,
    /// Weight `exp(κ|λ|^b (z'_j - x'_j))`.
    pub kappa: f64,
    /// Distances beyond this count as this in the weight.
    pub weight_radius: f64,
    /// Annulus `r_lo ≤ |z' - x'| ≤ r_hi` for the off-diagonal sup.
    pub annulus: [f64; 2],
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            levi: LeviConfig::default(),
            kappa: 0.5,
            weight_radius: 0.5,
            annulus: [0.5, 1.0],
        }
    }
}

/// Decay of the remainder and of `g̃` across a λ sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderEstimate {
    pub lambdas: Vec<f64>,
    /// Probe `N^{0,0}` of the weighted, mollified remainder.
    pub alpha_norms: Vec<f64>,
    pub exact_zero: bool,
    pub c_fit: Option<PowerFit>,
    pub annulus_sup: Vec<f64>,
    pub annulus_monotone: bool,
    pub stretched: Option<StretchedFit>,
    /// `b` of the type symbol.
    pub b_type: f64,
    /// Growth order `ϱ` of the type symbol.
    pub rho_type: f64,
    /// `g̃(x,x)` over the frozen discrete diagonal `φ(0) h^x(0)`.
    pub diag_ratio: Vec<f64>,
    pub diag_fit: Option<PowerFit>,
    /// Continuum frozen Green value `(2π)^{-n} ∫ dξ'/(Re P^x - λ)` for reference.
    pub frozen_green: Vec<f64>,
    pub residual_l2: Vec<f64>,
    pub series: Vec<Vec<SeriesSummary>>,
    pub pass: bool,
    pub notes: Vec<String>,
}

pub fn estimate_decay(op: &VariableOperator, x: &[f64], lambdas: &[f64], spec: &GridSpec, cfg: &DecayConfig) -> Result<RemainderEstimate> {
    if lambdas.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "decay fits need at least 4 λ values, got {}",
            lambdas.len()
        )));
    }
    let ex = estimate_exponents(&op.type_symbol, &ClassifyOptions::default())?;
    let b_type = ex.b;
    let probes = norm_probes(spec);
    let m0 = probe_m0(&probes);
    let n = op.split.good;
    let frozen = op.freeze(x)?.symbol;
    let frozen_good = SymbolPoly::from_terms(
        n,
        frozen
            .terms()
            .filter(|(a, _)| a.entries()[n..].iter().all(|e| *e == 0))
            .map(|(a, c)| (MultiIndex::new(a.entries()[..n].to_vec()), c.clone())),
    )?;
    let mut notes = Vec::new();
    // continuity of g_λ (M = 0) is only guaranteed for ϱ > n + M
    if ex.rho <= n as f64 {
        notes.push(format!(
            "type order rho = {:.3} does not exceed n + M = {n}; continuity of g is not guaranteed",
            ex.rho
        ));
    }
    let per: Vec<_> = lambdas
        .iter()
        .map(|&lambda| -> Result<_> {
            let sol = fundamental_solution_variable(op, lambda, x, spec, &cfg.levi)?;
            let rem = &sol.remainder;
            let good = spec.good_block();
            let w = cfg.kappa * lambda.abs().powf(b_type);
            let mut norm = 0.0f64;
            for sign in [1.0, -1.0] {
                let slices = (0..rem.etas.len())
                    .map(|k| {
                        Ok(rem.mollified(k)?.weighted(|xp, zp| {
                            let d = good.periodic_diff(0, xp[0], zp[0]).clamp(-cfg.weight_radius, cfg.weight_radius);
                            (sign * w * d).exp()
                        }))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let op_k = SlicedKernel {
                    spec: spec.clone(),
                    x_bad: rem.x_bad.clone(),
                    weights: vec![Complex64::new(1.0, 0.0); slices.len()],
                    slices,
                };
                for (u, d) in probes.iter().zip(&m0) {
                    let v = op_k.apply(u)?;
                    let r = spectral_m_alpha(&v.forward(), &MultiIndex::zeros(spec.dimension()))? / d;
                    norm = norm.max(r);
                }
            }
            let row = sol.g.physical_row(sol.row);
            let sup = annulus_sup(&row, x, cfg.annulus);
            let gd = sol.g.diagonal(sol.row).re;
            let kd = sol.kplus.diagonal(sol.row).re;
            let fg = green_kernel_frozen(&frozen_good, &MultiIndex::zeros(n), lambda)
                .map(|g| g.value() / (2.0 * PI).powi(n as i32))
                .unwrap_or(f64::NAN);
            Ok((norm, sup, gd / kd, fg, sol.residual.l2, sol.series.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha_norms: Vec<f64> = per.iter().map(|p| p.0).collect();
    let annulus_sup: Vec<f64> = per.iter().map(|p| p.1).collect();
    let diag_ratio: Vec<f64> = per.iter().map(|p| p.2).collect();
    let exact_zero = alpha_norms.iter().all(|a| *a == 0.0);
    let c_fit = if exact_zero { None } else { fit_power(lambdas, &alpha_norms).ok() };
    let annulus_monotone = annulus_sup.windows(2).all(|w| w[1] < w[0]);
    let stretched = fit_stretched(lambdas, &annulus_sup).ok();
    let gaps: Vec<f64> = diag_ratio.iter().map(|r| (r - 1.0).abs()).collect();
    let diag_fit = if gaps.iter().all(|g| *g < 1e-13) { None } else { fit_power(lambdas, &gaps).ok() };
    let c_ok = exact_zero || c_fit.as_ref().is_some_and(|f| f.c > 0.0);
    let k_ok = stretched.as_ref().is_some_and(|s| s.kappa > 0.0);
    let d_ok = diag_fit.as_ref().map_or(true, |f| f.c > 0.0);
    if !annulus_monotone {
        notes.push("off-diagonal sup is not strictly decreasing".into());
    }
    Ok(RemainderEstimate {
        lambdas: lambdas.to_vec(),
        alpha_norms,
        exact_zero,
        c_fit,
        annulus_sup,
        annulus_monotone,
        stretched,
        b_type,
        rho_type: ex.rho,
        diag_ratio,
        diag_fit,
        frozen_green: per.iter().map(|p| p.3).collect(),
        residual_l2: per.iter().map(|p| p.4).collect(),
        series: per.into_iter().map(|p| p.5).collect(),
        pass: c_ok && k_ok && d_ok,
        notes,
    })
}

/// The reference 1+1 example: `(1 + ¼ b(x)b(y)) ξ² + ½ b(x)b(y) ξη` with
/// `b(t) = bump(t/2)`, type `ξ²`, compact set `[-2,2]²`.
pub fn desk_example() -> VariableOperator {
    let split = VariableSplit { good: 1, bad: 1 };
    let ctx = ParseContext::with_split(split);
    let term = |c: &str, s: &str| VariableTerm {
        coeff: CoeffField::Expr(Expr::parse(c, 1, 1).expect("static expression")),
        symbol: parse_with(s, ctx.clone()).expect("static symbol"),
    };
    VariableOperator {
        split,
        type_symbol: parse_with("xi1^2", ParseContext::with_dimension(1)).expect("static symbol"),
        compact: vec![[-2.0, 2.0], [-2.0, 2.0]],
        terms: vec![
            term("1 + 0.25*bump(x1/2)*bump(y1/2)", "xi1^2"),
            term("0.5*bump(x1/2)*bump(y1/2)", "xi1*eta1"),
        ],
    }
}

/// Grid used with [`desk_example`]: 128 good × 32 bad nodes on `[-4,4)²`.
pub fn desk_grid() -> GridSpec {
    GridSpec::new(VariableSplit { good: 1, bad: 1 }, vec![128, 32], vec![4.0, 4.0]).expect("static grid")
}

#[cfg(test)]
mod tests;
