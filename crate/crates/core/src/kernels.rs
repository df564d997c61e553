//! Constant-coefficient kernels: resolvent fundamental solutions, the tensor
//! parametrix, spectral functions of sublevel sets, and the frequency
//! integrals `T^{2α}_t(λ)` and frozen Green values.
//!
//! Translation-invariant kernels are stored as one grid function `k` in the
//! difference variable, acting by `(Ku)(x) = ∫ k(x - z) u(z) dz`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, IntegralOperator, Spectrum};
use crate::mizohata::expr::bump;
use crate::numeric::gauss_legendre;
use crate::symbol::{MultiIndex, SymbolPoly};

/// How a resolvent kernel is sampled on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Discretization {
    /// Inverse DFT of `1/(M - λ)` on the frequency grid.
    Spectral,
    /// Node values of the periodized continuum kernel: aliases `ξ + 2πp/h`,
    /// `|p_a| ≤ folds`, are summed into each grid frequency, plus an
    /// integral tail estimate in one dimension.
    Folded { folds: usize },
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization::Spectral
    }
}

fn resolvent_check(m: &SymbolPoly, lambda: f64, spec: &GridSpec) -> Result<Vec<Complex64>> {
    if m.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: m.dimension(),
        });
    }
    let vals: Vec<Complex64> = (0..spec.len()).map(|k| m.eval_real(&spec.freq_coords(k))).collect();
    let real = vals.iter().all(|v| v.im == 0.0);
    let min_re = vals.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let max_re = vals.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    let min_gap = vals.iter().map(|v| (v - lambda).norm()).fold(f64::INFINITY, f64::min);
    if (real && lambda >= min_re && lambda <= max_re) || min_gap <= 1e-12 * lambda.abs().max(1.0) {
        return Err(Error::ResolventSingular {
            lambda,
            min_value: min_re,
        });
    }
    Ok(vals)
}

/// `t_λ`: inverse transform of `1/(M(ξ) - λ)`, spectral sampling.
pub fn fundamental_solution_const(m: &SymbolPoly, lambda: f64, spec: &GridSpec) -> Result<GridFunction> {
    fundamental_solution(m, lambda, spec, Discretization::Spectral)
}

pub fn fundamental_solution(m: &SymbolPoly, lambda: f64, spec: &GridSpec, disc: Discretization) -> Result<GridFunction> {
    let vals = resolvent_check(m, lambda, spec)?;
    let spectrum = match disc {
        Discretization::Spectral => Spectrum {
            spec: spec.clone(),
            values: vals.iter().map(|v| (v - lambda).inv()).collect(),
        },
        Discretization::Folded { folds } => folded_resolvent(m, lambda, spec, folds)?,
    };
    let t = spectrum.inverse();
    if disc == Discretization::Spectral {
        let r = resolvent_residual(m, lambda, &t)?;
        if r > 1e-8 {
            return Err(Error::NonConvergence(format!("resolvent residual {r:.3e} exceeds 1e-8")));
        }
    }
    Ok(t)
}

fn folded_resolvent(m: &SymbolPoly, lambda: f64, spec: &GridSpec, folds: usize) -> Result<Spectrum> {
    let n = spec.dimension();
    let periods: Vec<f64> = (0..n).map(|a| 2.0 * spec.nyquist(a)).collect();
    let p = folds as i64;
    let width = (2 * p + 1) as usize;
    let count = width.pow(n as u32);
    let rule = gauss_legendre(16);
    let a = folds as f64 + 0.5;
    let values = (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let xi = spec.freq_coords(k);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut shifted = xi.clone();
            for code in 0..count {
                let mut c = code;
                for ax in 0..n {
                    let off = (c % width) as i64 - p;
                    c /= width;
                    shifted[ax] = xi[ax] + off as f64 * periods[ax];
                }
                let d = m.eval_real(&shifted) - lambda;
                if d.norm() <= 1e-300 {
                    return Err(Error::ResolventSingular {
                        lambda,
                        min_value: d.re + lambda,
                    });
                }
                sum += d.inv();
            }
            if n == 1 {
                // Σ_{p > P} f(±p) ≈ ∫_{P+1/2}^∞ f(±p) dp, substituted p = a/u
                for sign in [1.0, -1.0] {
                    for (u, w) in rule.0.iter().zip(&rule.1) {
                        let u = 0.5 * (u + 1.0);
                        let pp = a / u;
                        let d = m.eval_real(&[xi[0] + sign * pp * periods[0]]) - lambda;
                        sum += d.inv() * (0.5 * w * a / (u * u));
                    }
                }
            }
            Ok(sum)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        spec: spec.clone(),
        values,
    })
}

/// `max |(M(D) - λ)t - δ| / max |δ|`.
pub fn resolvent_residual(m: &SymbolPoly, lambda: f64, t: &GridFunction) -> Result<f64> {
    let applied = t.apply_symbol(m)?.sub(&t.scale(Complex64::new(lambda, 0.0)))?;
    let delta = GridFunction::delta(&t.spec, &vec![0.0; t.spec.dimension()])?;
    Ok(applied.sub(&delta)?.sup_norm() / delta.sup_norm())
}

/// Factor of a tensor kernel in the bad variables.
#[derive(Clone, Debug, PartialEq)]
pub enum BadPart {
    /// `δ(x'' - z'')`: no smoothing across bad slices.
    Dirac,
    /// A grid-representable kernel in the bad difference variable.
    Mollified(GridFunction),
}

/// `k'(x' - z') ⊗ b(x'' - z'')`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorKernel {
    pub good_part: GridFunction,
    pub bad_part: BadPart,
    pub singularity: Vec<f64>,
}

impl TensorKernel {
    /// Replaces a Dirac bad factor by `phi`, which must integrate to 1.
    pub fn mollify(&self, phi: GridFunction) -> Result<TensorKernel> {
        let mass = phi.integral();
        if (mass - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::InvalidArgument(format!("mollifier integrates to {mass}, not 1")));
        }
        Ok(TensorKernel {
            good_part: self.good_part.clone(),
            bad_part: BadPart::Mollified(phi),
            singularity: self.singularity.clone(),
        })
    }

    /// Kernel value `K(x, z)`; a Dirac bad factor yields its coefficient on the slice `z'' = x''`.
    pub fn value(&self, x: &[f64], z: &[f64]) -> Result<Complex64> {
        let gs = &self.good_part.spec;
        let n = gs.dimension();
        let d: Vec<f64> = (0..n).map(|a| gs.periodic_diff(a, z[a], x[a])).collect();
        let g = self.good_part.values[gs.nearest_node(&d)?];
        let b = match &self.bad_part {
            BadPart::Dirac => Complex64::new(1.0, 0.0),
            BadPart::Mollified(phi) => {
                let bs = &phi.spec;
                let d: Vec<f64> = (0..bs.dimension()).map(|a| bs.periodic_diff(a, z[n + a], x[n + a])).collect();
                phi.values[bs.nearest_node(&d)?]
            }
        };
        Ok(g * b)
    }

    fn full_spec_ok(&self, spec: &GridSpec) -> Result<()> {
        self.good_part.spec.ensure_same(&spec.good_block())?;
        match (&self.bad_part, spec.bad_block()) {
            (BadPart::Mollified(phi), Some(b)) => phi.spec.ensure_same(&b),
            (BadPart::Mollified(_), None) => Err(Error::SpecMismatch("mollified bad factor on a grid without bad variables".into())),
            (BadPart::Dirac, _) => Ok(()),
        }
    }

    /// Applies the kernel to a function on the full grid.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.full_spec_ok(&u.spec)?;
        let n = u.spec.split.good;
        let gs = &self.good_part.spec;
        let g_hat = self.good_part.forward();
        let b_hat = match &self.bad_part {
            BadPart::Mollified(phi) => Some(phi.forward()),
            BadPart::Dirac => None,
        };
        let mut s = u.forward();
        for (k, v) in s.values.iter_mut().enumerate() {
            let idx = u.spec.unflatten(k);
            *v *= g_hat.values[gs.flatten(&idx[..n])];
            if let Some(b) = &b_hat {
                *v *= b.values[b.spec.flatten(&idx[n..])];
            }
        }
        Ok(s.inverse())
    }
}

/// A tensor kernel bound to the grid it acts on.
pub struct BoundTensor<'a> {
    pub kernel: &'a TensorKernel,
    pub spec: GridSpec,
}

impl IntegralOperator for BoundTensor<'_> {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.kernel.apply(u)
    }
}

/// Restricts a symbol to the good variables, failing if it involves bad ones.
pub fn restrict_to_good(p: &SymbolPoly, good: usize) -> Result<SymbolPoly> {
    if p.dimension() == good {
        return Ok(p.clone());
    }
    let bad: Vec<usize> = (good..p.dimension()).collect();
    if p.dimension() < good || p.degree_in(&bad) > 0 {
        return Err(Error::InvalidArgument(format!(
            "symbol {p} is not a function of the first {good} variables only"
        )));
    }
    SymbolPoly::from_terms(
        good,
        p.terms()
            .map(|(a, c)| (MultiIndex::new(a.entries()[..good].to_vec()), c.clone())),
    )
}

/// `K⁺_λ = t_λ ⊗ δ_{x''}` for a frozen symbol of the good variables.
pub fn parametrix_kplus(p_frozen: &SymbolPoly, lambda: f64, x: &[f64], spec: &GridSpec) -> Result<TensorKernel> {
    if x.len() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: x.len(),
        });
    }
    let good = restrict_to_good(p_frozen, spec.split.good)?;
    let t = fundamental_solution_const(&good, lambda, &spec.good_block())?;
    Ok(TensorKernel {
        good_part: t,
        bad_part: BadPart::Dirac,
        singularity: x.to_vec(),
    })
}

/// Compactly supported bump of radius `width_cells` grid cells, normalized
/// to unit discrete mass.
pub fn mollifier(spec: &GridSpec, width_cells: f64) -> Result<GridFunction> {
    if !(width_cells >= 1.0) {
        return Err(Error::InvalidArgument(format!("mollifier width {width_cells} is below one cell")));
    }
    let w: Vec<f64> = (0..spec.dimension()).map(|a| width_cells * spec.spacing(a)).collect();
    let raw = GridFunction::from_real_fn(spec, |z| {
        let r2: f64 = z.iter().zip(&w).map(|(x, s)| (x / s) * (x / s)).sum();
        bump(r2.sqrt())
    });
    let mass = raw.integral().re;
    Ok(raw.scale(Complex64::new(1.0 / mass, 0.0)))
}

/// Fraction of the Nyquist box a sublevel set may occupy (25% margin).
pub const SUBLEVEL_MARGIN: f64 = 0.8;

fn sublevel_mask(m: &SymbolPoly, lambda: f64, spec: &GridSpec) -> Result<Vec<bool>> {
    if m.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: m.dimension(),
        });
    }
    let mut mask = Vec::with_capacity(spec.len());
    for k in 0..spec.len() {
        let xi = spec.freq_coords(k);
        let inside = m.eval_real(&xi).re < lambda;
        if inside {
            let edge = xi
                .iter()
                .enumerate()
                .any(|(a, x)| x.abs() > SUBLEVEL_MARGIN * spec.nyquist(a));
            if edge {
                return Err(Error::TruncatedSublevel {
                    lambda,
                    half_width: spec.nyquist(0),
                });
            }
        }
        mask.push(inside);
    }
    Ok(mask)
}

/// `e_λ`: inverse transform of the indicator of `{Re M < λ}`.
pub fn spectral_function_const(m: &SymbolPoly, lambda: f64, spec: &GridSpec) -> Result<GridFunction> {
    let mask = sublevel_mask(m, lambda, spec)?;
    Ok(Spectrum {
        spec: spec.clone(),
        values: mask
            .iter()
            .map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect(),
    }
    .inverse())
}

/// `e_λ(0) = (2π)^{-n} |{Re M < λ}|` measured on the frequency grid.
pub fn spectral_diagonal_const(m: &SymbolPoly, lambda: f64, spec: &GridSpec) -> Result<f64> {
    let count = sublevel_mask(m, lambda, spec)?.iter().filter(|b| **b).count();
    Ok(count as f64 * spec.freq_cell_volume() / (2.0 * PI).powi(spec.dimension() as i32))
}

/// `e' ⊗ e''` (or `e' ⊗ δ`).
pub fn spectral_tensor(e_good: GridFunction, e_bad: BadPart) -> TensorKernel {
    let mut singularity = vec![0.0; e_good.spec.dimension()];
    if let BadPart::Mollified(b) = &e_bad {
        singularity.extend(vec![0.0; b.spec.dimension()]);
    }
    TensorKernel {
        good_part: e_good,
        bad_part: e_bad,
        singularity,
    }
}

/// Result of a shell-by-shell quadrature over `ℝ^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellQuadrature {
    pub value: f64,
    /// Extrapolated contribution of the shells not computed.
    pub tail: f64,
    pub shells: usize,
    /// Ratio of the last two shell contributions.
    pub ratio: f64,
}

const SHELL_NODES: usize = 16;
const MAX_SHELLS: usize = 64;
const MIN_SHELLS: usize = 6;

fn axis_groups(scale: f64) -> Vec<Vec<(f64, f64)>> {
    let (x, w) = gauss_legendre(SHELL_NODES);
    let panel = |a: f64, b: f64, out: &mut Vec<(f64, f64)>| {
        let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((c + r * xi, r * wi));
        }
    };
    let mut groups = Vec::with_capacity(MAX_SHELLS + 1);
    let mut core = Vec::new();
    for j in 0..4 {
        let a = -scale + j as f64 * scale / 2.0;
        panel(a, a + scale / 2.0, &mut core);
    }
    groups.push(core);
    for s in 1..=MAX_SHELLS {
        let a = scale * 2f64.powi(s as i32 - 1);
        let mut g = Vec::new();
        panel(a, 2.0 * a, &mut g);
        panel(-2.0 * a, -a, &mut g);
        groups.push(g);
    }
    groups
}

/// `∫_{ℝ^n} f` over nested boxes `[-2^k s, 2^k s]^n` with geometric tail
/// extrapolation. Fails when the shell contributions stop decaying.
pub fn integrate_shells<F>(f: F, n: usize, scale: f64) -> Result<ShellQuadrature>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 {
        return Ok(ShellQuadrature {
            value: f(&[]),
            tail: 0.0,
            shells: 0,
            ratio: 0.0,
        });
    }
    if n > 3 {
        return Err(Error::InvalidArgument("shell quadrature supports up to three dimensions".into()));
    }
    let groups = axis_groups(scale);
    let shell = |k: usize| -> f64 {
        // tuples of per-axis shells whose maximum is k
        let width = k + 1;
        let tuples: Vec<Vec<usize>> = (0..width.pow(n as u32))
            .map(|mut c| {
                (0..n)
                    .map(|_| {
                        let s = c % width;
                        c /= width;
                        s
                    })
                    .collect::<Vec<usize>>()
            })
            .filter(|t| t.iter().any(|&s| s == k))
            .collect();
        tuples
            .par_iter()
            .map(|t| {
                let sizes: Vec<usize> = t.iter().map(|&s| groups[s].len()).collect();
                let total: usize = sizes.iter().product();
                let mut point = vec![0.0; n];
                let mut acc = 0.0;
                for mut c in 0..total {
                    let mut w = 1.0;
                    for a in 0..n {
                        let (x, wa) = groups[t[a]][c % sizes[a]];
                        c /= sizes[a];
                        point[a] = x;
                        w *= wa;
                    }
                    acc += w * f(&point);
                }
                acc
            })
            .sum()
    };
    let mut sum = 0.0;
    let mut prev_c = f64::NAN;
    let mut totals: Vec<f64> = Vec::new();
    let mut ratio = f64::NAN;
    let mut tail = f64::INFINITY;
    let mut used = 0;
    for k in 0..=MAX_SHELLS {
        let c = shell(k);
        if !c.is_finite() {
            return Err(Error::Divergent(format!("non-finite integrand on shell {k}")));
        }
        sum += c;
        used = k + 1;
        if k >= 1 {
            if c == 0.0 && prev_c == 0.0 {
                ratio = 0.0;
                tail = 0.0;
                totals.push(sum);
                if k >= MIN_SHELLS {
                    break;
                }
                prev_c = c;
                continue;
            }
            ratio = c / prev_c;
            tail = if ratio.abs() < 1.0 { c * ratio / (1.0 - ratio) } else { f64::INFINITY };
            totals.push(sum + tail);
            let m = totals.len();
            if k >= MIN_SHELLS && m >= 3 {
                let t = totals[m - 1];
                let settled = (t - totals[m - 2]).abs() <= 1e-10 * t.abs() && (totals[m - 2] - totals[m - 3]).abs() <= 1e-10 * t.abs();
                if settled {
                    break;
                }
            }
        }
        prev_c = c;
    }
    if !(tail.is_finite() && ratio.abs() < 1.0) || tail.abs() > 0.1 * sum.abs() {
        return Err(Error::Divergent(format!(
            "shell contributions decay with ratio {ratio:.4}; tail estimate {tail:.3e} against partial sum {sum:.3e}"
        )));
    }
    Ok(ShellQuadrature {
        value: sum + tail,
        tail,
        shells: used,
        ratio,
    })
}

/// `T^{2α}_t(λ) = ∫ ξ^{2α} dξ / (|M(ξ') - λ| (1+|ξ''|²)^t)`; the bad
/// dimension is `α.dim() - M.dimension()`.
pub fn t_integral(m: &SymbolPoly, alpha: &MultiIndex, t: f64, lambda: f64) -> Result<ShellQuadrature> {
    let n = m.dimension();
    if alpha.dim() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: alpha.dim(),
        });
    }
    if lambda >= 0.0 {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be negative")));
    }
    let mb = alpha.dim() - n;
    let a = alpha.entries();
    let good_alpha = &a[..n];
    let bad_alpha = a[n..].to_vec();
    let g = integrate_shells(
        |xi| {
            let num: f64 = xi.iter().zip(good_alpha).map(|(x, &k)| x.powi(2 * k as i32)).product();
            num / (m.eval_real(xi) - lambda).norm()
        },
        n,
        1.0,
    )?;
    let b = integrate_shells(
        |eta| {
            let num: f64 = eta.iter().zip(&bad_alpha).map(|(x, &k)| x.powi(2 * k as i32)).product();
            let r: f64 = eta.iter().map(|x| x * x).sum();
            num / (1.0 + r).powf(t)
        },
        mb,
        1.0,
    )?;
    Ok(ShellQuadrature {
        value: g.value * b.value,
        tail: g.tail.abs() * b.value.abs() + b.tail.abs() * g.value.abs(),
        shells: g.shells.max(b.shells),
        ratio: g.ratio.max(b.ratio),
    })
}

/// Frozen Green value `∫ ξ'^{2α'} dξ' / (Re P(ξ') - λ)` with a slot for the
/// mollifier factors supplied by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenGreen {
    pub integral: ShellQuadrature,
    pub mollifier_factor: f64,
}

impl FrozenGreen {
    pub fn value(&self) -> f64 {
        self.integral.value * self.mollifier_factor
    }

    pub fn with_mollifier_factor(mut self, factor: f64) -> Self {
        self.mollifier_factor = factor;
        self
    }
}

pub fn green_kernel_frozen(p: &SymbolPoly, alpha: &MultiIndex, lambda: f64) -> Result<FrozenGreen> {
    if alpha.dim() != p.dimension() {
        return Err(Error::DimensionMismatch {
            expected: p.dimension(),
            got: alpha.dim(),
        });
    }
    let re = p.re_part();
    let a = alpha.entries().to_vec();
    let singular = std::sync::atomic::AtomicBool::new(false);
    let q = integrate_shells(
        |xi| {
            let d = re.eval_real(xi).re - lambda;
            if d <= 0.0 {
                singular.store(true, std::sync::atomic::Ordering::Relaxed);
                return 0.0;
            }
            let num: f64 = xi.iter().zip(&a).map(|(x, &k)| x.powi(2 * k as i32)).product();
            num / d
        },
        p.dimension(),
        1.0,
    );
    if singular.into_inner() {
        return Err(Error::ResolventSingular {
            lambda,
            min_value: f64::NAN,
        });
    }
    Ok(FrozenGreen {
        integral: q?,
        mollifier_factor: 1.0,
    })
}

/// A validated list of spectral parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub values: Vec<f64>,
}

/// Default `|λ|` floor for resolvent sweeps.
pub const LAMBDA_FLOOR: f64 = 4.0;

impl LambdaSweep {
    /// Negative, strictly descending, `|λ| ≥ floor`.
    pub fn resolvent(values: Vec<f64>, floor: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty λ sweep".into()));
        }
        for w in values.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidArgument(format!("λ sweep must descend strictly: {} then {}", w[0], w[1])));
            }
        }
        if let Some(bad) = values.iter().find(|l| !(**l < 0.0 && l.abs() >= floor)) {
            return Err(Error::InvalidArgument(format!("λ = {bad} is not negative with |λ| >= {floor}")));
        }
        Ok(LambdaSweep { values })
    }

    /// Positive and strictly ascending.
    pub fn spectral(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty λ sweep".into()));
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!("λ sweep must ascend strictly: {} then {}", w[0], w[1])));
            }
        }
        if let Some(bad) = values.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("spectral λ = {bad} must be positive")));
        }
        Ok(LambdaSweep { values })
    }

    /// Geometric sweep `start·ratio^k`, `count` points.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| start * ratio.powi(k as i32)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Runs `f` on every λ concurrently; results keep sweep order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(f64) -> Result<T> + Sync,
    {
        self.values.par_iter().map(|&l| f(l)).collect()
    }
}
