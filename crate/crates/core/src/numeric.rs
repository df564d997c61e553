//! Small numerical kernels shared by the analysis modules: polynomial roots,
//! Gauss–Legendre rules, least-squares line fits, low-discrepancy points and
//! exact rational null spaces.

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Roots of `Σ c_k s^k` (ascending coefficients) by Aberth–Ehrlich iteration.
///
/// Leading coefficients that are negligible relative to the largest one are
/// dropped first, so the returned count may be below `coeffs.len() - 1`.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    // roots at zero are exact; strip them
    let mut low = 0;
    while low < deg && coeffs[low].norm() == 0.0 {
        low += 1;
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    let c: Vec<Complex64> = coeffs[low..=deg].to_vec();
    let n = c.len() - 1;
    if n == 0 {
        return roots;
    }
    if n == 1 {
        roots.push(-c[0] / c[1]);
        return roots;
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    // Cauchy-type bound for the initial circle
    let radius = monic[..n]
        .iter()
        .enumerate()
        .map(|(k, x)| x.norm().powf(1.0 / (n - k) as f64))
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    let eval = |x: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for k in (0..=n).rev() {
            dp = dp * x + p;
            p = p * x + monic[k];
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        sum += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() > 0.0 { ratio / denom } else { ratio };
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    roots.extend(z);
    roots
}

/// Real roots of a complex polynomial: roots whose imaginary part is below
/// `tol·(1 + |s|)` and where the polynomial is small relative to its term scale.
pub fn real_roots(coeffs: &[Complex64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = poly_roots(coeffs)
        .into_iter()
        .filter(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .filter(|&s| {
            let mut val = Complex64::new(0.0, 0.0);
            let mut mag = 0.0;
            let mut pw = 1.0;
            for c in coeffs {
                val += c * pw;
                mag += c.norm() * pw.abs();
                pw *= s;
            }
            val.norm() <= 1e3 * tol * mag.max(f64::MIN_POSITIVE)
        })
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { t } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pm) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` with `panels` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("{n} points")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    Ok(LinearFit {
        slope,
        intercept,
        residual: (res.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt(),
        max_residual: res.iter().map(|r| r.abs()).fold(0.0, f64::max),
        points: n,
    })
}

/// Radical-inverse of `index` in `base`: the Halton coordinate.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub(crate) const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Exact null space of a rational matrix given by rows, via reduced row echelon form.
/// Each basis vector has a `1` at its free column.
pub fn rational_null_space(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m: Vec<Vec<BigRational>> = rows.iter().filter(|r| r.iter().any(|v| !v.is_zero())).cloned().collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row >= m.len() {
            break;
        }
        let Some(p) = (row..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = BigRational::from_integer(1.into()) / m[row][col].clone();
        for v in m[row].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..m.len() {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..ncols {
                    let sub = &f * &m[row][c];
                    m[r][c] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); ncols];
            v[free] = BigRational::from_integer(1.into());
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][free].clone();
            }
            v
        })
        .collect()
}

/// Gram–Schmidt (twice) orthonormalization; drops numerically dependent vectors.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let norm0 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &out {
                let d: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                for (a, b) in w.iter_mut().zip(q) {
                    *a -= d * b;
                }
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 * norm0.max(f64::MIN_POSITIVE) {
            out.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roots_of_known_polynomials() {
        // (s - 1)(s + 2)(s - 3i)
        let c = |re, im| Complex64::new(re, im);
        let coeffs = [c(0.0, 6.0), c(-2.0, -3.0), c(1.0, -3.0), c(1.0, 0.0)];
        let mut r = poly_roots(&coeffs);
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 3.0)).norm() < 1e-12);
        assert!((r[2] - c(1.0, 0.0)).norm() < 1e-12);
        let rr = real_roots(&coeffs, 1e-9);
        assert_eq!(rr.len(), 2);
        assert_relative_eq!(rr[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(rr[1], 1.0, epsilon = 1e-12);
        // s^2 + 1 has no real roots
        assert!(real_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 1e-9).is_empty());
        // zero roots and a dropped leading coefficient
        let r = poly_roots(&[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 12, 33] {
            let rule = gauss_legendre(n);
            assert_relative_eq!(rule.1.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for k in 0..(2 * n) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q: f64 = rule.0.iter().zip(&rule.1).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
        let rule = gauss_legendre(10);
        assert_relative_eq!(integrate(f64::sin, 0.0, std::f64::consts::PI, 4, &rule), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(f.slope, -2.0, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 1.5, epsilon = 1e-14);
        assert!(f.residual < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn null_space_is_exact() {
        let q = |n: i64| BigRational::from_integer(n.into());
        let rows = vec![vec![q(1), q(1), q(0)], vec![q(2), q(2), q(0)]];
        let ns = rational_null_space(&rows, 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for r in &rows {
                let dot: BigRational = r.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!(dot.is_zero());
            }
        }
        assert!(rational_null_space(&[vec![q(1), q(0)], vec![q(0), q(3)]], 2).is_empty());
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_relative_eq!(halton(1, 3), 1.0 / 3.0);
    }
}
