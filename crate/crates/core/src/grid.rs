//! Periodic grids on boxes `[-L, L)^ν` and the discrete Fourier transform
//! used by every kernel and norm.
//!
//! Nodes are `x_j = -L + j h` with `h = 2L/N`. Frequencies are
//! `ξ_k = π k̃ / L` with `k̃ ∈ [-N/2, N/2)` stored in FFT order. The forward
//! transform approximates `û(ξ) = ∫ e^{-ixξ} u(x) dx` by
//!
//! ```text
//! û_k = h^ν Σ_j u_j e^{-i x_j ξ_k}
//! ```
//!
//! and the inverse approximates `(2π)^{-ν} ∫ e^{ixξ} û(ξ) dξ` with the
//! frequency cell `Δξ = Π π/L_a`. No other normalization is used anywhere.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbol::{SymbolPoly, VariableSplit};

/// Discretization of a box in `ℝ^ν` with a declared good/bad split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub split: VariableSplit,
    pub points: Vec<usize>,
    pub half_width: Vec<f64>,
}

impl GridSpec {
    pub fn new(split: VariableSplit, points: Vec<usize>, half_width: Vec<f64>) -> Result<Self> {
        let dim = split.good + split.bad;
        if points.len() != dim || half_width.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "split {}+{} needs {dim} axes, got {} point counts and {} half-widths",
                split.good,
                split.bad,
                points.len(),
                half_width.len()
            )));
        }
        for (&n, &l) in points.iter().zip(&half_width) {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("{n} points per axis; need a power of two >= 8")));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("half-width {l} must be positive")));
            }
        }
        Ok(GridSpec { split, points, half_width })
    }

    /// Same point count and half-width on every axis.
    pub fn uniform(split: VariableSplit, points: usize, half_width: f64) -> Result<Self> {
        let dim = split.good + split.bad;
        GridSpec::new(split, vec![points; dim], vec![half_width; dim])
    }

    /// A grid whose variables are all good.
    pub fn good_only(points: Vec<usize>, half_width: Vec<f64>) -> Result<Self> {
        let n = points.len();
        GridSpec::new(VariableSplit::new(n, 0)?, points, half_width)
    }

    pub fn dimension(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.points[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dimension()).map(|a| self.spacing(a)).product()
    }

    pub fn freq_cell_volume(&self) -> f64 {
        self.half_width.iter().map(|l| PI / l).product()
    }

    /// Largest representable frequency magnitude on `axis` (`π/h`).
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI / self.spacing(axis)
    }

    pub fn node(&self, axis: usize, j: usize) -> f64 {
        -self.half_width[axis] + j as f64 * self.spacing(axis)
    }

    pub fn frequency(&self, axis: usize, k: usize) -> f64 {
        let n = self.points[axis] as i64;
        let kt = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        PI * kt as f64 / self.half_width[axis]
    }

    /// Flat row-major index (last axis fastest).
    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dimension()];
        for a in (0..self.dimension()).rev() {
            idx[a] = flat % self.points[a];
            flat /= self.points[a];
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat).iter().enumerate().map(|(a, &j)| self.node(a, j)).collect()
    }

    pub fn freq_coords(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat).iter().enumerate().map(|(a, &k)| self.frequency(a, k)).collect()
    }

    /// All node coordinates in flat order.
    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|f| self.coords(f)).collect()
    }

    /// All frequency vectors in flat order.
    pub fn all_frequencies(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|f| self.freq_coords(f)).collect()
    }

    /// Index of the node nearest to `point` (periodically wrapped).
    pub fn nearest_node(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: point.len(),
            });
        }
        let idx: Vec<usize> = point
            .iter()
            .enumerate()
            .map(|(a, &x)| {
                let n = self.points[a] as i64;
                let j = ((x + self.half_width[a]) / self.spacing(a)).round() as i64;
                j.rem_euclid(n) as usize
            })
            .collect();
        Ok(self.flatten(&idx))
    }

    /// Signed difference `b - a` on `axis`, wrapped into `[-L, L)`.
    pub fn periodic_diff(&self, axis: usize, a: f64, b: f64) -> f64 {
        let p = 2.0 * self.half_width[axis];
        let d = (b - a).rem_euclid(p);
        if d >= p / 2.0 {
            d - p
        } else {
            d
        }
    }

    /// Sub-grid over the good axes.
    pub fn good_block(&self) -> GridSpec {
        let n = self.split.good;
        GridSpec {
            split: VariableSplit { good: n, bad: 0 },
            points: self.points[..n].to_vec(),
            half_width: self.half_width[..n].to_vec(),
        }
    }

    /// Sub-grid over the bad axes, or `None` when there are none.
    pub fn bad_block(&self) -> Option<GridSpec> {
        let n = self.split.good;
        let m = self.split.bad;
        (m > 0).then(|| GridSpec {
            split: VariableSplit { good: m, bad: 0 },
            points: self.points[n..].to_vec(),
            half_width: self.half_width[n..].to_vec(),
        })
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::SpecMismatch("grid specs differ".into()));
        }
        Ok(())
    }
}

/// Phase `Π (-1)^{k_a}` that moves the DFT origin from node 0 to `x = 0`.
fn phase(spec: &GridSpec, flat: usize) -> f64 {
    let s: usize = spec.unflatten(flat).iter().sum();
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// In-place unnormalized multidimensional FFT.
pub(crate) fn fft_nd(values: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = total;
    for &n in shape {
        stride /= n;
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                if stride == 1 {
                    fft.process(&mut values[base..base + n]);
                } else {
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = values[base + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, l) in line.iter().enumerate() {
                        values[base + j * stride] = *l;
                    }
                }
            }
        }
    }
}

/// Values on the grid in physical space.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

/// Transform values on the frequency grid, in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                spec.len()
            )));
        }
        Ok(GridFunction { spec, values })
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        GridFunction {
            spec: spec.clone(),
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(spec: &GridSpec, f: F) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.coords(i))).collect();
        GridFunction { spec: spec.clone(), values }
    }

    pub fn from_real_fn<F: Fn(&[f64]) -> f64>(spec: &GridSpec, f: F) -> Self {
        GridFunction::from_fn(spec, |x| Complex64::new(f(x), 0.0))
    }

    /// Grid delta: `1/cell volume` at the node nearest `point`.
    pub fn delta(spec: &GridSpec, point: &[f64]) -> Result<Self> {
        let mut g = GridFunction::zeros(spec);
        let i = spec.nearest_node(point)?;
        g.values[i] = Complex64::new(1.0 / spec.cell_volume(), 0.0);
        Ok(g)
    }

    pub fn forward(&self) -> Spectrum {
        let mut v = self.values.clone();
        fft_nd(&mut v, &self.spec.points, false);
        let w = self.spec.cell_volume();
        for (k, x) in v.iter_mut().enumerate() {
            *x *= w * phase(&self.spec, k);
        }
        Spectrum {
            spec: self.spec.clone(),
            values: v,
        }
    }

    /// `u ↦ F⁻¹(m · Fu)` for a multiplier sampled at the frequency grid.
    pub fn apply_multiplier<F: Fn(&[f64]) -> Complex64>(&self, m: F) -> GridFunction {
        let mut s = self.forward();
        for (k, x) in s.values.iter_mut().enumerate() {
            *x *= m(&self.spec.freq_coords(k));
        }
        s.inverse()
    }

    /// Applies a constant-coefficient operator with symbol `p` (variables match the grid axes).
    pub fn apply_symbol(&self, p: &SymbolPoly) -> Result<GridFunction> {
        if p.dimension() != self.spec.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dimension(),
                got: p.dimension(),
            });
        }
        Ok(self.apply_multiplier(|xi| p.eval_real(xi)))
    }

    /// `(Σ |u_j|² h^ν)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spec.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Σ u_j h^ν`.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.spec.cell_volume()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&other.spec)?;
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&other.spec)?;
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&other.spec)?;
        Ok(GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Periodic convolution `∫ u(x-y) v(y) dy`.
    pub fn convolve(&self, other: &GridFunction) -> Result<GridFunction> {
        self.spec.ensure_same(&other.spec)?;
        let a = self.forward();
        let b = other.forward();
        Ok(Spectrum {
            spec: self.spec.clone(),
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        }
        .inverse())
    }

    /// Largest `|u|` outside the inner 70% of the box, relative to `max |u|`.
    pub fn margin_leak(&self) -> f64 {
        let peak = self.sup_norm();
        if peak == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (i, z) in self.values.iter().enumerate() {
            let x = self.spec.coords(i);
            let outside = x
                .iter()
                .zip(&self.spec.half_width)
                .any(|(xi, l)| xi.abs() > 0.7 * l);
            if outside {
                worst = worst.max(z.norm());
            }
        }
        worst / peak
    }

    /// Checks the margin rule: the function must fall below `1e-8` of its
    /// peak outside the inner 70% of the box.
    pub fn wraparound_warning(&self) -> Option<String> {
        let leak = self.margin_leak();
        (leak > 1e-8).then(|| format!("wraparound: {leak:.3e} of the peak lies outside the inner 70% of the box"))
    }

    /// Writes `<base>.bin` (little-endian complex doubles) and `<base>.json` (the spec).
    pub fn save(&self, base: &Path) -> Result<()> {
        let (bin, json) = sidecar_paths(base);
        let mut bytes = Vec::with_capacity(self.values.len() * 16);
        for z in &self.values {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        fs::write(bin, bytes)?;
        let mut f = fs::File::create(json)?;
        serde_json::to_writer_pretty(&mut f, &self.spec)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<GridFunction> {
        let (bin, json) = sidecar_paths(base);
        let spec: GridSpec = serde_json::from_str(&fs::read_to_string(json)?)?;
        let spec = GridSpec::new(spec.split, spec.points, spec.half_width)?;
        let bytes = fs::read(bin)?;
        if bytes.len() != spec.len() * 16 {
            return Err(Error::InvalidGrid(format!(
                "binary holds {} bytes, spec needs {}",
                bytes.len(),
                spec.len() * 16
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        GridFunction::new(spec, values)
    }

    /// CSV of a 1-D or 2-D function: coordinates then real and imaginary parts.
    pub fn to_csv(&self) -> Result<String> {
        let d = self.spec.dimension();
        if d > 2 {
            return Err(Error::InvalidArgument("CSV export covers 1-D and 2-D grids".into()));
        }
        let mut out = String::new();
        out.push_str(if d == 1 { "x1,re,im\n" } else { "x1,x2,re,im\n" });
        for (i, z) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.spec.coords(i).iter().map(|x| crate::io::fmt_f64(*x)).collect();
            row.push(crate::io::fmt_f64(z.re));
            row.push(crate::io::fmt_f64(z.im));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

fn sidecar_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("bin"), base.with_extension("json"))
}

impl Spectrum {
    pub fn inverse(&self) -> GridFunction {
        let mut v: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(k, x)| x * phase(&self.spec, k))
            .collect();
        fft_nd(&mut v, &self.spec.points, true);
        let scale = 1.0 / (self.spec.len() as f64 * self.spec.cell_volume());
        for x in v.iter_mut() {
            *x *= scale;
        }
        GridFunction {
            spec: self.spec.clone(),
            values: v,
        }
    }

    /// Builds a spectrum by sampling `f` at every frequency.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(spec: &GridSpec, f: F) -> Spectrum {
        Spectrum {
            spec: spec.clone(),
            values: (0..spec.len()).map(|k| f(&spec.freq_coords(k))).collect(),
        }
    }
}

/// Anything that acts on grid functions as an integral operator.
pub trait IntegralOperator {
    fn domain(&self) -> &GridSpec;
    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;
}

/// Wraps a closure as an [`IntegralOperator`].
pub struct FnOperator<F> {
    pub spec: GridSpec,
    pub f: F,
}

impl<F> IntegralOperator for FnOperator<F>
where
    F: Fn(&GridFunction) -> Result<GridFunction>,
{
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        (self.f)(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec1(n: usize, l: f64) -> GridSpec {
        GridSpec::good_only(vec![n], vec![l]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::good_only(vec![12], vec![1.0]).is_err());
        assert!(GridSpec::good_only(vec![4], vec![1.0]).is_err());
        assert!(GridSpec::good_only(vec![8], vec![0.0]).is_err());
        assert!(GridSpec::new(VariableSplit::new(1, 1).unwrap(), vec![8], vec![1.0]).is_err());
    }

    #[test]
    fn gaussian_transform_pair() {
        let spec = spec1(256, 20.0);
        let u = GridFunction::from_real_fn(&spec, |x| (-x[0] * x[0] / 2.0).exp());
        let s = u.forward();
        for k in 0..spec.len() {
            let xi = spec.frequency(0, k);
            let want = (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp();
            assert!((s.values[k] - Complex64::new(want, 0.0)).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn round_trip_2d() {
        let spec = GridSpec::new(VariableSplit::new(1, 1).unwrap(), vec![16, 32], vec![3.0, 5.0]).unwrap();
        let u = GridFunction::from_fn(&spec, |x| Complex64::new(x[0].sin() * x[1], x[0] * x[0] - x[1]));
        let back = u.forward().inverse();
        let err = back.sub(&u).unwrap().l2_norm() / u.l2_norm();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn delta_has_unit_mass_and_flat_spectrum() {
        let spec = GridSpec::good_only(vec![16, 8], vec![2.0, 1.0]).unwrap();
        let d = GridFunction::delta(&spec, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(d.integral().re, 1.0, epsilon = 1e-14);
        for z in d.forward().values {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_multiplier() {
        let spec = spec1(128, 15.0);
        let u = GridFunction::from_real_fn(&spec, |x| (-x[0] * x[0]).exp());
        let p = crate::symbol::parse("xi1").unwrap();
        // D = -i d/dx, so i·(Du) = u'
        let du = u.apply_symbol(&p).unwrap().scale(Complex64::new(0.0, 1.0));
        for (i, z) in du.values.iter().enumerate() {
            let x = spec.node(0, i);
            let want = -2.0 * x * (-x * x).exp();
            assert!((z.re - want).abs() < 1e-10 && z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_diff_wraps() {
        let spec = spec1(8, 1.0);
        assert_relative_eq!(spec.periodic_diff(0, 0.9, -0.9), 0.2, epsilon = 1e-12);
        assert_relative_eq!(spec.periodic_diff(0, -0.9, 0.9), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join(format!("hypolab-grid-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let spec = spec1(8, 1.0);
        let u = GridFunction::from_fn(&spec, |x| Complex64::new(x[0], -x[0] * 0.5));
        let base = dir.join("u");
        u.save(&base).unwrap();
        assert_eq!(GridFunction::load(&base).unwrap(), u);
        fs::remove_dir_all(dir).ok();
    }
}
