//! Sampling schedules on expanding spheres and the extremum search used by
//! every limit test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{halton, linear_fit, LinearFit, PRIMES};

/// Geometric radii `2^lo, 2^(lo+1), …, 2^hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub radii: Vec<f64>,
}

impl RadiusSchedule {
    pub fn geometric(lo_exp: i32, hi_exp: i32) -> Result<Self> {
        if hi_exp - lo_exp < 3 {
            return Err(Error::InvalidArgument(format!(
                "radius schedule 2^{lo_exp}..2^{hi_exp} has fewer than four radii"
            )));
        }
        Ok(RadiusSchedule {
            radii: (lo_exp..=hi_exp).map(|k| 2f64.powi(k)).collect(),
        })
    }

    /// The upper half of the schedule, where fits are made.
    pub fn top_half(&self) -> &[f64] {
        &self.radii[self.radii.len() / 2..]
    }
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        RadiusSchedule::geometric(4, 20).expect("static schedule")
    }
}

/// Deterministic quasi-uniform unit directions: the normalized nonzero
/// vectors of `{-1,0,1}^ν` followed by `2ν²` Halton points.
#[derive(Clone, Debug)]
pub struct SphereDesign {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

impl SphereDesign {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "sphere design needs dimension >= 1");
        let mut points = Vec::new();
        if dim <= 5 {
            let total = 3usize.pow(dim as u32);
            for code in 0..total {
                let mut c = code;
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let d = (c % 3) as f64 - 1.0;
                        c /= 3;
                        d
                    })
                    .collect();
                if v.iter().any(|x| *x != 0.0) {
                    points.push(normalize(v));
                }
            }
        } else {
            for j in 0..dim {
                for s in [-1.0, 1.0] {
                    let mut v = vec![0.0; dim];
                    v[j] = s;
                    points.push(v);
                }
            }
            points.push(normalize(vec![1.0; dim]));
            points.push(normalize(vec![-1.0; dim]));
        }
        let mut k = 1u64;
        let want = 2 * dim * dim;
        let mut added = 0;
        while added < want {
            let v: Vec<f64> = (0..dim)
                .map(|j| 2.0 * halton(k, PRIMES[j % PRIMES.len()]) - 1.0)
                .collect();
            k += 1;
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-4 {
                points.push(normalize(v));
                added += 1;
            }
        }
        SphereDesign { dim, points }
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    v
}

fn better(a: f64, b: f64) -> bool {
    // NaN never wins; +inf beats everything finite
    !a.is_nan() && (b.is_nan() || a > b)
}

/// Maximizes `f` over the unit sphere: every design point and warm start is
/// scored, then the best few are refined by a shrinking coordinate pattern search.
pub fn maximize_on_sphere<F>(design: &SphereDesign, warm: &[Vec<f64>], f: F) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = design.dim;
    let mut scored: Vec<(f64, Vec<f64>)> = design
        .points
        .iter()
        .chain(warm)
        .map(|d| (f(d), d.clone()))
        .collect();
    scored.sort_by(|a, b| match (a.0.is_nan(), b.0.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => b.0.total_cmp(&a.0),
    });
    let mut best = scored[0].clone();
    if dim == 1 || best.0 == f64::INFINITY {
        return best;
    }
    let starts = scored.len().min(6);
    let mut trial = vec![0.0; dim];
    for (val0, d0) in scored.into_iter().take(starts) {
        let (mut val, mut d) = (val0, d0);
        let mut step = 0.25;
        let mut evals = 0;
        while step > 1e-11 && evals < 3000 {
            let mut improved = false;
            for j in 0..dim {
                for s in [1.0, -1.0] {
                    trial.copy_from_slice(&d);
                    trial[j] += s * step;
                    let t = normalize(trial.clone());
                    let v = f(&t);
                    evals += 1;
                    if better(v, val) {
                        val = v;
                        d = t;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if better(val, best.0) {
            best = (val, d);
        }
    }
    best
}

/// One sample of a radius profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub radius: f64,
    pub value: f64,
}

/// Sphere extremum of `f(R·d)` at every radius, tracking the previous optimum.
/// `f` returns a logarithm; samples store `exp` of the extremum.
pub fn log_profile<F>(design: &SphereDesign, radii: &[f64], maximize: bool, f: F) -> (Vec<Sample>, Vec<Vec<f64>>)
where
    F: Fn(&[f64]) -> f64,
{
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let mut samples = Vec::with_capacity(radii.len());
    let mut argmax = Vec::with_capacity(radii.len());
    for &r in radii {
        let (v, d) = maximize_on_sphere(design, &warm, |d| {
            let y: Vec<f64> = d.iter().map(|di| r * di).collect();
            sign * f(&y)
        });
        samples.push(Sample {
            radius: r,
            value: (sign * v).exp(),
        });
        warm = vec![d.clone()];
        argmax.push(d);
    }
    (samples, argmax)
}

/// Asymptotic behavior of a positive profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Trend {
    /// Fitted log-log slope below `-tol`, or identically zero.
    Vanishing,
    /// Slope within `±tol` and the samples sit on the fitted line.
    Bounded,
    /// Slope above `tol`.
    Growing,
    /// Slope within `±tol` but the samples scatter.
    Ambiguous,
}

/// Tolerance on the largest log deviation from the fitted line for `Bounded`.
pub const STABILITY_TOL: f64 = 0.1;

/// Fits `log value` against `log radius` over the given samples.
pub fn trend(samples: &[Sample], slope_tol: f64) -> (Option<LinearFit>, Trend) {
    if samples.iter().all(|s| s.value == 0.0) {
        return (None, Trend::Vanishing);
    }
    if samples.iter().any(|s| s.value == f64::INFINITY) {
        return (None, Trend::Growing);
    }
    let x: Vec<f64> = samples.iter().map(|s| s.radius.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.value.max(1e-300).ln()).collect();
    let Ok(fit) = linear_fit(&x, &y) else {
        return (None, Trend::Ambiguous);
    };
    let t = if fit.slope < -slope_tol {
        Trend::Vanishing
    } else if fit.slope > slope_tol {
        Trend::Growing
    } else if fit.max_residual <= STABILITY_TOL {
        Trend::Bounded
    } else {
        Trend::Ambiguous
    };
    (Some(fit), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_sizes() {
        assert_eq!(SphereDesign::new(1).points.len(), 2 + 2);
        assert_eq!(SphereDesign::new(2).points.len(), 8 + 8);
        for p in SphereDesign::new(3).points {
            let n: f64 = p.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn finds_narrow_maximum() {
        let design = SphereDesign::new(2);
        let target = normalize(vec![0.013, 1.0]);
        let (v, d) = maximize_on_sphere(&design, &[], |d| {
            let dx = d[0] - target[0];
            let dy = d[1] - target[1];
            -(dx * dx + dy * dy).sqrt()
        });
        assert!(v > -1e-8, "{v} at {d:?}");
    }

    #[test]
    fn trend_classes() {
        let mk = |p: f64| -> Vec<Sample> {
            (8..16)
                .map(|k| {
                    let r = 2f64.powi(k);
                    Sample { radius: r, value: 3.0 * r.powf(p) }
                })
                .collect()
        };
        assert_eq!(trend(&mk(-0.5), 0.05).1, Trend::Vanishing);
        assert_eq!(trend(&mk(0.0), 0.05).1, Trend::Bounded);
        assert_eq!(trend(&mk(1.0), 0.05).1, Trend::Growing);
        let mut noisy = mk(0.0);
        noisy[3].value *= 5.0;
        assert_eq!(trend(&noisy, 0.05).1, Trend::Ambiguous);
    }
}
