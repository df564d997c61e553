use super::*;
use crate::mizohata::bump;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn grid1(n: usize, l: f64) -> GridSpec {
    GridSpec::good_only(vec![n], vec![l]).unwrap()
}

fn op_1d(coeff: &str) -> VariableOperator {
    let split = VariableSplit { good: 1, bad: 0 };
    let ctx = ParseContext::with_split(split);
    VariableOperator {
        split,
        type_symbol: parse_with("xi1^2", ParseContext::with_dimension(1)).unwrap(),
        compact: vec![[-2.0, 2.0]],
        terms: vec![
            VariableTerm {
                coeff: CoeffField::Expr(Expr::parse("1", 1, 0).unwrap()),
                symbol: parse_with("xi1^2", ctx).unwrap(),
            },
            VariableTerm {
                coeff: CoeffField::Expr(Expr::parse(coeff, 1, 0).unwrap()),
                symbol: parse_with("1", ctx).unwrap(),
            },
        ],
    }
}

fn random_kernel(spec: &GridSpec, seed: u64, scale: f64) -> TwoPointKernel {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let n = spec.len();
    TwoPointKernel {
        spec: spec.clone(),
        re: DMatrix::from_fn(n, n, |_, _| next() * scale),
        im: DMatrix::from_fn(n, n, |_, _| next() * scale),
    }
}

#[test]
fn delta_is_bracket_identity() {
    let spec = grid1(16, 2.0);
    let k = random_kernel(&spec, 3, 1.0);
    let d = TwoPointKernel::delta(&spec);
    assert!(bracket(&k, &d).unwrap().sub(&k).unwrap().max_abs() < 1e-13);
    assert!(bracket(&d, &k).unwrap().sub(&k).unwrap().max_abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn bracket_is_associative(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000) {
        let spec = grid1(8, 1.0);
        let (f, g, h) = (random_kernel(&spec, a, 1.0), random_kernel(&spec, b, 1.0), random_kernel(&spec, c, 1.0));
        let lhs = bracket(&bracket(&f, &g).unwrap(), &h).unwrap();
        let rhs = bracket(&f, &bracket(&g, &h).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * lhs.max_abs().max(1.0));
    }
}

#[test]
fn neumann_matches_dense_inverse() {
    let spec = grid1(32, 2.0);
    let alpha = random_kernel(&spec, 11, 0.3);
    let s = neumann_u(&alpha, 1e-12, 200).unwrap();
    assert!(s.converged, "{:?}", s.norm_history);
    assert!(s.recursion_error < 1e-10);
    // u (I - α h) = α
    let n = spec.len();
    let h = spec.cell_volume();
    let a = alpha.re.map(|v| num_complex::Complex64::new(v, 0.0)) + alpha.im.map(|v| num_complex::Complex64::new(0.0, v));
    let m = DMatrix::<num_complex::Complex64>::identity(n, n) - &a * num_complex::Complex64::new(h, 0.0);
    let u = a * m.try_inverse().unwrap();
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((u[(i, j)] - s.sum.get(i, j)).norm());
        }
    }
    assert!(err < 1e-9, "{err}");
    assert!(s.fixed_point_residual < 1e-9);
    assert!(s.fitted_ratio.unwrap() < 1.0);
}

#[test]
fn neumann_refuses_large_initial_norm() {
    let spec = grid1(16, 2.0);
    let alpha = TwoPointKernel::delta(&spec).scale(num_complex::Complex64::new(1.5, 0.0));
    let s = neumann_u(&alpha, 1e-8, 50).unwrap();
    assert!(!s.converged);
    assert_eq!(s.terms, 0);
    assert!(s.norm_history[0] >= 1.0);
}

#[test]
fn neumann_of_zero_is_zero() {
    let spec = grid1(8, 1.0);
    let s = neumann_u(&TwoPointKernel::zeros(&spec), 1e-8, 10).unwrap();
    assert!(s.converged && s.sum.is_zero());
}

/// Dense spectral-collocation solve of `(-d² + c - λ) v = δ_x`.
fn dense_oracle(spec: &GridSpec, c: impl Fn(f64) -> f64, lambda: f64, i: usize) -> Vec<f64> {
    let n = spec.len();
    let xs: Vec<f64> = (0..n).map(|j| spec.node(0, j)).collect();
    let xis: Vec<f64> = (0..n).map(|k| spec.frequency(0, k)).collect();
    let a = DMatrix::from_fn(n, n, |j, l| {
        let s: f64 = xis.iter().map(|xi| (xi * xi - lambda) * (xi * (xs[j] - xs[l])).cos()).sum::<f64>() / n as f64;
        if j == l {
            s + c(xs[j])
        } else {
            s
        }
    });
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[i] = 1.0 / spec.cell_volume();
    a.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn neumann_pipeline_matches_dense_solve() {
    let spec = grid1(512, 8.0);
    let op = op_1d("0.5*bump(x1)");
    let cfg = LeviConfig {
        tol: 1e-12,
        ..LeviConfig::default()
    };
    let x = [0.3];
    let sol = fundamental_solution_variable(&op, -10.0, &x, &spec, &cfg).unwrap();
    let row = sol.g.physical_row(sol.row);
    let oracle = dense_oracle(&spec, |t| 0.5 * bump(t), -10.0, sol.row);
    let num: f64 = row.values.iter().zip(&oracle).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = oracle.iter().map(|b| b * b).sum();
    assert!((num / den).sqrt() < 1e-5, "{}", (num / den).sqrt());
    assert!(sol.residual.l2 < 1e-8, "{:?}", sol.residual);
    assert_eq!(sol.vanish_check, 0.0);
}

#[test]
fn constant_coefficients_have_zero_remainder() {
    let spec = grid1(64, 4.0);
    let op = op_1d("0.5");
    let rem = remainder_alpha(&op, -4.0, &[], &spec, 4.0).unwrap();
    // outside K the type operator drops the constant term
    let inner = GridSpec::good_only(vec![64], vec![4.0]).unwrap();
    let op_k = VariableOperator {
        compact: vec![[-4.0, 4.0]],
        ..op
    };
    let rem_k = remainder_alpha(&op_k, -4.0, &[], &inner, 4.0).unwrap();
    assert!(rem_k.alpha0.is_zero());
    assert!(!rem.alpha0.is_zero());
}

#[test]
fn good_kernel_matches_sliced_solution() {
    let split = VariableSplit { good: 1, bad: 1 };
    let ctx = ParseContext::with_split(split);
    let op = VariableOperator {
        split,
        type_symbol: parse_with("xi1^2", ParseContext::with_dimension(1)).unwrap(),
        compact: vec![[-2.0, 2.0], [-2.0, 2.0]],
        terms: vec![VariableTerm {
            coeff: CoeffField::Expr(Expr::parse("1 + 0.3*bump(x1/2)*bump(y1/2)", 1, 1).unwrap()),
            symbol: parse_with("xi1^2", ctx).unwrap(),
        }],
    };
    let spec = GridSpec::new(split, vec![64, 16], vec![4.0, 4.0]).unwrap();
    let x = [0.5, 0.5];
    let cfg = LeviConfig::default();
    let full = fundamental_solution_variable(&op, -16.0, &x, &spec, &cfg).unwrap();
    let good = variable_good_kernel(&op, -16.0, &x, &spec, &cfg).unwrap();
    let phys = full.g.physical_row(full.row);
    let bad = spec.bad_block().unwrap();
    let phi = mollifier(&bad, cfg.mollifier_cells).unwrap();
    let (nb, xb) = (bad.len(), full.g.x_bad.clone());
    let mut err = 0.0f64;
    for z in 0..spec.good_block().len() {
        for b in 0..nb {
            let zb = bad.coords(b);
            let shifted = bad.nearest_node(&[bad.periodic_diff(0, xb[0], zb[0])]).unwrap_or(0);
            let want = good.kernel.get(full.row, z) * phi.values[shifted];
            err = err.max((phys.values[z * nb + b] - want).norm());
        }
    }
    assert!(err < 1e-6 * phys.sup_norm(), "{err}");
}

#[test]
fn sliced_apply_agrees_with_rows() {
    let op = desk_example();
    let spec = GridSpec::new(VariableSplit { good: 1, bad: 1 }, vec![32, 16], vec![4.0, 4.0]).unwrap();
    let x = [0.5, 0.0];
    let sol = fundamental_solution_variable(&op, -32.0, &x, &spec, &LeviConfig::default()).unwrap();
    let u = GridFunction::from_real_fn(&spec, |p| (-(p[0] - 0.3).powi(2) - (p[1] + 0.2).powi(2)).exp());
    let ku = sol.g.apply(&u).unwrap();
    let row = sol.g.physical_row(sol.row);
    let direct: num_complex::Complex64 = row.values.iter().zip(&u.values).map(|(a, b)| a * b).sum::<num_complex::Complex64>() * spec.cell_volume();
    let xb = spec.bad_block().unwrap().nearest_node(&[0.0]).unwrap();
    let at = ku.values[sol.row * 16 + xb];
    assert!((at - direct).norm() < 1e-10 * direct.norm().max(1e-12), "{at} vs {direct}");
}

#[test]
fn desk_example_converges_and_residual_shrinks() {
    let op = desk_example();
    let spec = desk_grid();
    let x = [0.5, 0.25];
    let mut last = f64::INFINITY;
    for lambda in [-16.0, -64.0, -256.0] {
        let sol = fundamental_solution_variable(&op, lambda, &x, &spec, &LeviConfig::default()).unwrap();
        assert!(sol.converged());
        assert!(sol.residual.l2 < last, "{lambda}: {:?}", sol.residual);
        last = sol.residual.l2;
        assert!(sol.series.iter().all(|s| s.recursion_error < 1e-10));
    }
    assert!(last < 1e-3, "{last}");
}

#[test]
fn mollifier_width_effect_stays_bounded() {
    let op = desk_example();
    let spec = GridSpec::new(VariableSplit { good: 1, bad: 1 }, vec![64, 32], vec![4.0, 4.0]).unwrap();
    let x = [0.5, 0.25];
    let d: Vec<f64> = [-16.0, -64.0, -256.0]
        .iter()
        .map(|&l| mollifier_sensitivity(&op, l, &x, &spec, &LeviConfig::default(), [1.0, 2.0]).unwrap())
        .collect();
    assert!(d.windows(2).all(|w| w[1] <= w[0] * 1.01), "{d:?}");
}

#[test]
fn refined_residual_decreases_with_resolution() {
    let op = op_1d("0.5*bump(x1)");
    let cfg = LeviConfig {
        tol: 1e-12,
        ..LeviConfig::default()
    };
    let r: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| refined_residual(&op, -10.0, &[0.3], &grid1(n, 8.0), &cfg, 1.0).unwrap())
        .collect();
    assert!(r[1] < r[0] && r[2] < r[1], "{r:?}");
}

#[test]
fn refine_reproduces_trig_polynomial() {
    let spec = grid1(16, PI);
    let fine = grid1(64, PI);
    let f = |p: &[f64]| (3.0 * p[0]).sin() + 0.5 * (2.0 * p[0]).cos();
    let r = refine(&GridFunction::from_real_fn(&spec, f), &fine).unwrap();
    let want = GridFunction::from_real_fn(&fine, f);
    assert!(r.sub(&want).unwrap().sup_norm() < 1e-12);
}

#[test]
fn fits_recover_synthetic_parameters() {
    let lambdas = [-16.0, -32.0, -64.0, -128.0, -256.0];
    let sups: Vec<f64> = lambdas.iter().map(|l: &f64| 2.0 * (-0.7 * l.abs().powf(0.5)).exp()).collect();
    let f = fit_stretched(&lambdas, &sups).unwrap();
    assert!((f.b - 0.5).abs() < 0.01 && (f.kappa - 0.7).abs() < 0.02, "{f:?}");
    let pw: Vec<f64> = lambdas.iter().map(|l: &f64| 3.0 * l.abs().powf(-0.5)).collect();
    let p = fit_power(&lambdas, &pw).unwrap();
    assert!((p.c - 0.5).abs() < 1e-12 && p.residual < 1e-12);
}

