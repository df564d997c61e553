//! Acceptance criteria 1-10, one PASS/FAIL line each.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hypolab::classify::{is_hypoelliptic, is_partially_hypoelliptic, lineality, ClassifyOptions, Verdict};
use hypolab::grid::{GridFunction, GridSpec};
use hypolab::kernels::{fundamental_solution, fundamental_solution_const, green_kernel_frozen, Discretization};
use hypolab::levi::{desk_example, desk_grid, estimate_decay, fundamental_solution_variable, DecayConfig, LeviConfig};
use hypolab::mizohata::{bump, CoeffField, Expr, VariableOperator, VariableTerm};
use hypolab::norms::{check_m1, check_strict_weak_inequality, modulated_sweep, ps_equivalence, sobolev_norm, standard_probes};
use hypolab::spectral::{
    boj_check, fit_asymptotics, geometric_grid, stieltjes_green, sublevel_moments, tauberian_compare, variable_diagonal,
    CheckVerdict, DiagonalSource, MomentOptions, SpectralDiagonal,
};
use hypolab::symbol::{parse_with, ParseContext};
use hypolab::{parse, MultiIndex, SymbolPoly, VariableSplit};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn sym(s: &str) -> SymbolPoly {
    parse(s).unwrap()
}

fn sym_dim(s: &str, n: usize) -> SymbolPoly {
    parse_with(s, ParseContext::with_dimension(n)).unwrap()
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Check {
    let o = ClassifyOptions::default();
    let split = |s: &str| parse_with(s, ParseContext::with_split(VariableSplit::new(1, 1).unwrap())).unwrap();
    let he = [
        ("xi1^2 + xi2^2", sym("xi1^2 + xi2^2"), Verdict::Yes),
        ("xi1^2 + i*xi2", sym("xi1^2 + i*xi2"), Verdict::Yes),
        ("xi1^4 + xi2^2", sym("xi1^4 + xi2^2"), Verdict::Yes),
        ("xi1^2 - xi2^2", sym("xi1^2 - xi2^2"), Verdict::No),
        ("xi1^2 + xi2", sym("xi1^2 + xi2"), Verdict::No),
        ("xi1^2 (in R^2)", sym_dim("xi1^2", 2), Verdict::No),
        ("(xi1 + xi2)^2 + 1", sym("(xi1 + xi2)^2 + 1"), Verdict::No),
    ];
    let mut bad = Vec::new();
    let mut inconclusive = 0;
    for (name, p, want) in &he {
        let r = is_hypoelliptic(p, &o);
        inconclusive += (r.verdict == Verdict::Inconclusive) as usize;
        if r.verdict != *want || (*want == Verdict::No && r.witness.is_none()) {
            bad.push(format!("HE {name}: {:?}", r.verdict));
        }
    }
    for (name, want) in [("xi1^2 + xi1*eta1", Verdict::Yes), ("xi1*eta1", Verdict::No)] {
        let r = is_partially_hypoelliptic(&split(name), &o).map_err(|e| e.to_string())?;
        inconclusive += (r.verdict == Verdict::Inconclusive) as usize;
        if r.verdict != want {
            bad.push(format!("PHE {name}: {:?}", r.verdict));
        }
    }
    ensure(
        bad.is_empty() && inconclusive == 0,
        format!("9 symbols, {} mismatches, {inconclusive} inconclusive {bad:?}", bad.len()),
    )
}

/// Orthogonal projector onto the span of the columns of `v`.
fn projector(cols: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let m = DMatrix::from_columns(cols);
    let q = m.qr().q();
    let q = q.columns(0, cols.len()).into_owned();
    &q * q.transpose()
}

fn linear_form(row: &[i64]) -> String {
    let parts: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(j, c)| format!("({c})*xi{}", j + 1))
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        format!("({})", parts.join(" + "))
    }
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    let mut dims = Vec::new();
    for _ in 0..20 {
        let n = rng.gen_range(2..=4usize);
        let deficiency = rng.gen_range(1..n);
        let r = n - deficiency;
        let a: Vec<Vec<i64>> = loop {
            let a: Vec<Vec<i64>> = (0..r).map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            let m = DMatrix::from_fn(r, n, |i, j| a[i][j] as f64);
            if m.clone().svd(false, false).singular_values.iter().all(|s| *s > 1e-6) {
                break a;
            }
        };
        // Q(y) = Σ y_i² + c y_i y_{i+1} (|c| ≤ 1, so positive definite) + quartics
        let y: Vec<String> = a.iter().map(|row| linear_form(row)).collect();
        let mut q: Vec<String> = y.iter().map(|v| format!("{v}^2")).collect();
        for i in 0..r {
            if rng.gen_bool(0.5) {
                q.push(format!("{}*{}^4", rng.gen_range(1..=3), y[i]));
            }
            if i + 1 < r && rng.gen_bool(0.5) {
                q.push(format!("({})*{}*{}", rng.gen_range(-1..=1), y[i], y[i + 1]));
            }
        }
        let p = sym_dim(&q.join(" + "), n);
        let found = lineality(&p, false);
        // null space of A from the eigenvectors of AᵀA
        let m = DMatrix::from_fn(r, n, |i, j| a[i][j] as f64);
        let eig = SymmetricEigen::new(m.transpose() * &m);
        let null: Vec<DVector<f64>> = (0..n)
            .filter(|&k| eig.eigenvalues[k].abs() < 1e-9)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let got: Vec<DVector<f64>> = found.basis.iter().map(|v| DVector::from_vec(v.clone())).collect();
        if got.len() != null.len() {
            return Err(format!("dimension {} vs {} for {}", got.len(), null.len(), q.join(" + ")));
        }
        let diff = (projector(&got, n) - projector(&null, n)).amax();
        worst = worst.max(diff);
        dims.push(null.len());
    }
    ensure(worst <= 1e-10, format!("20 symbols, null dims {dims:?}, max projector gap {worst:.2e}"))
}

fn criterion_3() -> Check {
    let spec = GridSpec::good_only(vec![1024], vec![20.0]).map_err(|e| e.to_string())?;
    let m = sym("xi1^2");
    let l = spec.half_width[0];
    let folded = fundamental_solution(&m, -1.0, &spec, Discretization::Folded { folds: 64 }).map_err(|e| e.to_string())?;
    let err = folded
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| spec.node(0, *i).abs() <= 0.7 * l)
        .map(|(i, z)| (z - Complex64::new((-spec.node(0, i).abs()).exp() / 2.0, 0.0)).norm())
        .fold(0.0, f64::max);
    let t1 = fundamental_solution_const(&m, -1.0, &spec).map_err(|e| e.to_string())?;
    let t2 = fundamental_solution_const(&m, -4.0, &spec).map_err(|e| e.to_string())?;
    let lhs = t1.sub(&t2).map_err(|e| e.to_string())?;
    let rhs = t1.convolve(&t2).map_err(|e| e.to_string())?.scale(Complex64::new(3.0, 0.0));
    let rel = lhs.sub(&rhs).map_err(|e| e.to_string())?.sup_norm() / lhs.sup_norm();
    ensure(
        err <= 1e-6 && rel <= 1e-6,
        format!("pointwise max error {err:.2e} (folded node values), resolvent identity {rel:.2e}"),
    )
}

fn criterion_4() -> Check {
    let split = VariableSplit { good: 1, bad: 0 };
    let ctx = ParseContext::with_split(split);
    let op = VariableOperator {
        split,
        type_symbol: sym("xi1^2"),
        compact: vec![[-2.0, 2.0]],
        terms: vec![
            VariableTerm {
                coeff: CoeffField::Expr(Expr::parse("1", 1, 0).unwrap()),
                symbol: parse_with("xi1^2", ctx).unwrap(),
            },
            VariableTerm {
                coeff: CoeffField::Expr(Expr::parse("0.5*bump(x1)", 1, 0).unwrap()),
                symbol: parse_with("1", ctx).unwrap(),
            },
        ],
    };
    let spec = GridSpec::good_only(vec![512], vec![8.0]).unwrap();
    let lambda = -10.0;
    let cfg = LeviConfig {
        tol: 1e-12,
        ..LeviConfig::default()
    };
    let sol = fundamental_solution_variable(&op, lambda, &[0.3], &spec, &cfg).map_err(|e| e.to_string())?;
    let row = sol.g.physical_row(sol.row);
    // collocation matrix of -d² + c - λ, solved directly
    let n = spec.len();
    let xs: Vec<f64> = (0..n).map(|j| spec.node(0, j)).collect();
    let xis: Vec<f64> = (0..n).map(|k| spec.frequency(0, k)).collect();
    let a = DMatrix::from_fn(n, n, |j, l| {
        let s: f64 = xis.iter().map(|xi| (xi * xi - lambda) * (xi * (xs[j] - xs[l])).cos()).sum::<f64>() / n as f64;
        if j == l {
            s + 0.5 * bump(xs[j])
        } else {
            s
        }
    });
    let mut rhs = DVector::zeros(n);
    rhs[sol.row] = 1.0 / spec.cell_volume();
    let oracle = a.lu().solve(&rhs).ok_or("singular collocation matrix")?;
    let num: f64 = row.values.iter().zip(oracle.iter()).map(|(g, o)| (g - o).norm_sqr()).sum();
    let den: f64 = oracle.iter().map(|o| o * o).sum();
    let rel = (num / den).sqrt();
    ensure(rel <= 1e-5, format!("relative L2 error {rel:.2e} at lambda = -10, 512 points"))
}

fn criterion_5() -> Check {
    let lambdas = [-16.0, -32.0, -64.0, -128.0, -256.0];
    let est = estimate_decay(&desk_example(), &[0.5, 0.25], &lambdas, &desk_grid(), &DecayConfig::default())
        .map_err(|e| e.to_string())?;
    let c = est.c_fit.as_ref().ok_or("no remainder fit")?;
    let s = est.stretched.as_ref().ok_or("no stretched fit")?;
    let b_gap = (s.b - est.b_type).abs() / est.b_type;
    ensure(
        c.c > 0.0 && c.residual < 0.2 && est.annulus_monotone && b_gap <= 0.5,
        format!(
            "c = {:.3} (residual {:.3}), annulus sup decreasing: {}, b = {:.3} vs type b = {:.3}",
            c.c, c.residual, est.annulus_monotone, s.b, est.b_type
        ),
    )
}

fn criterion_6() -> Check {
    let lam = geometric_grid(1.0, 1e3, 10);
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 1..=2usize {
        for m in 1..=2u32 {
            let text = (1..=n).map(|j| format!("xi{j}^2")).collect::<Vec<_>>().join(" + ");
            let p = sym(&format!("({text})^{m}"));
            let d = sublevel_moments(&p, &lam, &[MultiIndex::zeros(n)], &MomentOptions::default()).map_err(|e| e.to_string())?;
            let f = fit_asymptotics(&d, 0).map_err(|e| e.to_string())?;
            let a = n as f64 / (2.0 * m as f64);
            ok &= (f.a / a - 1.0).abs() < 0.02 && f.t == 0;
            parts.push(format!("(n={n},m={m}) a={:.4} t={}", f.a, f.t));
        }
    }
    let d = sublevel_moments(&sym("xi1^4 + xi2^2"), &lam, &[MultiIndex::zeros(2)], &MomentOptions::default())
        .map_err(|e| e.to_string())?;
    let f = fit_asymptotics(&d, 0).map_err(|e| e.to_string())?;
    ok &= (f.a / 0.75 - 1.0).abs() < 0.03;
    parts.push(format!("quasi-elliptic a={:.4}", f.a));
    ensure(ok, parts.join(", "))
}

fn criterion_7() -> Check {
    let lam = geometric_grid(1e-4, 1e6, 400);
    let m = sym("xi1^2");
    let d = sublevel_moments(&m, &lam, &[MultiIndex::zeros(1)], &MomentOptions::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for l in [-1.0, -4.0, -16.0] {
        let s = stieltjes_green(&d, 0, l).map_err(|e| e.to_string())?;
        let g = green_kernel_frozen(&m, &MultiIndex::zeros(1), l).map_err(|e| e.to_string())?.value();
        worst = worst.max((s / g - 1.0).abs());
    }
    ensure(worst < 0.03, format!("max relative gap {worst:.2e} over lambda = -1, -4, -16"))
}

fn criterion_8() -> Check {
    let lam = geometric_grid(10.0, 1e4, 40);
    let synthetic = |f: &dyn Fn(f64) -> f64| {
        SpectralDiagonal::new(
            lam.clone(),
            vec![vec![0]],
            vec![lam.iter().map(|l| f(*l)).collect()],
            1.0,
            DiagonalSource::Synthetic,
        )
        .unwrap()
    };
    let base = synthetic(&|l| l.sqrt());
    let same = tauberian_compare(&base, &base, 0).map_err(|e| e.to_string())?;
    let log = tauberian_compare(&base, &synthetic(&|l| l.sqrt() * (1.0 + 1.0 / l.ln())), 0).map_err(|e| e.to_string())?;
    let gap = tauberian_compare(&base, &synthetic(&|l| 1.5 * l.sqrt()), 0).map_err(|e| e.to_string())?;
    let desk_lam = geometric_grid(10.0, 1500.0, 40);
    let (v, f) = variable_diagonal(&desk_example(), &[0.5, 0.25], &desk_lam, &desk_grid()).map_err(|e| e.to_string())?;
    let desk = tauberian_compare(&f, &v, 0).map_err(|e| e.to_string())?;
    let ok = same.verdict == CheckVerdict::Pass
        && same.ratio.iter().all(|r| *r == 1.0)
        && log.verdict == CheckVerdict::Pass
        && gap.verdict == CheckVerdict::Fail
        && desk.verdict == CheckVerdict::Pass
        && desk.residual < 0.3;
    ensure(
        ok,
        format!(
            "identical {:?}, 1+1/log {:?} (K={:.3}), gap {:?}, desk {:?} (K={:.3}, residual {:.2e})",
            same.verdict, log.verdict, log.correction, gap.verdict, desk.verdict, desk.correction, desk.residual
        ),
    )
}

fn criterion_9() -> Check {
    let spec = GridSpec::new(VariableSplit::new(1, 1).unwrap(), vec![32, 16], vec![4.0, 3.0]).unwrap();
    let u = GridFunction::from_fn(&spec, |x| Complex64::new((x[0] * 1.3).sin() + x[1], (x[0] * x[1]).cos()));
    let direct = (u.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * spec.cell_volume()).sqrt();
    let parseval = (sobolev_norm(&u, 0.0, 0.0) / direct - 1.0).abs();

    let line = |n: usize, l: f64| GridSpec::good_only(vec![n], vec![l]).unwrap();
    let xi = sym("xi1");
    let xi2 = sym("xi1^2");
    let ps = ps_equivalence(&standard_probes(&line(128, 10.0)), &xi2, 0.5, 0.0).map_err(|e| e.to_string())?;
    let sweep = modulated_sweep(&line(512, 20.0), 0.05, &[1.0, 2.0, 4.0, 8.0, 16.0]);
    let sw_true = check_strict_weak_inequality(&xi, &xi2, 0.5, &sweep, 0.0, 0.0).map_err(|e| e.to_string())?;
    let sw_false = check_strict_weak_inequality(&xi2, &xi2, 1.0, &sweep, 0.0, 0.0).map_err(|e| e.to_string())?;
    let m1 = check_m1(&xi2, &line(128, 10.0), 1.0, &ClassifyOptions::default()).map_err(|e| e.to_string())?;
    let boj = boj_check(&xi, &xi2, &line(256, 8.0), &[1.0, 10.0, 100.0]).map_err(|e| e.to_string())?;
    let ok = parseval <= 1e-10 && ps.c.is_finite() && sw_true.holds && !sw_false.holds && m1.holds && boj.holds;
    ensure(
        ok,
        format!(
            "Parseval {parseval:.1e}, p_s ratio C = {:.3}, sw (xi, xi^2, 0.5) {} / (xi^2, xi^2, 1) {}, M1 {} (C = {:.3}), Boj {} (C = {:.3}, k = {:.3})",
            ps.c, sw_true.holds, sw_false.holds, m1.holds, m1.c_grid, boj.holds, boj.c, boj.k
        ),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = serde_json::json!({
        "command": "levi",
        "operator": {
            "type_symbol": "xi1^2",
            "split": {"n": 1, "m": 1},
            "compact_set": {"box": [[-2.0, 2.0], [-2.0, 2.0]]},
            "terms": [
                {"coeff_expr": "1 + 0.25*bump(x1/2)*bump(y1/2)", "symbol": "xi1^2"},
                {"coeff_expr": "0.5*bump(x1/2)*bump(y1/2)", "symbol": "xi1*eta1"}
            ]
        },
        "grid": {"points": [64, 16], "half_width": [4.0, 4.0]},
        "lambdas": [-16.0, -32.0, -64.0, -128.0],
        "point": [0.5, 0.25],
        "dump_kernels": true
    });
    std::fs::write(tmp.path().join("cfg.json"), cfg.to_string()).map_err(|e| e.to_string())?;
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_hypolab"))
            .args(args)
            .current_dir(tmp.path())
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    if !run(&["levi", "--config", "cfg.json", "--out", "first"]) {
        return Err("initial run failed".into());
    }
    let a_ok = run(&["run", "--config", "first/provenance.json", "--out", "a", "--threads", "1"]);
    let b_ok = run(&["run", "--config", "first/provenance.json", "--out", "b"]);
    if !(a_ok && b_ok) {
        return Err("provenance re-run failed".into());
    }
    let (a, b, first) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")), files(&tmp.path().join("first")));
    ensure(
        a == b && a == first,
        format!("{} files byte-identical across two provenance runs and the original", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("classification catalog", criterion_1),
        ("lineality exactness", criterion_2),
        ("fundamental-solution oracle", criterion_3),
        ("Levi oracle equivalence", criterion_4),
        ("decay-estimate reproduction", criterion_5),
        ("Weyl fit", criterion_6),
        ("Green cross-pipeline", criterion_7),
        ("Tauberian consequence", criterion_8),
        ("norm-framework invariants", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
