use super::*;
use crate::symbol::{parse, parse_with, ParseContext};
use proptest::prelude::*;

fn p(s: &str) -> SymbolPoly {
    parse(s).unwrap()
}

fn split(s: &str, n: usize, m: usize) -> SymbolPoly {
    parse_with(s, ParseContext::with_split(VariableSplit::new(n, m).unwrap())).unwrap()
}

fn opts() -> ClassifyOptions {
    ClassifyOptions::default()
}

#[test]
fn strength_examples() {
    let o = opts();
    assert_eq!(compare_strength(&p("xi1"), &p("xi1^2"), &o).unwrap().order, StrengthOrder::StrictlyWeaker);
    assert_eq!(compare_strength(&p("xi1^2 + 1"), &p("xi1^2"), &o).unwrap().order, StrengthOrder::Equivalent);
    assert_eq!(
        compare_strength(&p("xi1^2 + i*xi2"), &p("xi1^2 + xi2^2"), &o).unwrap().order,
        StrengthOrder::Weaker
    );
    assert_eq!(compare_strength(&p("xi1^3"), &p("xi1^2"), &o).unwrap().order, StrengthOrder::NotWeaker);
    assert!(matches!(
        compare_strength(&p("xi1"), &SymbolPoly::zero(1), &o),
        Err(Error::ZeroPolynomial(_))
    ));
}

#[test]
fn weaker_example_by_rays() {
    // independent look at the two rays named in the example
    let q = p("xi1^2 + i*xi2");
    let pp = p("xi1^2 + xi2^2");
    for r in [1e3, 1e5] {
        let along_xi = q.tilde_strength(&[r, 0.0]) / pp.tilde_strength(&[r, 0.0]);
        let along_eta = q.tilde_strength(&[0.0, r]) / pp.tilde_strength(&[0.0, r]);
        assert!((along_xi - 1.0).abs() < 1e-2);
        assert!(along_eta < 2.0 / r);
    }
}

#[test]
fn hypoelliptic_examples() {
    let o = opts();
    assert_eq!(is_hypoelliptic(&p("xi1^2 + xi2^2"), &o).verdict, Verdict::Yes);
    let wave = is_hypoelliptic(&p("xi1^2 - xi2^2"), &o);
    assert_eq!(wave.verdict, Verdict::No);
    assert_eq!(wave.witness, Some(Witness::ZeroRay { direction: vec![1, 1] }));
    let heat = is_hypoelliptic(&p("xi1^2 + i*xi2"), &o);
    assert_eq!(heat.verdict, Verdict::Yes);
    // brute-force ratio check on expanding spheres, independent of the optimizer
    let heat_p = p("xi1^2 + i*xi2");
    let mut last = f64::INFINITY;
    for k in [4, 8, 12, 16] {
        let r = 2f64.powi(k);
        let mut worst: f64 = 0.0;
        for i in 0..20000 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 20000.0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let den = heat_p.eval_real(&[x, y]).norm();
            worst = worst.max(2.0 * x.abs() / den).max(2.0 / den).max(1.0 / den);
        }
        assert!(worst < last);
        last = worst;
    }
    assert!(last < 0.01);
}

#[test]
fn degenerate_and_lineality_cases() {
    let o = opts();
    let c = is_hypoelliptic(&p("3"), &o);
    assert_eq!((c.verdict, c.witness), (Verdict::No, Some(Witness::Constant)));
    let lin = is_hypoelliptic(&parse_with("xi1^2 + 1", ParseContext::with_dimension(2)).unwrap(), &o);
    assert_eq!(lin.verdict, Verdict::No);
    assert!(matches!(lin.witness, Some(Witness::Lineality { .. })));
    let surf = is_hypoelliptic(&p("xi1^2 + xi2"), &o);
    assert_eq!(surf.verdict, Verdict::No);
    match surf.witness {
        Some(Witness::RealZeros { points }) => {
            for q in points {
                assert!((q[0] * q[0] + q[1]).abs() <= 1e-6 * q[0] * q[0]);
            }
        }
        other => panic!("expected real zeros, got {other:?}"),
    }
    assert_eq!(is_hypoelliptic(&p("xi1^4 + xi2^2"), &o).verdict, Verdict::Yes);
    // bounded but non-vanishing derivative ratio
    let mixed = is_hypoelliptic(&p("xi1^2*xi2^2 + xi1^2 + xi2^2 + 1"), &o);
    assert_eq!(mixed.verdict, Verdict::No);
}

#[test]
fn partial_examples() {
    let o = opts();
    let r = is_partially_hypoelliptic(&split("xi1^2 + xi1*eta1", 1, 1), &o).unwrap();
    assert_eq!(r.verdict, Verdict::Yes);
    assert_eq!(r.decomposition.len(), 2);
    assert_eq!(r.decomposition[0].symbol, "xi1^2");
    assert_eq!(r.decomposition[1].symbol, "xi1");
    assert_eq!(
        is_partially_hypoelliptic(&split("xi1^2 + eta1^2", 1, 1), &o).unwrap().verdict,
        Verdict::Yes
    );
    let bad = is_partially_hypoelliptic(&split("xi1*eta1", 1, 1), &o).unwrap();
    assert_eq!((bad.verdict, bad.witness), (Verdict::No, Some(Witness::ZeroP0)));
    assert!(matches!(
        is_partially_hypoelliptic(&split("eta1^2 + 1", 1, 1), &o),
        Err(Error::InvalidSplit(_))
    ));
    assert!(is_partially_hypoelliptic(&p("xi1^2"), &o).is_err());
}

#[test]
fn partial_without_bad_variables_matches_hypoelliptic() {
    let o = opts();
    for s in ["xi1^2 + xi2^2", "xi1^2 - xi2^2", "xi1^2 + i*xi2"] {
        let sym = split(s, 2, 0);
        assert_eq!(
            is_partially_hypoelliptic(&sym, &o).unwrap().verdict,
            is_hypoelliptic(&sym, &o).verdict,
            "{s}"
        );
    }
}

#[test]
fn exponent_examples() {
    let o = opts();
    let e = estimate_exponents(&p("xi1^2"), &o).unwrap();
    assert!((e.rho - 2.0).abs() < 1e-6 && (e.sigma - 2.0).abs() < 1e-6);
    assert!((e.b - 0.5).abs() < 1e-3, "b = {}", e.b);
    assert!((e.c - 1.0).abs() < 1e-3, "c = {}", e.c);
    let e = estimate_exponents(&p("xi1^4"), &o).unwrap();
    assert!((e.rho - 4.0).abs() < 1e-6);
    assert!((e.b - 0.25).abs() < 1e-3, "b = {}", e.b);
    let e = estimate_exponents(&p("xi1^4 + xi2^2"), &o).unwrap();
    assert!((e.rho - 2.0).abs() < 1e-2, "rho = {}", e.rho);
    assert!((e.b - 0.25).abs() < 2e-2, "b = {}", e.b);
    assert!(e.rho <= 4.0);
    assert!(matches!(estimate_exponents(&p("7"), &o), Err(Error::DegenerateFit(_))));
}

#[test]
fn lineality_examples() {
    let two = |s: &str| parse_with(s, ParseContext::with_dimension(2)).unwrap();
    let l = lineality(&two("xi1^2"), false);
    assert_eq!(l.basis, vec![vec![0.0, 1.0]]);
    assert!(!l.is_reduced);
    assert!(lineality(&p("xi1^2 + xi2^2"), false).is_reduced);
    let l = lineality(&p("(xi1 + xi2)^2"), true);
    assert_eq!(l.basis.len(), 1);
    assert!((l.basis[0][0] + l.basis[0][1]).abs() < 1e-15);
    for sym in [two("xi1^2"), p("(xi1 + xi2)^2 + 3*(xi1 + xi2)"), p("xi1*xi3 + xi3^2")] {
        let l = lineality(&sym, false);
        assert!(!l.is_reduced);
        for v in &l.exact_basis {
            let eta: Vec<Coeff> = v.iter().map(|x| Coeff::real(x.clone())).collect();
            let moved = sym.translate_symbolic(&eta).unwrap();
            let positions: Vec<usize> = (0..sym.dimension()).collect();
            let still = sym.embed(sym.dimension() + 1, &positions).unwrap();
            assert!((&moved - &still).is_zero());
        }
    }
}

#[test]
fn iteration_index_examples() {
    let o = opts();
    assert_eq!(hypoelliptic_iteration_index(&split("xi1^2 + xi1*eta1", 1, 1), 4, &o).unwrap(), None);
    assert_eq!(hypoelliptic_iteration_index(&p("xi1^2 + xi2^2"), 4, &o).unwrap(), Some(1));
    let flat = parse_with("xi1^2", ParseContext::with_dimension(2)).unwrap();
    assert_eq!(hypoelliptic_iteration_index(&flat, 3, &o).unwrap(), None);
}

#[test]
fn sign_examples() {
    let o = opts();
    let heat = split("xi1^2 + i*eta1", 1, 1);
    assert_eq!(re_sign_at_infinity(&[heat], &o).unwrap().sign, 1);
    assert_eq!(re_sign_at_infinity(&[p("-xi1^2")], &o).unwrap().sign, -1);
    let r = re_sign_at_infinity(&[p("xi1^2"), p("-xi1^2")], &o).unwrap();
    assert_eq!((r.sign, r.conflict), (0, Some((0, 1))));
}

#[test]
fn self_comparison_is_equivalent() {
    let o = opts();
    for s in ["xi1^2 + xi2^2", "xi1^2 + i*xi2", "xi1^4 + xi2^2", "xi1 + 2", "xi1^2 - xi2^2"] {
        assert_eq!(compare_strength(&p(s), &p(s), &o).unwrap().order, StrengthOrder::Equivalent, "{s}");
    }
}

#[test]
fn derivatives_of_hypoelliptic_symbols_are_strictly_weaker() {
    let o = opts();
    for s in ["xi1^2 + xi2^2", "xi1^2 + i*xi2", "xi1^4 + xi2^2"] {
        let sym = p(s);
        assert_eq!(is_hypoelliptic(&sym, &o).verdict, Verdict::Yes);
        for (alpha, d) in sym.derivative_table().entries() {
            if !alpha.is_zero() {
                let order = compare_strength(d, &sym, &o).unwrap().order;
                assert_eq!(order, StrengthOrder::StrictlyWeaker, "{s} alpha {alpha}");
            }
        }
    }
}

#[test]
fn slow_oscillation() {
    let sym = p("xi1^2 + i*xi2");
    let design = SphereDesign::new(2);
    let shifts = [[1.0, 0.0], [0.0, -2.0], [1.5, 1.5]];
    let mut prev = f64::INFINITY;
    for k in [4, 8, 12, 16] {
        let r = 2f64.powi(k);
        let mut worst: f64 = 0.0;
        for d in &design.points {
            let x = [r * d[0], r * d[1]];
            let base = sym.eval_real(&x);
            for h in &shifts {
                let moved = sym.eval_real(&[x[0] + h[0], x[1] + h[1]]);
                worst = worst.max((moved / base - 1.0).norm());
            }
        }
        assert!(worst < prev);
        prev = worst;
    }
    assert!(prev < 1e-3);
}

#[test]
fn classify_report_serializes() {
    let r = classify(&split("xi1^2 + xi1*eta1", 1, 1), &opts()).unwrap();
    assert_eq!(r.hypoelliptic.verdict, Verdict::No);
    assert_eq!(r.partially_hypoelliptic.as_ref().unwrap().verdict, Verdict::Yes);
    assert_eq!(r.iteration_index, None);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"radius\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn verdicts_invariant_under_scaling(re in -5i64..6, im in -5i64..6, which in 0usize..4) {
        prop_assume!(re != 0 || im != 0);
        let catalog = ["xi1^2 + xi2^2", "xi1^2 - xi2^2", "xi1^2 + i*xi2", "xi1^2 + xi2"];
        let base = p(catalog[which]);
        let c = Coeff::new(
            num_rational::BigRational::from_integer(re.into()),
            num_rational::BigRational::from_integer(im.into()),
        );
        let o = opts();
        prop_assert_eq!(is_hypoelliptic(&base.scale(&c), &o).verdict, is_hypoelliptic(&base, &o).verdict);
    }
}
