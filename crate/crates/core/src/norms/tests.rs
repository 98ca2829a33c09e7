use super::*;
use alloc::vec;
use proptest::prelude::*;

fn block_example() -> NormSpec {
    NormSpec::block(2.0, vec![1, 1], vec![1.0, 2.0], vec![1.0, 4.0]).unwrap()
}

fn split3() -> NormSpec {
    NormSpec::split(3.0, NormSpec::qnorm(3.0, 1).unwrap(), NormSpec::qnorm(3.0, 1).unwrap()).unwrap()
}

fn central_difference(f: impl Fn(&[f64]) -> f64, z: &[f64], step: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut a = z.to_vec();
            let mut b = z.to_vec();
            a[i] += step;
            b[i] -= step;
            (f(&a) - f(&b)) / (2.0 * step)
        })
        .collect()
}

// Independent of the implementation: brute-force sup of ⟨ξ,x⟩/H(x) over directions.
fn brute_force_dual(h: &NormSpec, xi: &[f64]) -> f64 {
    let n = 100_000;
    (0..n)
        .map(|k| {
            let a = core::f64::consts::TAU * k as f64 / n as f64;
            let x = [a.cos(), a.sin()];
            (xi[0] * x[0] + xi[1] * x[1]) / h.eval(&x).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn eval_examples() {
    assert_eq!(NormSpec::qnorm(2.0, 2).unwrap().eval(&[3.0, 4.0]).unwrap(), 5.0);
    assert_eq!(NormSpec::qnorm(1.0, 3).unwrap().eval(&[1.0, -1.0, 1.0]).unwrap(), 3.0);
    let a = NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap();
    assert!((a.eval(&[1.0, 1.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    assert!((block_example().eval(&[1.0, 2.0]).unwrap() - 17f64.sqrt()).abs() < 1e-14);
}

#[test]
fn eval_rejects_wrong_dimension() {
    let h = NormSpec::qnorm(2.0, 3).unwrap();
    assert_eq!(h.eval(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 3, found: 2 }));
}

#[test]
fn constructors_validate() {
    assert!(NormSpec::qnorm(0.5, 2).is_err());
    assert!(NormSpec::qnorm(f64::INFINITY, 2).is_err());
    assert!(NormSpec::matrix_qnorm(2.0, vec![1.0, 2.0, 2.0, 4.0], 2).is_err());
    assert!(NormSpec::block(2.0, vec![1, 1], vec![1.0], vec![1.0, 1.0]).is_err());
    assert!(NormSpec::block(2.0, vec![1, 1], vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
    assert!(NormSpec::scaled_euclidean(-1.0, 2).is_err());
}

#[test]
fn zero_maps_to_zero_in_both_modes() {
    for h in [NormSpec::qnorm(1.5, 3).unwrap(), block_example(), split3(), NormSpec::euclidean(2)] {
        let n = h.dimension();
        assert_eq!(h.eval(&vec![0.0; n]).unwrap(), 0.0);
        let s = h.with_smoothing(1e-2, 3.0).unwrap();
        assert_eq!(s.eval(&vec![0.0; n]).unwrap(), 0.0);
    }
}

#[test]
fn grad_examples() {
    let g = NormSpec::euclidean(2).grad(&[3.0, 4.0]).unwrap();
    assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);

    let h4 = NormSpec::qnorm(4.0, 2).unwrap();
    let fd = central_difference(|z| h4.eval(z).unwrap(), &[1.0, 1.0], 1e-6);
    let g = h4.grad(&[1.0, 1.0]).unwrap();
    let expect = 2f64.powf(-0.75);
    for i in 0..2 {
        assert!((fd[i] - expect).abs() < 1e-8, "oracle disagrees with closed form");
        assert!((g[i] - fd[i]).abs() < 1e-8);
    }
}

#[test]
fn grad_singular_points() {
    assert_eq!(NormSpec::euclidean(2).grad(&[0.0, 0.0]), Err(Error::SingularPoint));
    let h1 = NormSpec::qnorm(1.0, 2).unwrap();
    assert_eq!(h1.grad(&[0.0, 1.0]), Err(Error::SingularPoint));
    assert!(h1.grad(&[0.5, -1.0]).is_ok());
    // Smoothed mode is differentiable everywhere.
    let s = h1.with_smoothing(1e-3, 1.0).unwrap();
    assert_eq!(s.grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert!(s.grad(&[0.0, 1.0]).is_ok());
    // q > 1 is differentiable on the axes.
    assert!(NormSpec::qnorm(1.5, 2).unwrap().grad(&[0.0, 1.0]).is_ok());
    // Split with q > 1 is differentiable where one part vanishes.
    let g = split3().grad(&[0.0, 2.0]).unwrap();
    assert_eq!(g, vec![0.0, 1.0]);
}

#[test]
fn dual_examples() {
    assert!((NormSpec::euclidean(2).dual_eval(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);

    let h1 = NormSpec::qnorm(1.0, 2).unwrap();
    let oracle = brute_force_dual(&h1, &[2.0, -3.0]);
    assert!((oracle - 3.0).abs() < 1e-6);
    assert_eq!(h1.dual_eval(&[2.0, -3.0]).unwrap(), 3.0);

    let a = NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap();
    let oracle = brute_force_dual(&a, &[2.0, 1.0]);
    assert!((oracle - 2f64.sqrt()).abs() < 1e-6);
    assert!((a.dual_eval(&[2.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
}

#[test]
fn closed_form_duals_match_brute_force() {
    let families = [
        block_example(),
        split3(),
        NormSpec::qnorm(3.0, 2).unwrap(),
        NormSpec::matrix_qnorm(3.0, vec![1.0, 0.5, -0.3, 2.0], 2).unwrap(),
        NormSpec::scaled_euclidean(2.5, 2).unwrap(),
    ];
    for h in &families {
        for xi in [[1.0, 0.0], [0.3, -2.0], [-1.5, 0.7]] {
            let oracle = brute_force_dual(h, &xi);
            let closed = h.dual_eval(&xi).unwrap();
            assert!((closed - oracle).abs() < 1e-6 * closed, "{:?}: {closed} vs {oracle}", h.family());
        }
    }
}

#[test]
fn sampled_dual_matches_closed_forms() {
    for h in [block_example(), split3(), NormSpec::qnorm(1.5, 3).unwrap()] {
        let xi: Vec<f64> = (0..h.dimension()).map(|i| 0.7 - 0.9 * i as f64).collect();
        let closed = h.dual_eval(&xi).unwrap();
        let sampled = h.dual_eval_sampled(&xi).unwrap();
        assert!((closed - sampled).abs() < 1e-9 * closed, "{closed} vs {sampled}");
    }
}

#[test]
fn restricted_norm_uses_sampled_dual() {
    let a = NormSpec::matrix_qnorm(2.0, vec![2.0, 1.0, 0.0, 1.0], 2).unwrap();
    let c = a.cross_section(1).unwrap();
    // H(0, z) = |z|·|(1, 1)| = √2|z|, so H₀(ξ) = |ξ|/√2.
    assert!((c.eval(&[3.0]).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-14);
    assert!((c.dual_eval(&[1.0]).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn duality_round_trip() {
    let families = [
        NormSpec::qnorm(3.0, 3).unwrap(),
        NormSpec::qnorm(1.5, 2).unwrap(),
        NormSpec::matrix_qnorm(2.0, vec![2.0, 1.0, 0.0, 1.0], 2).unwrap(),
        NormSpec::matrix_qnorm(4.0, vec![1.0, 0.3, -0.2, 1.5], 2).unwrap(),
    ];
    for h in &families {
        let dd = h.dual_spec().unwrap().dual_spec().unwrap();
        for k in 0..20 {
            let x: Vec<f64> = (0..h.dimension()).map(|i| ((k * 7 + i * 3) as f64).sin()).collect();
            let a = h.eval(&x).unwrap();
            let b = dd.eval(&x).unwrap();
            assert!((a - b).abs() <= 1e-8 * a);
        }
    }
}

#[test]
fn flux_examples() {
    assert_eq!(NormSpec::euclidean(2).flux(2.0, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    for h in [NormSpec::qnorm(1.0, 2).unwrap(), block_example(), split3()] {
        for p in [1.5, 2.0, 3.0] {
            assert_eq!(h.flux(p, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
    }
    // Pseudo p-Laplacian: H_p^{p−1}∂ᵢH_p = |zᵢ|^{p−2}zᵢ.
    let h3 = NormSpec::qnorm(3.0, 2).unwrap();
    let a = h3.flux(3.0, &[1.0, -2.0]).unwrap();
    let fd = central_difference(|z| h3.eval(z).unwrap().powi(3) / 3.0, &[1.0, -2.0], 1e-6);
    for i in 0..2 {
        assert!((fd[i] - [1.0, -4.0][i]).abs() < 1e-7);
        assert!((a[i] - [1.0, -4.0][i]).abs() < 1e-13);
    }
    assert!(h3.flux(1.0, &[1.0, 1.0]).is_err());
}

#[test]
fn theta_examples() {
    let t = NormSpec::euclidean(3).theta_bounds(6).unwrap();
    assert_eq!((t.theta1, t.theta2), (1.0, 1.0));
    let t = NormSpec::qnorm(1.0, 2).unwrap().theta_bounds(100).unwrap();
    // Dense sampling oracle for |x₁|+|x₂| on the unit circle.
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..100_000 {
        let a = core::f64::consts::TAU * k as f64 / 100_000.0;
        let v = a.cos().abs() + a.sin().abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    assert!((t.theta1 - lo).abs() < 1e-9 && (t.theta2 - hi).abs() < 1e-9);
    assert!((t.theta2 - 2f64.sqrt()).abs() < 1e-15);
    let t = NormSpec::scaled_euclidean(3.0, 2).unwrap().theta_bounds(4).unwrap();
    assert_eq!((t.theta1, t.theta2), (3.0, 3.0));
    assert!(NormSpec::euclidean(3).theta_bounds(5).is_err());
}

#[test]
fn sampled_theta_for_matrix_norm() {
    // Singular values of diag(2, 1).
    let a = NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap();
    let t = a.theta_bounds(2000).unwrap();
    assert!((t.theta1 - 1.0).abs() < 1e-12 && (t.theta2 - 2.0).abs() < 1e-12);
    assert!(t.grad_bound_c >= t.theta2);
    let t = block_example().theta_bounds(2000).unwrap();
    assert!(t.theta1 > 0.0 && t.theta1 <= t.theta2 && t.theta2 <= t.grad_bound_c);
}

#[test]
fn axioms_hold_for_acceptance_families() {
    let families = [
        (NormSpec::euclidean(2), 1e-10),
        (NormSpec::qnorm(4.0, 2).unwrap(), 1e-8),
        (NormSpec::qnorm(3.0, 3).unwrap(), 1e-8),
        (NormSpec::qnorm(1.5, 2).unwrap(), 1e-8),
        (NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap(), 1e-8),
        (block_example(), 1e-8),
        (split3(), 1e-8),
    ];
    for (h, tol) in &families {
        let r = h.check_axioms(1000, 7).unwrap();
        assert!(r.max_violation() <= *tol, "{:?}\n{r}", h.family());
    }
    assert!(NormSpec::euclidean(2).with_smoothing(0.1, 1.0).unwrap().check_axioms(10, 0).is_err());
}

#[test]
fn q1_axioms_skip_nothing_off_the_axes() {
    let r = NormSpec::qnorm(1.0, 2).unwrap().check_axioms(200, 3).unwrap();
    assert_eq!(r.skipped, 0);
    assert!(r.max_violation() <= 1e-12);
}

#[test]
fn monotonicity_examples() {
    let h2 = NormSpec::euclidean(2);
    let r = h2.estimate_monotonicity(2.0, Assumption::A1PGe2, 500, 1).unwrap();
    assert!((r.empirical_constant - 1.0).abs() < 1e-9);
    let r = h2.estimate_monotonicity(3.0, Assumption::A1PGe2, 500, 1).unwrap();
    assert!(r.empirical_constant > 0.0);
    // For the 3-Laplacian the sharp constant is 1/4 (attained at z₂ = −z₁).
    assert!(r.empirical_constant >= 0.25 - 1e-12);
    let r = h2.estimate_monotonicity(1.5, Assumption::A2, 500, 1).unwrap();
    assert!(r.empirical_constant.is_finite() && r.empirical_constant > 0.0);
    let again = h2.estimate_monotonicity(1.5, Assumption::A2, 500, 1).unwrap();
    assert_eq!(r, again);

    assert!(h2.estimate_monotonicity(1.5, Assumption::A1PGe2, 10, 1).is_err());
    assert!(h2.estimate_monotonicity(2.5, Assumption::A2, 10, 1).is_err());
    assert!(h2.estimate_monotonicity(3.0, Assumption::A3, 10, 1).is_err());
    let r = split3().estimate_monotonicity(3.0, Assumption::A3, 500, 2).unwrap();
    assert!(r.empirical_constant > 0.0);
}

#[test]
fn descriptor_grammar() {
    let d: NormDescriptor = "split(3; qnorm(3); qnorm(3))".parse().unwrap();
    assert!(d.is_split());
    let h = d.build(1, 2).unwrap();
    assert_eq!(h, split3());
    let d: NormDescriptor = "matq(2; 2,0; 0,1)".parse().unwrap();
    assert_eq!(d.build(1, 2).unwrap(), NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap());
    let d: NormDescriptor = "block(2; 1,1; 1,2; 1,4)".parse().unwrap();
    assert_eq!(d.build(1, 2).unwrap(), block_example());
    let d: NormDescriptor = " eucl( 3 ) ".parse().unwrap();
    assert_eq!(d, NormDescriptor::Eucl(3.0));

    for bad in ["qnorm", "qnorm(2", "foo(2)", "qnorm(x)", "split(2; qnorm(2))", "block(2; 1,a; 1,2; 1,1)"] {
        assert!(bad.parse::<NormDescriptor>().is_err(), "{bad}");
    }
    assert!("matq(2; 1,0)".parse::<NormDescriptor>().unwrap().build(1, 2).is_err());
}

#[test]
fn cross_section_of_split_is_g() {
    let h = NormSpec::split(2.0, NormSpec::qnorm(3.0, 1).unwrap(), NormSpec::qnorm(4.0, 2).unwrap()).unwrap();
    assert_eq!(h.cross_section(1).unwrap(), NormSpec::qnorm(4.0, 2).unwrap());
    assert_eq!(NormSpec::qnorm(3.0, 3).unwrap().cross_section(1).unwrap(), NormSpec::qnorm(3.0, 2).unwrap());
    assert!(NormSpec::euclidean(2).cross_section(2).is_err());
}

fn family_strategy() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        (1.2f64..6.0).prop_map(|q| NormSpec::qnorm(q, 3).unwrap()),
        (1.2f64..4.0, -1.0f64..1.0).prop_map(|(q, a)| NormSpec::matrix_qnorm(q, vec![2.0, a, 0.0, 1.0 + a * a], 2).unwrap()),
        (1.2f64..4.0, 1.2f64..4.0, 0.5f64..3.0)
            .prop_map(|(q, p, w)| NormSpec::block(q, vec![1, 2], vec![p, 2.0], vec![w, 1.0]).unwrap()),
        (1.2f64..4.0).prop_map(|q| NormSpec::split(q, NormSpec::qnorm(2.0, 1).unwrap(), NormSpec::qnorm(3.0, 2).unwrap()).unwrap()),
        (0.5f64..3.0).prop_map(|t| NormSpec::scaled_euclidean(t, 2).unwrap()),
    ]
}

proptest! {
    #[test]
    fn homogeneity_and_euler(h in family_strategy(), seed in prop::array::uniform3(-2.0f64..2.0)) {
        let z = &seed[..h.dimension()];
        let hz = h.eval(z).unwrap();
        prop_assume!(hz > 1e-6);
        for t in [-2.0, -1.0, 0.5, 3.0] {
            let tz: Vec<f64> = z.iter().map(|v| t * v).collect();
            prop_assert!((h.eval(&tz).unwrap() - t.abs() * hz).abs() <= 1e-10 * hz);
        }
        if let Ok(g) = h.grad(z) {
            let e: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
            prop_assert!((e - hz).abs() <= 1e-9 * hz);
            prop_assert!((h.dual_eval(&g).unwrap() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(h in family_strategy(), dir in prop::array::uniform3(-1.0f64..1.0), r in 0.5f64..2.0) {
        let n = h.dimension();
        let len: f64 = dir[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(len > 0.1);
        let z: Vec<f64> = dir[..n].iter().map(|v| v * r / len).collect();
        // Keep away from the coordinate planes where q < 2 curvature blows up.
        prop_assume!(z.iter().all(|v| v.abs() > 1e-2));
        let fd = central_difference(|x| h.eval(x).unwrap(), &z, 1e-6);
        let g = h.grad(&z).unwrap();
        for i in 0..n {
            prop_assert!((g[i] - fd[i]).abs() <= 1e-6, "{} vs {}", g[i], fd[i]);
        }
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences(h in family_strategy(), z in prop::array::uniform3(-1.0f64..1.0)) {
        let s = h.with_smoothing(0.05, 1.0).unwrap();
        let z = &z[..h.dimension()];
        let fd = central_difference(|x| s.eval(x).unwrap(), z, 1e-6);
        let g = s.grad(z).unwrap();
        for i in 0..z.len() {
            prop_assert!((g[i] - fd[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn flux_is_monotone_for_p_ge_2(h in family_strategy(), p in 2.0f64..4.0,
                                   a in prop::array::uniform3(-3.0f64..3.0), b in prop::array::uniform3(-3.0f64..3.0)) {
        let n = h.dimension();
        let (a, b) = (&a[..n], &b[..n]);
        let fa = h.flux(p, a).unwrap();
        let fb = h.flux(p, b).unwrap();
        let m: f64 = (0..n).map(|i| (fa[i] - fb[i]) * (a[i] - b[i])).sum();
        prop_assert!(m >= -1e-12);
    }

    #[test]
    fn descriptor_print_parse_round_trip(q in 1.0f64..5.0, t in 0.1f64..9.0, a in -3.0f64..3.0) {
        for text in [
            alloc::format!("qnorm({q})"),
            alloc::format!("eucl({t})"),
            alloc::format!("matq({q}; {t},{a}; 0,1)"),
            alloc::format!("block({q}; 1,2; {t},2; 1,{t})"),
            alloc::format!("split({q}; qnorm({t}); eucl({q}))"),
        ] {
            let d: NormDescriptor = text.parse().unwrap();
            let again: NormDescriptor = alloc::format!("{d}").parse().unwrap();
            prop_assert_eq!(d, again);
        }
    }
}
