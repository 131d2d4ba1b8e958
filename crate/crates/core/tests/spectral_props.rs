use fracwave_core::spectral::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn interval(a: Coefficient, c: Coefficient) -> OperatorSpec {
    OperatorSpec::Interval(Operator1d::new(1.0, a, c))
}

#[test]
fn constant_coefficients_give_sine_spectrum() {
    let op = OperatorSpec::Interval(Operator1d::new(
        2.0,
        Coefficient::Constant(1.5),
        Coefficient::Constant(0.3),
    ));
    let b = eigenpairs(&op, 20, 512).unwrap();
    for (n, l) in b.lambdas().iter().enumerate() {
        let exact = 1.5 * ((n + 1) as f64 * PI / 2.0).powi(2) + 0.3;
        assert!((l - exact).abs() <= 1e-8 * exact, "n={n}: {l} vs {exact}");
    }
}

#[test]
fn euler_cauchy_operator_matches_closed_form() {
    // −((1+x)² u′)′ = λu: u = (1+x)^{−1/2} sin(nπ ln(1+x)/ln 2), λ = 1/4 + (nπ/ln 2)²
    let op = interval(
        Coefficient::function(|x| (1.0 + x) * (1.0 + x)),
        Coefficient::Constant(0.0),
    );
    let b = eigenpairs(&op, 8, 1024).unwrap();
    let SpatialGrid::Line { x } = b.grid() else {
        panic!()
    };
    for n in 0..8 {
        let k = (n + 1) as f64 * PI / 2f64.ln();
        let exact = 0.25 + k * k;
        assert!((b.lambdas()[n] - exact).abs() <= 1e-8 * exact, "n={n}");
        let raw: Vec<f64> = x
            .iter()
            .map(|&s| (1.0 + s).powf(-0.5) * (k * (1.0 + s).ln()).sin())
            .collect();
        let norm = b.inner(&raw, &raw).sqrt();
        let dot = b.inner(&raw, b.mode(n)) / norm;
        assert!((dot.abs() - 1.0).abs() < 1e-8, "n={n}: {dot}");
    }
}

#[test]
fn modes_are_orthonormal_and_vanish_on_boundary() {
    let op = interval(
        Coefficient::function(|x| 1.0 + 0.5 * x),
        Coefficient::function(|x| x * x),
    );
    let b = eigenpairs(&op, 10, 256).unwrap();
    for i in 0..10 {
        let m = b.mode(i);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[m.len() - 1], 0.0);
        for j in 0..10 {
            let ip = b.inner(m, b.mode(j));
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).abs() < 1e-10, "({i},{j}) {ip}");
        }
    }
}

#[test]
fn stiffness_matrix_is_symmetric() {
    let op = Operator1d::new(
        1.0,
        Coefficient::function(|x| 2.0 + (3.0 * x).sin()),
        Coefficient::function(|x| x),
    );
    let s = stiffness_matrix(&op, 40);
    let scale = s.amax();
    for i in 0..40 {
        for j in 0..40 {
            assert!((s[(i, j)] - s[(j, i)]).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn rectangle_spectrum_is_a_tensor_sum() {
    let ox = Operator1d::new(
        1.0,
        Coefficient::function(|x| 1.0 + x),
        Coefficient::Constant(0.0),
    );
    let oy = Operator1d::new(2.0, Coefficient::Constant(1.0), Coefficient::Constant(1.0));
    let bx = eigenpairs(&OperatorSpec::Interval(ox.clone()), 6, 128).unwrap();
    let by = eigenpairs(&OperatorSpec::Interval(oy.clone()), 6, 128).unwrap();
    let b2 = eigenpairs(&OperatorSpec::Rectangle(ox, oy), 10, 128).unwrap();
    let mut sums: Vec<(f64, usize, usize)> = Vec::new();
    for p in 0..6 {
        for q in 0..6 {
            sums.push((bx.lambdas()[p] + by.lambdas()[q], p, q));
        }
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ny = by.n_points();
    for k in 0..10 {
        let (l, p, q) = sums[k];
        assert!((b2.lambdas()[k] - l).abs() < 1e-10 * l);
        let m = b2.mode(k);
        for i in (0..bx.n_points()).step_by(7) {
            for j in (0..ny).step_by(5) {
                let prod = bx.mode(p)[i] * by.mode(q)[j];
                assert!((m[i * ny + j] - prod).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn parseval_and_bessel_for_parabola() {
    let op = OperatorSpec::Interval(Operator1d::laplacian(1.0));
    let b = eigenpairs(&op, 64, 1024).unwrap();
    let h = b.grid().sample(|x, _| x * (1.0 - x));
    let r = bessel_diagnostic(&h, &b, &op).unwrap();
    assert!(r.parseval_gap <= 1e-6);
    assert!(r.bessel_lhs <= r.bessel_rhs * (1.0 + 1e-6));
    // ∫ h′² = 1/3
    assert!((r.bessel_rhs - 1.0 / 3.0).abs() < 1e-6);
    let c = project(&h, &b).unwrap();
    for (k, v) in c.values.iter().enumerate() {
        let n = (k + 1) as f64;
        let exact = 2.0 * 2f64.sqrt() * (1.0 - (-1f64).powi(k as i32 + 1)) / (n * PI).powi(3);
        assert!((v - exact).abs() < 1e-9, "n={n}: {v} vs {exact}");
    }
}

#[test]
fn rejects_bad_operators() {
    let bad_a = interval(
        Coefficient::function(|x| x - 0.5),
        Coefficient::Constant(0.0),
    );
    assert!(eigenpairs(&bad_a, 4, 128).is_err());
    let bad_c = interval(Coefficient::Constant(1.0), Coefficient::Constant(-1.0));
    assert!(eigenpairs(&bad_c, 4, 128).is_err());
    let op = interval(Coefficient::Constant(1.0), Coefficient::Constant(0.0));
    assert!(eigenpairs(&op, 40, 128).is_err());
    assert!(eigenpairs(&op, 4, 32).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn raising_c_never_lowers_eigenvalues(
        a1 in 0.5f64..2.0, a2 in -0.4f64..0.4,
        c1 in 0.0f64..5.0, bump in 0.0f64..10.0, centre in 0.1f64..0.9,
    ) {
        let a = Coefficient::function(move |x| a1 + a2 * (PI * x).sin() * a1);
        let low = interval(a.clone(), Coefficient::function(move |x| c1 * x));
        let high = interval(a, Coefficient::function(move |x| c1 * x + bump * (-(x - centre).powi(2) * 50.0).exp()));
        let bl = eigenpairs(&low, 8, 128).unwrap();
        let bh = eigenpairs(&high, 8, 128).unwrap();
        for n in 0..8 {
            prop_assert!(bh.lambdas()[n] >= bl.lambdas()[n] - 1e-10 * bl.lambdas()[n]);
        }
    }

    #[test]
    fn eigenvalues_positive_and_increasing(a0 in 0.3f64..3.0, slope in 0.0f64..2.0, c0 in 0.0f64..4.0) {
        let op = interval(Coefficient::function(move |x| a0 + slope * x), Coefficient::Constant(c0));
        let b = eigenpairs(&op, 12, 128).unwrap();
        prop_assert!(b.lambdas()[0] > 0.0);
        for w in b.lambdas().windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn project_then_synthesize_is_identity_on_the_span(coeffs in prop::collection::vec(-1.0f64..1.0, 6)) {
        let op = interval(Coefficient::function(|x| 1.0 + x * x), Coefficient::Constant(0.5));
        let b = eigenpairs(&op, 6, 128).unwrap();
        let f = synthesize(&ModalCoeffs { values: coeffs.clone() }, &b).unwrap();
        let back = project(&f, &b).unwrap();
        for (x, y) in back.values.iter().zip(&coeffs) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
