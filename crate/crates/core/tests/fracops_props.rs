use fracwave_core::fracops::*;
use proptest::prelude::*;

fn tg(x: f64) -> f64 {
    libm::tgamma(x)
}

fn sup_err(a: &TimeSeries, exact: impl Fn(f64) -> f64) -> f64 {
    let g = a.grid();
    (0..g.len())
        .map(|i| (a.values()[i] - exact(g.node(i))).abs())
        .fold(0.0, f64::max)
}

fn affine(m: usize, a: f64, b: f64) -> TimeSeries {
    TimeSeries::from_fn(TimeGrid::new(1.3, m).unwrap(), move |t| a + b * t)
}

#[test]
fn affine_inputs_are_exact() {
    let y = affine(200, 0.7, -1.9);
    for mu in [0.2, 0.5, 0.9] {
        let r = rl_integral(&y, mu).unwrap();
        let e = sup_err(&r, |t| {
            0.7 * t.powf(mu) / tg(1.0 + mu) - 1.9 * t.powf(1.0 + mu) / tg(2.0 + mu)
        });
        assert!(e < 1e-12, "mu={mu}: {e}");
    }
    for g in [0.1, 0.5, 0.9] {
        let d = caputo_deriv_low(&y, g).unwrap();
        let e = sup_err(&d, |t| {
            if t > 0.0 {
                -1.9 * t.powf(1.0 - g) / tg(2.0 - g)
            } else {
                0.0
            }
        });
        assert!(e < 1e-12, "gamma={g}: {e}");
    }
    // second differences of an affine input are pure rounding, amplified by 1/h²
    let d = caputo_deriv_high(&y, FracOrder::new(1.5).unwrap()).unwrap();
    assert!(d.max_abs() < 1e-9, "{}", d.max_abs());
}

#[test]
fn direct_and_fft_convolution_agree() {
    let grid = TimeGrid::new(1.0, 700).unwrap();
    let y = TimeSeries::from_fn(grid, |t| (3.0 * t).sin() + t * t);
    let a = rl_integral_with(&y, 0.4, ConvMode::Direct).unwrap();
    let b = rl_integral_with(&y, 0.4, ConvMode::Fft).unwrap();
    let d = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-12, "{d}");
}

fn semigroup_error(m: usize, mu1: f64, mu2: f64) -> f64 {
    let grid = TimeGrid::new(1.0, m).unwrap();
    let y = TimeSeries::from_fn(grid, |t| (2.0 * t).cos() + t);
    let two = rl_integral(&rl_integral(&y, mu1).unwrap(), mu2).unwrap();
    let one = rl_integral(&y, mu1 + mu2).unwrap();
    two.values()
        .iter()
        .zip(one.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn semigroup_error_vanishes_under_refinement() {
    for (mu1, mu2) in [(0.3, 0.4), (0.1, 0.8), (0.45, 0.45)] {
        let e: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&m| semigroup_error(m, mu1, mu2))
            .collect();
        assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
        assert!(e[2] < 5e-3, "{e:?}");
    }
}

#[test]
fn integral_inverts_caputo_derivative() {
    let g = 0.6;
    let errs: Vec<f64> = [64usize, 256, 1024]
        .iter()
        .map(|&m| {
            let grid = TimeGrid::new(1.0, m).unwrap();
            let y = TimeSeries::from_fn(grid, |t| (2.0 * t).sin() + t * t);
            let back = rl_integral(&caputo_deriv_low(&y, g).unwrap(), g).unwrap();
            back.values()
                .iter()
                .zip(y.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 1e-3, "{errs:?}");
}

#[test]
fn bridge_between_riemann_liouville_and_caputo() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let y = TimeSeries::from_fn(grid, |t| (1.0 - t).exp() - 1f64.exp());
    let r = rl_caputo_bridge_residual(&y, 0.5).unwrap();
    assert!(r < 1e-10, "{r}");
}

#[test]
fn corrected_high_derivative_of_mittag_leffler_kernel() {
    let o = FracOrder::new(1.5).unwrap();
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let y = TimeSeries::from_fn(grid, |t| {
        fracwave_core::mlf::mittag_leffler(1.5, 1.0, -t.powf(1.5)).unwrap()
    });
    let d = caputo_deriv_high_corrected(&y, o, &[1.5, 2.5, 3.0]).unwrap();
    let e = (1..grid.len())
        .map(|i| (d.values()[i] + y.values()[i]).abs())
        .fold(0.0, f64::max);
    assert!(e < 5e-3, "{e}");
}

fn series(v: Vec<f64>) -> TimeSeries {
    let m = v.len() - 1;
    TimeSeries::new(TimeGrid::new(1.0, m).unwrap(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operators_are_linear(
        y1 in prop::collection::vec(-1.0f64..1.0, 40),
        y2 in prop::collection::vec(-1.0f64..1.0, 40),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        mu in 0.05f64..0.95,
        gamma in 0.05f64..0.95,
        alpha in 1.05f64..1.95,
    ) {
        let comb: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect();
        let (s1, s2, sc) = (series(y1), series(y2), series(comb));
        let order = FracOrder::new(alpha).unwrap();
        type Op = Box<dyn Fn(&TimeSeries) -> TimeSeries>;
        let ops: Vec<Op> = vec![
            Box::new(move |y| rl_integral(y, mu).unwrap()),
            Box::new(move |y| caputo_deriv_low(y, gamma).unwrap()),
            Box::new(move |y| caputo_deriv_high(y, order).unwrap()),
            Box::new(move |y| rl_derivative(y, gamma).unwrap()),
        ];
        for op in &ops {
            let (r1, r2, rc) = (op(&s1), op(&s2), op(&sc));
            let scale = 1.0 + r1.max_abs() * a.abs() + r2.max_abs() * b.abs();
            // node 0 of the RL derivative is singular unless y(0) = 0
            for i in 1..rc.values().len() {
                let lin = a * r1.values()[i] + b * r2.values()[i];
                prop_assert!((rc.values()[i] - lin).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn power_weights_integrate_affine_functions(p in -0.95f64..2.0, m in 4usize..60) {
        let h = 1.0 / m as f64;
        let w = PowerWeights::new(p, h, m).unwrap();
        let phi: Vec<f64> = (0..=m).map(|k| 2.0 - 3.0 * k as f64 * h).collect();
        let v = w.integral(&phi, m);
        let exact = 2.0 / (p + 1.0) - 3.0 / (p + 2.0);
        prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{} vs {}", v, exact);
    }
}
