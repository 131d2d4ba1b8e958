mod common;

use common::oracle::MlfOracle;
use fracwave_core::direct::*;
use fracwave_core::fracops::{FracOrder, TimeGrid, TimeSeries};
use fracwave_core::inverse::*;
use fracwave_core::spectral::{
    eigenpairs, project, synthesize, ModalBasis, ModalCoeffs, Operator1d, OperatorSpec,
};
use fracwave_core::Error;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn base(alpha: f64, m: usize, n: usize, j: usize) -> ProblemSpec {
    ProblemSpec {
        order: FracOrder::new(alpha).unwrap(),
        grid: TimeGrid::new(1.0, m).unwrap(),
        op: OperatorSpec::Interval(Operator1d::laplacian(1.0)),
        n_modes: n,
        points: j,
        phi: vec![0.0; j + 1],
        psi: vec![0.0; j + 1],
        f: None,
        h: None,
    }
}

fn f_true(t: f64) -> f64 {
    1.0 + (2.0 * PI * t).sin()
}

/// Twin data g for the standard IP1 scenario.
fn ip1_twin(m: usize, n: usize) -> (Ip1Data, Arc<ModalBasis>) {
    let mut s = base(1.5, m, n, 256);
    let basis = Arc::new(s.basis().unwrap());
    s.h = Some(basis.grid().sample(|x, _| x * (1.0 - x)));
    s.phi = basis.grid().sample(|x, _| (PI * x).sin());
    s.f = Some(TimeSeries::from_fn(s.grid, f_true));
    let fld = direct_solve_in(&s, basis.clone()).unwrap();
    let g = observe_g(&fld, s.h.as_ref().unwrap()).unwrap();
    s.f = None;
    (
        Ip1Data {
            spec: s,
            g,
            tol_compat: None,
        },
        basis,
    )
}

fn ip1_error(m: usize, n: usize) -> f64 {
    let (d, basis) = ip1_twin(m, n);
    let (f, _) = ip1_solve_in(&d, basis).unwrap();
    let nodes = d.spec.grid.nodes();
    f.values()
        .iter()
        .zip(&nodes)
        .map(|(v, t)| (v - f_true(*t)).abs())
        .fold(0.0, f64::max)
        / 2.0
}

#[test]
fn ip1_error_contracts_under_refinement() {
    let e: Vec<f64> = [(128, 8), (256, 12), (512, 16)]
        .iter()
        .map(|&(m, n)| ip1_error(m, n))
        .collect();
    assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
}

#[test]
fn ip1_diagnostics_are_small_on_twin_data() {
    let (d, basis) = ip1_twin(512, 12);
    let (_, diag) = ip1_solve_in(&d, basis).unwrap();
    assert!(diag.compat_residual < 1e-12);
    assert!(diag.forward_residual < 1e-4 * diag.g_sup);
    assert!(diag.tail_bound >= 0.0 && diag.tail_bound < 1e-3);
}

#[test]
fn kernel_identity_holds() {
    let (d, basis) = ip1_twin(128, 8);
    let k = build_ip1_system_in(&d, basis.clone()).unwrap();
    let a = 1.5;
    let lam = basis.lambdas();
    let h = &k.h.values;
    let ml = MlfOracle::new(a, a);
    for i in (1..=128).step_by(9) {
        let t: f64 = d.spec.grid.node(i);
        let s: f64 = (0..lam.len())
            .map(|n| lam[n] * h[n] * h[n] * ml.eval(-lam[n] * t.powf(a)))
            .sum();
        let r = k.k0.values()[i] + t.powf(a - 1.0) * s;
        assert!(r.abs() < 1e-10, "t={t}: {r}");
        let sk: f64 = (0..lam.len())
            .map(|n| h[n] * h[n] * ml.eval(-lam[n] * t.powf(a)))
            .sum();
        assert!((k.k.values()[i] - t.powf(a - 1.0) * sk).abs() < 1e-10);
    }
}

#[test]
fn gate_rejects_offset_data() {
    let (mut d, basis) = ip1_twin(128, 8);
    let shifted: Vec<f64> = d.g.values().iter().map(|v| v + 1e-2).collect();
    d.g = TimeSeries::new(d.spec.grid, shifted).unwrap();
    match ip1_solve_in(&d, basis) {
        Err(Error::IncompatibleData { residual, tol }) => {
            assert!((residual - 1e-2).abs() < 1e-9 && tol < residual);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn resolvent_and_naive_solvers() {
    let (d, basis) = ip1_twin(256, 8);
    let k = build_ip1_system_in(&d, basis).unwrap();
    let grid = d.spec.grid;
    let a = volterra2_solve(&k, grid).unwrap();
    let b = solve_with_resolvent(&k, grid).unwrap();
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 3e-3, "{diff}");
    // the first-kind collocation has no stabilizing diagonal and drifts far from f
    let naive = volterra1_naive(&k, grid).unwrap();
    let nodes = grid.nodes();
    let bad = naive
        .values()
        .iter()
        .zip(&nodes)
        .map(|(v, t)| (v - f_true(*t)).abs())
        .fold(0.0, f64::max);
    let good = a
        .values()
        .iter()
        .zip(&nodes)
        .map(|(v, t)| (v - f_true(*t)).abs())
        .fold(0.0, f64::max);
    assert!(bad > 10.0 * good, "{bad} vs {good}");
}

#[test]
fn reconstructed_source_drives_admissible_modes() {
    let (d, basis) = ip1_twin(512, 8);
    let (f, _) = ip1_solve_in(&d, basis.clone()).unwrap();
    let mut s = d.spec.clone();
    s.f = Some(f);
    s.h = Some(basis.grid().sample(|x, _| x * (1.0 - x)));
    let fld = direct_solve_in(&s, basis).unwrap();
    for e in modal_energy_inequalities(&fld).unwrap() {
        assert!(e.gap() >= -1e-8, "{e:?}");
    }
}

fn ip2_twin(m: usize, n: usize, j: usize) -> (Ip2Data, Arc<ModalBasis>, Vec<f64>, Field) {
    let mut s = base(1.5, m, n, j);
    let basis = Arc::new(s.basis().unwrap());
    let hstar = basis.grid().sample(|x, _| x * (1.0 - x) * (1.0 + x));
    s.h = Some(hstar.clone());
    s.f = Some(TimeSeries::from_fn(s.grid, |t| 1.0 + t));
    let fld = direct_solve_in(&s, basis.clone()).unwrap();
    let omega = observe_omega(&fld, s.f.as_ref().unwrap()).unwrap();
    s.h = None;
    (Ip2Data { spec: s, omega }, basis, hstar, fld)
}

fn rel_l2(basis: &ModalBasis, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (basis.inner(&d, &d) / basis.inner(b, b)).sqrt()
}

#[test]
fn ip2_error_contracts_under_refinement() {
    let e: Vec<f64> = [(128, 4), (256, 8), (512, 16)]
        .iter()
        .map(|&(m, n)| {
            let (d, basis, hstar, _) = ip2_twin(m, n, 256);
            let (h, _) = ip2_solve_in(&d, basis.clone()).unwrap();
            rel_l2(&basis, &h, &hstar)
        })
        .collect();
    assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
    assert!(e[2] < 1e-3, "{e:?}");
}

#[test]
fn ip2_energy_separates_zero_from_twin() {
    let (d, _, _, fld) = ip2_twin(256, 8, 256);
    let zero = ip2_energy_check(&fld.scaled(0.0), &d.spec.op, d.spec.order).unwrap();
    assert_eq!(zero.total, 0.0);
    let e = ip2_energy_check(&fld, &d.spec.op, d.spec.order).unwrap();
    assert!(e.total > 1e-4);
    assert!((e.lhs_elliptic - e.lhs_elliptic_quadrature).abs() < 1e-6 * e.lhs_elliptic);
}

#[test]
fn ip2_rejects_nonzero_initial_data_in_energy_check() {
    let mut s = base(1.5, 64, 4, 128);
    let basis = Arc::new(s.basis().unwrap());
    s.phi = basis.grid().sample(|x, _| (PI * x).sin());
    s.h = Some(basis.grid().sample(|x, _| x * (1.0 - x)));
    s.f = Some(TimeSeries::from_fn(s.grid, |_| 1.0));
    let fld = direct_solve_in(&s, basis).unwrap();
    assert!(matches!(
        ip2_energy_check(&fld, &s.op, s.order),
        Err(Error::Scenario(_))
    ));
}

#[test]
fn ip2_excludes_insensitive_modes() {
    let (d, basis, _, _) = ip2_twin(128, 6, 128);
    let (_, diag) = ip2_solve_in(&d, basis).unwrap();
    assert!(diag.excluded.is_empty());
    assert!(diag.sensitivity.iter().all(|b| *b > diag.threshold));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn homogeneous_ip1_data_give_zero_source(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..8),
        alpha in 1.05f64..1.95,
        m in 16usize..96,
    ) {
        prop_assume!(coeffs.iter().map(|c| c * c).sum::<f64>() > 1e-6);
        let n = coeffs.len();
        let mut s = base(alpha, m, n, 64);
        let basis = Arc::new(eigenpairs(&s.op, n, 64).unwrap());
        s.h = Some(synthesize(&ModalCoeffs { values: coeffs }, &basis).unwrap());
        let d = Ip1Data { g: TimeSeries::zeros(s.grid), spec: s.clone(), tol_compat: None };
        let k = build_ip1_system_in(&d, basis).unwrap();
        let f = volterra2_solve(&k, s.grid).unwrap();
        prop_assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn gate_matches_its_tolerance(delta in -1e-3f64..1e-3, tol in 1e-6f64..1e-3) {
        let mut s = base(1.5, 32, 4, 64);
        let basis = Arc::new(s.basis().unwrap());
        s.h = Some(basis.mode(0).to_vec());
        s.phi = basis.grid().sample(|x, _| 0.5 * (PI * x).sin());
        let hp: f64 = project(&s.phi, &basis).unwrap().values[0];
        let g = TimeSeries::from_fn(s.grid, |t| hp + delta + t * t);
        let d = Ip1Data { spec: s, g, tol_compat: Some(tol) };
        let r = build_ip1_system_in(&d, basis);
        if delta.abs() > tol * (1.0 + 1e-9) {
            let rejected = matches!(r, Err(Error::IncompatibleData { .. }));
            prop_assert!(rejected);
        } else if delta.abs() < tol * (1.0 - 1e-9) {
            prop_assert!(r.is_ok());
        }
    }
}
