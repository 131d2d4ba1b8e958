//! Source identification.
//!
//! IP1 recovers f(t) from g(t) = ∫ h u dx. Writing G = g − Σ h_n[φ_n E_{α,1} + ψ_n t E_{α,2}],
//! the data satisfy ∫₀ᵗ f(s) K(t−s) ds = G(t) with K(t) = t^{α−1} Σ h_n² E_{α,α}(−λ_n t^α).
//! Applying ∂^α to both sides gives the second-kind equation
//!
//! ‖h‖² f(t) + ∫₀ᵗ f(s) K₀(t−s) ds = G₀(t),  K₀(t) = −t^{α−1} Σ λ_n h_n² E_{α,α}(−λ_n t^α),
//!
//! with G₀ = ∂^α G = ∂^{α−1}g′ + Σ h_n λ_n [φ_n E_{α,1} + ψ_n t E_{α,2}].
//!
//! IP2 recovers h(x) from ω(x) = ∫₀ᵀ f u_t dt by dividing each mode by its
//! sensitivity b_n = ∫₀ᵀ f(t) ∫₀ᵗ f(s)(t−s)^{α−2}E_{α,α−1}(−λ_n(t−s)^α) ds dt.

use crate::direct::{
    evolve_modes, mlf_samples, modal_exponents, observe_g, velocity_exponents, Evolver, Field,
    ProblemSpec,
};
use crate::error::{Error, Result};
use crate::fracops::{
    caputo_deriv_high_corrected, integrate_corrected, ConvMode, FracOrder, PowerWeights, TimeGrid,
    TimeSeries,
};
use crate::quad::rgamma;
use crate::spectral::{
    bessel_diagnostic, project, synthesize, ModalBasis, ModalCoeffs, OperatorSpec,
};
use rayon::prelude::*;
use std::sync::Arc;

/// Default compatibility tolerance: 1e-6 (1 + |g(0)|).
pub fn default_tol_compat(g0: f64) -> f64 {
    1e-6 * (1.0 + g0.abs())
}

pub const MIN_HNORM2: f64 = 1e-14;

/// Inputs of IP1: a problem without f, plus the observation g.
#[derive(Debug, Clone)]
pub struct Ip1Data {
    pub spec: ProblemSpec,
    pub g: TimeSeries,
    pub tol_compat: Option<f64>,
}

/// Kernels and right-hand sides of the IP1 integral equations.
#[derive(Debug, Clone)]
pub struct Ip1Kernels {
    pub order: FracOrder,
    pub k: TimeSeries,
    pub k0: TimeSeries,
    pub g_reduced: TimeSeries,
    pub g0: TimeSeries,
    pub hnorm2: f64,
    /// K₀(t) = t^{α−1} κ(t); κ is smooth and kept for product integration.
    pub kappa: Vec<f64>,
    /// K(t) = t^{α−1} κ_K(t).
    pub kappa_k: Vec<f64>,
    pub compat_residual: f64,
    /// Bessel bound on the omitted part of Σ λ_n h_n².
    pub tail_bound: f64,
    pub basis: Arc<ModalBasis>,
    pub phi: ModalCoeffs,
    pub psi: ModalCoeffs,
    pub h: ModalCoeffs,
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Scenario(format!("missing {what}")))
}

pub fn build_ip1_system(d: &Ip1Data) -> Result<Ip1Kernels> {
    let basis = Arc::new(d.spec.basis()?);
    build_ip1_system_in(d, basis)
}

pub fn build_ip1_system_in(d: &Ip1Data, basis: Arc<ModalBasis>) -> Result<Ip1Kernels> {
    let spec = &d.spec;
    let grid = spec.grid;
    if d.g.grid() != &grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: d.g.values().len(),
        });
    }
    let hvals = require(&spec.h, "h(x) for IP1")?;
    let phi = project(&spec.phi, &basis)?;
    let psi = project(&spec.psi, &basis)?;
    let h = project(hvals, &basis)?;
    let hnorm2: f64 = h.values.iter().map(|v| v * v).sum();
    if !(hnorm2 > MIN_HNORM2) {
        return Err(Error::DegenerateWeight(hnorm2));
    }
    let g0 = d.g.values()[0];
    let expected: f64 = h.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum();
    let compat_residual = (g0 - expected).abs();
    let tol = d.tol_compat.unwrap_or_else(|| default_tol_compat(g0));
    if compat_residual > tol {
        return Err(Error::IncompatibleData {
            residual: compat_residual,
            tol,
        });
    }
    let order = spec.order;
    let a = order.alpha();
    let nodes = grid.nodes();
    let n = basis.n_modes();
    struct ModeTerms {
        kappa: Vec<f64>,
        kappa_k: Vec<f64>,
        hom: Vec<f64>,
    }
    let terms: Vec<ModeTerms> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<ModeTerms> {
            let lam = basis.lambdas()[k];
            let hn = h.values[k];
            let eaa = mlf_samples(a, a, lam, &nodes)?;
            let mut hom = vec![0.0; nodes.len()];
            if hn != 0.0 && (phi.values[k] != 0.0 || psi.values[k] != 0.0) {
                let e1 = mlf_samples(a, 1.0, lam, &nodes)?;
                let e2 = mlf_samples(a, 2.0, lam, &nodes)?;
                for i in 0..nodes.len() {
                    hom[i] = hn * (phi.values[k] * e1[i] + psi.values[k] * nodes[i] * e2[i]);
                }
            }
            Ok(ModeTerms {
                kappa: eaa.iter().map(|e| -lam * hn * hn * e).collect(),
                kappa_k: eaa.iter().map(|e| hn * hn * e).collect(),
                hom,
            })
        })
        .collect::<Result<_>>()?;
    let len = grid.len();
    let mut kappa = vec![0.0; len];
    let mut kappa_k = vec![0.0; len];
    let mut g_red = d.g.values().to_vec();
    for t in &terms {
        for i in 0..len {
            kappa[i] += t.kappa[i];
            kappa_k[i] += t.kappa_k[i];
            g_red[i] -= t.hom[i];
        }
    }
    let pow: Vec<f64> = nodes.iter().map(|t| t.powf(a - 1.0)).collect();
    let k0: Vec<f64> = kappa.iter().zip(&pow).map(|(k, p)| k * p).collect();
    let kk: Vec<f64> = kappa_k.iter().zip(&pow).map(|(k, p)| k * p).collect();
    let g_reduced = TimeSeries::new(grid, g_red)?;
    let g0s = caputo_deriv_high_corrected(&g_reduced, order, &modal_exponents(order))?;

    let lam_h2: f64 = h
        .values
        .iter()
        .zip(basis.lambdas())
        .map(|(c, l)| l * c * c)
        .sum();
    let tail_bound = match bessel_diagnostic(hvals, &basis, &spec.op) {
        Ok(r) => (r.bessel_rhs - lam_h2).max(0.0),
        Err(_) => f64::NAN,
    };
    Ok(Ip1Kernels {
        order,
        k: TimeSeries::new(grid, kk)?,
        k0: TimeSeries::new(grid, k0)?,
        g_reduced,
        g0: g0s,
        hnorm2,
        kappa,
        kappa_k,
        compat_residual,
        tail_bound,
        basis,
        phi,
        psi,
        h,
    })
}

/// Marches m f(t) + ∫₀ᵗ s^{α−1}κ(s) f(t−s) ds = rhs(t) forward in time with
/// product integration of the weakly singular factor.
///
/// The right-hand side is least accurate at t = 0, so f(0) is replaced by
/// quadratic extrapolation from the next three nodes and the march repeated.
fn march_second_kind(m: f64, kappa: &[f64], rhs: &[f64], pw: &PowerWeights) -> Result<Vec<f64>> {
    let (a0, _) = pw.pair(0);
    let diag = m + a0 * kappa[0];
    if !(diag.abs() > MIN_HNORM2) {
        return Err(Error::DegenerateWeight(diag));
    }
    let mut f = march_from(rhs[0] / m, diag, kappa, rhs, pw);
    if f.len() > 4 {
        let f0 = 3.0 * f[1] - 3.0 * f[2] + f[3];
        f = march_from(f0, diag, kappa, rhs, pw);
    }
    Ok(f)
}

fn march_from(f0: f64, diag: f64, kappa: &[f64], rhs: &[f64], pw: &PowerWeights) -> Vec<f64> {
    let len = rhs.len();
    let mut f = vec![0.0; len];
    f[0] = f0;
    for i in 1..len {
        let mut s = 0.0;
        for k in 0..i {
            let (ak, bk) = pw.pair(k);
            if k > 0 {
                s += ak * kappa[k] * f[i - k];
            }
            s += bk * kappa[k + 1] * f[i - k - 1];
        }
        f[i] = (rhs[i] - s) / diag;
    }
    f
}

/// Solves ‖h‖² f + K₀ ∗ f = G₀ by forward time stepping.
pub fn volterra2_solve(k: &Ip1Kernels, grid: TimeGrid) -> Result<TimeSeries> {
    if !(k.hnorm2 > MIN_HNORM2) {
        return Err(Error::DegenerateWeight(k.hnorm2));
    }
    if k.g0.grid() != &grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: k.g0.values().len(),
        });
    }
    let pw = PowerWeights::new(k.order.alpha() - 1.0, grid.dt(), grid.steps())?;
    let f = march_second_kind(k.hnorm2, &k.kappa, k.g0.values(), &pw)?;
    TimeSeries::new(grid, f)
}

/// Resolvent R of −K₀/‖h‖² at the nodes: R = k + k ∗ R.
pub fn resolvent(k: &Ip1Kernels, grid: TimeGrid) -> Result<TimeSeries> {
    let m = k.hnorm2;
    let scaled: Vec<f64> = k.kappa.iter().map(|v| -v / m).collect();
    let pw = PowerWeights::new(k.order.alpha() - 1.0, grid.dt(), grid.steps())?;
    let nodes = grid.nodes();
    let a = k.order.alpha();
    // R(t) = t^{α−1} ρ(t) with ρ(0) = κ(0)·(−1/m); solve for ρ
    let len = grid.len();
    let mut rho = vec![0.0; len];
    rho[0] = scaled[0];
    for i in 1..len {
        let ti = nodes[i];
        let pi = ti.powf(a - 1.0);
        let mut s = 0.0;
        for kk in 0..i {
            let (ak, bk) = pw.pair(kk);
            let r_prev = nodes[i - kk - 1].powf(a - 1.0) * rho[i - kk - 1];
            if kk > 0 {
                s += ak * scaled[kk] * nodes[i - kk].powf(a - 1.0) * rho[i - kk];
            }
            s += bk * scaled[kk + 1] * r_prev;
        }
        let (a0, _) = pw.pair(0);
        // R_i (1 − A₀ k₀) = k_i + s
        rho[i] = (pi * scaled[i] + s) / (pi * (1.0 - a0 * scaled[0]));
    }
    let r: Vec<f64> = rho
        .iter()
        .zip(&nodes)
        .map(|(p, t)| p * t.powf(a - 1.0))
        .collect();
    TimeSeries::new(grid, r)
}

/// f = G₀/m + R ∗ (G₀/m) using a materialized resolvent.
pub fn solve_with_resolvent(k: &Ip1Kernels, grid: TimeGrid) -> Result<TimeSeries> {
    let r = resolvent(k, grid)?;
    let a = k.order.alpha();
    let nodes = grid.nodes();
    let mut rho: Vec<f64> = r
        .values()
        .iter()
        .zip(&nodes)
        .map(|(v, t)| if *t > 0.0 { v / t.powf(a - 1.0) } else { 0.0 })
        .collect();
    rho[0] = -k.kappa[0] / k.hnorm2;
    let y: Vec<f64> = k.g0.values().iter().map(|v| v / k.hnorm2).collect();
    let pw = PowerWeights::new(a - 1.0, grid.dt(), grid.steps())?;
    let conv = pw.convolve(&rho, &y, ConvMode::Direct);
    let mut f: Vec<f64> = y.iter().zip(&conv).map(|(a, b)| a + b).collect();
    if f.len() > 4 {
        f[0] = 3.0 * f[1] - 3.0 * f[2] + f[3];
    }
    TimeSeries::new(grid, f)
}

/// Collocation of the first-kind equation K ∗ f = G. Unstable; kept for comparison.
pub fn volterra1_naive(k: &Ip1Kernels, grid: TimeGrid) -> Result<TimeSeries> {
    let pw = PowerWeights::new(k.order.alpha() - 1.0, grid.dt(), grid.steps())?;
    let g = k.g_reduced.values();
    let len = grid.len();
    let (a0, b0) = pw.pair(0);
    let mut f = vec![0.0; len];
    // node 1 couples f_0 and f_1; take them equal to start the recursion
    f[1] = g[1] / (a0 * k.kappa_k[0] + b0 * k.kappa_k[1]);
    f[0] = f[1];
    for i in 2..len {
        let mut s = 0.0;
        for kk in 0..i {
            let (ak, bk) = pw.pair(kk);
            if kk > 0 {
                s += ak * k.kappa_k[kk] * f[i - kk];
            }
            s += bk * k.kappa_k[kk + 1] * f[i - kk - 1];
        }
        f[i] = (g[i] - s) / (a0 * k.kappa_k[0]);
    }
    TimeSeries::new(grid, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ip1Diagnostics {
    pub compat_residual: f64,
    pub tail_bound: f64,
    pub hnorm2: f64,
    /// ‖observe_g(direct_solve(f)) − g‖∞
    pub forward_residual: f64,
    pub g_sup: f64,
}

pub fn ip1_solve(d: &Ip1Data) -> Result<(TimeSeries, Ip1Diagnostics)> {
    let basis = Arc::new(d.spec.basis()?);
    ip1_solve_in(d, basis)
}

pub fn ip1_solve_in(d: &Ip1Data, basis: Arc<ModalBasis>) -> Result<(TimeSeries, Ip1Diagnostics)> {
    let k = build_ip1_system_in(d, basis)?;
    let grid = d.spec.grid;
    let f = volterra2_solve(&k, grid)?;
    let fld = evolve_modes(
        d.spec.order,
        k.basis.clone(),
        k.phi.clone(),
        k.psi.clone(),
        k.h.clone(),
        &f,
        ConvMode::Direct,
    )?;
    let hvals = require(&d.spec.h, "h(x) for IP1")?;
    let g_fwd = observe_g(&fld, hvals)?;
    let forward_residual = g_fwd
        .values()
        .iter()
        .zip(d.g.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((
        f,
        Ip1Diagnostics {
            compat_residual: k.compat_residual,
            tail_bound: k.tail_bound,
            hnorm2: k.hnorm2,
            forward_residual,
            g_sup: d.g.max_abs(),
        },
    ))
}

/// Inputs of IP2: a problem without h, the forcing f and the observation ω.
#[derive(Debug, Clone)]
pub struct Ip2Data {
    pub spec: ProblemSpec,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ip2Diagnostics {
    /// b_n for every mode.
    pub sensitivity: Vec<f64>,
    /// a_n for every mode.
    pub homogeneous: Vec<f64>,
    /// Reconstructed h_n (zero for excluded modes).
    pub coeffs: Vec<f64>,
    /// Indices of modes with |b_n| below the threshold.
    pub excluded: Vec<usize>,
    pub threshold: f64,
}

/// Relative threshold on |b_n| in units of ∫₀ᵀ f² dt.
pub const SENSITIVITY_TOL: f64 = 1e-10;

pub fn ip2_solve(d: &Ip2Data) -> Result<(Vec<f64>, Ip2Diagnostics)> {
    let basis = Arc::new(d.spec.basis()?);
    ip2_solve_in(d, basis)
}

pub fn ip2_solve_in(d: &Ip2Data, basis: Arc<ModalBasis>) -> Result<(Vec<f64>, Ip2Diagnostics)> {
    let spec = &d.spec;
    let f = require(&spec.f, "f(t) for IP2")?;
    let grid = spec.grid;
    if f.grid() != &grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: f.values().len(),
        });
    }
    if f.values().iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateForcing);
    }
    let fsq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let fnorm2 = integrate_corrected(&TimeSeries::new(grid, fsq)?, &[])?;
    let threshold = SENSITIVITY_TOL * fnorm2;
    let phi = project(&spec.phi, &basis)?;
    let psi = project(&spec.psi, &basis)?;
    let om = project(&d.omega, &basis)?;
    let order = spec.order;
    let ev = Evolver::new(order, grid)?;
    let exps = velocity_exponents(order);
    let weigh = |v: &[f64]| -> Result<f64> {
        let prod: Vec<f64> = v.iter().zip(f.values()).map(|(a, b)| a * b).collect();
        integrate_corrected(&TimeSeries::new(grid, prod)?, &exps)
    };
    let n = basis.n_modes();
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let lam = basis.lambdas()[k];
            let b = weigh(&ev.velocity_kernel_conv(lam, f.values())?)?;
            let a = if phi.values[k] != 0.0 || psi.values[k] != 0.0 {
                let tr = ev.evolve(lam, phi.values[k], psi.values[k], 0.0, f.values())?;
                weigh(&tr.ut)?
            } else {
                0.0
            };
            Ok((b, a))
        })
        .collect::<Result<_>>()?;
    let mut coeffs = vec![0.0; n];
    let mut excluded = Vec::new();
    for (k, (b, a)) in pairs.iter().enumerate() {
        if b.abs() < threshold {
            excluded.push(k);
        } else {
            coeffs[k] = (om.values[k] - a) / b;
        }
    }
    if excluded.len() == n {
        return Err(Error::InsensitiveMode(threshold));
    }
    if !excluded.is_empty() {
        log::warn!(
            "IP2: {} insensitive mode(s) excluded: {:?}",
            excluded.len(),
            excluded
        );
    }
    let h = synthesize(
        &ModalCoeffs {
            values: coeffs.clone(),
        },
        &basis,
    )?;
    Ok((
        h,
        Ip2Diagnostics {
            sensitivity: pairs.iter().map(|p| p.0).collect(),
            homogeneous: pairs.iter().map(|p| p.1).collect(),
            coeffs,
            excluded,
            threshold,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// (1/(2Γ(2−α))) ∬ u_t² (T−t)^{1−α} dt dx
    pub lhs_frac: f64,
    /// Σ λ_n u_n(T)², equal to ∫ a|∇u(T)|² + c u(T)² dx
    pub lhs_elliptic: f64,
    /// The same energy by spatial quadrature of u(T, ·)
    pub lhs_elliptic_quadrature: f64,
    pub total: f64,
}

/// Energy functional of a field with zero initial data.
pub fn ip2_energy_check(fld: &Field, op: &OperatorSpec, order: FracOrder) -> Result<EnergyReport> {
    let nonzero = |c: &ModalCoeffs| c.values.iter().any(|v| v.abs() > 1e-14);
    if nonzero(fld.phi_coeffs()) || nonzero(fld.psi_coeffs()) {
        return Err(Error::Scenario(
            "energy check needs zero initial data".into(),
        ));
    }
    let grid = *fld.grid();
    let a = order.alpha();
    let m = grid.steps();
    let pw = PowerWeights::new(1.0 - a, grid.dt(), m)?;
    let mut frac = 0.0;
    let mut ell = 0.0;
    for k in 0..fld.n_modes() {
        let v = fld.modal_vel(k);
        let rev: Vec<f64> = v.iter().rev().map(|x| x * x).collect();
        frac += pw.integral(&rev, m);
        let ut = fld.modal(k)[m];
        ell += fld.basis().lambdas()[k] * ut * ut;
    }
    let lhs_frac = 0.5 * rgamma(2.0 - a) * frac;
    let u_t = fld.u_at(m);
    let lhs_elliptic_quadrature = if u_t.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        bessel_diagnostic(&u_t, fld.basis(), op)?.bessel_rhs
    };
    Ok(EnergyReport {
        lhs_frac,
        lhs_elliptic: ell,
        lhs_elliptic_quadrature,
        total: lhs_frac + ell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::{direct_solve_in, observe_omega};
    use crate::spectral::{eigenpairs, Operator1d};

    fn spec(m: usize, n: usize) -> ProblemSpec {
        let order = FracOrder::new(1.5).unwrap();
        let grid = TimeGrid::new(1.0, m).unwrap();
        ProblemSpec {
            order,
            grid,
            op: OperatorSpec::Interval(Operator1d::laplacian(1.0)),
            n_modes: n,
            points: 128,
            phi: vec![0.0; 129],
            psi: vec![0.0; 129],
            f: None,
            h: None,
        }
    }

    #[test]
    fn homogeneous_ip1_returns_zero() {
        let mut s = spec(64, 6);
        let basis = Arc::new(s.basis().unwrap());
        s.h = Some(basis.grid().sample(|x, _| x * (1.0 - x)));
        let d = Ip1Data {
            g: TimeSeries::zeros(s.grid),
            spec: s.clone(),
            tol_compat: None,
        };
        let k = build_ip1_system_in(&d, basis.clone()).unwrap();
        assert!(k.g0.values().iter().all(|v| *v == 0.0));
        assert_eq!(k.k.values()[0], 0.0);
        assert_eq!(k.k0.values()[0], 0.0);
        let f = volterra2_solve(&k, s.grid).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn degenerate_and_incompatible_inputs() {
        let mut s = spec(64, 4);
        let basis = Arc::new(s.basis().unwrap());
        s.h = Some(vec![0.0; 129]);
        let d = Ip1Data {
            g: TimeSeries::zeros(s.grid),
            spec: s.clone(),
            tol_compat: None,
        };
        assert!(matches!(
            build_ip1_system_in(&d, basis.clone()),
            Err(Error::DegenerateWeight(_))
        ));
        s.h = Some(basis.mode(0).to_vec());
        s.phi = basis.mode(0).to_vec();
        let d = Ip1Data {
            g: TimeSeries::from_fn(s.grid, |_| 1.0 + 1e-2),
            spec: s,
            tol_compat: None,
        };
        assert!(matches!(
            build_ip1_system_in(&d, basis),
            Err(Error::IncompatibleData { .. })
        ));
    }

    #[test]
    fn resolvent_route_agrees_with_stepping() {
        let mut s = spec(256, 6);
        let basis = Arc::new(s.basis().unwrap());
        s.h = Some(basis.grid().sample(|x, _| x * (1.0 - x)));
        s.f = Some(TimeSeries::from_fn(s.grid, |t| 1.0 + t * t));
        let fld = direct_solve_in(&s, basis.clone()).unwrap();
        let g = observe_g(&fld, s.h.as_ref().unwrap()).unwrap();
        let d = Ip1Data {
            g,
            spec: s.clone(),
            tol_compat: None,
        };
        let k = build_ip1_system_in(&d, basis).unwrap();
        let a = volterra2_solve(&k, s.grid).unwrap();
        let b = solve_with_resolvent(&k, s.grid).unwrap();
        let nodes = s.grid.nodes();
        for v in [&a, &b] {
            let err = v
                .values()
                .iter()
                .zip(&nodes)
                .fold(0.0f64, |m, (x, t)| m.max((x - 1.0 - t * t).abs()));
            assert!(err < 3e-3, "{err}");
        }
    }

    #[test]
    fn ip2_unit_forcing_reduces_to_final_offset() {
        let mut s = spec(512, 6);
        let basis = Arc::new(eigenpairs(&s.op, 6, 128).unwrap());
        let hstar = basis.grid().sample(|x, _| x * (1.0 - x));
        s.f = Some(TimeSeries::from_fn(s.grid, |_| 1.0));
        s.h = Some(hstar.clone());
        let fld = direct_solve_in(&s, basis.clone()).unwrap();
        let omega = observe_omega(&fld, s.f.as_ref().unwrap()).unwrap();
        let last = fld.u_at(512);
        let dev = omega
            .iter()
            .zip(&last)
            .fold(0.0f64, |m, (w, u)| m.max((w - u).abs()));
        assert!(dev < 1e-4, "{dev}");
        let (h, diag) = ip2_solve_in(
            &Ip2Data {
                spec: s.clone(),
                omega,
            },
            basis.clone(),
        )
        .unwrap();
        for (k, b) in diag.sensitivity.iter().enumerate().take(2) {
            let lam = basis.lambdas()[k];
            let exact = (1.0 - crate::mlf::mittag_leffler(1.5, 1.0, -lam).unwrap()) / lam;
            assert!((b - exact).abs() < 2e-3 * exact, "{k}: {b} vs {exact}");
        }
        let hp = project(&hstar, &basis).unwrap();
        let hr = project(&h, &basis).unwrap();
        for (a, b) in hp.values.iter().zip(&hr.values) {
            assert!((a - b).abs() < 1e-10);
        }
        let zero = Ip2Data {
            spec: s.clone(),
            omega: vec![0.0; 129],
        };
        assert!(ip2_solve_in(&zero, basis.clone())
            .unwrap()
            .0
            .iter()
            .all(|v| *v == 0.0));
        s.f = Some(TimeSeries::zeros(s.grid));
        assert!(matches!(
            ip2_solve_in(
                &Ip2Data {
                    spec: s,
                    omega: vec![0.0; 129]
                },
                basis
            ),
            Err(Error::DegenerateForcing)
        ));
    }
}
