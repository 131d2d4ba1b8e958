//! Series solution of ∂_t^α u − Lu = f(t)h(x) with Dirichlet ends.
//!
//! Each mode obeys ∂_t^α u_n + λ_n u_n = h_n f(t), u_n(0) = φ_n, u_n′(0) = ψ_n, so
//!
//! u_n(t)  = φ_n E_{α,1}(−λt^α) + ψ_n t E_{α,2}(−λt^α) + h_n ∫₀ᵗ σ^{α−1}E_{α,α}(−λσ^α) f(t−σ) dσ
//! u_n′(t) = −λφ_n t^{α−1}E_{α,α}(−λt^α) + ψ_n E_{α,1}(−λt^α) + h_n ∫₀ᵗ σ^{α−2}E_{α,α−1}(−λσ^α) f(t−σ) dσ
//!
//! The convolutions are product-integrated against the exact power weights.

use crate::error::{Error, Result};
use crate::fracops::{
    caputo_deriv_high_corrected, caputo_deriv_low, integrate_corrected, ConvMode, FracOrder,
    PowerWeights, TimeGrid, TimeSeries,
};
use crate::mlf::{mlf_eval, MlfParams, DEFAULT_TOL};
use crate::quad::rgamma;
use crate::spectral::{
    eigenpairs, project, synthesize, warn_on_slow_decay, ModalBasis, ModalCoeffs, OperatorSpec,
};
use rayon::prelude::*;
use std::sync::Arc;

/// Mode-N energy share above which a truncation warning is logged.
pub const TRUNCATION_SHARE: f64 = 1e-6;

/// A full direct-problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub order: FracOrder,
    pub grid: TimeGrid,
    pub op: OperatorSpec,
    pub n_modes: usize,
    pub points: usize,
    /// u(0, ·) on the basis grid.
    pub phi: Vec<f64>,
    /// u_t(0, ·) on the basis grid.
    pub psi: Vec<f64>,
    pub f: Option<TimeSeries>,
    pub h: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn basis(&self) -> Result<ModalBasis> {
        eigenpairs(&self.op, self.n_modes, self.points)
    }
}

/// E_{α,β}(−λ t_i^α) at every node.
pub fn mlf_samples(alpha: f64, beta: f64, lambda: f64, nodes: &[f64]) -> Result<Vec<f64>> {
    let p = MlfParams::new(alpha, beta)?;
    nodes
        .iter()
        .map(|&t| mlf_eval(p, -lambda * t.powf(alpha), DEFAULT_TOL))
        .collect()
}

/// Per-grid state shared by all modal evolutions.
#[derive(Debug, Clone)]
pub struct Evolver {
    order: FracOrder,
    grid: TimeGrid,
    nodes: Vec<f64>,
    w_disp: PowerWeights,
    w_vel: PowerWeights,
    mode: ConvMode,
}

/// Trajectory of one mode and its velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrajectory {
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl Evolver {
    pub fn new(order: FracOrder, grid: TimeGrid) -> Result<Self> {
        let h = grid.dt();
        let m = grid.steps();
        Ok(Self {
            order,
            grid,
            nodes: grid.nodes(),
            w_disp: PowerWeights::new(order.alpha() - 1.0, h, m)?,
            w_vel: PowerWeights::new(order.alpha() - 2.0, h, m)?,
            mode: ConvMode::Direct,
        })
    }

    pub fn with_mode(mut self, mode: ConvMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    /// ∫₀^{t_i} σ^{α−1}E_{α,α}(−λσ^α) f(t_i − σ) dσ.
    pub fn displacement_kernel_conv(&self, lambda: f64, f: &[f64]) -> Result<Vec<f64>> {
        let a = self.order.alpha();
        let w = mlf_samples(a, a, lambda, &self.nodes)?;
        Ok(self.w_disp.convolve(&w, f, self.mode))
    }

    /// ∫₀^{t_i} σ^{α−2}E_{α,α−1}(−λσ^α) f(t_i − σ) dσ.
    pub fn velocity_kernel_conv(&self, lambda: f64, f: &[f64]) -> Result<Vec<f64>> {
        let a = self.order.alpha();
        let w = mlf_samples(a, a - 1.0, lambda, &self.nodes)?;
        Ok(self.w_vel.convolve(&w, f, self.mode))
    }

    pub fn evolve(
        &self,
        lambda: f64,
        phi: f64,
        psi: f64,
        h: f64,
        f: &[f64],
    ) -> Result<ModalTrajectory> {
        if !(lambda > 0.0) {
            return Err(Error::domain(format!("lambda = {lambda} must be positive")));
        }
        if f.len() != self.grid.len() {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                got: f.len(),
            });
        }
        let a = self.order.alpha();
        let n = self.nodes.len();
        let mut u = vec![0.0; n];
        let mut ut = vec![0.0; n];
        if phi != 0.0 || psi != 0.0 {
            let e1 = mlf_samples(a, 1.0, lambda, &self.nodes)?;
            let e2 = mlf_samples(a, 2.0, lambda, &self.nodes)?;
            let eaa = mlf_samples(a, a, lambda, &self.nodes)?;
            for i in 0..n {
                let t = self.nodes[i];
                u[i] = phi * e1[i] + psi * t * e2[i];
                ut[i] = -lambda * phi * t.powf(a - 1.0) * eaa[i] + psi * e1[i];
            }
        }
        if h != 0.0 && f.iter().any(|v| *v != 0.0) {
            let c1 = self.displacement_kernel_conv(lambda, f)?;
            let c2 = self.velocity_kernel_conv(lambda, f)?;
            for i in 0..n {
                u[i] += h * c1[i];
                ut[i] += h * c2[i];
            }
        }
        Ok(ModalTrajectory { u, ut })
    }
}

/// Single-mode solution of ∂^α u + λu = h f(t), u(0) = φ, u′(0) = ψ.
pub fn modal_evolve(
    order: FracOrder,
    lambda: f64,
    phi: f64,
    psi: f64,
    h: f64,
    f: &TimeSeries,
) -> Result<(TimeSeries, TimeSeries)> {
    let ev = Evolver::new(order, *f.grid())?;
    let tr = ev.evolve(lambda, phi, psi, h, f.values())?;
    Ok((
        TimeSeries::new(*f.grid(), tr.u)?,
        TimeSeries::new(*f.grid(), tr.ut)?,
    ))
}

/// Modal solution on a time grid.
#[derive(Debug, Clone)]
pub struct Field {
    order: FracOrder,
    grid: TimeGrid,
    basis: Arc<ModalBasis>,
    phi: ModalCoeffs,
    psi: ModalCoeffs,
    h: ModalCoeffs,
    modal: Vec<Vec<f64>>,
    modal_vel: Vec<Vec<f64>>,
    truncation_share: f64,
}

impl Field {
    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn basis(&self) -> &ModalBasis {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<ModalBasis> {
        self.basis.clone()
    }

    pub fn n_modes(&self) -> usize {
        self.modal.len()
    }

    pub fn modal(&self, n: usize) -> &[f64] {
        &self.modal[n]
    }

    pub fn modal_vel(&self, n: usize) -> &[f64] {
        &self.modal_vel[n]
    }

    pub fn phi_coeffs(&self) -> &ModalCoeffs {
        &self.phi
    }

    pub fn psi_coeffs(&self) -> &ModalCoeffs {
        &self.psi
    }

    pub fn source_coeffs(&self) -> &ModalCoeffs {
        &self.h
    }

    /// Share of the last mode in Σ_n Σ_i u_n(t_i)².
    pub fn truncation_share(&self) -> f64 {
        self.truncation_share
    }

    fn column(&self, data: &[Vec<f64>], i: usize) -> Vec<f64> {
        let c = ModalCoeffs {
            values: data.iter().map(|m| m[i]).collect(),
        };
        synthesize(&c, &self.basis).expect("coefficient count matches basis")
    }

    /// u(t_i, ·) on the spatial grid.
    pub fn u_at(&self, i: usize) -> Vec<f64> {
        self.column(&self.modal, i)
    }

    /// u_t(t_i, ·) on the spatial grid.
    pub fn ut_at(&self, i: usize) -> Vec<f64> {
        self.column(&self.modal_vel, i)
    }

    /// Scales every trajectory (and the stored data coefficients) by `s`.
    pub fn scaled(&self, s: f64) -> Field {
        let sc = |c: &ModalCoeffs| ModalCoeffs {
            values: c.values.iter().map(|v| v * s).collect(),
        };
        let sv = |d: &Vec<Vec<f64>>| {
            d.iter()
                .map(|m| m.iter().map(|v| v * s).collect())
                .collect()
        };
        Field {
            phi: sc(&self.phi),
            psi: sc(&self.psi),
            h: sc(&self.h),
            modal: sv(&self.modal),
            modal_vel: sv(&self.modal_vel),
            ..self.clone()
        }
    }
}

fn check_dirichlet(name: &str, v: &[f64], basis: &ModalBasis) -> Result<()> {
    if v.len() != basis.n_points() {
        return Err(Error::GridMismatch {
            expected: basis.n_points(),
            got: v.len(),
        });
    }
    for (k, x) in v.iter().enumerate() {
        if basis.grid().is_boundary(k) && x.abs() > 1e-8 {
            return Err(Error::Boundary(format!("{name} = {x:e} on the boundary")));
        }
    }
    Ok(())
}

/// Evolves every mode of `basis` from modal data.
pub fn evolve_modes(
    order: FracOrder,
    basis: Arc<ModalBasis>,
    phi: ModalCoeffs,
    psi: ModalCoeffs,
    h: ModalCoeffs,
    f: &TimeSeries,
    mode: ConvMode,
) -> Result<Field> {
    let n = basis.n_modes();
    for c in [&phi, &psi, &h] {
        if c.len() != n {
            return Err(Error::GridMismatch {
                expected: n,
                got: c.len(),
            });
        }
    }
    let grid = *f.grid();
    let ev = Evolver::new(order, grid)?.with_mode(mode);
    let trajectories: Vec<ModalTrajectory> = (0..n)
        .into_par_iter()
        .map(|k| {
            ev.evolve(
                basis.lambdas()[k],
                phi.values[k],
                psi.values[k],
                h.values[k],
                f.values(),
            )
        })
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = trajectories
        .iter()
        .map(|t| t.u.iter().map(|v| v * v).sum())
        .collect();
    let total: f64 = energies.iter().sum();
    let truncation_share = if total > 0.0 {
        energies[n - 1] / total
    } else {
        0.0
    };
    if truncation_share > TRUNCATION_SHARE {
        log::warn!(
            "mode {n} carries {truncation_share:.3e} of the solution energy; consider more modes"
        );
    }
    let (modal, modal_vel) = trajectories.into_iter().map(|t| (t.u, t.ut)).unzip();
    Ok(Field {
        order,
        grid,
        basis,
        phi,
        psi,
        h,
        modal,
        modal_vel,
        truncation_share,
    })
}

/// Solves the direct problem on a prebuilt basis.
pub fn direct_solve_in(p: &ProblemSpec, basis: Arc<ModalBasis>) -> Result<Field> {
    let f =
        p.f.as_ref()
            .ok_or_else(|| Error::Scenario("direct problem needs f(t)".into()))?;
    let h =
        p.h.as_ref()
            .ok_or_else(|| Error::Scenario("direct problem needs h(x)".into()))?;
    if f.grid() != &p.grid {
        return Err(Error::GridMismatch {
            expected: p.grid.len(),
            got: f.values().len(),
        });
    }
    check_dirichlet("phi", &p.phi, &basis)?;
    check_dirichlet("psi", &p.psi, &basis)?;
    if h.len() != basis.n_points() {
        return Err(Error::GridMismatch {
            expected: basis.n_points(),
            got: h.len(),
        });
    }
    let phi = project(&p.phi, &basis)?;
    let psi = project(&p.psi, &basis)?;
    let hc = project(h, &basis)?;
    warn_on_slow_decay("phi", &phi, &basis);
    warn_on_slow_decay("psi", &psi, &basis);
    warn_on_slow_decay("h", &hc, &basis);
    evolve_modes(p.order, basis, phi, psi, hc, f, ConvMode::Direct)
}

pub fn direct_solve(p: &ProblemSpec) -> Result<Field> {
    let basis = Arc::new(p.basis()?);
    direct_solve_in(p, basis)
}

/// Smallest N whose tail Σ_{n>N} (|φ_n| + T|ψ_n| + T^α‖f‖∞|h_n|/Γ(α+1))·max|X_n| stays below `tol`.
pub fn choose_truncation(
    basis: &ModalBasis,
    phi: &ModalCoeffs,
    psi: &ModalCoeffs,
    h: &ModalCoeffs,
    f: &TimeSeries,
    order: FracOrder,
    tol: f64,
) -> usize {
    let t = f.grid().t_final();
    let fmax = f.max_abs();
    let scale = t.powf(order.alpha()) * rgamma(order.alpha() + 1.0) * fmax;
    let n = basis.n_modes();
    let terms: Vec<f64> = (0..n)
        .map(|k| {
            let sup = basis.mode(k).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (phi.values[k].abs() + t * psi.values[k].abs() + scale * h.values[k].abs()) * sup
        })
        .collect();
    let mut tail = 0.0;
    for k in (0..n).rev() {
        if tail + terms[k] >= tol {
            return k + 1;
        }
        tail += terms[k];
    }
    1
}

/// Starting exponents of a modal trajectory: 1, t, t^α, t^{α+1}, t^{2α}.
pub fn modal_exponents(order: FracOrder) -> Vec<f64> {
    let a = order.alpha();
    vec![a, a + 1.0, 2.0 * a]
}

/// max_i |∂^α u_n + λ_n u_n − h_n f| at the grid nodes.
pub fn modal_residual(fld: &Field, f: &TimeSeries, n: usize) -> Result<f64> {
    if f.grid() != fld.grid() {
        return Err(Error::GridMismatch {
            expected: fld.grid.len(),
            got: f.values().len(),
        });
    }
    let u = TimeSeries::new(fld.grid, fld.modal[n].clone())?;
    let d = caputo_deriv_high_corrected(&u, fld.order, &modal_exponents(fld.order))?;
    let lam = fld.basis.lambdas()[n];
    let hn = fld.h.values[n];
    Ok(d.values()
        .iter()
        .zip(u.values())
        .zip(f.values())
        .fold(0.0f64, |m, ((dv, uv), fv)| {
            m.max((dv + lam * uv - hn * fv).abs())
        }))
}

/// g(t_i) = ∫ h u(t_i, x) dx = Σ_n h_n u_n(t_i).
pub fn observe_g(fld: &Field, h: &[f64]) -> Result<TimeSeries> {
    let hc = project(h, &fld.basis)?;
    let mut g = vec![0.0; fld.grid.len()];
    for (c, m) in hc.values.iter().zip(&fld.modal) {
        for (gi, v) in g.iter_mut().zip(m) {
            *gi += c * v;
        }
    }
    TimeSeries::new(fld.grid, g)
}

/// Exponents of f·u_n′ near t = 0 used by the time quadrature.
pub fn velocity_exponents(order: FracOrder) -> Vec<f64> {
    let g = order.gamma();
    vec![g, g + 1.0, 2.0 * g + 1.0]
}

/// ω_n = ∫₀ᵀ f(t) u_n′(t) dt for every mode.
pub fn omega_coeffs(fld: &Field, f: &TimeSeries) -> Result<ModalCoeffs> {
    if f.grid() != fld.grid() {
        return Err(Error::GridMismatch {
            expected: fld.grid.len(),
            got: f.values().len(),
        });
    }
    let exps = velocity_exponents(fld.order);
    let values = fld
        .modal_vel
        .iter()
        .map(|v| {
            let prod: Vec<f64> = v.iter().zip(f.values()).map(|(a, b)| a * b).collect();
            integrate_corrected(&TimeSeries::new(fld.grid, prod)?, &exps)
        })
        .collect::<Result<_>>()?;
    Ok(ModalCoeffs { values })
}

/// ω(x) = ∫₀ᵀ f(t) u_t(t, x) dt on the spatial grid.
pub fn observe_omega(fld: &Field, f: &TimeSeries) -> Result<Vec<f64>> {
    synthesize(&omega_coeffs(fld, f)?, &fld.basis)
}

/// Both sides of the energy inequality for ϑ given by its derivative samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyInequality {
    /// ∫₀ᵀ ϑ′ ∂^α ϑ dt
    pub lhs: f64,
    /// (1/(2Γ(1−γ)))∫₀ᵀ ϑ′²(T−t)^{−γ} dt − T^{1−γ}ϑ′(0)²/(2Γ(2−γ))
    pub rhs: f64,
}

impl EnergyInequality {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub fn energy_inequality(order: FracOrder, theta_dot: &TimeSeries) -> Result<EnergyInequality> {
    let g = order.gamma();
    let grid = *theta_dot.grid();
    let v = theta_dot.values();
    let d = caputo_deriv_low(theta_dot, g)?;
    let prod: Vec<f64> = v.iter().zip(d.values()).map(|(a, b)| a * b).collect();
    let lhs = integrate_corrected(&TimeSeries::new(grid, prod)?, &[1.0 - g, 2.0 - g])?;
    let rev: Vec<f64> = v.iter().rev().map(|x| x * x).collect();
    let pw = PowerWeights::new(-g, grid.dt(), grid.steps())?;
    let weighted = pw.integral(&rev, grid.steps());
    let t = grid.t_final();
    let rhs =
        0.5 * rgamma(1.0 - g) * weighted - t.powf(1.0 - g) * v[0] * v[0] * 0.5 * rgamma(2.0 - g);
    Ok(EnergyInequality { lhs, rhs })
}

/// Energy inequality for every mode of a field.
pub fn modal_energy_inequalities(fld: &Field) -> Result<Vec<EnergyInequality>> {
    fld.modal_vel
        .iter()
        .map(|v| energy_inequality(fld.order, &TimeSeries::new(fld.grid, v.clone())?))
        .collect()
}
