use super::config::{
    build_problem, sample_space, sample_time, ConvergenceConfig, ConvergenceTarget, GridConfig,
    Problem, PropsConfig, Scenario, Task,
};
use super::expr::Expr;
use super::output::{encode_field, Cell, OutputDir, RunReport};
use crate::direct::{
    direct_solve_in, energy_inequality, mlf_samples, modal_residual, observe_g, observe_omega,
    Field,
};
use crate::error::{Error, Result};
use crate::fracops::{caputo_deriv_high, rl_integral, FracOrder, TimeGrid, TimeSeries};
use crate::inverse::{
    default_tol_compat, ip1_solve_in, ip2_energy_check, ip2_solve_in, Ip1Data, Ip2Data,
};
use crate::mlf::{
    mlf_deriv_identity_residual, mlf_frac_identity_residual, DerivIdentity, FracIdentity, MlfParams,
};
use crate::quad::{gamma, rgamma};
use crate::spectral::{
    bessel_diagnostic, eigenpairs, ModalBasis, Operator1d, OperatorSpec, SpatialGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;
use std::time::Instant;

pub fn run_task(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    match sc.task {
        Task::Direct => run_direct(sc, out, rep),
        Task::Ip1 => run_ip1(sc, out, rep),
        Task::Ip2 => run_ip2(sc, out, rep),
        Task::MlfTable => run_mlf_table(sc, out, rep),
        Task::Convergence => run_convergence(sc, out, rep),
        Task::PropsCheck => run_props(sc, out, rep),
    }
}

fn setup(sc: &Scenario, grid: GridConfig) -> Result<(Problem, Arc<ModalBasis>)> {
    let p = sc
        .problem
        .as_ref()
        .ok_or_else(|| Error::config("problem", "required for this task"))?;
    let (pb, basis) = build_problem(p, grid)?;
    Ok((pb, Arc::new(basis)))
}

fn grid_of(sc: &Scenario) -> Result<GridConfig> {
    sc.grid
        .ok_or_else(|| Error::config("grid", "required for this task"))
}

fn stride(given: usize, n: usize) -> usize {
    if given > 0 {
        given
    } else {
        (n / 64).max(1)
    }
}

fn strided(n: usize, s: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).step_by(s).collect();
    if v.last() != Some(&(n - 1)) {
        v.push(n - 1);
    }
    v
}

fn space_indices(grid: &SpatialGrid, s: usize) -> Vec<usize> {
    match grid {
        SpatialGrid::Line { x } => strided(x.len(), stride(s, x.len())),
        SpatialGrid::Plane { x, y } => {
            let (sx, sy) = (stride(s, x.len()), stride(s, y.len()));
            let mut out = Vec::new();
            for i in strided(x.len(), sx) {
                for j in strided(y.len(), sy) {
                    out.push(i * y.len() + j);
                }
            }
            out
        }
    }
}

fn space_header(grid: &SpatialGrid) -> Vec<&'static str> {
    if grid.dim() == 2 {
        vec!["x", "y"]
    } else {
        vec!["x"]
    }
}

fn space_cells(grid: &SpatialGrid, k: usize) -> Vec<Cell> {
    let (x, y) = grid.point(k);
    if grid.dim() == 2 {
        vec![x.into(), y.into()]
    } else {
        vec![x.into()]
    }
}

fn write_field(sc: &Scenario, fld: &Field, out: &mut OutputDir) -> Result<()> {
    let grid = fld.basis().grid();
    let m = fld.grid().steps();
    let times = strided(m + 1, stride(sc.output.time_stride, m));
    let pts = space_indices(grid, sc.output.space_stride);
    let mut header = vec!["t"];
    header.extend(space_header(grid));
    header.extend(["u", "u_t"]);
    let mut rows = Vec::new();
    for &i in &times {
        let (u, ut) = (fld.u_at(i), fld.ut_at(i));
        for &k in &pts {
            let mut row: Vec<Cell> = vec![fld.grid().node(i).into()];
            row.extend(space_cells(grid, k));
            row.push(u[k].into());
            row.push(ut[k].into());
            rows.push(row);
        }
    }
    out.csv("field.csv", &header, rows)?;
    let names: Vec<String> = (1..=fld.n_modes()).map(|n| format!("u_{n}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(|s| s.as_str()));
    let rows = times.iter().map(|&i| {
        let mut row: Vec<Cell> = vec![fld.grid().node(i).into()];
        row.extend((0..fld.n_modes()).map(|n| Cell::F(fld.modal(n)[i])));
        row
    });
    out.csv("modal.csv", &header, rows)?;
    if sc.output.field_bin {
        out.bytes("field.bin", &encode_field(fld))?;
    }
    Ok(())
}

fn max_modal_residual(fld: &Field, f: &TimeSeries) -> Result<f64> {
    let r: Vec<f64> = (0..fld.n_modes())
        .into_par_iter()
        .map(|n| modal_residual(fld, f, n))
        .collect::<Result<_>>()?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

fn run_direct(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let (pb, basis) = setup(sc, grid_of(sc)?)?;
    rep.timing("setup", t0.elapsed().as_secs_f64());
    let t1 = Instant::now();
    let fld = direct_solve_in(&pb.spec, basis)?;
    rep.timing("solve", t1.elapsed().as_secs_f64());
    let f = pb.spec.f.as_ref().expect("validated");
    let t2 = Instant::now();
    let res = max_modal_residual(&fld, f)?;
    rep.timing("residual", t2.elapsed().as_secs_f64());
    rep.at_most("modal-residual", res, sc.tolerances.modal_residual);
    rep.metric("truncation_share", fld.truncation_share());
    write_field(sc, &fld, out)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// g(t) from the config or from a forward solve with the true f.
fn ip1_data(pb: &Problem, basis: &Arc<ModalBasis>) -> Result<TimeSeries> {
    match &pb.g {
        Some(e) => Ok(sample_time(e, pb.spec.grid)),
        None => {
            let fld = direct_solve_in(&pb.spec, basis.clone())?;
            observe_g(&fld, pb.spec.h.as_ref().expect("validated"))
        }
    }
}

/// Max error of an IP1 reconstruction relative to max |f*|.
fn ip1_error(f: &TimeSeries, truth: &TimeSeries) -> f64 {
    sup_diff(f.values(), truth.values()) / sup(truth.values()).max(f64::MIN_POSITIVE)
}

fn run_ip1(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let (pb, basis) = setup(sc, grid_of(sc)?)?;
    let g = ip1_data(&pb, &basis)?;
    rep.timing("data", t0.elapsed().as_secs_f64());
    let mut spec = pb.spec.clone();
    let truth = spec.f.take();
    let tol = sc
        .tolerances
        .compat
        .unwrap_or_else(|| default_tol_compat(g.values()[0]));
    let d = Ip1Data {
        spec,
        g: g.clone(),
        tol_compat: Some(tol),
    };
    let t1 = Instant::now();
    let (f, diag) = match ip1_solve_in(&d, basis) {
        Err(Error::IncompatibleData { residual, tol }) => {
            rep.at_most("compatibility", residual, tol);
            return Ok(());
        }
        r => r?,
    };
    rep.timing("solve", t1.elapsed().as_secs_f64());
    rep.at_most("compatibility", diag.compat_residual, tol);
    let fwd = diag.forward_residual / diag.g_sup.max(f64::MIN_POSITIVE);
    rep.at_most("forward-residual", fwd, sc.tolerances.forward_residual);
    rep.metric("hnorm2", diag.hnorm2);
    rep.metric("tail_bound", diag.tail_bound);
    let mut errors: Vec<(&str, f64)> = vec![
        ("compat_residual", diag.compat_residual),
        ("forward_residual", diag.forward_residual),
        ("tail_bound", diag.tail_bound),
    ];
    if let Some(t) = &truth {
        let e = ip1_error(&f, t);
        rep.at_most("reconstruction-error", e, sc.tolerances.reconstruction);
        errors.push(("max_relative_error", e));
    }
    let nodes = f.grid().nodes();
    let mut header = vec!["t", "f"];
    if truth.is_some() {
        header.push("f_true");
    }
    let rows = (0..nodes.len()).map(|i| {
        let mut row: Vec<Cell> = vec![nodes[i].into(), f.values()[i].into()];
        if let Some(t) = &truth {
            row.push(t.values()[i].into());
        }
        row
    });
    out.csv("f_reconstructed.csv", &header, rows)?;
    out.csv(
        "errors.csv",
        &["metric", "value"],
        errors.into_iter().map(|(k, v)| vec![k.into(), v.into()]),
    )
}

fn weighted_l2(basis: &ModalBasis, v: &[f64]) -> f64 {
    basis.inner(v, v).max(0.0).sqrt()
}

fn run_ip2(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let (pb, basis) = setup(sc, grid_of(sc)?)?;
    let f = pb.spec.f.clone().expect("validated");
    let twin = match &pb.omega {
        Some(_) => None,
        None => Some(direct_solve_in(&pb.spec, basis.clone())?),
    };
    let omega = match (&pb.omega, &twin) {
        (Some(e), _) => sample_space(e, &basis),
        (None, Some(fld)) => observe_omega(fld, &f)?,
        (None, None) => unreachable!(),
    };
    rep.timing("data", t0.elapsed().as_secs_f64());
    let mut spec = pb.spec.clone();
    let truth = spec.h.take();
    let t1 = Instant::now();
    let (h, diag) = ip2_solve_in(
        &Ip2Data {
            spec,
            omega: omega.clone(),
        },
        basis.clone(),
    )?;
    rep.timing("solve", t1.elapsed().as_secs_f64());
    rep.metric("excluded_modes", diag.excluded.len() as f64);
    if let Some(t) = &truth {
        let diff: Vec<f64> = h.iter().zip(t).map(|(a, b)| a - b).collect();
        let e = weighted_l2(&basis, &diff) / weighted_l2(&basis, t).max(f64::MIN_POSITIVE);
        rep.at_most("reconstruction-l2", e, sc.tolerances.ip2_l2);
    }
    if let (Some(fld), true) = (&twin, pb.zero_initial) {
        let zero = ip2_energy_check(&fld.scaled(0.0), &pb.spec.op, pb.spec.order)?;
        rep.at_most("energy-zero", zero.total.abs(), sc.tolerances.energy_zero);
        let e = ip2_energy_check(fld, &pb.spec.op, pb.spec.order)?;
        rep.at_least("energy-separation", e.total, sc.tolerances.energy_min);
        rep.metric("energy_frac", e.lhs_frac);
        rep.metric("energy_elliptic", e.lhs_elliptic);
        rep.metric("energy_elliptic_quadrature", e.lhs_elliptic_quadrature);
    }
    if let (Some(fld), Some(fe)) = (&twin, &pb.f) {
        if fe.vars().is_empty() {
            // constant forcing: ω = f (u(T) − φ)
            let c = fe.eval(0.0, 0.0, 0.0);
            let m = fld.grid().steps();
            let offset: Vec<f64> = fld
                .u_at(m)
                .iter()
                .zip(fld.u_at(0))
                .map(|(a, b)| c * (a - b))
                .collect();
            rep.at_most("final-offset", sup_diff(&omega, &offset), 1e-6);
        }
    }
    let grid = basis.grid();
    let mut header = space_header(grid);
    header.push("h");
    if truth.is_some() {
        header.push("h_true");
    }
    let rows = (0..grid.len()).map(|k| {
        let mut row = space_cells(grid, k);
        row.push(h[k].into());
        if let Some(t) = &truth {
            row.push(t[k].into());
        }
        row
    });
    out.csv("h_reconstructed.csv", &header, rows)?;
    let rows = (0..basis.n_modes()).map(|n| {
        vec![
            Cell::U(n + 1),
            basis.lambdas()[n].into(),
            diag.sensitivity[n].into(),
            diag.homogeneous[n].into(),
            diag.coeffs[n].into(),
            Cell::U(diag.excluded.contains(&n) as usize),
        ]
    });
    out.csv(
        "modes.csv",
        &["n", "lambda", "b", "a", "h_n", "excluded"],
        rows,
    )
}

fn run_mlf_table(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let cfg = sc.mlf_table.as_ref().expect("validated");
    let mut rows = Vec::new();
    let mut norm_err = 0.0f64;
    let mut envelope = 0.0f64;
    for &a in &cfg.alphas {
        for &b in &cfg.betas {
            let p = MlfParams::new(a, b).map_err(|e| Error::config("mlf_table", e.to_string()))?;
            norm_err = norm_err.max((p.eval(0.0)? - rgamma(b)).abs());
            for &z in &cfg.z {
                if z > 0.0 {
                    return Err(Error::config(
                        "mlf_table.z",
                        "arguments must be non-positive",
                    ));
                }
                let v = p.eval(z)?;
                envelope = envelope.max(v.abs() * (1.0 + z.abs()));
                rows.push(vec![a.into(), b.into(), z.into(), v.into()]);
            }
        }
    }
    rep.at_most("normalization", norm_err, 1e-14);
    rep.metric("envelope", envelope);
    if let Some(c) = cfg.envelope {
        rep.at_most("envelope", envelope, c);
    }
    out.csv("mlf_table.csv", &["alpha", "beta", "z", "value"], rows)
}

/// f(t) = a + b t when the samples are affine.
fn affine(f: &TimeSeries) -> Option<(f64, f64)> {
    let v = f.values();
    let t = f.grid().t_final();
    let (a, b) = (v[0], (v[v.len() - 1] - v[0]) / t);
    let scale = sup(v).max(1.0);
    f.grid()
        .nodes()
        .iter()
        .zip(v)
        .all(|(s, y)| (a + b * s - y).abs() <= 1e-12 * scale)
        .then_some((a, b))
}

/// Closed-form modal trajectories for affine forcing.
fn direct_error(fld: &Field, phi: &[f64], psi: &[f64], h: &[f64], fab: (f64, f64)) -> Result<f64> {
    let a = fld.order().alpha();
    let nodes = fld.grid().nodes();
    let errs: Vec<f64> = (0..fld.n_modes())
        .into_par_iter()
        .map(|n| -> Result<f64> {
            let lam = fld.basis().lambdas()[n];
            let e1 = mlf_samples(a, 1.0, lam, &nodes)?;
            let e2 = mlf_samples(a, 2.0, lam, &nodes)?;
            let e3 = mlf_samples(a, a + 1.0, lam, &nodes)?;
            let e4 = mlf_samples(a, a + 2.0, lam, &nodes)?;
            let u = fld.modal(n);
            Ok(nodes
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let exact = phi[n] * e1[i]
                        + psi[n] * t * e2[i]
                        + h[n] * (fab.0 * t.powf(a) * e3[i] + fab.1 * t.powf(a + 1.0) * e4[i]);
                    (u[i] - exact).abs()
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn power_ladder_error(c: &ConvergenceConfig, alpha: f64, t_final: f64, m: usize) -> Result<f64> {
    let grid = TimeGrid::new(t_final, m)?;
    let p = c.power;
    let y = TimeSeries::from_fn(grid, |t| t.powf(p));
    let (num, exact): (TimeSeries, Box<dyn Fn(f64) -> f64>) = match c.target {
        ConvergenceTarget::RlIntegral => {
            let mu = c.mu;
            (
                rl_integral(&y, mu)?,
                Box::new(move |t: f64| gamma(p + 1.0) * rgamma(p + 1.0 + mu) * t.powf(p + mu)),
            )
        }
        _ => {
            let order = FracOrder::new(alpha)?;
            (
                caputo_deriv_high(&y, order)?,
                Box::new(move |t: f64| {
                    gamma(p + 1.0) * rgamma(p + 1.0 - alpha) * t.powf(p - alpha)
                }),
            )
        }
    };
    Ok(grid
        .nodes()
        .iter()
        .zip(num.values())
        .skip(1)
        .fold(0.0, |m, (t, v)| m.max((v - exact(*t)).abs())))
}

fn run_convergence(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let c = sc.convergence.as_ref().expect("validated");
    let mut errors = Vec::new();
    for (r, &[steps, modes, points]) in c.ladder.iter().enumerate() {
        let t0 = Instant::now();
        let g = GridConfig {
            steps,
            modes,
            points,
        };
        let e = match c.target {
            ConvergenceTarget::Direct => {
                let (mut pb, basis) = setup(sc, g)?;
                let n = basis.n_points();
                pb.spec
                    .f
                    .get_or_insert_with(|| TimeSeries::zeros(pb.spec.grid));
                pb.spec.h.get_or_insert_with(|| vec![0.0; n]);
                let fld = direct_solve_in(&pb.spec, basis.clone())?;
                let f = pb.spec.f.as_ref().expect("set above");
                let fab = affine(f).ok_or_else(|| {
                    Error::config(
                        "problem.f",
                        "direct convergence needs an affine f(t) with a closed form",
                    )
                })?;
                let proj = |v: &[f64]| crate::spectral::project(v, &basis).map(|c| c.values);
                direct_error(
                    &fld,
                    &proj(&pb.spec.phi)?,
                    &proj(&pb.spec.psi)?,
                    &proj(pb.spec.h.as_ref().expect("set above"))?,
                    fab,
                )?
            }
            ConvergenceTarget::Ip1 => {
                let (pb, basis) = setup(sc, g)?;
                let truth = pb.spec.f.clone().ok_or_else(|| {
                    Error::config("problem.f", "ip1 convergence needs the true f")
                })?;
                let gdata = ip1_data(&pb, &basis)?;
                let mut spec = pb.spec.clone();
                spec.f = None;
                let d = Ip1Data {
                    spec,
                    g: gdata,
                    tol_compat: sc.tolerances.compat,
                };
                ip1_error(&ip1_solve_in(&d, basis)?.0, &truth)
            }
            _ => {
                let alpha = sc.problem.as_ref().map(|p| p.alpha).unwrap_or(1.5);
                let t_final = sc.problem.as_ref().map(|p| p.t_final).unwrap_or(1.0);
                power_ladder_error(c, alpha, t_final, steps)?
            }
        };
        rep.timing(&format!("rung{r}"), t0.elapsed().as_secs_f64());
        errors.push(e);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ratio = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if c.monotone {
        rep.at_most("monotone-decrease", ratio, 1.0);
    }
    if let Some(p) = c.min_order {
        rep.at_least(
            "min-order",
            orders.iter().cloned().fold(f64::INFINITY, f64::min),
            p,
        );
    }
    if let Some(e) = c.max_error {
        rep.at_most("max-error", errors.iter().cloned().fold(0.0, f64::max), e);
    }
    let rows = c.ladder.iter().enumerate().map(|(r, rung)| {
        vec![
            Cell::U(r),
            Cell::U(rung[0]),
            Cell::U(rung[1]),
            Cell::U(rung[2]),
            errors[r].into(),
            if r == 0 {
                Cell::S(String::new())
            } else {
                orders[r - 1].into()
            },
        ]
    });
    out.csv(
        "convergence.csv",
        &["rung", "steps", "modes", "points", "error", "order"],
        rows,
    )
}

fn alpha_tag(a: f64) -> String {
    format!("a{a:?}")
}

fn run_props(sc: &Scenario, out: &mut OutputDir, rep: &mut RunReport) -> Result<()> {
    let default = PropsConfig::default();
    let cfg = sc.props.as_ref().unwrap_or(&default);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut record = |rep: &mut RunReport, name: String, value: f64, thr: f64, at_most: bool| {
        let pass = if at_most {
            rep.at_most(&name, value, thr)
        } else {
            rep.at_least(&name, value, thr)
        };
        rows.push(vec![
            Cell::S(name),
            value.into(),
            thr.into(),
            Cell::U(pass as usize),
        ]);
    };
    for &alpha in &cfg.alphas {
        let order =
            FracOrder::new(alpha).map_err(|e| Error::config("props.alphas", e.to_string()))?;
        let tag = alpha_tag(alpha);
        let pairs: Vec<(f64, f64)> = (0..cfg.samples)
            .map(|_| (rng.gen_range(0.5..50.0), rng.gen_range(0.1..1.0)))
            .collect();
        for (kind, name) in [
            (DerivIdentity::E1ToEaa, "deriv-e1"),
            (DerivIdentity::TE2ToE1, "deriv-te2"),
            (DerivIdentity::TEaaToEaa1, "deriv-teaa"),
        ] {
            let mut worst = 0.0f64;
            for &(lam, t) in &pairs {
                worst = worst.max(mlf_deriv_identity_residual(
                    kind,
                    alpha,
                    lam,
                    t,
                    cfg.fd_step,
                )?);
            }
            record(rep, format!("{name}-{tag}"), worst, cfg.fd_tol, true);
        }
        let grid = TimeGrid::new(1.0, cfg.identity_steps)?;
        let f = TimeSeries::from_fn(grid, |t| 1.0 + t);
        for (kind, name) in [
            (FracIdentity::EaaToE1, "frac-eaa"),
            (FracIdentity::E1ToTE2, "frac-e1"),
            (FracIdentity::Convolution, "frac-conv"),
        ] {
            let mut worst = 0.0f64;
            for &lam in &cfg.lambdas {
                worst = worst.max(mlf_frac_identity_residual(
                    kind,
                    order,
                    lam,
                    grid,
                    Some(&f),
                )?);
            }
            record(rep, format!("{name}-{tag}"), worst, cfg.identity_tol, true);
        }
        let egrid = TimeGrid::new(1.0, cfg.energy_steps)?;
        let mut min_gap = f64::INFINITY;
        for _ in 0..cfg.energy_samples {
            let k = rng.gen_range(1..=5usize);
            let terms: Vec<(f64, f64, f64)> = (0..k)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(1..=8usize) as f64 * std::f64::consts::PI,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let dot = TimeSeries::from_fn(egrid, |t| {
                terms
                    .iter()
                    .map(|(c, w, p)| c * w * (w * t + p).cos())
                    .sum()
            });
            min_gap = min_gap.min(energy_inequality(order, &dot)?.gap());
        }
        record(
            rep,
            format!("energy-inequality-{tag}"),
            min_gap,
            -cfg.energy_tol,
            false,
        );
    }
    let op = OperatorSpec::Interval(Operator1d::laplacian(1.0));
    let basis = eigenpairs(&op, cfg.bessel_modes, cfg.bessel_points)?;
    let he =
        Expr::parse(&cfg.bessel_h).map_err(|e| Error::config("props.bessel_h", e.to_string()))?;
    let hv = sample_space(&he, &basis);
    let b = bessel_diagnostic(&hv, &basis, &op)?;
    record(rep, "parseval-gap".into(), b.parseval_gap, 1e-6, true);
    record(
        rep,
        "bessel-ratio".into(),
        b.bessel_lhs / b.bessel_rhs.max(f64::MIN_POSITIVE),
        1.0 + 1e-6,
        true,
    );
    out.csv("props.csv", &["check", "value", "threshold", "pass"], rows)
}
