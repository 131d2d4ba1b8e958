//! Scenario files: a JSON tree with dotted-path overrides.

use super::expr::{Expr, Var};
use crate::direct::ProblemSpec;
use crate::error::{Error, Result};
use crate::fracops::{FracOrder, TimeGrid, TimeSeries};
use crate::spectral::{Coefficient, ModalBasis, Operator1d, OperatorSpec};
use serde::Deserialize;
use serde_json::Value;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Direct,
    Ip1,
    Ip2,
    MlfTable,
    Convergence,
    PropsCheck,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub mlf_table: Option<MlfTableConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub props: Option<PropsConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default = "zero_expr")]
    pub phi: String,
    #[serde(default = "zero_expr")]
    pub psi: String,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub h: Option<String>,
    /// Measured g(t) for IP1; synthesized from f when absent.
    #[serde(default)]
    pub g: Option<String>,
    /// Measured ω(x) for IP2; synthesized from h when absent.
    #[serde(default)]
    pub omega: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        #[serde(default = "one")]
        length: f64,
        #[serde(default = "one_expr")]
        a: String,
        #[serde(default = "zero_expr")]
        c: String,
    },
    /// Separable operator; each coefficient is a function of its own coordinate.
    Rectangle {
        lengths: [f64; 2],
        #[serde(default = "unit_pair")]
        a: [String; 2],
        #[serde(default = "zero_pair")]
        c: [String; 2],
    },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Interval {
            length: 1.0,
            a: one_expr(),
            c: zero_expr(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Time steps M.
    pub steps: usize,
    /// Retained modes N.
    pub modes: usize,
    /// Spatial intervals J (per axis on a rectangle).
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub modal_residual: f64,
    pub reconstruction: f64,
    pub forward_residual: f64,
    pub compat: Option<f64>,
    pub ip2_l2: f64,
    pub energy_min: f64,
    pub energy_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            modal_residual: 1e-3,
            reconstruction: 1e-3,
            forward_residual: 1e-4,
            compat: None,
            ip2_l2: 1e-2,
            energy_min: 1e-4,
            energy_zero: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Write every k-th time level to CSV; 0 picks about 64 levels.
    pub time_stride: usize,
    /// Write every k-th spatial point to CSV; 0 picks about 64 points per axis.
    pub space_stride: usize,
    pub field_bin: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlfTableConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub z: Vec<f64>,
    #[serde(default)]
    pub envelope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceTarget {
    Direct,
    Ip1,
    RlIntegral,
    CaputoHigh,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub target: ConvergenceTarget,
    /// Rungs of (M, N, J).
    pub ladder: Vec<[usize; 3]>,
    #[serde(default)]
    pub min_order: Option<f64>,
    #[serde(default)]
    pub max_error: Option<f64>,
    /// Require the error to decrease from rung to rung.
    #[serde(default = "yes")]
    pub monotone: bool,
    /// Power p of the test input t^p for the fracops targets.
    #[serde(default = "two")]
    pub power: f64,
    /// Order of the fractional integral for `rl-integral`.
    #[serde(default = "half")]
    pub mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropsConfig {
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub fd_step: f64,
    pub fd_tol: f64,
    pub identity_steps: usize,
    pub identity_tol: f64,
    pub lambdas: Vec<f64>,
    pub energy_samples: usize,
    pub energy_steps: usize,
    pub energy_tol: f64,
    pub bessel_h: String,
    pub bessel_modes: usize,
    pub bessel_points: usize,
}

impl Default for PropsConfig {
    fn default() -> Self {
        Self {
            alphas: vec![1.25, 1.5, 1.75],
            seed: 20240601,
            samples: 50,
            fd_step: 1e-5,
            fd_tol: 1e-6,
            identity_steps: 512,
            identity_tol: 0.05,
            lambdas: vec![1.0, 10.0],
            energy_samples: 100,
            energy_steps: 1024,
            energy_tol: 1e-8,
            bessel_h: "x*(1-x)".into(),
            bessel_modes: 64,
            bessel_points: 1024,
        }
    }
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn zero_expr() -> String {
    "0".into()
}
fn one_expr() -> String {
    "1".into()
}
fn unit_pair() -> [String; 2] {
    [one_expr(), one_expr()]
}
fn zero_pair() -> [String; 2] {
    [zero_expr(), zero_expr()]
}

/// Sets `path` (dot separated) in a JSON tree. The value is read as JSON when
/// it parses and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let value =
        serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::config(path, "empty path segment"));
        }
        let obj = match node {
            Value::Object(m) => m,
            _ => {
                return Err(Error::config(
                    path,
                    format!("`{}` is not an object", keys[..i].join(".")),
                ))
            }
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields a segment")
}

fn serde_field(msg: &str) -> String {
    for pat in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = msg.split(pat).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "<scenario>".into()
}

pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut tree: Value =
        serde_json::from_str(text).map_err(|e| Error::config("<json>", format!("{e}")))?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let sc: Scenario = serde_json::from_value(tree).map_err(|e| {
        let msg = e.to_string();
        Error::config(serde_field(&msg), msg)
    })?;
    validate(&sc)?;
    Ok(sc)
}

pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, overrides)
}

fn needs_problem(task: Task) -> bool {
    matches!(task, Task::Direct | Task::Ip1 | Task::Ip2)
}

fn validate(sc: &Scenario) -> Result<()> {
    let need = |ok: bool, field: &str, msg: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::config(field, msg))
        }
    };
    if needs_problem(sc.task) {
        let p = sc
            .problem
            .as_ref()
            .ok_or_else(|| Error::config("problem", "required for this task"))?;
        need(sc.grid.is_some(), "grid", "required for this task")?;
        parse_field("problem.phi", &p.phi, &[Var::X, Var::Y])?;
        parse_field("problem.psi", &p.psi, &[Var::X, Var::Y])?;
        match sc.task {
            Task::Direct => {
                need(p.f.is_some(), "problem.f", "required for the direct task")?;
                need(p.h.is_some(), "problem.h", "required for the direct task")?;
            }
            Task::Ip1 => {
                need(p.h.is_some(), "problem.h", "required for ip1")?;
                need(
                    p.f.is_some() || p.g.is_some(),
                    "problem.g",
                    "ip1 needs g(t) or a true f(t) to synthesize it",
                )?;
            }
            Task::Ip2 => {
                need(p.f.is_some(), "problem.f", "required for ip2")?;
                need(
                    p.h.is_some() || p.omega.is_some(),
                    "problem.omega",
                    "ip2 needs omega(x) or a true h(x) to synthesize it",
                )?;
            }
            _ => {}
        }
        for (name, src, vars) in [
            ("problem.f", &p.f, &[Var::T][..]),
            ("problem.g", &p.g, &[Var::T][..]),
            ("problem.h", &p.h, &[Var::X, Var::Y][..]),
            ("problem.omega", &p.omega, &[Var::X, Var::Y][..]),
        ] {
            if let Some(s) = src {
                parse_field(name, s, vars)?;
            }
        }
        FracOrder::new(p.alpha).map_err(|e| Error::config("problem.alpha", e.to_string()))?;
        TimeGrid::new(p.t_final, 2).map_err(|e| Error::config("problem.t_final", e.to_string()))?;
    }
    match sc.task {
        Task::MlfTable => need(
            sc.mlf_table.is_some(),
            "mlf_table",
            "required for mlf-table",
        )?,
        Task::Convergence => {
            let c = sc
                .convergence
                .as_ref()
                .ok_or_else(|| Error::config("convergence", "required for convergence"))?;
            need(
                c.ladder.len() >= 3,
                "convergence.ladder",
                "at least three rungs are required",
            )?;
            if matches!(c.target, ConvergenceTarget::Direct | ConvergenceTarget::Ip1) {
                need(
                    sc.problem.is_some(),
                    "problem",
                    "required for this convergence target",
                )?;
            }
        }
        _ => {}
    }
    Ok(())
}

pub fn parse_field(name: &str, src: &str, allowed: &[Var]) -> Result<Expr> {
    let e = Expr::parse(src).map_err(|e| Error::config(name, format!("`{src}`: {e}")))?;
    if let Some(v) = e.vars().into_iter().find(|v| !allowed.contains(v)) {
        return Err(Error::config(
            name,
            format!("`{src}` may not depend on {v}"),
        ));
    }
    Ok(e)
}

fn coefficient(name: &str, src: &str) -> Result<Coefficient> {
    let e = parse_field(name, src, &[Var::X, Var::Y])?;
    if e.vars().is_empty() {
        return Ok(Coefficient::Constant(e.eval(0.0, 0.0, 0.0)));
    }
    Ok(Coefficient::function(move |s| e.eval(s, s, 0.0)))
}

pub fn operator(d: &DomainConfig) -> Result<OperatorSpec> {
    let op = match d {
        DomainConfig::Interval { length, a, c } => OperatorSpec::Interval(Operator1d::new(
            *length,
            coefficient("problem.domain.a", a)?,
            coefficient("problem.domain.c", c)?,
        )),
        DomainConfig::Rectangle { lengths, a, c } => OperatorSpec::Rectangle(
            Operator1d::new(
                lengths[0],
                coefficient("problem.domain.a[0]", &a[0])?,
                coefficient("problem.domain.c[0]", &c[0])?,
            ),
            Operator1d::new(
                lengths[1],
                coefficient("problem.domain.a[1]", &a[1])?,
                coefficient("problem.domain.c[1]", &c[1])?,
            ),
        ),
    };
    op.validate()
        .map_err(|e| Error::config("problem.domain", e.to_string()))?;
    Ok(op)
}

/// Parsed problem: the core spec plus the closed forms it was sampled from.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub f: Option<Expr>,
    pub h: Option<Expr>,
    pub g: Option<Expr>,
    pub omega: Option<Expr>,
    pub zero_initial: bool,
}

pub fn sample_space(e: &Expr, basis: &ModalBasis) -> Vec<f64> {
    basis.grid().sample(|x, y| e.eval(x, y, 0.0))
}

pub fn sample_time(e: &Expr, grid: TimeGrid) -> TimeSeries {
    TimeSeries::from_fn(grid, |t| e.eval(0.0, 0.0, t))
}

/// Builds the spec for grid `g`; the basis is computed by the caller.
pub fn build_problem(p: &ProblemConfig, g: GridConfig) -> Result<(Problem, ModalBasis)> {
    let order =
        FracOrder::new(p.alpha).map_err(|e| Error::config("problem.alpha", e.to_string()))?;
    let grid = TimeGrid::new(p.t_final, g.steps)
        .map_err(|e| Error::config("grid.steps", e.to_string()))?;
    let op = operator(&p.domain)?;
    let basis = crate::spectral::eigenpairs(&op, g.modes, g.points)
        .map_err(|e| Error::config("grid", e.to_string()))?;
    let space = |name: &str, s: &str| parse_field(name, s, &[Var::X, Var::Y]);
    let phi_e = space("problem.phi", &p.phi)?;
    let psi_e = space("problem.psi", &p.psi)?;
    let f =
        p.f.as_deref()
            .map(|s| parse_field("problem.f", s, &[Var::T]))
            .transpose()?;
    let g_e =
        p.g.as_deref()
            .map(|s| parse_field("problem.g", s, &[Var::T]))
            .transpose()?;
    let h = p.h.as_deref().map(|s| space("problem.h", s)).transpose()?;
    let omega = p
        .omega
        .as_deref()
        .map(|s| space("problem.omega", s))
        .transpose()?;
    let spec = ProblemSpec {
        order,
        grid,
        op,
        n_modes: g.modes,
        points: g.points,
        phi: sample_space(&phi_e, &basis),
        psi: sample_space(&psi_e, &basis),
        f: f.as_ref().map(|e| sample_time(e, grid)),
        h: h.as_ref().map(|e| sample_space(e, &basis)),
    };
    Ok((
        Problem {
            spec,
            f,
            h,
            g: g_e,
            omega,
            zero_initial: phi_e.is_zero() && psi_e.is_zero(),
        },
        basis,
    ))
}
