//! Dirichlet eigenpairs of L = d/dx(a(x) d/dx) − c(x) and modal projections.
//!
//! Eigenpairs come from a Rayleigh–Ritz problem in the sine basis
//! φ_k(x) = √(2/ℓ) sin(kπx/ℓ), k = 1..K. The stiffness matrix only needs the
//! cosine moments of a and c, and the sampled modes are exactly orthonormal
//! under the trapezoid rule on the uniform grid.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type CoefficientFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A spatial coefficient a(x) or c(x) on [0, ℓ].
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function(CoefficientFn),
    /// Values on a uniform grid spanning [0, ℓ], linearly interpolated.
    Samples(Vec<f64>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(v) => write!(f, "Constant({v})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
            Coefficient::Samples(v) => write!(f, "Samples(len = {})", v.len()),
        }
    }
}

impl Coefficient {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Function(f) => f(x),
            Coefficient::Samples(v) => {
                let n = v.len() - 1;
                if n == 0 {
                    return v[0];
                }
                let s = (x / length * n as f64).clamp(0.0, n as f64);
                let i = (s.floor() as usize).min(n - 1);
                let w = s - i as f64;
                v[i] * (1.0 - w) + v[i + 1] * w
            }
        }
    }

    fn probe(&self, length: f64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..=4096)
            .map(|i| self.eval(length * i as f64 / 4096.0, length))
            .collect();
        if let Coefficient::Samples(v) = self {
            out.extend_from_slice(v);
        }
        out
    }
}

/// The 1D operator d/dx(a d/dx) − c on (0, ℓ) with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct Operator1d {
    pub length: f64,
    pub a: Coefficient,
    pub c: Coefficient,
    /// Ellipticity constant: a ≥ delta > 0 is required wherever sampled.
    pub delta: f64,
}

impl Operator1d {
    pub fn new(length: f64, a: Coefficient, c: Coefficient) -> Self {
        Self {
            length,
            a,
            c,
            delta: 0.0,
        }
    }

    pub fn laplacian(length: f64) -> Self {
        Self::new(
            length,
            Coefficient::Constant(1.0),
            Coefficient::Constant(0.0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::domain(format!(
                "domain length {} must be positive",
                self.length
            )));
        }
        if let Coefficient::Samples(v) = &self.a {
            if v.is_empty() {
                return Err(Error::domain("empty coefficient samples for a"));
            }
        }
        if let Coefficient::Samples(v) = &self.c {
            if v.is_empty() {
                return Err(Error::domain("empty coefficient samples for c"));
            }
        }
        let amin = self
            .a
            .probe(self.length)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if !(amin > 0.0 && amin >= self.delta) {
            return Err(Error::Ellipticity(format!(
                "min a = {amin} violates a >= delta = {} > 0",
                self.delta
            )));
        }
        let cmin = self
            .c
            .probe(self.length)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if !(cmin >= 0.0) {
            return Err(Error::domain(format!(
                "c must be non-negative, found {cmin}"
            )));
        }
        Ok(())
    }
}

/// Interval (0, ℓ) or separable rectangle (0, ℓ₁) × (0, ℓ₂).
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    Interval(Operator1d),
    /// L = ∂_x(a_x ∂_x) + ∂_y(a_y ∂_y) − c_x(x) − c_y(y).
    Rectangle(Operator1d, Operator1d),
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Interval(op) => op.validate(),
            OperatorSpec::Rectangle(x, y) => {
                x.validate()?;
                y.validate()
            }
        }
    }
}

/// Spatial sampling points of a basis; rectangle values are flattened as i·(ny) + j.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialGrid {
    Line { x: Vec<f64> },
    Plane { x: Vec<f64>, y: Vec<f64> },
}

impl SpatialGrid {
    pub fn len(&self) -> usize {
        match self {
            SpatialGrid::Line { x } => x.len(),
            SpatialGrid::Plane { x, y } => x.len() * y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            SpatialGrid::Line { .. } => 1,
            SpatialGrid::Plane { .. } => 2,
        }
    }

    /// Coordinates of flattened point `k`; y = 0 on a line.
    pub fn point(&self, k: usize) -> (f64, f64) {
        match self {
            SpatialGrid::Line { x } => (x[k], 0.0),
            SpatialGrid::Plane { x, y } => (x[k / y.len()], y[k % y.len()]),
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match self {
            SpatialGrid::Line { x } => k == 0 || k + 1 == x.len(),
            SpatialGrid::Plane { x, y } => {
                let (i, j) = (k / y.len(), k % y.len());
                i == 0 || j == 0 || i + 1 == x.len() || j + 1 == y.len()
            }
        }
    }

    /// Samples `f(x, y)` at every point.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }
}

/// Eigenvalues, sampled orthonormal eigenfunctions and quadrature weights.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    lambdas: Vec<f64>,
    modes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    grid: SpatialGrid,
}

impl ModalBasis {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn mode(&self, n: usize) -> &[f64] {
        &self.modes[n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Discrete inner product with the basis weights.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u)
            .zip(v)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// Keeps the first `n` modes.
    pub fn truncated(&self, n: usize) -> ModalBasis {
        let n = n.min(self.n_modes());
        ModalBasis {
            lambdas: self.lambdas[..n].to_vec(),
            modes: self.modes[..n].to_vec(),
            weights: self.weights.clone(),
            grid: self.grid.clone(),
        }
    }
}

/// Coefficients (f, X_n) of a spatial function.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoeffs {
    pub values: Vec<f64>,
}

impl ModalCoeffs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ritz basis size used for `n` requested modes on `j` intervals.
pub fn ritz_size(n: usize, j: usize) -> usize {
    (2 * n).max((j / 2).min(512)).min(j - 1)
}

/// Cosine moments ∫₀^ℓ g(x) cos(mπx/ℓ) dx for m = 0..=m_max.
fn cosine_moments(g: &Coefficient, length: f64, m_max: usize) -> Vec<f64> {
    if let Coefficient::Constant(v) = g {
        let mut out = vec![0.0; m_max + 1];
        out[0] = v * length;
        return out;
    }
    let per_panel = 8;
    let (gx, gw) = gauss_legendre(per_panel);
    let panels = match g {
        Coefficient::Samples(v) => {
            let intervals = (v.len() - 1).max(1);
            intervals * (4 * m_max.max(16)).div_ceil(intervals)
        }
        _ => 4 * m_max.max(16),
    };
    let hp = length / panels as f64;
    let mut pts = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let x0 = p as f64 * hp;
        for (x, w) in gx.iter().zip(&gw) {
            let xx = x0 + 0.5 * hp * (x + 1.0);
            pts.push((xx, 0.5 * hp * w * g.eval(xx, length)));
        }
    }
    let mut out = vec![0.0; m_max + 1];
    for &(x, wg) in &pts {
        let theta = PI * x / length;
        let c1 = theta.cos();
        let (mut prev, mut cur) = (c1, 1.0);
        for o in out.iter_mut() {
            *o += wg * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Ritz stiffness matrix S_kl = ∫ a φ_k′ φ_l′ + c φ_k φ_l in the sine basis of size `k`.
pub fn stiffness_matrix(op: &Operator1d, k: usize) -> DMatrix<f64> {
    let l = op.length;
    let am = cosine_moments(&op.a, l, 2 * k);
    let cm = cosine_moments(&op.c, l, 2 * k);
    DMatrix::from_fn(k, k, |i, j| {
        let (p, q) = (i + 1, j + 1);
        let d = p.abs_diff(q);
        let s = p + q;
        (p * q) as f64 * PI * PI / (l * l * l) * (am[d] + am[s]) + (cm[d] - cm[s]) / l
    })
}

struct Basis1d {
    lambdas: Vec<f64>,
    modes: Vec<Vec<f64>>,
    x: Vec<f64>,
    weights: Vec<f64>,
}

fn eigen_1d(op: &Operator1d, n: usize, j: usize) -> Result<Basis1d> {
    op.validate()?;
    let l = op.length;
    let k = ritz_size(n, j);
    let s = stiffness_matrix(op, k);
    let diagonal = (0..k).all(|r| (0..k).all(|c| r == c || s[(r, c)] == 0.0));
    let mut pairs: Vec<(f64, Vec<f64>)> = if diagonal {
        (0..k)
            .map(|r| {
                let mut v = vec![0.0; k];
                v[r] = 1.0;
                (s[(r, r)], v)
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(s);
        (0..k)
            .map(|c| {
                (
                    eig.eigenvalues[c],
                    eig.eigenvectors.column(c).iter().copied().collect(),
                )
            })
            .collect()
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(n);

    let norm = (2.0 / l).sqrt();
    let x: Vec<f64> = (0..=j).map(|i| l * i as f64 / j as f64).collect();
    let mut weights = vec![l / j as f64; j + 1];
    weights[0] *= 0.5;
    weights[j] *= 0.5;
    let mut modes = Vec::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    for (lam, mut v) in pairs {
        let slope: f64 = v.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).sum();
        if slope < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        let mut mode = vec![0.0; j + 1];
        for (i, m) in mode.iter_mut().enumerate().take(j).skip(1) {
            let mut acc = 0.0;
            for (kk, c) in v.iter().enumerate() {
                if *c != 0.0 {
                    // sin(π (k i mod 2J) / J) keeps the argument small
                    let r = ((kk + 1) * i) % (2 * j);
                    acc += c * (PI * r as f64 / j as f64).sin();
                }
            }
            *m = norm * acc;
        }
        modes.push(mode);
        lambdas.push(lam);
    }
    Ok(Basis1d {
        lambdas,
        modes,
        x,
        weights,
    })
}

/// Dirichlet eigenpairs of `op`: `n` modes sampled on `j` intervals per axis.
pub fn eigenpairs(op: &OperatorSpec, n: usize, j: usize) -> Result<ModalBasis> {
    if j < 64 {
        return Err(Error::Resolution(format!(
            "J = {j} below the minimum of 64"
        )));
    }
    if n == 0 {
        return Err(Error::Resolution("at least one mode is required".into()));
    }
    match op {
        OperatorSpec::Interval(op1) => {
            if n > j / 4 {
                return Err(Error::Resolution(format!(
                    "N = {n} exceeds J/4 = {}",
                    j / 4
                )));
            }
            let b = eigen_1d(op1, n, j)?;
            Ok(ModalBasis {
                lambdas: b.lambdas,
                modes: b.modes,
                weights: b.weights,
                grid: SpatialGrid::Line { x: b.x },
            })
        }
        OperatorSpec::Rectangle(ox, oy) => {
            let per_axis = n.min(j / 4);
            if n > per_axis * per_axis {
                return Err(Error::Resolution(format!(
                    "N = {n} exceeds (J/4)^2 = {}",
                    per_axis * per_axis
                )));
            }
            let bx = eigen_1d(ox, per_axis, j)?;
            let by = eigen_1d(oy, per_axis, j)?;
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (p, lx) in bx.lambdas.iter().enumerate() {
                for (q, ly) in by.lambdas.iter().enumerate() {
                    pairs.push((lx + ly, p, q));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            pairs.truncate(n);
            let ny = by.x.len();
            let mut weights = Vec::with_capacity(bx.x.len() * ny);
            for wx in &bx.weights {
                for wy in &by.weights {
                    weights.push(wx * wy);
                }
            }
            let modes = pairs
                .iter()
                .map(|&(_, p, q)| {
                    let mut m = Vec::with_capacity(bx.x.len() * ny);
                    for xv in &bx.modes[p] {
                        for yv in &by.modes[q] {
                            m.push(xv * yv);
                        }
                    }
                    m
                })
                .collect();
            Ok(ModalBasis {
                lambdas: pairs.iter().map(|p| p.0).collect(),
                modes,
                weights,
                grid: SpatialGrid::Plane { x: bx.x, y: by.x },
            })
        }
    }
}

fn check_len(basis: &ModalBasis, got: usize) -> Result<()> {
    if got != basis.n_points() {
        return Err(Error::GridMismatch {
            expected: basis.n_points(),
            got,
        });
    }
    Ok(())
}

/// h_n = (f, X_n) by the basis quadrature.
pub fn project(fvals: &[f64], basis: &ModalBasis) -> Result<ModalCoeffs> {
    check_len(basis, fvals.len())?;
    Ok(ModalCoeffs {
        values: basis.modes.iter().map(|m| basis.inner(fvals, m)).collect(),
    })
}

/// Σ c_n X_n at every grid point.
pub fn synthesize(coeffs: &ModalCoeffs, basis: &ModalBasis) -> Result<Vec<f64>> {
    if coeffs.len() != basis.n_modes() {
        return Err(Error::GridMismatch {
            expected: basis.n_modes(),
            got: coeffs.len(),
        });
    }
    let mut out = vec![0.0; basis.n_points()];
    for (c, m) in coeffs.values.iter().zip(&basis.modes) {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(m) {
                *o += c * v;
            }
        }
    }
    Ok(out)
}

/// Logs a warning when |c_n| λ_n grows over the tail of the expansion.
pub fn warn_on_slow_decay(name: &str, coeffs: &ModalCoeffs, basis: &ModalBasis) -> bool {
    let n = coeffs.len();
    if n < 8 {
        return false;
    }
    let q = n / 4;
    let scaled = |r: std::ops::Range<usize>| {
        r.map(|i| coeffs.values[i].abs() * basis.lambdas[i])
            .fold(0.0, f64::max)
    };
    let head = scaled(0..q);
    let tail = scaled(n - q..n);
    let slow = tail > head && tail > 1e-12;
    if slow {
        log::warn!(
            "coefficients of {name} decay slower than 1/lambda_n; truncation may be inaccurate"
        );
    }
    slow
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselReport {
    pub parseval_gap: f64,
    pub bessel_lhs: f64,
    pub bessel_rhs: f64,
    pub holds: bool,
}

fn derivative_4th(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            d[i] = (v[b] - v[a]) / ((b - a) as f64 * h);
        }
        return d;
    }
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    let one_sided = |w: [f64; 5]| {
        (-25.0 * w[0] + 48.0 * w[1] - 36.0 * w[2] + 16.0 * w[3] - 3.0 * w[4]) / (12.0 * h)
    };
    d[0] = one_sided([v[0], v[1], v[2], v[3], v[4]]);
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
    d[n - 1] = -one_sided([v[n - 1], v[n - 2], v[n - 3], v[n - 4], v[n - 5]]);
    d[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5])
        / (12.0 * h);
    d
}

fn simpson_weights(n_int: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_int + 1];
    if n_int % 2 == 0 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = h / 3.0
                * if i == 0 || i == n_int {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
        }
    } else {
        w.iter_mut().for_each(|x| *x = h);
        w[0] = 0.5 * h;
        w[n_int] = 0.5 * h;
    }
    w
}

/// Parseval gap and both sides of Σ λ_n h_n² ≤ ∫ a |∇h|² + c h².
pub fn bessel_diagnostic(
    fvals: &[f64],
    basis: &ModalBasis,
    op: &OperatorSpec,
) -> Result<BesselReport> {
    check_len(basis, fvals.len())?;
    for (k, v) in fvals.iter().enumerate() {
        if basis.grid.is_boundary(k) && v.abs() > 1e-8 {
            let (x, y) = basis.grid.point(k);
            return Err(Error::Boundary(format!(
                "value {v:e} at boundary point ({x}, {y})"
            )));
        }
    }
    let coeffs = project(fvals, basis)?;
    let sum_sq: f64 = coeffs.values.iter().map(|c| c * c).sum();
    let norm_sq = basis.inner(fvals, fvals);
    let lhs: f64 = coeffs
        .values
        .iter()
        .zip(&basis.lambdas)
        .map(|(c, l)| l * c * c)
        .sum();
    let rhs = match (op, &basis.grid) {
        (OperatorSpec::Interval(o), SpatialGrid::Line { x }) => {
            let n_int = x.len() - 1;
            let h = o.length / n_int as f64;
            let d = derivative_4th(fvals, h);
            let w = simpson_weights(n_int, h);
            (0..=n_int)
                .map(|i| {
                    w[i] * (o.a.eval(x[i], o.length) * d[i] * d[i]
                        + o.c.eval(x[i], o.length) * fvals[i] * fvals[i])
                })
                .sum()
        }
        (OperatorSpec::Rectangle(ox, oy), SpatialGrid::Plane { x, y }) => {
            let (nx, ny) = (x.len(), y.len());
            let (hx, hy) = (ox.length / (nx - 1) as f64, oy.length / (ny - 1) as f64);
            let wx = simpson_weights(nx - 1, hx);
            let wy = simpson_weights(ny - 1, hy);
            let mut total = 0.0;
            let mut dx_all = vec![0.0; nx * ny];
            for j in 0..ny {
                let col: Vec<f64> = (0..nx).map(|i| fvals[i * ny + j]).collect();
                for (i, d) in derivative_4th(&col, hx).into_iter().enumerate() {
                    dx_all[i * ny + j] = d;
                }
            }
            for i in 0..nx {
                let row = &fvals[i * ny..(i + 1) * ny];
                let dy = derivative_4th(row, hy);
                let ax = ox.a.eval(x[i], ox.length);
                let cx = ox.c.eval(x[i], ox.length);
                for j in 0..ny {
                    let k = i * ny + j;
                    let ay = oy.a.eval(y[j], oy.length);
                    let cy = oy.c.eval(y[j], oy.length);
                    total += wx[i]
                        * wy[j]
                        * (ax * dx_all[k] * dx_all[k]
                            + ay * dy[j] * dy[j]
                            + (cx + cy) * fvals[k] * fvals[k]);
                }
            }
            total
        }
        _ => return Err(Error::domain("operator and basis have different domains")),
    };
    Ok(BesselReport {
        parseval_gap: (sum_sq - norm_sq).abs(),
        bessel_lhs: lhs,
        bessel_rhs: rhs,
        holds: lhs <= rhs * (1.0 + 1e-6) + 1e-14,
    })
}
