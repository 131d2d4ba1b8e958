//! Fractional integrals and derivatives on uniform time grids.
//!
//! All operators are product-integration rules: the smooth factor is
//! interpolated piecewise-linearly and the power weight is integrated exactly.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, rgamma};
use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Order α ∈ (1, 2) of the time derivative, with γ = α − 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    gamma: f64,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::domain(format!("alpha = {alpha} outside (1, 2)")));
        }
        Ok(Self {
            alpha,
            gamma: alpha - 1.0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Uniform partition of [0, T] into M steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::domain(format!("T = {t_final} must be positive")));
        }
        if steps < 2 {
            return Err(Error::domain(format!("M = {steps} must be at least 2")));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_final
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }
}

/// Samples of a function on every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// How discrete causal convolutions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMode {
    #[default]
    Direct,
    Fft,
}

/// c[n] = Σ_{k=0}^{n} kernel[k] · data[n−k] for n < data.len().
pub fn causal_conv(kernel: &[f64], data: &[f64], mode: ConvMode) -> Vec<f64> {
    let n = data.len();
    let kernel = &kernel[..kernel.len().min(n)];
    if kernel.is_empty() {
        return vec![0.0; n];
    }
    match mode {
        ConvMode::Direct => (0..n)
            .map(|i| {
                let top = i.min(kernel.len() - 1);
                (0..=top).map(|k| kernel[k] * data[i - k]).sum()
            })
            .collect(),
        ConvMode::Fft => fft_conv(kernel, data),
    }
}

fn fft_conv(kernel: &[f64], data: &[f64]) -> Vec<f64> {
    let n = data.len();
    let size = (kernel.len() + n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(kernel.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut b: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(data.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    a.iter().take(n).map(|c| c.re * scale).collect()
}

/// Product-integration weights for ∫₀^{t_n} σ^p φ(σ) dσ with φ piecewise linear.
///
/// On [kh, (k+1)h] the node values φ_k, φ_{k+1} receive A_k and B_k.
#[derive(Debug, Clone)]
pub struct PowerWeights {
    p: f64,
    h: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PowerWeights {
    pub fn new(p: f64, h: f64, steps: usize) -> Result<Self> {
        if !(p > -1.0) {
            return Err(Error::domain(format!("power p = {p} must exceed -1")));
        }
        let (gx, gw) = gauss_legendre(16);
        let scale = h.powf(p + 1.0);
        let mut a = Vec::with_capacity(steps);
        let mut b = Vec::with_capacity(steps);
        for k in 0..steps {
            let (i0, i1) = if k < 4 {
                let kf = k as f64;
                let i0 = ((kf + 1.0).powf(p + 1.0) - kf.powf(p + 1.0)) / (p + 1.0);
                let i1 = ((kf + 1.0).powf(p + 2.0) - kf.powf(p + 2.0)) / (p + 2.0) - kf * i0;
                (i0, i1)
            } else {
                let mut i0 = 0.0;
                let mut i1 = 0.0;
                for (x, w) in gx.iter().zip(&gw) {
                    let s = 0.5 * (x + 1.0);
                    let v = 0.5 * w * (k as f64 + s).powf(p);
                    i0 += v;
                    i1 += v * s;
                }
                (i0, i1)
            };
            a.push(scale * (i0 - i1));
            b.push(scale * i1);
        }
        Ok(Self { p, h, a, b })
    }

    pub fn power(&self) -> f64 {
        self.p
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.a.len()
    }

    /// Weight pair (A_k, B_k) of interval k.
    pub fn pair(&self, k: usize) -> (f64, f64) {
        (self.a[k], self.b[k])
    }

    /// ∫₀^{t_n} σ^p φ(σ) dσ for node samples φ_0..φ_n.
    pub fn integral(&self, phi: &[f64], n: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            s += self.a[k] * phi[k] + self.b[k] * phi[k + 1];
        }
        s
    }

    /// out_n = ∫₀^{t_n} σ^p w(σ) f(t_n − σ) dσ with w·f interpolated at the nodes.
    pub fn convolve(&self, w: &[f64], f: &[f64], mode: ConvMode) -> Vec<f64> {
        let n = f.len();
        assert!(w.len() >= n && n <= self.a.len() + 1);
        if n == 0 {
            return Vec::new();
        }
        let ka: Vec<f64> = (0..n - 1).map(|k| self.a[k] * w[k]).collect();
        let kb: Vec<f64> = (0..n - 1).map(|k| self.b[k] * w[k + 1]).collect();
        let ca = causal_conv(&ka, f, mode);
        let cb = causal_conv(&kb, f, mode);
        let mut out = vec![0.0; n];
        for i in 1..n {
            let own = if i < ka.len() { ka[i] * f[0] } else { 0.0 };
            out[i] = ca[i] - own + cb[i - 1];
        }
        out
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!("{name} = {v} outside (0, 1)")));
    }
    Ok(())
}

/// Riemann–Liouville integral I^μ y on the grid, μ ∈ (0, 1).
pub fn rl_integral(y: &TimeSeries, mu: f64) -> Result<TimeSeries> {
    rl_integral_with(y, mu, ConvMode::Direct)
}

pub fn rl_integral_with(y: &TimeSeries, mu: f64, mode: ConvMode) -> Result<TimeSeries> {
    check_unit_interval("mu", mu)?;
    Ok(y.with_values(rl_integral_slice(y.values(), y.grid.dt(), mu, mode)))
}

fn rl_integral_slice(y: &[f64], h: f64, mu: f64, mode: ConvMode) -> Vec<f64> {
    let m = y.len() - 1;
    let pw = PowerWeights::new(mu - 1.0, h, m).expect("mu in (0,1)");
    let w = vec![rgamma(mu); m + 1];
    pw.convolve(&w, y, mode)
}

fn l1_weights(gamma: f64, h: f64, m: usize) -> Vec<f64> {
    let q = 1.0 - gamma;
    let scale = h.powf(q) / q * rgamma(1.0 - gamma);
    (0..m)
        .map(|k| {
            if k == 0 {
                scale
            } else {
                let kf = k as f64;
                scale * kf.powf(q) * (q * (1.0 / kf).ln_1p()).exp_m1()
            }
        })
        .collect()
}

/// Caputo derivative of order γ ∈ (0, 1) by the L1 scheme.
pub fn caputo_deriv_low(y: &TimeSeries, gamma: f64) -> Result<TimeSeries> {
    caputo_deriv_low_with(y, gamma, ConvMode::Direct)
}

pub fn caputo_deriv_low_with(y: &TimeSeries, gamma: f64, mode: ConvMode) -> Result<TimeSeries> {
    check_unit_interval("gamma", gamma)?;
    Ok(y.with_values(l1_slice(y.values(), y.grid.dt(), gamma, mode)))
}

fn l1_slice(y: &[f64], h: f64, gamma: f64, mode: ConvMode) -> Vec<f64> {
    let m = y.len() - 1;
    let w = l1_weights(gamma, h, m);
    let d: Vec<f64> = y.windows(2).map(|p| (p[1] - p[0]) / h).collect();
    let c = causal_conv(&w, &d, mode);
    let mut out = vec![0.0; m + 1];
    out[1..].copy_from_slice(&c);
    out
}

/// Second differences with the quadratic ghost at node 0 and a one-sided rule at node M.
pub fn second_differences(y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len() - 1;
    let h2 = h * h;
    let mut d = vec![0.0; m + 1];
    for j in 1..m {
        d[j] = (y[j + 1] - 2.0 * y[j] + y[j - 1]) / h2;
    }
    d[0] = (y[0] - 2.0 * y[1] + y[2]) / h2;
    d[m] = (y[m] - 2.0 * y[m - 1] + y[m - 2]) / h2;
    d
}

/// Caputo derivative of order α ∈ (1, 2): I^{2−α} of the second differences.
pub fn caputo_deriv_high(y: &TimeSeries, order: FracOrder) -> Result<TimeSeries> {
    caputo_deriv_high_with(y, order, ConvMode::Direct)
}

pub fn caputo_deriv_high_with(
    y: &TimeSeries,
    order: FracOrder,
    mode: ConvMode,
) -> Result<TimeSeries> {
    Ok(y.with_values(high_slice(y.values(), y.grid.dt(), order.alpha, mode)))
}

fn high_slice(y: &[f64], h: f64, alpha: f64, mode: ConvMode) -> Vec<f64> {
    let d = second_differences(y, h);
    rl_integral_slice(&d, h, 2.0 - alpha, mode)
}

/// Riemann–Liouville derivative of order γ ∈ (0, 1) of the piecewise-linear interpolant,
/// written in the hinge basis y(t) = y₀ + Σ_j s_j (t − t_j)₊.
pub fn rl_derivative(y: &TimeSeries, gamma: f64) -> Result<TimeSeries> {
    check_unit_interval("gamma", gamma)?;
    let v = y.values();
    let m = v.len() - 1;
    let h = y.grid.dt();
    let slopes: Vec<f64> = v.windows(2).map(|p| (p[1] - p[0]) / h).collect();
    let mut kinks = vec![0.0; m];
    kinks[0] = slopes[0];
    for j in 1..m {
        kinks[j] = slopes[j] - slopes[j - 1];
    }
    let q = 1.0 - gamma;
    let c0 = rgamma(1.0 - gamma);
    let c1 = rgamma(2.0 - gamma);
    let mut out = vec![f64::INFINITY; m + 1];
    if v[0] == 0.0 {
        out[0] = 0.0;
    }
    for (n, o) in out.iter_mut().enumerate().skip(1) {
        let t = y.grid.node(n);
        let mut s = 0.0;
        for (j, kj) in kinks.iter().enumerate().take(n) {
            s += kj * ((n - j) as f64 * h).powf(q);
        }
        *o = v[0] * c0 * t.powf(-gamma) + c1 * s;
    }
    Ok(y.with_values(out))
}

/// max over interior nodes of |RL^γ y − ∂^γ y − y(0) t^{−γ}/Γ(1−γ)|.
pub fn rl_caputo_bridge_residual(y: &TimeSeries, gamma: f64) -> Result<f64> {
    let rl = rl_derivative(y, gamma)?;
    let cap = caputo_deriv_low(y, gamma)?;
    let y0 = y.values()[0];
    let c0 = rgamma(1.0 - gamma);
    let m = y.grid.steps();
    let mut worst: f64 = 0.0;
    for n in 1..m {
        let t = y.grid.node(n);
        let r = rl.values[n] - cap.values[n] - y0 * c0 * t.powf(-gamma);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Exponents closer than this to one already present are dropped.
const EXPONENT_SEPARATION: f64 = 0.05;
/// Powers at or above this are smooth enough for the plain schemes and only
/// degrade the conditioning of the starting system.
const EXPONENT_CEILING: f64 = 3.0;

fn merge_exponents(base: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &s in base.iter().chain(extra) {
        if (0.0..EXPONENT_CEILING).contains(&s)
            && out.iter().all(|&e| (e - s).abs() >= EXPONENT_SEPARATION)
        {
            out.push(s);
        }
    }
    out
}

/// Adds Σ_σ z_σ (exact − discrete)[t^σ] where Σ_σ z_σ t_j^σ interpolates the
/// first |σ| samples, so that the corrected operator is exact on span{t^σ}.
fn apply_starting_correction(
    y: &[f64],
    h: f64,
    exponents: &[f64],
    base: &mut [f64],
    discrete: impl Fn(&[f64]) -> Vec<f64>,
    exact: impl Fn(f64, f64) -> f64,
) -> Result<()> {
    let s = exponents.len();
    let m = y.len() - 1;
    if s > m / 2 {
        return Err(Error::domain(format!(
            "grid with {m} steps too coarse for {s} starting exponents"
        )));
    }
    let vt = DMatrix::from_fn(s, s, |j, k| (j as f64).powf(exponents[k]));
    let rhs = DVector::from_column_slice(&y[..s]);
    let z = vt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::domain("singular starting-weight system"))?;
    for (k, &sigma) in exponents.iter().enumerate() {
        if z[k] == 0.0 {
            continue;
        }
        let sample: Vec<f64> = (0..=m).map(|i| (i as f64).powf(sigma)).collect();
        let d = discrete(&sample);
        for (i, b) in base.iter_mut().enumerate() {
            let e = exact(sigma, i as f64 * h) * h.powf(-sigma);
            if e.is_finite() {
                *b += z[k] * (e - d[i]);
            }
        }
    }
    Ok(())
}

fn caputo_power(sigma: f64, order: f64, t: f64) -> f64 {
    if sigma == sigma.floor() && sigma < order {
        return 0.0;
    }
    let c = libm::tgamma(sigma + 1.0) * rgamma(sigma + 1.0 - order);
    if c == 0.0 {
        0.0
    } else {
        c * t.powf(sigma - order)
    }
}

/// Caputo derivative of order α made exact on t^σ for σ ∈ {0, 1, 2} ∪ `exponents`.
pub fn caputo_deriv_high_corrected(
    y: &TimeSeries,
    order: FracOrder,
    exponents: &[f64],
) -> Result<TimeSeries> {
    let alpha = order.alpha;
    let h = y.grid.dt();
    let mut out = high_slice(y.values(), h, alpha, ConvMode::Direct);
    let exps = merge_exponents(&[0.0, 1.0, 2.0], exponents);
    apply_starting_correction(
        y.values(),
        h,
        &exps,
        &mut out,
        |v| high_slice(v, h, alpha, ConvMode::Direct),
        |s, t| caputo_power(s, alpha, t),
    )?;
    Ok(y.with_values(out))
}

/// L1 Caputo derivative of order γ made exact on t^σ for σ ∈ {0, 1} ∪ `exponents`.
pub fn caputo_deriv_low_corrected(
    y: &TimeSeries,
    gamma: f64,
    exponents: &[f64],
) -> Result<TimeSeries> {
    check_unit_interval("gamma", gamma)?;
    let h = y.grid.dt();
    let mut out = l1_slice(y.values(), h, gamma, ConvMode::Direct);
    let exps = merge_exponents(&[0.0, 1.0], exponents);
    apply_starting_correction(
        y.values(),
        h,
        &exps,
        &mut out,
        |v| l1_slice(v, h, gamma, ConvMode::Direct),
        |s, t| caputo_power(s, gamma, t),
    )?;
    Ok(y.with_values(out))
}

/// Trapezoid rule with Gregory end corrections at t = T and starting weights
/// that make it exact on t^σ for σ ∈ {0, 1, 2} ∪ `exponents`.
pub fn integrate_corrected(y: &TimeSeries, exponents: &[f64]) -> Result<f64> {
    let v = y.values();
    let m = v.len() - 1;
    let h = y.grid.dt();
    let trap = |w: &[f64]| -> f64 {
        let d1 = w[m] - w[m - 1];
        let d2 = w[m] - 2.0 * w[m - 1] + w[m - 2];
        let d3 = w[m] - 3.0 * w[m - 1] + 3.0 * w[m - 2] - w[m - 3];
        w.iter().sum::<f64>() - 0.5 * (w[0] + w[m]) - d1 / 12.0 - d2 / 24.0 - 19.0 * d3 / 720.0
    };
    let exps = merge_exponents(&[0.0, 1.0, 2.0], exponents);
    let s = exps.len();
    if s > m / 2 || m < 8 {
        return Err(Error::domain(format!(
            "grid with {m} steps too coarse for {s} starting exponents"
        )));
    }
    let vt = DMatrix::from_fn(s, s, |j, k| (j as f64).powf(exps[k]));
    let z = vt
        .lu()
        .solve(&DVector::from_column_slice(&v[..s]))
        .ok_or_else(|| Error::domain("singular starting-weight system"))?;
    let mut total = trap(v);
    for (k, &sigma) in exps.iter().enumerate() {
        let sample: Vec<f64> = (0..=m).map(|i| (i as f64).powf(sigma)).collect();
        let exact = (m as f64).powf(sigma + 1.0) / (sigma + 1.0);
        total += z[k] * (exact - trap(&sample));
    }
    Ok(h * total)
}
