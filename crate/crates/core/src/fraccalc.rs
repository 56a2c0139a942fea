//! Riemann-Liouville integrals and Caputo derivatives, exact on powers and by
//! product integration on uniform grids.
//!
//! The grid operators treat the sampled function as piecewise linear and
//! integrate the kernel exactly over every cell, so weakly singular kernels
//! such as `u^{mu-1}` never get point-sampled.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain_err, param_err, Result};
use crate::special::{gamma, rgamma};

/// Samples `values[i] = f(t0 + i dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(t0 >= 0.0) || !t0.is_finite() {
            return Err(param_err(format!("grid start must be >= 0, got {t0}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(param_err(format!("grid step must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(param_err("a sampled function needs at least 2 samples"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(param_err(format!("sample {i} is not finite")));
        }
        Ok(Self { t0, dt, values })
    }

    /// Sample `f` at `t = i dt`, `i = 0..n`.
    pub fn from_fn(dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(0.0, dt, (0..n).map(|i| f(i as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

/// `I^order t^mu = coeff * t^exponent`; returns `(coeff, exponent)`.
pub fn frac_integral_power(mu: f64, order: f64) -> Result<(f64, f64)> {
    if !(mu > -1.0) {
        return Err(domain_err(format!(
            "t^{mu} is not integrable at the origin (need mu > -1)"
        )));
    }
    if !(order > 0.0) {
        return Err(param_err(format!("integral order must be positive, got {order}")));
    }
    Ok((gamma(mu + 1.0) * rgamma(mu + order + 1.0), mu + order))
}

fn check_origin_grid(f: &SampledFunction) -> Result<()> {
    if f.t0 != 0.0 {
        return Err(param_err(format!(
            "grid operators need samples starting at t = 0, got t0 = {}",
            f.t0
        )));
    }
    Ok(())
}

fn check_unit_order(order: f64) -> Result<()> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(param_err(format!("order must lie in (0, 1], got {order}")));
    }
    Ok(())
}

/// Riemann-Liouville integral `I^order f` on the grid of `f`.
pub fn frac_integral_grid(f: &SampledFunction, order: f64) -> Result<SampledFunction> {
    check_origin_grid(f)?;
    check_unit_order(order)?;
    let c1 = rgamma(order + 1.0);
    let c2 = rgamma(order + 2.0);
    let w = ProductWeights::new(
        f.len(),
        f.dt,
        |u| c1 * u.powf(order),
        |u| c2 * u.powf(order + 1.0),
    );
    SampledFunction::new(0.0, f.dt, w.apply(&f.values, ConvMethod::Auto))
}

/// Caputo derivative `D^order f` by the L1 scheme; `order = 1` gives
/// second-order finite differences.
pub fn caputo_derivative_grid(f: &SampledFunction, order: f64) -> Result<SampledFunction> {
    check_origin_grid(f)?;
    check_unit_order(order)?;
    let n = f.len();
    let h = f.dt;
    let v = &f.values;
    if order == 1.0 {
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = (v[1] - v[0]) / h;
            d[1] = d[0];
        } else {
            d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
            for i in 1..n - 1 {
                d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
        }
        return SampledFunction::new(0.0, h, d);
    }
    // b_j = (j+1)^{1-a} - j^{1-a}; D f(t_i) = sum_j b_j (f_{i-j} - f_{i-j-1}) / (h^a Gamma(2-a))
    let e = 1.0 - order;
    let b: Vec<f64> = (0..n).map(|j| (j as f64 + 1.0).powf(e) - (j as f64).powf(e)).collect();
    let diffs: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { v[i] - v[i - 1] })
        .collect();
    let full = convolve(&b, &diffs, ConvMethod::Auto);
    let scale = rgamma(2.0 - order) / h.powf(order);
    // full[i] = sum_{j=0}^{i} b_j diffs_{i-j}; diffs_0 = 0 so j = i drops out
    let d: Vec<f64> = (0..n).map(|i| full[i] * scale).collect();
    SampledFunction::new(0.0, h, d)
}

/// How a discrete convolution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Direct,
    Fft,
    /// Direct for short inputs, FFT otherwise.
    Auto,
}

const AUTO_FFT_THRESHOLD: usize = 256;

/// Linear convolution truncated to `a.len()` outputs: `out[i] = sum_{j<=i} b_j a_{i-j}`.
pub fn convolve(a: &[f64], b: &[f64], method: ConvMethod) -> Vec<f64> {
    let n = a.len();
    let use_fft = match method {
        ConvMethod::Direct => false,
        ConvMethod::Fft => true,
        ConvMethod::Auto => n > AUTO_FFT_THRESHOLD,
    };
    if use_fft {
        Convolver::new(&b[..b.len().min(n)], n).apply(a)
    } else {
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let m = i.min(b.len().saturating_sub(1));
            let mut s = 0.0;
            for j in 0..=m {
                s += b[j] * a[i - j];
            }
            *o = s;
        }
        out
    }
}

/// FFT convolution against a fixed kernel, reusable across many inputs.
#[derive(Clone)]
pub struct Convolver {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("n", &self.n)
            .field("fft_len", &self.kernel_hat.len())
            .finish()
    }
}

impl Convolver {
    /// Prepare for inputs of length `n`; the kernel is truncated to `n`.
    pub fn new(kernel: &[f64], n: usize) -> Self {
        let len = (2 * n.max(1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); len];
        for (k, v) in kernel.iter().take(n).enumerate() {
            kernel_hat[k].re = *v;
        }
        forward.process(&mut kernel_hat);
        Self {
            n,
            forward,
            inverse,
            kernel_hat,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `out[i] = sum_{j<=i} kernel_j x_{i-j}` for `i < n`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let len = self.kernel_hat.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, v) in x.iter().take(self.n).enumerate() {
            buf[k].re = *v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / len as f64;
        buf[..x.len().min(self.n)].iter().map(|c| c.re * scale).collect()
    }
}

/// Product-integration weights for `(K * f)(t_i) = int_0^{t_i} K(t_i - u) f(u) du`
/// with `f` piecewise linear, built from the kernel primitives
/// `p1 = int_0 K` and `p2 = int_0 p1`.
#[derive(Debug, Clone)]
pub struct ProductWeights {
    /// weight on `f_{i-j}`
    near: Vec<f64>,
    /// weight on `f_{i-j-1}`
    far: Vec<f64>,
}

impl ProductWeights {
    pub fn new(n: usize, h: f64, p1: impl Fn(f64) -> f64, p2: impl Fn(f64) -> f64) -> Self {
        let q1: Vec<f64> = (0..=n).map(|j| if j == 0 { 0.0 } else { p1(j as f64 * h) }).collect();
        let q2: Vec<f64> = (0..=n).map(|j| if j == 0 { 0.0 } else { p2(j as f64 * h) }).collect();
        Self::from_primitive_samples(&q1, &q2, h)
    }

    /// Same, from primitives already sampled at `j h`, `j = 0..=n`
    /// (`q1[0] = q2[0] = 0`).
    pub fn from_primitive_samples(q1: &[f64], q2: &[f64], h: f64) -> Self {
        let n = q1.len() - 1;
        let mut near = Vec::with_capacity(n);
        let mut far = Vec::with_capacity(n);
        for j in 0..n {
            let a = q1[j + 1] - q1[j];
            let b = q1[j + 1] - (q2[j + 1] - q2[j]) / h;
            near.push(a - b);
            far.push(b);
        }
        Self { near, far }
    }

    /// Precompute FFTs for repeated application to inputs of length `n`.
    pub fn prepare(&self, n: usize) -> PreparedProduct {
        PreparedProduct {
            near_first: self.near.clone(),
            near: Convolver::new(&self.near, n),
            far: Convolver::new(&self.far, n),
        }
    }

    /// Convolution values at every grid point; `out[0] = 0`.
    pub fn apply(&self, f: &[f64], method: ConvMethod) -> Vec<f64> {
        let n = f.len();
        let near = convolve(f, &self.near, method);
        let far = convolve(f, &self.far, method);
        let mut out = vec![0.0; n];
        for i in 1..n {
            // near[i] includes the j = i term against f_0, which belongs to no cell
            let extra = if i < self.near.len() { self.near[i] * f[0] } else { 0.0 };
            out[i] = near[i] - extra + far[i - 1];
        }
        out
    }
}

/// [`ProductWeights`] with kernel transforms cached.
#[derive(Debug, Clone)]
pub struct PreparedProduct {
    near_first: Vec<f64>,
    near: Convolver,
    far: Convolver,
}

impl PreparedProduct {
    /// Same result as [`ProductWeights::apply`] with [`ConvMethod::Fft`].
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let near = self.near.apply(f);
        let far = self.far.apply(f);
        let mut out = vec![0.0; n];
        for i in 1..n {
            let extra = if i < self.near_first.len() { self.near_first[i] * f[0] } else { 0.0 };
            out[i] = near[i] - extra + far[i - 1];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_rule_values() {
        let (c, e) = frac_integral_power(0.0, 0.5).unwrap();
        assert!((c - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-14);
        assert_eq!(e, 0.5);
        let (c, e) = frac_integral_power(1.0, 1.0).unwrap();
        assert!((c - 0.5).abs() < 1e-15 && e == 2.0);
        let (c, _) = frac_integral_power(0.5, 0.5).unwrap();
        assert!((c - 0.886_226_925_452_758).abs() < 1e-14);
        assert!(frac_integral_power(-1.0, 0.5).is_err());
    }

    #[test]
    fn integral_of_constant() {
        let f = SampledFunction::from_fn(1e-3, 1001, |_| 1.0).unwrap();
        let g = frac_integral_grid(&f, 0.5).unwrap();
        assert!((g.values[1000] - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-6);
    }

    #[test]
    fn ordinary_integral_of_line_is_exact() {
        let f = SampledFunction::from_fn(0.01, 101, |t| t).unwrap();
        let g = frac_integral_grid(&f, 1.0).unwrap();
        for (i, v) in g.values.iter().enumerate() {
            let t = f.time(i);
            assert!((v - t * t / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let f = SampledFunction::from_fn(0.01, 50, |_| 3.0).unwrap();
        for order in [0.3, 0.5, 1.0] {
            let d = caputo_derivative_grid(&f, order).unwrap();
            assert!(d.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn caputo_of_line() {
        let f = SampledFunction::from_fn(1e-3, 1001, |t| t).unwrap();
        let d = caputo_derivative_grid(&f, 0.5).unwrap();
        let expect = 1.0 / gamma(1.5);
        assert!((d.values[1000] - expect).abs() < 1e-4);
    }

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..700).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..700).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let d = convolve(&a, &b, ConvMethod::Direct);
        let f = convolve(&a, &b, ConvMethod::Fft);
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SampledFunction::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(SampledFunction::new(0.0, 0.1, vec![1.0]).is_err());
        assert!(SampledFunction::new(0.0, 0.1, vec![1.0, f64::NAN]).is_err());
        let f = SampledFunction::new(1.0, 0.1, vec![1.0, 2.0]).unwrap();
        assert!(frac_integral_grid(&f, 0.5).is_err());
        let f = SampledFunction::new(0.0, 0.1, vec![1.0, 2.0]).unwrap();
        assert!(frac_integral_grid(&f, 1.5).is_err());
    }
}
