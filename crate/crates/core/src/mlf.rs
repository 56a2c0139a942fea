//! Two-parameter Mittag-Leffler function `E_{a,b}(z) = sum_n z^n / Gamma(a n + b)`
//! for real arguments.
//!
//! Three evaluation regimes are used and each is exposed on its own:
//!
//! * [`taylor`]: compensated summation of the power series, accepted while
//!   the largest term stays within [`TAYLOR_CANCELLATION_LIMIT`] of the sum;
//! * [`contour`]: inversion of the Laplace pair
//!   `s^{a-b} / (s^a - z)` along an optimal parabolic contour with explicit
//!   pole residues (Garrappa's scheme);
//! * [`asymptotic`]: the large negative argument expansion
//!   `E_{a,b}(-x) ~ sum_{n>=1} (-1)^{n+1} x^{-n} / Gamma(b - n a)` at optimal
//!   truncation, plus the exponentially small pole contributions that exist
//!   for `a > 1`.
//!
//! [`ml_eval`] chooses among them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{param_err, Error, Result};
use crate::special::{ln_gamma, rgamma};

/// Largest admissible ratio between the biggest Taylor term and the sum.
pub const TAYLOR_CANCELLATION_LIMIT: f64 = 1e4;
/// Cap on the number of asymptotic terms.
pub const ASYMPTOTIC_MAX_TERMS: usize = 20;
const ASYMPTOTIC_REL_TOL: f64 = 1e-14;
const ASYMPTOTIC_ABS_TOL_FAR: f64 = 1e-13;
const CONTOUR_LOG_EPS: f64 = -34.538_776_394_910_684; // ln(1e-15)
/// Accuracy below which the contour result is reported as an error.
const CONTOUR_ACCEPT_TOL: f64 = 1e-11;

/// Orders `(alpha, beta)` of `E_{alpha,beta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOrder {
    alpha: f64,
    beta: f64,
}

impl MlOrder {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(param_err(format!(
                "Mittag-Leffler order alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(param_err(format!(
                "Mittag-Leffler order beta must be positive, got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `z^{1/alpha}` above which positive arguments use `z^{(1-beta)/alpha} e^{z^{1/alpha}} / alpha`.
const EXPONENTIAL_ASYMPTOTIC_MIN: f64 = 50.0;

/// Evaluate `E_{alpha,beta}(z)`.
///
/// Negative arguments are the working domain. Positive arguments are only
/// supported for `alpha >= 1/2`.
pub fn ml_eval(order: MlOrder, z: f64) -> Result<f64> {
    let v = ml_eval_unchecked(order, z)?;
    if v.is_nan() {
        return Err(Error::Accuracy {
            context: format!("E_{{{},{}}}({z:e})", order.alpha, order.beta),
            estimate: v,
            bound: f64::INFINITY,
        });
    }
    Ok(v)
}

fn ml_eval_unchecked(order: MlOrder, z: f64) -> Result<f64> {
    let (a, b) = (order.alpha, order.beta);
    if z.is_nan() {
        return Err(param_err("Mittag-Leffler argument is NaN"));
    }
    if z == 0.0 {
        return Ok(rgamma(b));
    }
    if a == 1.0 && b == 1.0 {
        return Ok(z.exp());
    }
    if a == 1.0 && b == 2.0 {
        return Ok(z.exp_m1() / z);
    }
    if z > 0.0 {
        if a < 0.5 {
            return Err(param_err(format!(
                "positive arguments need alpha >= 1/2, got alpha = {a}"
            )));
        }
        if let Some(t) = taylor(order, z) {
            return Ok(t.value);
        }
        let w = z.powf(1.0 / a);
        if w >= EXPONENTIAL_ASYMPTOTIC_MIN {
            // the algebraic tail is below e^{-w} relative to the leading term
            let log_lead = -a.ln() + (1.0 - b) / a * z.ln() + w;
            return Ok(if log_lead > f64::MAX.ln() { f64::INFINITY } else { log_lead.exp() });
        }
        return contour_checked(order, z);
    }

    let x = -z;
    if x.is_infinite() {
        return Ok(0.0);
    }
    if taylor_peak_log(order, x) < (1e8f64).ln() {
        if let Some(t) = taylor(order, z) {
            if t.max_term <= TAYLOR_CANCELLATION_LIMIT * t.value.abs() {
                return Ok(t.value);
            }
        }
    }
    if x >= 1.0 {
        let asy = asymptotic(order, x);
        let tol = if x > 100.0 {
            ASYMPTOTIC_ABS_TOL_FAR.max(ASYMPTOTIC_REL_TOL * asy.value.abs())
        } else {
            ASYMPTOTIC_REL_TOL * asy.value.abs()
        };
        if asy.omitted <= tol {
            return Ok(asy.value);
        }
    }
    contour_checked(order, z)
}

/// `t^power * E_{alpha,beta}(-lambda t^alpha)`.
pub fn ml_kernel(order: MlOrder, lambda: f64, power: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(param_err(format!("kernel time must be positive, got {t}")));
    }
    if !(lambda >= 0.0) {
        return Err(param_err(format!(
            "kernel rate must be nonnegative, got {lambda}"
        )));
    }
    let e = ml_eval(order, -lambda * t.powf(order.alpha))?;
    Ok(t.powf(power) * e)
}

fn contour_checked(order: MlOrder, z: f64) -> Result<f64> {
    let c = contour(order, z);
    if c.tolerance > CONTOUR_ACCEPT_TOL {
        return Err(Error::Accuracy {
            context: format!(
                "Mittag-Leffler E_{{{},{}}}({z}) contour quadrature",
                order.alpha, order.beta
            ),
            estimate: c.value,
            bound: c.tolerance,
        });
    }
    Ok(c.value)
}

/// Result of the compensated Taylor summation.
#[derive(Debug, Clone, Copy)]
pub struct TaylorEval {
    pub value: f64,
    /// Largest term magnitude met in the sum; cancellation indicator.
    pub max_term: f64,
    pub terms: usize,
}

/// log of the largest Taylor term magnitude `x^n / Gamma(a n + b)`.
fn taylor_peak_log(order: MlOrder, x: f64) -> f64 {
    let lx = x.ln();
    let mut best = f64::NEG_INFINITY;
    let mut n = 0usize;
    loop {
        let v = n as f64 * lx - ln_gamma(order.alpha * n as f64 + order.beta);
        if v > best {
            best = v;
        } else if n > 2 && v < best - 2.0 {
            break;
        }
        n += 1;
        if n > 100_000 {
            break;
        }
    }
    best
}

/// Power series in compensated (Kahan) summation. `None` if it does not
/// settle within the term budget.
pub fn taylor(order: MlOrder, z: f64) -> Option<TaylorEval> {
    const MAX_TERMS: usize = 20_000;
    let (a, b) = (order.alpha, order.beta);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut max_term = 0.0f64;
    let mut zpow = 1.0f64;
    let mut prev = f64::INFINITY;
    let ln_abs_z = z.abs().ln();
    for n in 0..MAX_TERMS {
        let arg = a * n as f64 + b;
        let term = if arg > 170.0 {
            // avoid overflow in z^n and Gamma separately
            let mag = (n as f64 * ln_abs_z - ln_gamma(arg)).exp();
            if z < 0.0 && n % 2 == 1 {
                -mag
            } else {
                mag
            }
        } else {
            zpow * rgamma(arg)
        };
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        let mag = term.abs();
        max_term = max_term.max(mag);
        if n > 2 && mag < prev && mag <= 1e-17 * sum.abs().max(f64::MIN_POSITIVE) {
            return Some(TaylorEval {
                value: sum,
                max_term,
                terms: n + 1,
            });
        }
        prev = mag;
        zpow *= z;
        if !zpow.is_finite() && arg <= 170.0 {
            return None;
        }
    }
    None
}

/// Result of the asymptotic expansion.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticEval {
    pub value: f64,
    /// Magnitude of the first omitted contribution (series remainder plus
    /// any exponentially small term the expansion does not carry).
    pub omitted: f64,
    pub terms: usize,
}

/// Large-argument expansion of `E_{a,b}(-x)`, `x > 0`.
pub fn asymptotic(order: MlOrder, x: f64) -> AsymptoticEval {
    let (a, b) = (order.alpha, order.beta);
    let nmax = ASYMPTOTIC_MAX_TERMS + 6;
    let coeffs: Vec<f64> = (1..=nmax)
        .map(|n| {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-(n as f64) * x.ln()).exp() * rgamma(b - n as f64 * a)
        })
        .collect();

    let is_int = |v: f64| v == v.floor();
    let terminating = is_int(a) && is_int(b);

    // size of the first omitted nonzero coefficients after index n_used;
    // two are inspected since one may sit next to a pole of Gamma
    let next_nonzero = |n_used: usize| -> f64 {
        coeffs[n_used..]
            .iter()
            .filter(|c| **c != 0.0)
            .take(2)
            .fold(0.0f64, |m, c| m.max(c.abs()))
    };

    let (best_n, best_omitted) = if terminating {
        (ASYMPTOTIC_MAX_TERMS, 0.0)
    } else {
        let mut best_n = 0usize;
        let mut best_omitted = next_nonzero(0);
        for n in 1..=ASYMPTOTIC_MAX_TERMS {
            let om = next_nonzero(n);
            if om < best_omitted {
                best_omitted = om;
                best_n = n;
            }
        }
        (best_n, best_omitted)
    };
    let mut value: f64 = coeffs[..best_n].iter().sum();
    let mut omitted = best_omitted;

    // exponentially small parts from the poles of s^{a-b}/(s^a + x)
    if a > 1.0 {
        let r = x.powf(1.0 / a);
        let s = Complex64::from_polar(r, PI / a);
        let res = s.powf(1.0 - b) * s.exp() / a;
        value += 2.0 * res.re;
    } else if a == 1.0 {
        let pole = (1.0 - b) * x.ln() - x;
        if is_int(b) {
            let sign = if (1.0 - b) as i64 % 2 == 0 { 1.0 } else { -1.0 };
            value += sign * pole.exp();
        } else {
            omitted += pole.exp();
        }
    }
    AsymptoticEval {
        value,
        omitted,
        terms: best_n,
    }
}

/// Result of the contour quadrature.
#[derive(Debug, Clone, Copy)]
pub struct ContourEval {
    pub value: f64,
    /// Target accuracy actually used (relaxed when the node budget was hit).
    pub tolerance: f64,
    pub nodes: usize,
}

/// Laplace-inversion evaluation of `E_{a,b}(z)` on an optimal parabolic
/// contour `mu (1 + i u)^2`, with residues of the poles lying to its right.
pub fn contour(order: MlOrder, z: f64) -> ContourEval {
    let (a, b) = (order.alpha, order.beta);
    let t = 1.0;
    let mut log_eps = CONTOUR_LOG_EPS;
    let log_mach = f64::EPSILON.ln();

    let theta = if z < 0.0 { PI } else { 0.0 };
    let kmin = (-a / 2.0 - theta / (2.0 * PI)).ceil() as i64;
    let kmax = (a / 2.0 - theta / (2.0 * PI)).floor() as i64;
    let r = z.abs().powf(1.0 / a);
    let mut poles: Vec<(Complex64, f64)> = (kmin..=kmax)
        .map(|k| {
            let s = Complex64::from_polar(r, (theta + 2.0 * PI * k as f64) / a);
            let phi = (s.re + s.norm()) / 2.0;
            (s, phi)
        })
        .filter(|(_, phi)| *phi > 1e-15)
        .collect();
    poles.sort_by(|x, y| x.1.total_cmp(&y.1));

    let mut sing: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    let mut phi: Vec<f64> = vec![0.0];
    for (s, p) in &poles {
        sing.push(*s);
        phi.push(*p);
    }
    let j1 = sing.len();
    let mut p = vec![(-2.0 * (a - b + 1.0)).max(0.0)];
    p.extend(std::iter::repeat_n(1.0, j1 - 1));
    let mut q = vec![1.0; j1 - 1];
    q.push(f64::INFINITY);
    phi.push(f64::INFINITY);

    let admissible: Vec<usize> = (0..j1)
        .filter(|&j| phi[j] < (log_eps - log_mach) / t && phi[j] < phi[j + 1])
        .collect();

    let (mu, h, n_nodes, region) = loop {
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for &j in &admissible {
            let (mu, h, n) = if j + 1 < j1 {
                optimal_param_rb(t, phi[j], phi[j + 1], p[j], q[j], log_eps)
            } else {
                optimal_param_ru(t, phi[j], p[j], log_eps)
            };
            if best.is_none_or(|(_, _, bn, _)| n < bn) {
                best = Some((mu, h, n, j));
            }
        }
        let (mu, h, n, j) = best.expect("the origin region is always admissible");
        if n > 200.0 && log_eps < -2.0 {
            log_eps += std::f64::consts::LN_10;
            continue;
        }
        break (mu, h, n as usize, j);
    };

    let lambda = Complex64::new(z, 0.0);
    let mut integral = Complex64::new(0.0, 0.0);
    for k in -(n_nodes as i64)..=(n_nodes as i64) {
        let u = h * k as f64;
        let zz = mu * Complex64::new(1.0, u).powi(2);
        let zd = Complex64::new(-2.0 * mu * u, 2.0 * mu);
        let f = zz.powf(a - b) / (zz.powf(a) - lambda) * zd;
        integral += (zz * t).exp() * f;
    }
    integral *= h / (2.0 * PI) * Complex64::new(0.0, -1.0);

    let residues: Complex64 = sing[region + 1..]
        .iter()
        .map(|s| s.powf(1.0 - b) * (s * t).exp() / a)
        .sum();

    ContourEval {
        value: (integral + residues).re,
        tolerance: log_eps.exp(),
        nodes: 2 * n_nodes + 1,
    }
}

/// Contour parameters for a region bounded by two singularities.
fn optimal_param_rb(
    t: f64,
    phi_j: f64,
    phi_j1: f64,
    pj: f64,
    qj: f64,
    log_eps: f64,
) -> (f64, f64, f64) {
    let log_mach = f64::EPSILON.ln();
    let fac = 1.01;
    let f_max = (log_eps - log_mach).exp();
    let sq_phi_j = phi_j.sqrt();
    let threshold = 2.0 * ((log_eps - log_mach) / t).sqrt();
    let sq_phi_j1 = phi_j1.sqrt().min(threshold - sq_phi_j);

    let mut f_bar = 1.0;
    let (sq_bar_j, sq_bar_j1) = if pj < 1e-14 && qj < 1e-14 {
        (sq_phi_j, sq_phi_j1)
    } else if pj < 1e-14 {
        let f_min = if sq_phi_j > 0.0 {
            fac * (sq_phi_j / (sq_phi_j1 - sq_phi_j)).powf(qj)
        } else {
            fac
        };
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fq = f_bar.powf(-1.0 / qj);
        (sq_phi_j, (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq))
    } else if qj < 1e-14 {
        let f_min = fac * (sq_phi_j1 / (sq_phi_j1 - sq_phi_j)).powf(pj);
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        ((2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp), sq_phi_j1)
    } else {
        let mut f_min =
            fac * (sq_phi_j + sq_phi_j1) / (sq_phi_j1 - sq_phi_j).powf(pj.max(qj));
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        f_min = f_min.max(1.5);
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        let fq = f_bar.powf(-1.0 / qj);
        let w = -phi_j1 * t / log_eps;
        let den = 2.0 + w - (1.0 + w) * fp + fq;
        (
            ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den,
            (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den,
        )
    };
    let log_eps = log_eps - f_bar.ln();
    let w = -sq_bar_j1 * sq_bar_j1 * t / log_eps;
    let mu = (((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w)).powi(2);
    let h = -2.0 * PI / log_eps * (sq_bar_j1 - sq_bar_j) / ((1.0 + w) * sq_bar_j + sq_bar_j1);
    let n = ((1.0 - log_eps / t / mu).sqrt() / h).ceil();
    (mu, h, n)
}

/// Contour parameters for the unbounded region right of the last singularity.
fn optimal_param_ru(t: f64, phi_j: f64, pj: f64, log_eps: f64) -> (f64, f64, f64) {
    let sq_phi_j = phi_j.sqrt();
    let mut phibar = if phi_j > 0.0 { phi_j * 1.01 } else { 0.01 };
    let mut sq_phibar = phibar.sqrt();
    let (f_min, f_max, f_tar) = (1.0f64, 10.0f64, 5.0f64);

    let mut n;
    let mut a_coef;
    let mut sq_mu;
    let mut guard = 0;
    loop {
        let phi_t = phibar * t;
        let log_eps_phi_t = log_eps / phi_t;
        n = (phi_t / PI * (1.0 - 1.5 * log_eps_phi_t + (1.0 - 2.0 * log_eps_phi_t).sqrt())).ceil();
        a_coef = PI * n / phi_t;
        sq_mu = sq_phibar * (4.0 - a_coef).abs() / (7.0 - (1.0 + 12.0 * a_coef).sqrt()).abs();
        let fbar = ((sq_phibar - sq_phi_j) / sq_mu).powf(-pj);
        let stop = pj < 1e-14 || (f_min < fbar && fbar < f_max);
        guard += 1;
        if stop || guard > 100 {
            break;
        }
        sq_phibar = f_tar.powf(-1.0 / pj) * sq_mu + sq_phi_j;
        phibar = sq_phibar * sq_phibar;
    }
    let mut mu = sq_mu * sq_mu;
    let mut h = (-3.0 * a_coef - 2.0 + 2.0 * (1.0 + 12.0 * a_coef).sqrt()) / (4.0 - a_coef) / n;

    let log_mach = f64::EPSILON.ln();
    let threshold = (log_eps - log_mach) / t;
    if mu > threshold {
        let qq = if pj.abs() < 1e-14 {
            0.0
        } else {
            f_tar.powf(-1.0 / pj) * mu.sqrt()
        };
        phibar = (qq + phi_j.sqrt()).powi(2);
        if phibar < threshold {
            let w = (log_mach / (log_mach - log_eps)).sqrt();
            let u = (-phibar * t / log_mach).sqrt();
            mu = threshold;
            n = (w * log_eps / 2.0 / PI / (u * w - 1.0)).ceil();
            h = (log_mach / (log_mach - log_eps)).sqrt() / n;
        } else {
            n = f64::INFINITY;
            h = 0.0;
        }
    }
    (mu, h, n)
}
