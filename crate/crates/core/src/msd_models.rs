//! Closed-form MSD curves for single-file diffusion: the Brandani and Lin
//! expressions, the Mittag-Leffler family calibrated to a pore, and the
//! ballistic/normal/single-file three-regime curve. Also the local-exponent
//! tools used to read regimes off a curve.

use std::f64::consts::PI;

use crate::error::{domain_err, param_err, Result};
use crate::mlf::{ml_kernel, MlOrder};
use crate::special::{gamma, rgamma};

/// Pore parameters: jump length `l`, occupancy `theta`, mean time between jumps `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalChannel {
    pub l: f64,
    pub theta: f64,
    pub tau: f64,
}

impl PhysicalChannel {
    pub fn new(l: f64, theta: f64, tau: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(param_err(format!("jump length l must be positive, got {l}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(param_err(format!("occupancy theta must lie in (0, 1), got {theta}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(param_err(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { l, theta, tau })
    }

    /// Self-diffusion coefficient `l^2 (1 - theta) / (2 tau)`.
    pub fn d0(&self) -> f64 {
        self.l * self.l * (1.0 - self.theta) / (2.0 * self.tau)
    }

    /// Single-file mobility `F` of `R^2 ~ 2 F sqrt(t)`:
    /// `l^2 (1 - theta) / (theta sqrt(2 pi tau))`.
    pub fn mobility(&self) -> f64 {
        self.l * self.l * (1.0 - self.theta) / self.theta / (2.0 * PI * self.tau).sqrt()
    }

    /// Time at which `2 D0 t` and `2 F sqrt(t)` cross.
    pub fn crossover_time(&self) -> f64 {
        (self.mobility() / self.d0()).powi(2)
    }
}

/// Sampled MSD with optional standard errors and a provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub model_tag: String,
}

impl MsdCurve {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        stderr: Option<Vec<f64>>,
        model_tag: impl Into<String>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(param_err(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(se) = &stderr {
            if se.len() != times.len() {
                return Err(param_err("stderr length does not match times"));
            }
            if se.iter().any(|s| !(*s >= 0.0)) {
                return Err(param_err("standard errors must be nonnegative"));
            }
        }
        if times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(param_err("times must be positive and finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param_err("times must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(param_err("MSD values must be finite and nonnegative"));
        }
        Ok(Self {
            times,
            values,
            stderr,
            model_tag: model_tag.into(),
        })
    }

    /// Evaluate `f` on `times`.
    pub fn from_fn(times: &[f64], tag: &str, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times.to_vec(), values, None, tag)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Log-uniform grid from `t_min` to `t_max` with `per_decade` points per decade
/// (both ends included).
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max > t_min) || !t_max.is_finite() {
        return Err(param_err(format!(
            "need 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if per_decade == 0 {
        return Err(param_err("points per decade must be positive"));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    let (a, b) = (t_min.log10(), t_max.log10());
    Ok((0..=n)
        .map(|i| {
            if i == 0 {
                t_min
            } else if i == n {
                t_max
            } else {
                10f64.powf(a + (b - a) * i as f64 / n as f64)
            }
        })
        .collect())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(param_err(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `l^2 (1 - theta) (t/tau) / (1 + theta sqrt(pi/2) sqrt(t/tau))`.
pub fn brandani_msd(ch: &PhysicalChannel, t: f64) -> Result<f64> {
    check_t(t)?;
    let s = t / ch.tau;
    Ok(ch.l * ch.l * (1.0 - ch.theta) * s / (1.0 + ch.theta * (PI / 2.0).sqrt() * s.sqrt()))
}

/// `2 D0 t / (1 + D0 sqrt(t) / F)`, the harmonic mean of the two asymptotes.
pub fn lin_msd(d0: f64, f: f64, t: f64) -> Result<f64> {
    if !(d0 > 0.0) || !(f > 0.0) {
        return Err(param_err("D0 and F must be positive"));
    }
    check_t(t)?;
    Ok(2.0 * d0 * t / (1.0 + d0 * t.sqrt() / f))
}

/// Which `lambda'` the Mittag-Leffler family uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaVariant {
    /// Fixed by matching the long-time limit `2 F sqrt(t)`.
    Matched,
    /// `theta Gamma(beta - 1/2) / sqrt(2 tau)` as printed in the paper.
    PaperLiteral,
}

/// Calibrated coefficients of `R^2 = 2 kT zeta' t E_{1/2,beta}(-lambda' t^{1/2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyCalibration {
    pub beta: f64,
    pub zeta_prime: f64,
    pub lambda_matched: f64,
    pub lambda_paper: f64,
}

impl FamilyCalibration {
    pub fn lambda(&self, variant: LambdaVariant) -> f64 {
        match variant {
            LambdaVariant::Matched => self.lambda_matched,
            LambdaVariant::PaperLiteral => self.lambda_paper,
        }
    }
}

pub fn calibrate_family(ch: &PhysicalChannel, beta: f64, kt: f64) -> Result<FamilyCalibration> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(domain_err(format!("family order beta must be >= 1, got {beta}")));
    }
    if !(kt > 0.0) || !kt.is_finite() {
        return Err(param_err(format!("kT must be positive, got {kt}")));
    }
    let zeta_prime = ch.l * ch.l * (1.0 - ch.theta) * gamma(beta) / (2.0 * kt * ch.tau);
    let root = (2.0 * ch.tau).sqrt();
    Ok(FamilyCalibration {
        beta,
        zeta_prime,
        lambda_matched: ch.theta * gamma(beta) * PI.sqrt() * rgamma(beta - 0.5) / root,
        lambda_paper: ch.theta * gamma(beta - 0.5) / root,
    })
}

/// The Mittag-Leffler family with matched calibration.
pub fn ml_family_msd(ch: &PhysicalChannel, beta: f64, kt: f64, t: f64) -> Result<f64> {
    ml_family_msd_with(ch, beta, kt, LambdaVariant::Matched, t)
}

pub fn ml_family_msd_with(
    ch: &PhysicalChannel,
    beta: f64,
    kt: f64,
    variant: LambdaVariant,
    t: f64,
) -> Result<f64> {
    check_t(t)?;
    let c = calibrate_family(ch, beta, kt)?;
    let e = ml_kernel(MlOrder::new(0.5, beta)?, c.lambda(variant), 1.0, t)?;
    Ok(2.0 * kt * c.zeta_prime * e)
}

/// `2 kT t^2 E_{3/2,3}(-lambda2 t^{3/2})`: ballistic, then normal, then single-file.
pub fn three_regime_msd(kt: f64, lambda2: f64, t: f64) -> Result<f64> {
    if !(kt > 0.0) || !(lambda2 > 0.0) {
        return Err(param_err("kT and lambda2 must be positive"));
    }
    check_t(t)?;
    Ok(2.0 * kt * ml_kernel(MlOrder::new(1.5, 3.0)?, lambda2, 2.0, t)?)
}

fn log_slopes(curve: &MsdCurve, include_ends: bool) -> Result<Vec<(f64, f64)>> {
    let n = curve.len();
    if n < 3 {
        return Err(param_err("local exponents need at least 3 points"));
    }
    if curve.values.iter().any(|v| !(*v > 0.0)) {
        return Err(domain_err("local exponents need strictly positive MSD values"));
    }
    let lt: Vec<f64> = curve.times.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = curve.values.iter().map(|v| v.ln()).collect();
    let slope = |i: usize, j: usize| (lv[j] - lv[i]) / (lt[j] - lt[i]);
    let mut out = Vec::with_capacity(n);
    if include_ends {
        out.push((curve.times[0], slope(0, 1)));
    }
    for i in 1..n - 1 {
        out.push((curve.times[i], slope(i - 1, i + 1)));
    }
    if include_ends {
        out.push((curve.times[n - 1], slope(n - 2, n - 1)));
    }
    Ok(out)
}

/// Centered slope of `log R^2` against `log t` at interior points.
pub fn local_exponent(curve: &MsdCurve) -> Result<Vec<(f64, f64)>> {
    log_slopes(curve, false)
}

/// Like [`local_exponent`] but over every point, with one-sided slopes at the ends.
pub fn exponent_profile(curve: &MsdCurve) -> Result<Vec<(f64, f64)>> {
    log_slopes(curve, true)
}

/// A maximal stretch of a curve whose local exponent stays near `exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeInterval {
    pub exponent: f64,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Maximal intervals where `|slope - target| <= tol`, per target in order.
/// End points use one-sided slopes so a clean power law covers the whole grid.
pub fn regime_boundaries(curve: &MsdCurve, targets: &[f64], tol: f64) -> Result<Vec<RegimeInterval>> {
    let slopes = log_slopes(curve, true)?;
    let mut out = Vec::new();
    for &target in targets {
        let mut start: Option<usize> = None;
        for (i, &(_, s)) in slopes.iter().enumerate() {
            let inside = (s - target).abs() <= tol;
            match (inside, start) {
                (true, None) => start = Some(i),
                (false, Some(b)) => {
                    out.push(RegimeInterval {
                        exponent: target,
                        t_enter: slopes[b].0,
                        t_exit: slopes[i - 1].0,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            out.push(RegimeInterval {
                exponent: target,
                t_enter: slopes[b].0,
                t_exit: slopes[slopes.len() - 1].0,
            });
        }
    }
    Ok(out)
}

/// Largest `|a - b| / b` over two curves on the same grid.
pub fn max_relative_gap(a: &MsdCurve, b: &MsdCurve) -> Result<f64> {
    if a.times != b.times {
        return Err(param_err("curves must share a time grid"));
    }
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_derived_values() {
        let ch = PhysicalChannel::new(1.0, 0.5, 1.0).unwrap();
        assert!((ch.d0() - 0.25).abs() < 1e-15);
        assert!((ch.mobility() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(PhysicalChannel::new(1.0, 1.0, 1.0).is_err());
        assert!(PhysicalChannel::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(MsdCurve::new(vec![1.0, 1.0], vec![0.0, 0.0], None, "x").is_err());
        assert!(MsdCurve::new(vec![1.0, 2.0], vec![0.0, -1.0], None, "x").is_err());
        assert!(MsdCurve::new(vec![1.0, 2.0], vec![0.0], None, "x").is_err());
        assert!(MsdCurve::new(vec![1.0, 2.0], vec![0.0, 1.0], Some(vec![0.0]), "x").is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-4, 1e6, 20).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[200], 1e6);
    }

    #[test]
    fn figure_values() {
        let ch = PhysicalChannel::new(1.0, 0.5, 1.0).unwrap();
        let v = brandani_msd(&ch, 1.0).unwrap();
        assert!((v - 0.5 / (1.0 + 0.5 * (PI / 2.0).sqrt())).abs() < 1e-15);
        assert!((lin_msd(1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let c = calibrate_family(&ch, 2.0, 1.0).unwrap();
        assert!((c.zeta_prime - 0.25).abs() < 1e-15);
        assert!((c.lambda_matched - 0.5 * 2f64.sqrt()).abs() < 1e-14);
    }
}
