//! Numerical inversion of Laplace transforms along a Talbot contour, and the
//! transfer functions of the fractional GLE.
//!
//! The contour is the optimized cotangent contour of Weideman and Trefethen,
//! `z(th) = (M/t) (-0.6122 + 0.5017 th cot(0.6407 th) + 0.2645 i th)`,
//! sampled at midpoints in `th in (0, pi)` and folded by conjugate symmetry.
//! `M` is capped so that extra nodes only refine the quadrature without
//! inflating the `e^{zt}` growth on the contour.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain_err, param_err, Error, Result};

/// Smallest accepted node count.
pub const MIN_NODES: usize = 16;
/// Node count used by the convenience routines.
pub const DEFAULT_NODES: usize = 64;
/// Contour scale stops growing at this many (full-circle) nodes.
const CONTOUR_SCALE_CAP: usize = 36;
const REFINE_REL_TOL: f64 = 1e-6;
const REFINE_ABS_FLOOR: f64 = 1e-13;

/// Transfer function parameters `1 / (s^{alpha+1} + l1 s + l2 s^gamma)`, or
/// `1 / (l1 s + l2 s^gamma)` when `overdamped`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub overdamped: bool,
}

impl TransferSpec {
    pub fn new(alpha: f64, gamma: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let s = Self {
            alpha,
            gamma,
            lambda1,
            lambda2,
            overdamped: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn overdamped(gamma: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let s = Self {
            alpha: 1.0,
            gamma,
            lambda1,
            lambda2,
            overdamped: true,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(param_err(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(param_err(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite())
            || !(self.lambda2 >= 0.0 && self.lambda2.is_finite())
        {
            return Err(param_err("kernel weights must be finite and nonnegative"));
        }
        if self.overdamped && self.lambda1 == 0.0 && self.lambda2 == 0.0 {
            return Err(param_err(
                "overdamped transfer function needs lambda1 or lambda2 > 0",
            ));
        }
        Ok(())
    }

    /// Evaluate without branch-cut checks (used on the contour).
    pub fn eval_unchecked(&self, s: Complex64) -> Complex64 {
        let mut den = self.lambda1 * s;
        if self.lambda2 != 0.0 {
            den += self.lambda2 * s.powf(self.gamma);
        }
        if !self.overdamped {
            den += s.powf(self.alpha + 1.0);
        }
        den.inv()
    }
}

/// `G~(s)` on the principal branch.
pub fn transfer_eval(spec: &TransferSpec, s: Complex64) -> Result<Complex64> {
    if s.im == 0.0 && s.re <= 0.0 {
        return Err(domain_err(format!(
            "s = {s} lies on the branch cut of the transfer function"
        )));
    }
    Ok(spec.eval_unchecked(s))
}

/// Plain Talbot quadrature with `nodes` points in the upper half plane.
pub fn talbot(f: impl Fn(Complex64) -> Complex64, t: f64, nodes: usize) -> f64 {
    talbot_shifted(f, t, nodes, 0.0)
}

/// Talbot quadrature on the contour translated by `shift`, which should be
/// the real part of the rightmost singularity of `f` (`0` for branch points
/// at the origin). A negative shift keeps exponentially decaying inverses
/// accurate in relative terms.
pub fn talbot_shifted(f: impl Fn(Complex64) -> Complex64, t: f64, nodes: usize, shift: f64) -> f64 {
    let m = (2 * nodes).min(CONTOUR_SCALE_CAP) as f64;
    let mut sum = 0.0;
    for k in 0..nodes {
        let th = (k as f64 + 0.5) * PI / nodes as f64;
        let c = 0.6407 * th;
        let cot = c.cos() / c.sin();
        let z = Complex64::new(
            m / t * (-0.6122 + 0.5017 * th * cot),
            m / t * 0.2645 * th,
        );
        let dcot = -0.6407 / (c.sin() * c.sin());
        let dz = Complex64::new(m / t * 0.5017 * (cot + th * dcot), m / t * 0.2645);
        sum += ((z * t).exp() * f(z + shift) * dz).im;
    }
    (shift * t).exp() * sum / nodes as f64
}

/// Inverse Laplace transform at `t`, checked against a refined quadrature.
pub fn invert_at(f: impl Fn(Complex64) -> Complex64, t: f64, nodes: usize) -> Result<f64> {
    invert_at_shifted(f, t, nodes, 0.0)
}

/// [`invert_at`] on a contour translated by `shift` (see [`talbot_shifted`]).
pub fn invert_at_shifted(
    f: impl Fn(Complex64) -> Complex64,
    t: f64,
    nodes: usize,
    shift: f64,
) -> Result<f64> {
    if !shift.is_finite() {
        return Err(param_err(format!("contour shift must be finite, got {shift}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(param_err(format!("inversion time must be positive, got {t}")));
    }
    if nodes < MIN_NODES {
        return Err(param_err(format!(
            "at least {MIN_NODES} nodes are required, got {nodes}"
        )));
    }
    let a = talbot_shifted(&f, t, nodes, shift);
    let b = talbot_shifted(&f, t, nodes + nodes / 2, shift);
    let scale = a.abs().max(b.abs());
    if !a.is_finite() || (a - b).abs() > REFINE_REL_TOL * scale + REFINE_ABS_FLOOR {
        return Err(Error::Accuracy {
            context: format!("Talbot inversion at t = {t} ({nodes} vs {} nodes, refined {b})", nodes + nodes / 2),
            estimate: a,
            bound: (a - b).abs(),
        });
    }
    Ok(a)
}

/// `G(t)` for a transfer specification.
pub fn invert_transfer(spec: &TransferSpec, t: f64, nodes: usize) -> Result<f64> {
    invert_at(|s| spec.eval_unchecked(s), t, nodes)
}
