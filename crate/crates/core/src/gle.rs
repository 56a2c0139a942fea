//! The fractional generalized Langevin equation with memory kernel
//! `lambda1 delta(t) + lambda2 t^{-gamma} / Gamma(1 - gamma)` and external
//! force `a t^{-kappa} / Gamma(1 - kappa)`.
//!
//! The Green function has Laplace transform
//! `1 / (s^{alpha+1} + lambda1 s + lambda2 s^gamma)`. Three routes evaluate it:
//!
//! * closed Mittag-Leffler forms when the kernel has a single term
//!   (`lambda1 = 0`, `lambda2 = 0` or `gamma = 1`) and in the overdamped case;
//! * the expansion in powers of `lambda1` with grid convolutions;
//! * Talbot inversion of the transfer function.
//!
//! Mean, variance and MSD are built on the same routes. The variance uses
//! the fluctuation-dissipation form
//! `sigma^2 = 2 kT int_0^t G(u) (1 - D^alpha G(u)) du`.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::{param_err, Error, Result};
use crate::fraccalc::{PreparedProduct, ProductWeights};
use crate::laplace::{invert_at, TransferSpec, DEFAULT_NODES};
use crate::mlf::{ml_kernel, MlOrder};
use crate::msd_models::MsdCurve;
use crate::quad::{integrate, integrate_from_origin};
use crate::special::{gamma, rgamma};

/// Terms of the `lambda1` expansion are dropped once below this fraction of the sum.
pub const SERIES_REL_TOL: f64 = 1e-10;
/// Cap on correction terms in the `lambda1` expansion.
pub const SERIES_MAX_TERMS: usize = 25;
/// Default routes leave the series for Talbot inversion when the truncation
/// bound or the cancellation exceeds this relative level.
pub const SERIES_ACCEPT_TOL: f64 = 1e-8;
/// Cells of the first convolution grid on `[0, t]`.
pub const SERIES_GRID_CELLS: usize = 4096;
/// Grid-refinement target for the series-route variance.
pub const VARIANCE_GRID_REL_TOL: f64 = 1e-5;
const VARIANCE_MAX_CELLS: usize = 1 << 17;
const QUAD_REL_TOL: f64 = 1e-12;
const INVERSION_QUAD_REL_TOL: f64 = 1e-9;

/// Parameters of the model. `v0` and `force_amp` default to `sqrt(kT)`
/// (equipartition, `a = a1 sqrt(kT)` with `a1 = 1`) when unset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GleParams {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa: f64,
    pub force_amp: Option<f64>,
    pub kt: f64,
    pub x0: f64,
    pub v0: Option<f64>,
    /// Drop the (fractional) acceleration term.
    pub overdamped: bool,
}

impl GleParams {
    /// Force-free defaults aside from the equipartition values: `kappa = 1`,
    /// `x0 = 0`, `v0` and `a` unset.
    pub fn new(alpha: f64, gamma: f64, lambda1: f64, lambda2: f64, kt: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gamma,
            lambda1,
            lambda2,
            kappa: 1.0,
            force_amp: None,
            kt,
            x0: 0.0,
            v0: None,
            overdamped: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Overdamped model with `zeta = 1/lambda1` and `lambda = lambda2/lambda1`.
    pub fn overdamped(gamma: f64, lambda1: f64, lambda2: f64, kt: f64) -> Result<Self> {
        let p = Self {
            alpha: 1.0,
            overdamped: true,
            ..Self::new(1.0, gamma, lambda1, lambda2, kt)?
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_force(mut self, amp: f64, kappa: f64) -> Result<Self> {
        self.force_amp = Some(amp);
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }

    pub fn with_v0(mut self, v0: f64) -> Result<Self> {
        self.v0 = Some(v0);
        self.validate()?;
        Ok(self)
    }

    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        self.x0 = x0;
        self.validate()?;
        Ok(self)
    }

    pub fn v0(&self) -> f64 {
        self.v0.unwrap_or_else(|| self.kt.sqrt())
    }

    pub fn force_amp(&self) -> f64 {
        self.force_amp.unwrap_or_else(|| self.kt.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(param_err(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("gamma", self.gamma)?;
        unit("kappa", self.kappa)?;
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(param_err(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.kt > 0.0) || !self.kt.is_finite() {
            return Err(param_err(format!("kT must be positive, got {}", self.kt)));
        }
        for (name, v) in [
            ("x0", Some(self.x0)),
            ("v0", self.v0),
            ("force amplitude", self.force_amp),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(param_err(format!("{name} must be finite")));
                }
            }
        }
        if self.overdamped && !(self.lambda1 > 0.0) {
            return Err(param_err(
                "the overdamped model needs lambda1 > 0 (zeta = 1/lambda1)",
            ));
        }
        Ok(())
    }

    pub fn transfer_spec(&self) -> TransferSpec {
        TransferSpec {
            alpha: self.alpha,
            gamma: self.gamma,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            overdamped: self.overdamped,
        }
    }

    /// `(order, rate)` of the single-kernel closed form, if one applies.
    fn single_kernel(&self) -> Option<SingleKernel> {
        if self.overdamped {
            return None;
        }
        let alpha = self.alpha;
        if self.lambda1 == 0.0 {
            Some(SingleKernel::new(alpha, alpha - self.gamma + 1.0, self.lambda2))
        } else if self.lambda2 == 0.0 {
            Some(SingleKernel::new(alpha, alpha, self.lambda1))
        } else if self.gamma == 1.0 {
            Some(SingleKernel::new(alpha, alpha, self.lambda1 + self.lambda2))
        } else {
            None
        }
    }

    /// The route [`green`] and friends take for these parameters.
    pub fn route(&self) -> GreenRoute {
        if self.overdamped || self.single_kernel().is_some() {
            GreenRoute::Closed
        } else {
            GreenRoute::Series
        }
    }
}

/// How the Green function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenRoute {
    Closed,
    Series,
    Laplace,
}

/// `G = t^alpha E_{a,alpha+1}(-lam t^a)` and its companions.
#[derive(Debug, Clone, Copy)]
struct SingleKernel {
    alpha: f64,
    a: f64,
    lam: f64,
}

impl SingleKernel {
    fn new(alpha: f64, a: f64, lam: f64) -> Self {
        Self { alpha, a, lam }
    }

    fn kernel(&self, beta: f64, power: f64, t: f64) -> Result<f64> {
        ml_kernel(MlOrder::new(self.a, beta)?, self.lam, power, t)
    }

    fn green(&self, t: f64) -> Result<f64> {
        self.kernel(self.alpha + 1.0, self.alpha, t)
    }

    /// `I^{1-mu} G = t^{alpha-mu+1} E_{a, alpha-mu+2}`.
    fn response(&self, mu: f64, t: f64) -> Result<f64> {
        self.kernel(self.alpha - mu + 2.0, self.alpha - mu + 1.0, t)
    }

    fn integral(&self, t: f64) -> Result<f64> {
        self.kernel(self.alpha + 2.0, self.alpha + 1.0, t)
    }

    /// `D^alpha G = E_{a,1}(-lam t^a)`.
    fn caputo(&self, t: f64) -> Result<f64> {
        self.kernel(1.0, 0.0, t)
    }

    /// `1 - D^alpha G = lam t^a E_{a,a+1}(-lam t^a)`, free of cancellation.
    fn caputo_complement(&self, t: f64) -> Result<f64> {
        Ok(self.lam * self.kernel(self.a + 1.0, self.a, t)?)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(param_err(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Overdamped `G = zeta E_{1-gamma,1}(-lambda t^{1-gamma})` and `int G`.
fn overdamped_green(p: &GleParams, t: f64) -> Result<f64> {
    let zeta = 1.0 / p.lambda1;
    let lam = p.lambda2 / p.lambda1;
    if p.gamma == 1.0 {
        return Ok(zeta / (1.0 + lam));
    }
    Ok(zeta * ml_kernel(MlOrder::new(1.0 - p.gamma, 1.0)?, lam, 0.0, t)?)
}

fn overdamped_integral(p: &GleParams, t: f64) -> Result<f64> {
    let zeta = 1.0 / p.lambda1;
    let lam = p.lambda2 / p.lambda1;
    if p.gamma == 1.0 {
        return Ok(zeta * t / (1.0 + lam));
    }
    Ok(zeta * ml_kernel(MlOrder::new(1.0 - p.gamma, 2.0)?, lam, 1.0, t)?)
}

/// Closed-form Green function (single-kernel or overdamped models).
pub fn green_closed(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if p.overdamped {
        return overdamped_green(p, t);
    }
    match p.single_kernel() {
        Some(k) => k.green(t),
        None => Err(Error::UnsupportedBranch(
            "no closed form with lambda1 > 0, lambda2 > 0 and gamma < 1; use the series \
             or Laplace route"
                .into(),
        )),
    }
}

/// Truncated `lambda1` expansion with the first omitted term as error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEval {
    pub value: f64,
    pub bound: f64,
    /// Correction terms included.
    pub terms: usize,
}

/// Uniform grid on `[0, t]` carrying the convolution kernel `G0*`.
struct SeriesGrid {
    lambda1: f64,
    base: SingleKernel,
    h: f64,
    points: usize,
    conv: PreparedProduct,
}

/// Outcome of summing one quantity on the grid.
struct GridSeries {
    values: Vec<f64>,
    bound: f64,
    terms: usize,
    /// Largest summand at the last point, seed included.
    peak: f64,
}

impl GridSeries {
    /// Converged without losing more than about eight digits to cancellation.
    fn trustworthy(&self) -> bool {
        let v = self.values.last().expect("grid is nonempty").abs();
        self.bound <= SERIES_ACCEPT_TOL * v && self.peak <= v / SERIES_ACCEPT_TOL
    }
}

impl SeriesGrid {
    fn new(p: &GleParams, t: f64, cells: usize) -> Result<Self> {
        let base = SingleKernel::new(p.alpha, p.alpha - p.gamma + 1.0, p.lambda2);
        let h = t / cells as f64;
        let points = cells + 1;
        // kernel dG0/dt, integrated exactly through its primitives G0 and int G0
        let q1 = sample(points, h, &|u| base.green(u))?;
        let q2 = sample(points, h, &|u| base.integral(u))?;
        let conv = ProductWeights::from_primitive_samples(&q1, &q2, h).prepare(points);
        Ok(Self {
            lambda1: p.lambda1,
            base,
            h,
            points,
            conv,
        })
    }

    fn sample(&self, f: impl Fn(f64) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        sample(self.points, self.h, &f)
    }

    /// `sum_{n>=1} (-lambda1)^n seed * (G0*)^{*n}` until the value at the
    /// last grid point settles (the leading `seed` itself is not included).
    fn corrections(&self, seed: &[f64], reference: f64, max_terms: usize) -> Result<GridSeries> {
        let last = self.points - 1;
        let t = self.h * last as f64;
        let mut total = vec![0.0; self.points];
        let mut term = seed.to_vec();
        let mut prev_mag = f64::INFINITY;
        let mut peak = reference.abs();
        for n in 1..=max_terms + 1 {
            term = self.conv.apply(&term);
            for v in term.iter_mut() {
                *v *= -self.lambda1;
            }
            let mag = term[last].abs();
            let partial = (reference + total[last]).abs();
            if mag <= SERIES_REL_TOL * partial || n == max_terms + 1 {
                if n == max_terms + 1 && mag >= prev_mag && mag > SERIES_REL_TOL * partial {
                    return Err(Error::Divergence {
                        t,
                        term_index: n,
                        magnitude: mag,
                    });
                }
                return Ok(GridSeries {
                    values: total,
                    bound: mag,
                    terms: n - 1,
                    peak,
                });
            }
            peak = peak.max(mag);
            for (s, v) in total.iter_mut().zip(&term) {
                *s += v;
            }
            prev_mag = mag;
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Full series of a quantity whose `lambda1 = 0` value is `seed`.
    fn sum(&self, seed: Vec<f64>, max_terms: usize) -> Result<GridSeries> {
        let last = self.points - 1;
        let mut out = self.corrections(&seed, seed[last], max_terms)?;
        for (s, v) in out.values.iter_mut().zip(&seed) {
            *s += v;
        }
        Ok(out)
    }
}

fn sample(points: usize, h: f64, f: &(impl Fn(f64) -> Result<f64> + Sync)) -> Result<Vec<f64>> {
    (0..points)
        .into_par_iter()
        .map(|i| if i == 0 { Ok(0.0) } else { f(i as f64 * h) })
        .collect()
}

/// `G(t)` from the `lambda1` expansion with at most `n_terms` corrections.
pub fn green_series(p: &GleParams, t: f64, n_terms: usize) -> Result<SeriesEval> {
    p.validate()?;
    check_time(t)?;
    if n_terms == 0 {
        return Err(param_err("the series needs at least one term"));
    }
    if p.overdamped {
        return Err(Error::UnsupportedBranch(
            "the lambda1 expansion is for the inertial model".into(),
        ));
    }
    let base = SingleKernel::new(p.alpha, p.alpha - p.gamma + 1.0, p.lambda2);
    if p.lambda1 == 0.0 {
        return Ok(SeriesEval {
            value: base.green(t)?,
            bound: 0.0,
            terms: 0,
        });
    }
    let s = series_green_grid(p, t, n_terms)?;
    Ok(SeriesEval {
        value: *s.values.last().expect("grid is nonempty"),
        bound: s.bound,
        terms: s.terms,
    })
}

fn series_green_grid(p: &GleParams, t: f64, n_terms: usize) -> Result<GridSeries> {
    let base = SingleKernel::new(p.alpha, p.alpha - p.gamma + 1.0, p.lambda2);
    let grid = SeriesGrid::new(p, t, SERIES_GRID_CELLS)?;
    let seed = grid.sample(move |u| base.green(u))?;
    grid.sum(seed, n_terms.min(SERIES_MAX_TERMS))
}

/// `G(t)` by Talbot inversion of the transfer function.
pub fn green_laplace(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    let spec = p.transfer_spec();
    invert_at(|s| spec.eval_unchecked(s), t, DEFAULT_NODES)
}

/// `G(t)` on the default route, falling back to Talbot inversion where the series diverges.
pub fn green(p: &GleParams, t: f64) -> Result<f64> {
    match p.route() {
        GreenRoute::Closed => green_closed(p, t),
        _ => {
            if p.lambda1 == 0.0 {
                return green_series(p, t, SERIES_MAX_TERMS).map(|s| s.value);
            }
            p.validate()?;
            check_time(t)?;
            match series_green_grid(p, t, SERIES_MAX_TERMS) {
                Ok(s) if s.trustworthy() => Ok(*s.values.last().expect("grid is nonempty")),
                Ok(_) | Err(Error::Divergence { .. }) => green_laplace(p, t),
                Err(e) => Err(e),
            }
        }
    }
}

/// Quantities derived linearly from `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenQuantity {
    Green,
    /// `I^{1-alpha} G`, response to the initial velocity.
    VelocityResponse,
    /// `I^{1-kappa} G`, response to the external force.
    ForceResponse,
    /// `int_0^t G`.
    Integral,
    /// `D^alpha G`.
    Caputo,
}

/// Any [`GreenQuantity`] by Talbot inversion (`s^{alpha-1} G~`, `s^{kappa-1} G~`,
/// `G~/s`, `s^alpha G~`).
pub fn quantity_laplace(p: &GleParams, q: GreenQuantity, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    let spec = p.transfer_spec();
    let power = match q {
        GreenQuantity::Green => 0.0,
        GreenQuantity::VelocityResponse => p.alpha - 1.0,
        GreenQuantity::ForceResponse => p.kappa - 1.0,
        GreenQuantity::Integral => -1.0,
        GreenQuantity::Caputo => p.alpha,
    };
    invert_at(|s| spec.eval_unchecked(s) * s.powf(power), t, DEFAULT_NODES)
}

/// Mean position `x0 + v0 I^{1-alpha} G + a I^{1-kappa} G`.
pub fn mean_displacement(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if p.overdamped {
        return Ok(p.x0);
    }
    let (v0, amp) = (p.v0(), p.force_amp());
    if let Some(k) = p.single_kernel() {
        let mut m = p.x0;
        if v0 != 0.0 {
            m += v0 * k.response(p.alpha, t)?;
        }
        if amp != 0.0 {
            m += amp * k.response(p.kappa, t)?;
        }
        return Ok(m);
    }
    if v0 == 0.0 && amp == 0.0 {
        return Ok(p.x0);
    }
    match series_displacement(p, t, SERIES_GRID_CELLS) {
        Ok(d) if d.trustworthy() => Ok(p.x0 + d.values.last().expect("grid is nonempty")),
        Ok(_) | Err(Error::Divergence { .. }) => Ok(p.x0 + laplace_displacement(p, t)?),
        Err(e) => Err(e),
    }
}

/// `x_bar - x0` by Talbot inversion, used where the series diverges.
fn laplace_displacement(p: &GleParams, t: f64) -> Result<f64> {
    let mut d = 0.0;
    if p.v0() != 0.0 {
        d += p.v0() * quantity_laplace(p, GreenQuantity::VelocityResponse, t)?;
    }
    if p.force_amp() != 0.0 {
        d += p.force_amp() * quantity_laplace(p, GreenQuantity::ForceResponse, t)?;
    }
    Ok(d)
}

/// `x_bar - x0` at every point of a uniform grid of `cells` cells on `[0, t]`.
fn series_displacement(p: &GleParams, t: f64, cells: usize) -> Result<GridSeries> {
    let (v0, amp) = (p.v0(), p.force_amp());
    let grid = SeriesGrid::new(p, t, cells)?;
    let base = grid.base;
    let (alpha, kappa) = (p.alpha, p.kappa);
    let seed = grid.sample(move |u| {
        let mut s = 0.0;
        if v0 != 0.0 {
            s += v0 * base.response(alpha, u)?;
        }
        if amp != 0.0 {
            s += amp * base.response(kappa, u)?;
        }
        Ok(s)
    })?;
    grid.sum(seed, SERIES_MAX_TERMS)
}

/// Mean position at `k dt`, `k = 0..=n`.
pub fn mean_on_grid(p: &GleParams, dt: f64, n: usize) -> Result<Vec<f64>> {
    p.validate()?;
    check_time(dt)?;
    let (v0, amp) = (p.v0(), p.force_amp());
    if p.overdamped || (v0 == 0.0 && amp == 0.0) {
        return Ok(vec![p.x0; n + 1]);
    }
    if p.route() == GreenRoute::Closed {
        let mut out = vec![p.x0];
        out.extend(
            (1..=n)
                .into_par_iter()
                .map(|k| mean_displacement(p, k as f64 * dt))
                .collect::<Result<Vec<_>>>()?,
        );
        return Ok(out);
    }
    let refine = SERIES_GRID_CELLS.div_ceil(n.max(1)).max(1);
    match series_displacement(p, n as f64 * dt, n * refine) {
        Ok(d) if d.trustworthy() => Ok((0..=n).map(|k| p.x0 + d.values[k * refine]).collect()),
        Ok(_) | Err(Error::Divergence { .. }) => {
            let mut out = vec![p.x0];
            out.extend(
                (1..=n)
                    .into_par_iter()
                    .map(|k| Ok(p.x0 + laplace_displacement(p, k as f64 * dt)?))
                    .collect::<Result<Vec<_>>>()?,
            );
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// `int_0^t G`.
pub fn green_integral(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if p.overdamped {
        return overdamped_integral(p, t);
    }
    match p.single_kernel() {
        Some(k) => k.integral(t),
        None => quantity_laplace(p, GreenQuantity::Integral, t),
    }
}

/// Variance of the position from the fluctuation-dissipation relation.
pub fn variance(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if p.overdamped {
        return Ok(2.0 * p.kt * overdamped_integral(p, t)?);
    }
    if let Some(k) = p.single_kernel() {
        if k.lam == 0.0 {
            // free motion: no friction, no noise
            return Ok(0.0);
        }
        let failure = RefCell::new(None);
        let (v, _) = integrate_from_origin(
            |u| match k.green(u).and_then(|g| Ok(g * k.caputo_complement(u)?)) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            t,
            QUAD_REL_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        return Ok(2.0 * p.kt * v);
    }
    variance_by_inversion(p, t)
}

/// `2 kT int_0^t G (1 - D^alpha G)` with both factors from Talbot inversion,
/// integrated adaptively.
fn variance_by_inversion(p: &GleParams, t: f64) -> Result<f64> {
    let spec = p.transfer_spec();
    let failure = RefCell::new(None);
    let integrand = |u: f64| {
        let g = invert_at(|s| spec.eval_unchecked(s), u, DEFAULT_NODES);
        let d = invert_at(|s| spec.eval_unchecked(s) * s.powf(p.alpha), u, DEFAULT_NODES);
        match (g, d) {
            (Ok(g), Ok(d)) => g * (1.0 - d),
            (Err(e), _) | (_, Err(e)) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let (v, _) = integrate(integrand, 0.0, t, INVERSION_QUAD_REL_TOL, 1e-14 * t);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(2.0 * p.kt * v)
}

/// Variance from the `lambda1` expansion on a uniform grid, refined until
/// doubling the cells moves the result by less than [`VARIANCE_GRID_REL_TOL`].
/// Needs of order `t / h` cells with `h` below the kernel time scale, so it
/// is meant for moderate `t`; [`variance`] uses Talbot samples instead.
pub fn variance_series_grid(p: &GleParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if p.overdamped {
        return Err(Error::UnsupportedBranch(
            "the lambda1 expansion is for the inertial model".into(),
        ));
    }
    series_variance(p, t)
}

fn series_variance(p: &GleParams, t: f64) -> Result<f64> {
    let mut cells = SERIES_GRID_CELLS;
    let mut prev: Option<f64> = None;
    loop {
        let v = series_variance_on_grid(p, t, cells)?;
        if let Some(pv) = prev {
            if (v - pv).abs() <= VARIANCE_GRID_REL_TOL * v.abs() {
                return Ok(v);
            }
        }
        if cells >= VARIANCE_MAX_CELLS {
            return Err(Error::Accuracy {
                context: format!("variance grid refinement at t = {t}"),
                estimate: v,
                bound: prev.map_or(f64::INFINITY, |pv| (v - pv).abs()),
            });
        }
        prev = Some(v);
        cells *= 2;
    }
}

fn series_variance_on_grid(p: &GleParams, t: f64, cells: usize) -> Result<f64> {
    let grid = SeriesGrid::new(p, t, cells)?;
    let base = grid.base;
    let g0 = grid.sample(move |u| base.green(u))?;
    let g = grid.sum(g0, SERIES_MAX_TERMS)?;
    // 1 - D^alpha G = (1 - D^alpha G0) - corrections of D^alpha G0
    let d0 = grid.sample(move |u| base.caputo(u))?;
    let mut d0 = d0;
    d0[0] = 1.0;
    let c0 = grid.sample(move |u| base.caputo_complement(u))?;
    let corr = grid.corrections(&d0, d0[d0.len() - 1], SERIES_MAX_TERMS)?;
    let h = grid.h;
    let integrand: Vec<f64> = g
        .values
        .iter()
        .zip(c0.iter().zip(&corr.values))
        .map(|(gv, (c, d))| gv * (c - d))
        .collect();
    let n = integrand.len();
    let inner: f64 = integrand[1..n - 1].iter().sum();
    let trap = h * (inner + 0.5 * (integrand[0] + integrand[n - 1]));
    Ok(2.0 * p.kt * trap)
}

/// `R^2 = (xbar - x0)^2 + sigma^2`.
pub fn msd(p: &GleParams, t: f64) -> Result<f64> {
    let m = mean_displacement(p, t)? - p.x0;
    Ok(m * m + variance(p, t)?)
}

/// MSD on a set of times, evaluated in parallel.
pub fn msd_curve(p: &GleParams, times: &[f64]) -> Result<MsdCurve> {
    let values: Result<Vec<f64>> = times.par_iter().map(|&t| msd(p, t)).collect();
    MsdCurve::new(times.to_vec(), values?, None, format!("gle:{:?}", p.route()).to_lowercase())
}

/// Which regime an asymptotic law describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Short,
    Long,
}

/// Functional form of a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawForm {
    /// `prefactor * t^exponent`
    Power,
    /// `~ log t`
    Log,
    /// `~ constant`
    Constant,
}

/// One branch of a short- or long-time MSD law.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticLaw {
    pub exponent: f64,
    /// `None` where only the exponent is known.
    pub prefactor: Option<f64>,
    pub regime: Regime,
    pub form: LawForm,
    pub condition: String,
}

impl AsymptoticLaw {
    /// `prefactor * t^exponent` for power laws with a known prefactor.
    pub fn eval(&self, t: f64) -> Option<f64> {
        match (self.form, self.prefactor) {
            (LawForm::Power, Some(c)) => Some(c * t.powf(self.exponent)),
            _ => None,
        }
    }
}

/// Parameter cases of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseTag {
    /// Delta kernel only, white noise, no force.
    Case1,
    /// Power-law kernel only with independent noise `c t^{-noise_exponent}`, no force.
    Case2 { noise_exponent: f64 },
    /// Both kernel terms with force (the general model).
    Case3,
    /// Overdamped.
    Case3a,
    /// Power-law kernel only, with force.
    Case3b,
}

/// Which Gamma factor the overdamped long-time law carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverdampedPrefactor {
    /// `Gamma(1 + gamma)`, consistent with the Mittag-Leffler asymptotics.
    Corrected,
    /// `Gamma(1 - gamma)` as printed in the paper.
    PaperLiteral,
}

/// Long-time overdamped law `2 kT zeta t^gamma / (lambda Gamma(.))`.
pub fn overdamped_long_law(p: &GleParams, variant: OverdampedPrefactor) -> Result<AsymptoticLaw> {
    p.validate()?;
    if !p.overdamped || !(p.lambda2 > 0.0) || p.gamma >= 1.0 {
        return Err(param_err(
            "overdamped long-time law needs the overdamped model with lambda2 > 0, gamma < 1",
        ));
    }
    let zeta = 1.0 / p.lambda1;
    let lam = p.lambda2 / p.lambda1;
    let g = match variant {
        OverdampedPrefactor::Corrected => rgamma(1.0 + p.gamma),
        OverdampedPrefactor::PaperLiteral => rgamma(1.0 - p.gamma),
    };
    Ok(AsymptoticLaw {
        exponent: p.gamma,
        prefactor: Some(2.0 * p.kt * zeta * g / lam),
        regime: Regime::Long,
        form: LawForm::Power,
        condition: match variant {
            OverdampedPrefactor::Corrected => "overdamped, Gamma(1+gamma)".into(),
            OverdampedPrefactor::PaperLiteral => "overdamped, Gamma(1-gamma) as printed".into(),
        },
    })
}

/// `(exponent, coefficient)` terms; equal exponents merge.
fn merge(terms: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(e, c) in terms {
        if c == 0.0 {
            continue;
        }
        match out.iter_mut().find(|(oe, _)| (*oe - e).abs() < 1e-12) {
            Some(slot) => slot.1 += c,
            None => out.push((e, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

fn pick(terms: &[(f64, f64)], smallest: bool) -> Option<(f64, f64)> {
    let merged = merge(terms);
    let best = merged.iter().map(|t| t.0).fold(None, |acc: Option<f64>, e| {
        Some(match acc {
            None => e,
            Some(a) if smallest => a.min(e),
            Some(a) => a.max(e),
        })
    })?;
    merged.into_iter().find(|(e, _)| (*e - best).abs() < 1e-12)
}

fn cmp_tag(lhs: f64, rhs: f64, lname: &str, rname: &str) -> String {
    if (lhs - rhs).abs() < 1e-12 {
        format!("{lname} = {rname}")
    } else if lhs < rhs {
        format!("{lname} < {rname}")
    } else {
        format!("{lname} > {rname}")
    }
}

/// Short- and long-time MSD laws for the named case.
pub fn asymptotic_laws(p: &GleParams, case: CaseTag) -> Result<Vec<AsymptoticLaw>> {
    p.validate()?;
    let no_force = p.force_amp() == 0.0;
    match case {
        CaseTag::Case1 => {
            if p.overdamped || !(p.lambda1 > 0.0) || p.lambda2 != 0.0 || p.alpha >= 1.0 || !no_force
            {
                return Err(param_err(
                    "Case 1 needs 0 < alpha < 1, lambda1 > 0, lambda2 = 0 and a = 0",
                ));
            }
            Ok(inertial_laws(p))
        }
        CaseTag::Case2 { noise_exponent } => {
            if p.overdamped || p.lambda1 != 0.0 || !(p.lambda2 > 0.0) || !no_force {
                return Err(param_err(
                    "Case 2 needs lambda1 = 0, lambda2 > 0 and a = 0",
                ));
            }
            if !(noise_exponent > 0.0 && noise_exponent <= 1.0) {
                return Err(param_err(format!(
                    "noise exponent must lie in (0, 1], got {noise_exponent}"
                )));
            }
            Ok(case2_laws(p, noise_exponent))
        }
        CaseTag::Case3 => {
            if p.overdamped || !(p.lambda2 > 0.0) || p.gamma >= 1.0 {
                return Err(param_err(
                    "Case 3 needs the inertial model with lambda2 > 0 and gamma < 1",
                ));
            }
            Ok(inertial_laws(p))
        }
        CaseTag::Case3a => {
            if !p.overdamped || !(p.lambda2 > 0.0) || p.gamma >= 1.0 {
                return Err(param_err(
                    "Case 3a needs the overdamped model with lambda2 > 0 and gamma < 1",
                ));
            }
            let zeta = 1.0 / p.lambda1;
            Ok(vec![
                AsymptoticLaw {
                    exponent: 1.0,
                    prefactor: Some(2.0 * p.kt * zeta),
                    regime: Regime::Short,
                    form: LawForm::Power,
                    condition: "overdamped".into(),
                },
                overdamped_long_law(p, OverdampedPrefactor::Corrected)?,
            ])
        }
        CaseTag::Case3b => {
            if p.overdamped || p.lambda1 != 0.0 || !(p.lambda2 > 0.0) || p.gamma >= 1.0 {
                return Err(param_err(
                    "Case 3b needs lambda1 = 0, lambda2 > 0 and gamma < 1",
                ));
            }
            Ok(inertial_laws(p))
        }
    }
}

/// Leading terms of mean^2 and variance, whichever dominates (summed on ties).
fn inertial_laws(p: &GleParams) -> Vec<AsymptoticLaw> {
    let (alpha, gamma, kappa, kt) = (p.alpha, p.gamma, p.kappa, p.kt);
    let (v0, amp) = (p.v0(), p.force_amp());
    let mut laws = Vec::new();

    // short time: mean ~ v0 t + a t^{alpha-kappa+1}/Gamma(alpha-kappa+2)
    let mean_short = pick(
        &[(1.0, v0), (alpha - kappa + 1.0, amp * rgamma(alpha - kappa + 2.0))],
        true,
    );
    let mut var_terms = Vec::new();
    if p.lambda1 > 0.0 {
        let e = 2.0 * alpha + 1.0;
        var_terms.push((e, 2.0 * kt * p.lambda1 / (e * gamma_sq(alpha + 1.0))));
    }
    if p.lambda2 > 0.0 {
        let e = 2.0 * alpha - gamma + 2.0;
        var_terms.push((
            e,
            2.0 * kt * p.lambda2 * rgamma(alpha + 1.0) * rgamma(alpha - gamma + 2.0) / e,
        ));
    }
    let var_short = pick(&var_terms, true);
    let mut tags = Vec::new();
    if amp != 0.0 {
        tags.push(cmp_tag(alpha, kappa, "alpha", "kappa"));
    } else {
        tags.push("a = 0".to_string());
    }
    if let (Some(m), Some(v)) = (mean_short, var_short) {
        tags.push(cmp_tag(2.0 * m.0, v.0, "mean^2 exponent", "variance exponent"));
    }
    let short_terms: Vec<(f64, f64)> = mean_short
        .map(|(e, c)| (2.0 * e, c * c))
        .into_iter()
        .chain(var_short)
        .collect();
    if let Some((e, c)) = pick(&short_terms, true) {
        laws.push(AsymptoticLaw {
            exponent: e,
            prefactor: Some(c),
            regime: Regime::Short,
            form: LawForm::Power,
            condition: tags.join(", "),
        });
    }

    // long time: effective single power-law kernel
    let (ge, le) = if p.lambda2 > 0.0 && gamma < 1.0 {
        (gamma, p.lambda2)
    } else {
        (1.0, p.lambda1 + p.lambda2)
    };
    if le > 0.0 {
        let mean_long = pick(
            &[
                (ge - alpha, v0 * rgamma(ge - alpha + 1.0) / le),
                (ge - kappa, amp * rgamma(ge - kappa + 1.0) / le),
            ],
            false,
        );
        let var_long = (ge, 2.0 * kt * rgamma(ge + 1.0) / le);
        let mut tags = Vec::new();
        let gname = if ge == 1.0 && gamma != 1.0 { "1" } else { "gamma" };
        if v0 != 0.0 {
            tags.push(cmp_tag(ge, 2.0 * alpha, gname, "2 alpha"));
        }
        if amp != 0.0 {
            tags.push(cmp_tag(ge, 2.0 * kappa, gname, "2 kappa"));
        }
        let long_terms: Vec<(f64, f64)> = mean_long
            .map(|(e, c)| (2.0 * e, c * c))
            .into_iter()
            .chain(std::iter::once(var_long))
            .collect();
        if let Some((e, c)) = pick(&long_terms, false) {
            laws.push(AsymptoticLaw {
                exponent: e,
                prefactor: Some(c),
                regime: Regime::Long,
                form: LawForm::Power,
                condition: if tags.is_empty() {
                    "v0 = 0, a = 0".into()
                } else {
                    tags.join(", ")
                },
            });
        }
    }
    laws
}

fn gamma_sq(x: f64) -> f64 {
    let g = gamma(x);
    g * g
}

/// Exponent-only laws with independent power-law noise `t^{-zeta}`.
fn case2_laws(p: &GleParams, zeta: f64) -> Vec<AsymptoticLaw> {
    let (alpha, gamma) = (p.alpha, p.gamma);
    let short = if alpha >= zeta / 2.0 {
        (2.0, format!("{} (ballistic)", cmp_tag(alpha, zeta / 2.0, "alpha", "zeta/2")))
    } else {
        (2.0 + 2.0 * alpha - zeta, "alpha < zeta/2".to_string())
    };
    let long = if (gamma - zeta / 2.0).abs() < 1e-12 {
        (0.0, LawForm::Log, "gamma = zeta/2".to_string())
    } else if gamma > zeta / 2.0 {
        (2.0 * gamma - zeta, LawForm::Power, "gamma > zeta/2".to_string())
    } else {
        (0.0, LawForm::Constant, "gamma < zeta/2".to_string())
    };
    vec![
        AsymptoticLaw {
            exponent: short.0,
            prefactor: None,
            regime: Regime::Short,
            form: LawForm::Power,
            condition: short.1,
        },
        AsymptoticLaw {
            exponent: long.0,
            prefactor: None,
            regime: Regime::Long,
            form: long.1,
            condition: long.2,
        },
    ]
}
