//! Effective Fokker-Planck equation `dW/dt = D(t) d^2W/dx^2` with the
//! Mittag-Leffler diffusion coefficient that interpolates between normal
//! diffusion and single-file diffusion.
//!
//! Since `D` depends on time only, the equation is solved in the effective
//! time `s(t) = int_0^t D`, where it is the plain heat equation. Space is
//! discretised by cell-centred finite volumes with zero flux at the ends,
//! time by Crank-Nicolson with steps proportional to the current squared
//! width.

use std::f64::consts::PI;

use crate::error::{param_err, Error, Result};
use crate::mlf::{ml_kernel, MlOrder};
use crate::msd_models::MsdCurve;

/// Largest density tolerated in the outermost cells at the final time.
pub const BOUNDARY_DENSITY_LIMIT: f64 = 1e-12;
/// Default `eps` of the step rule `ds = eps (sigma0^2 + 2 s)`.
pub const DEFAULT_STEP_EPS: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionVariant {
    /// `D0 sqrt(pi) E_{1/2,1}(-(2 D0 / F) t^{1/2})` as printed.
    Paper,
    /// `D0 E_{1/2,1}(-(2 D0 / (F sqrt(pi))) t^{1/2})`, with `D(0) = D0`
    /// and `D ~ F / (2 sqrt(t))`.
    Matched,
}

/// `(prefactor, rate)` of `prefactor E_{1/2,1}(-rate sqrt(t))`.
fn coefficients(d0: f64, f: f64, variant: DiffusionVariant) -> (f64, f64) {
    let rate = if f.is_infinite() { 0.0 } else { 2.0 * d0 / f };
    match variant {
        DiffusionVariant::Paper => (d0 * PI.sqrt(), rate),
        DiffusionVariant::Matched => (d0, rate / PI.sqrt()),
    }
}

fn check_coefficients(d0: f64, f: f64) -> Result<()> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(param_err(format!("D0 must be positive, got {d0}")));
    }
    if !(f > 0.0) {
        return Err(param_err(format!("F must be positive (infinite allowed), got {f}")));
    }
    Ok(())
}

/// `D(t)`; `F = inf` gives the constant `D(0)`.
pub fn diffusion_coefficient(d0: f64, f: f64, t: f64, variant: DiffusionVariant) -> Result<f64> {
    check_coefficients(d0, f)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(param_err(format!("time must be finite and >= 0, got {t}")));
    }
    let (pre, rate) = coefficients(d0, f, variant);
    if t == 0.0 || rate == 0.0 {
        return Ok(pre);
    }
    Ok(pre * ml_kernel(MlOrder::new(0.5, 1.0)?, rate, 0.0, t)?)
}

/// `s(t) = int_0^t D = prefactor t E_{1/2,2}(-rate sqrt(t))`.
pub fn effective_time(d0: f64, f: f64, t: f64, variant: DiffusionVariant) -> Result<f64> {
    check_coefficients(d0, f)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(param_err(format!("time must be finite and >= 0, got {t}")));
    }
    let (pre, rate) = coefficients(d0, f, variant);
    if t == 0.0 {
        return Ok(0.0);
    }
    if rate == 0.0 {
        return Ok(pre * t);
    }
    Ok(pre * ml_kernel(MlOrder::new(0.5, 2.0)?, rate, 1.0, t)?)
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpeConfig {
    pub d0: f64,
    pub f: f64,
    pub x_half_width: f64,
    pub nx: usize,
    /// Width of the initial Gaussian; at least 3 cells.
    pub sigma0: f64,
    pub variant: DiffusionVariant,
    pub step_eps: f64,
}

impl FpeConfig {
    /// Initial width of 3 cells and the default step rule.
    pub fn new(d0: f64, f: f64, x_half_width: f64, nx: usize, variant: DiffusionVariant) -> Self {
        let dx = 2.0 * x_half_width / nx.max(1) as f64;
        Self {
            d0,
            f,
            x_half_width,
            nx,
            sigma0: 3.0 * dx,
            variant,
            step_eps: DEFAULT_STEP_EPS,
        }
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half_width / self.nx as f64
    }

    fn validate(&self) -> Result<()> {
        check_coefficients(self.d0, self.f)?;
        if !(self.x_half_width > 0.0) || !self.x_half_width.is_finite() {
            return Err(param_err("half width must be positive"));
        }
        if self.nx < 8 {
            return Err(param_err("need at least 8 cells"));
        }
        if !(self.sigma0 >= 3.0 * self.dx() * (1.0 - 1e-12)) {
            return Err(param_err(format!(
                "initial width {} is below 3 cells ({})",
                self.sigma0,
                3.0 * self.dx()
            )));
        }
        if !(self.step_eps > 0.0 && self.step_eps <= 0.5) {
            return Err(param_err("step_eps must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

/// Density snapshots on cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeSolution {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    /// `int W dx` per output time.
    pub mass: Vec<f64>,
    pub initial_mass: f64,
    /// `s(t)` per output time.
    pub effective_time: Vec<f64>,
    pub sigma0: f64,
    pub variant: DiffusionVariant,
    pub steps: usize,
}

impl FpeSolution {
    pub fn dx(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    /// Gaussian of variance `sigma0^2 + 2 s(t_k)` on the grid.
    pub fn analytic_density(&self, k: usize) -> Vec<f64> {
        let var = self.sigma0 * self.sigma0 + 2.0 * self.effective_time[k];
        self.x_grid.iter().map(|&x| gaussian(x, var)).collect()
    }
}

fn gaussian(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Solve with a 3-cell initial width and the default step rule.
pub fn solve_fpe(
    d0: f64,
    f: f64,
    x_half_width: f64,
    nx: usize,
    t_grid: &[f64],
    variant: DiffusionVariant,
) -> Result<FpeSolution> {
    solve_fpe_with(&FpeConfig::new(d0, f, x_half_width, nx, variant), t_grid)
}

pub fn solve_fpe_with(cfg: &FpeConfig, t_grid: &[f64]) -> Result<FpeSolution> {
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(param_err("need at least one output time"));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param_err("output times must be positive and strictly increasing"));
    }
    let targets = t_grid
        .iter()
        .map(|&t| effective_time(cfg.d0, cfg.f, t, cfg.variant))
        .collect::<Result<Vec<_>>>()?;

    let s_end = *targets.last().expect("nonempty");
    let width = (cfg.sigma0 * cfg.sigma0 + 2.0 * s_end).sqrt();
    let edge = gaussian(cfg.x_half_width, width * width);
    if edge > BOUNDARY_DENSITY_LIMIT {
        return Err(too_small(edge, width));
    }

    let dx = cfg.dx();
    let nx = cfg.nx;
    let x_grid: Vec<f64> = (0..nx)
        .map(|i| -cfg.x_half_width + (i as f64 + 0.5) * dx)
        .collect();
    let var0 = cfg.sigma0 * cfg.sigma0;
    let mut w: Vec<f64> = x_grid.iter().map(|&x| gaussian(x, var0)).collect();
    let initial_mass = mass(&w, dx);

    let mut density = Vec::with_capacity(t_grid.len());
    let mut masses = Vec::with_capacity(t_grid.len());
    let mut s = 0.0;
    let mut steps = 0;
    let mut work = Tridiagonal::new(nx);
    for &target in &targets {
        while s < target {
            let ds = (cfg.step_eps * (var0 + 2.0 * s)).min(target - s);
            crank_nicolson(&mut w, ds / (dx * dx), &mut work);
            // land exactly on the output time
            s = if target - s - ds <= 1e-14 * target { target } else { s + ds };
            steps += 1;
        }
        masses.push(mass(&w, dx));
        density.push(w.clone());
    }

    let boundary = w[0].max(w[nx - 1]);
    if boundary > BOUNDARY_DENSITY_LIMIT {
        return Err(too_small(boundary, width));
    }
    Ok(FpeSolution {
        x_grid,
        t_grid: t_grid.to_vec(),
        density,
        mass: masses,
        initial_mass,
        effective_time: targets,
        sigma0: cfg.sigma0,
        variant: cfg.variant,
        steps,
    })
}

/// Half width with 10% margin beyond the point where a centred Gaussian of
/// standard deviation `width` falls to the boundary limit.
pub fn suggested_half_width(width: f64) -> f64 {
    let ln = (1.0 / (BOUNDARY_DENSITY_LIMIT * (2.0 * PI).sqrt() * width)).ln().max(1.0);
    (1.1 * width * (2.0 * ln).sqrt()).ceil()
}

fn too_small(boundary_density: f64, width: f64) -> Error {
    Error::DomainTooSmall {
        boundary_density,
        suggested_half_width: suggested_half_width(width),
    }
}

fn mass(w: &[f64], dx: f64) -> f64 {
    w.iter().sum::<f64>() * dx
}

struct Tridiagonal {
    rhs: Vec<f64>,
    c_prime: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize) -> Self {
        Self {
            rhs: vec![0.0; n],
            c_prime: vec![0.0; n],
        }
    }
}

/// One step `(I - r/2 L) W' = (I + r/2 L) W` with the zero-flux Laplacian `L`.
fn crank_nicolson(w: &mut [f64], r: f64, work: &mut Tridiagonal) {
    let n = w.len();
    let h = 0.5 * r;
    let lap = |w: &[f64], i: usize| {
        let left = if i == 0 { 0.0 } else { w[i - 1] - w[i] };
        let right = if i == n - 1 { 0.0 } else { w[i + 1] - w[i] };
        left + right
    };
    for i in 0..n {
        work.rhs[i] = w[i] + h * lap(w, i);
    }
    // diagonal 1 + h * (number of neighbours), off-diagonals -h
    let diag = |i: usize| 1.0 + h * if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
    let off = -h;
    let mut denom = diag(0);
    work.c_prime[0] = off / denom;
    work.rhs[0] /= denom;
    for i in 1..n {
        denom = diag(i) - off * work.c_prime[i - 1];
        work.c_prime[i] = off / denom;
        work.rhs[i] = (work.rhs[i] - off * work.rhs[i - 1]) / denom;
    }
    w[n - 1] = work.rhs[n - 1];
    for i in (0..n - 1).rev() {
        w[i] = work.rhs[i] - work.c_prime[i] * w[i + 1];
    }
}

/// `int x W dx / int W dx` per output time.
pub fn solution_mean(sol: &FpeSolution) -> Vec<f64> {
    sol.density
        .iter()
        .map(|w| {
            let m: f64 = w.iter().sum();
            w.iter().zip(&sol.x_grid).map(|(v, x)| v * x).sum::<f64>() / m
        })
        .collect()
}

/// Second central moment per output time.
pub fn solution_variance(sol: &FpeSolution) -> Result<MsdCurve> {
    let means = solution_mean(sol);
    let values = sol
        .density
        .iter()
        .zip(&means)
        .map(|(w, mu)| {
            let m: f64 = w.iter().sum();
            w.iter()
                .zip(&sol.x_grid)
                .map(|(v, x)| v * (x - mu) * (x - mu))
                .sum::<f64>()
                / m
        })
        .collect();
    let tag = match sol.variant {
        DiffusionVariant::Paper => "fpe:paper",
        DiffusionVariant::Matched => "fpe:matched",
    };
    MsdCurve::new(sol.t_grid.clone(), values, None, tag)
}
