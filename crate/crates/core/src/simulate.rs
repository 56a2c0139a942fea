//! Monte Carlo sampling of the GLE solution
//! `x(t) = x_bar(t) + int_0^t G(t - u) xi(u) du` with Gaussian noise whose
//! covariance is tied to the memory kernel.
//!
//! Noise is represented by its cell averages over a uniform grid. The cell
//! covariance of the power-law part is integrated exactly, and sequences
//! are drawn by circulant embedding. Each path owns the ChaCha stream
//! `(seed, path_index)`, so ensembles do not depend on scheduling.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{param_err, Error, Result};
use crate::fraccalc::{ConvMethod, Convolver, SampledFunction};
use crate::gle::{green_integral, mean_on_grid, GleParams};
use crate::msd_models::MsdCurve;
use crate::special::rgamma;

/// Clipped negative eigenvalue mass tolerated in the circulant embedding.
pub const CLIP_TOLERANCE: f64 = 1e-6;

/// Covariance `white_coeff delta(t) + powerlaw_coeff |t|^{-noise_exponent} / Gamma(1 - noise_exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub white_coeff: f64,
    pub powerlaw_coeff: f64,
    pub noise_exponent: f64,
    pub kt: f64,
}

impl NoiseSpec {
    pub fn new(white_coeff: f64, powerlaw_coeff: f64, noise_exponent: f64, kt: f64) -> Result<Self> {
        let s = Self {
            white_coeff,
            powerlaw_coeff,
            noise_exponent,
            kt,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fluctuation-dissipation noise of the model: `2 kT lambda1` white
    /// intensity and `kT lambda2` on the power law (`gamma = 1` folds the
    /// power-law kernel into the delta).
    pub fn from_params(p: &GleParams) -> Result<Self> {
        p.validate()?;
        let (white, power) = if p.gamma == 1.0 {
            (2.0 * p.kt * (p.lambda1 + p.lambda2), 0.0)
        } else {
            (2.0 * p.kt * p.lambda1, p.kt * p.lambda2)
        };
        let exponent = if p.gamma < 1.0 { p.gamma } else { 0.5 };
        Self::new(white, power, exponent, p.kt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_coeff >= 0.0) || !(self.powerlaw_coeff >= 0.0) {
            return Err(param_err("noise coefficients must be nonnegative"));
        }
        if !self.white_coeff.is_finite() || !self.powerlaw_coeff.is_finite() {
            return Err(param_err("noise coefficients must be finite"));
        }
        if !(self.noise_exponent > 0.0 && self.noise_exponent < 1.0) {
            return Err(param_err(format!(
                "noise exponent must lie in (0, 1), got {}",
                self.noise_exponent
            )));
        }
        if !(self.kt > 0.0) {
            return Err(param_err("kT must be positive"));
        }
        Ok(())
    }

    /// Covariance of cell averages `k` cells apart.
    pub fn cell_covariance(&self, dt: f64, k: usize) -> f64 {
        let z = self.noise_exponent;
        let phi = |m: f64| m.abs().powf(2.0 - z);
        let m = k as f64;
        let second_difference = phi(m + 1.0) - 2.0 * phi(m) + phi(m - 1.0);
        let mut c = self.powerlaw_coeff * dt.powf(-z) * rgamma(3.0 - z) * second_difference;
        if k == 0 {
            c += self.white_coeff / dt;
        }
        c
    }
}

/// Circulant-embedding sampler for a fixed `(spec, dt, n)`.
pub struct NoiseGenerator {
    dt: f64,
    n: usize,
    /// `sqrt(eigenvalue / M)` of the embedding.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clipped_fraction: f64,
}

impl NoiseGenerator {
    pub fn new(spec: &NoiseSpec, dt: f64, n: usize) -> Result<Self> {
        spec.validate()?;
        if n < 2 {
            return Err(param_err("noise needs at least 2 samples"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(param_err(format!("dt must be positive, got {dt}")));
        }
        let m = 2 * n;
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(spec.cell_covariance(dt, j.min(m - j)), 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let total: f64 = row.iter().map(|c| c.re.abs()).sum();
        let negative: f64 = row.iter().map(|c| (-c.re).max(0.0)).sum();
        let clipped_fraction = if total > 0.0 { negative / total } else { 0.0 };
        if clipped_fraction > CLIP_TOLERANCE {
            return Err(Error::Synthesis { clipped_fraction });
        }
        let scale = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            dt,
            n,
            scale,
            fft,
            clipped_fraction,
        })
    }

    /// Negative eigenvalue mass set to zero, relative to the total.
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// One sequence from stream `stream` of `seed`.
    pub fn sample(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|s| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }
}

/// Stationary Gaussian cell averages of the noise, stream 0 of `seed`.
pub fn sample_noise(spec: &NoiseSpec, dt: f64, n: usize, seed: u64) -> Result<SampledFunction> {
    let g = NoiseGenerator::new(spec, dt, n)?;
    SampledFunction::new(0.0, g.dt, g.sample(seed, 0))
}

/// Positions of `n_paths` paths at `k dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    /// Row-major, `n_paths` rows of `n_steps + 1` positions.
    pub positions: Vec<f64>,
    pub seed: u64,
    pub params: GleParams,
}

impl TrajectoryEnsemble {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.positions[i * w..(i + 1) * w]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Knobs for [`simulate_paths_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Multiplies the noise; `0` gives the deterministic mean.
    pub noise_scale: f64,
    pub method: ConvMethod,
}

impl SimConfig {
    pub fn new(dt: f64, n_steps: usize, n_paths: usize, seed: u64) -> Self {
        Self {
            dt,
            n_steps,
            n_paths,
            seed,
            noise_scale: 1.0,
            method: ConvMethod::Auto,
        }
    }
}

pub fn simulate_paths(
    p: &GleParams,
    dt: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    simulate_paths_with(p, &SimConfig::new(dt, n_steps, n_paths, seed))
}

/// Weights `int_{m dt}^{(m+1) dt} G`, so that `x_i - x_bar_i = sum_j w_{i-1-j} xi_j`
/// is exact for piecewise-constant noise.
fn response_weights(p: &GleParams, dt: f64, n: usize) -> Result<Vec<f64>> {
    let mut prim = vec![0.0];
    prim.extend(
        (1..=n)
            .into_par_iter()
            .map(|k| green_integral(p, k as f64 * dt))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(prim.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn simulate_paths_with(p: &GleParams, cfg: &SimConfig) -> Result<TrajectoryEnsemble> {
    p.validate()?;
    let SimConfig {
        dt,
        n_steps,
        n_paths,
        seed,
        noise_scale,
        method,
    } = *cfg;
    if n_steps < 1 || n_paths < 1 {
        return Err(param_err("need at least one step and one path"));
    }
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(param_err("noise scale must be finite and >= 0"));
    }
    let mean = mean_on_grid(p, dt, n_steps)?;
    let width = n_steps + 1;
    if noise_scale == 0.0 {
        return Ok(TrajectoryEnsemble {
            dt,
            n_steps,
            n_paths,
            positions: mean.repeat(n_paths),
            seed,
            params: *p,
        });
    }
    let spec = NoiseSpec::from_params(p)?;
    let gen = NoiseGenerator::new(&spec, dt, n_steps.max(2))?;
    let weights = response_weights(p, dt, n_steps)?;
    let conv = Convolver::new(&weights, n_steps);
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut xi = gen.sample(seed, i as u64);
            xi.truncate(n_steps);
            let fluct = match method {
                ConvMethod::Direct => direct_response(&weights, &xi),
                _ => conv.apply(&xi),
            };
            let mut row = Vec::with_capacity(width);
            row.push(mean[0]);
            for k in 1..width {
                row.push(mean[k] + noise_scale * fluct[k - 1]);
            }
            row
        })
        .collect();
    Ok(TrajectoryEnsemble {
        dt,
        n_steps,
        n_paths,
        positions: rows.concat(),
        seed,
        params: *p,
    })
}

fn direct_response(w: &[f64], xi: &[f64]) -> Vec<f64> {
    (0..xi.len())
        .map(|i| (0..=i).map(|j| w[i - j] * xi[j]).sum())
        .collect()
}

/// Mean of `(x - x0)^2` per time with standard error `sd / sqrt(n_paths)`;
/// `t = 0` is skipped.
pub fn ensemble_msd(e: &TrajectoryEnsemble) -> Result<MsdCurve> {
    if e.n_paths < 2 {
        return Err(param_err("the ensemble MSD needs at least 2 paths"));
    }
    let x0 = e.params.x0;
    let n = e.n_paths as f64;
    let mut times = Vec::with_capacity(e.n_steps);
    let mut values = Vec::with_capacity(e.n_steps);
    let mut stderr = Vec::with_capacity(e.n_steps);
    for k in 1..=e.n_steps {
        let sq = (0..e.n_paths).map(|i| {
            let d = e.path(i)[k] - x0;
            d * d
        });
        let mean = sq.clone().sum::<f64>() / n;
        let var = sq.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        times.push(e.time(k));
        values.push(mean);
        stderr.push((var / n).sqrt());
    }
    MsdCurve::new(times, values, Some(stderr), "monte-carlo")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_covariance_sums_to_the_integrated_kernel() {
        // sum over lags -K..K of c_k dt^2 / (2K+1) dt ~ total power over a window
        let s = NoiseSpec::new(0.0, 1.0, 0.5, 1.0).unwrap();
        let dt = 0.1;
        let n = 50usize;
        // variance of the window sum equals the double integral of C over [0, n dt]^2
        let mut v = n as f64 * s.cell_covariance(dt, 0);
        for k in 1..n {
            v += 2.0 * (n - k) as f64 * s.cell_covariance(dt, k);
        }
        let big_t = n as f64 * dt;
        let exact = 2.0 * big_t.powf(1.5) * rgamma(2.5) / (dt * dt);
        assert!((v - exact).abs() < 1e-10 * exact, "{v} {exact}");
    }

    #[test]
    fn white_only_is_diagonal() {
        let s = NoiseSpec::new(2.0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(s.cell_covariance(0.01, 0), 200.0);
        assert_eq!(s.cell_covariance(0.01, 3), 0.0);
    }

    #[test]
    fn embedding_needs_no_clipping_for_powerlaws() {
        for z in [0.1, 0.5, 0.9] {
            let s = NoiseSpec::new(0.3, 1.0, z, 1.0).unwrap();
            let g = NoiseGenerator::new(&s, 0.01, 1000).unwrap();
            assert!(g.clipped_fraction() < 1e-12, "{z}");
        }
    }
}
