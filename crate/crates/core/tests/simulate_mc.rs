use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sfd_core::fraccalc::ConvMethod;
use sfd_core::gle::{green_integral, msd, GleParams};
use sfd_core::simulate::*;

fn benchmark() -> GleParams {
    GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap()
}

fn autocov(x: &[f64], k: usize) -> f64 {
    let n = x.len() - k;
    (0..n).map(|j| x[j] * x[j + k]).sum::<f64>() / n as f64
}

#[test]
fn white_noise_is_uncorrelated() {
    let s = NoiseSpec::new(2.0, 0.0, 0.5, 1.0).unwrap();
    let dt = 0.01;
    let n = 20_000;
    let xi = sample_noise(&s, dt, n, 7).unwrap();
    let v = autocov(&xi.values, 0);
    assert!((v / (2.0 / dt) - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    for k in [1, 2, 5, 10] {
        let r = autocov(&xi.values, k) / v;
        assert!(r.abs() < 4.0 / (n as f64).sqrt(), "lag {k}: {r}");
    }
}

#[test]
fn powerlaw_noise_matches_cell_covariance() {
    let s = NoiseSpec::new(0.0, 1.0, 0.5, 1.0).unwrap();
    let (dt, n, reps) = (0.01, 512, 400);
    let g = NoiseGenerator::new(&s, dt, n).unwrap();
    for k in [1usize, 2, 4, 8] {
        let est: Vec<f64> = (0..reps).map(|r| autocov(&g.sample(11, r), k)).collect();
        let mean = est.iter().sum::<f64>() / reps as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        let target = s.cell_covariance(dt, k);
        assert!((mean - target).abs() < 4.0 * se, "lag {k}: {mean} vs {target} (se {se})");
    }
}

#[test]
fn noise_is_deterministic_per_seed() {
    let s = NoiseSpec::new(0.5, 1.0, 0.3, 1.0).unwrap();
    let a = sample_noise(&s, 0.01, 300, 5).unwrap();
    let b = sample_noise(&s, 0.01, 300, 5).unwrap();
    let c = sample_noise(&s, 0.01, 300, 6).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
}

#[test]
fn zero_noise_reproduces_the_mean() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(1.0)
        .unwrap()
        .with_x0(0.3)
        .unwrap();
    let mut cfg = SimConfig::new(0.01, 100, 4, 1);
    cfg.noise_scale = 0.0;
    let e = simulate_paths_with(&p, &cfg).unwrap();
    for i in 0..4 {
        let path = e.path(i);
        assert_eq!(path[0], 0.3);
        for k in 1..=100 {
            let m = sfd_core::gle::mean_displacement(&p, e.time(k)).unwrap();
            assert_eq!(path[k], m);
        }
    }
    let c = ensemble_msd(&e).unwrap();
    assert!(c.stderr.unwrap().iter().all(|s| *s == 0.0));
}

#[test]
fn ensemble_msd_of_standard_normals() {
    let (n_paths, n_steps) = (4000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let positions: Vec<f64> = (0..n_paths * (n_steps + 1))
        .map(|i| {
            if i % (n_steps + 1) == 0 {
                0.0
            } else {
                StandardNormal.sample(&mut rng)
            }
        })
        .collect();
    let e = TrajectoryEnsemble {
        dt: 1.0,
        n_steps,
        n_paths,
        positions,
        seed: 3,
        params: benchmark(),
    };
    let c = ensemble_msd(&e).unwrap();
    for (v, s) in c.values.iter().zip(c.stderr.as_ref().unwrap()) {
        assert!((v - 1.0).abs() < 3.0 * s, "{v} {s}");
    }
}

/// Exact variance of the discrete construction against the analytic MSD.
#[test]
fn discretization_bias_is_small() {
    let p = benchmark();
    let s = NoiseSpec::from_params(&p).unwrap();
    let (dt, n) = (1e-2, 400);
    let c: Vec<f64> = (0..n).map(|k| s.cell_covariance(dt, k)).collect();
    let prim: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { 0.0 } else { green_integral(&p, k as f64 * dt).unwrap() })
        .collect();
    let w: Vec<f64> = prim.windows(2).map(|x| x[1] - x[0]).collect();
    for i in [1usize, 10, 100, 400] {
        let mut v = 0.0;
        for j in 0..i {
            for l in 0..i {
                v += w[i - 1 - j] * w[i - 1 - l] * c[j.abs_diff(l)];
            }
        }
        let a = msd(&p, i as f64 * dt).unwrap();
        assert!(((v - a) / a).abs() < 1e-3, "i={i}: {v} vs {a}");
    }
}

/// Distinct log-spaced steps from 10 to `n_steps`.
fn check_indices(n_steps: usize, count: usize) -> Vec<usize> {
    let idx: Vec<usize> = (0..count)
        .map(|i| (10.0 * (n_steps as f64 / 10.0).powf(i as f64 / (count - 1) as f64)).round() as usize)
        .collect();
    assert!(idx.windows(2).all(|w| w[1] > w[0]));
    idx
}

#[test]
fn overdamped_benchmark_matches_closed_form() {
    let p = benchmark();
    let e = simulate_paths(&p, 1e-2, 1000, 10_000, 2024).unwrap();
    let c = ensemble_msd(&e).unwrap();
    let se = c.stderr.as_ref().unwrap();
    let idx = check_indices(1000, 20);
    let hits = idx
        .iter()
        .filter(|&&k| {
            let a = msd(&p, c.times[k - 1]).unwrap();
            (c.values[k - 1] - a).abs() <= 3.0 * se[k - 1]
        })
        .count();
    assert!(hits >= 19, "{hits}/20 within 3 standard errors");
    // spot times of the closed form
    for t in [0.1, 1.0, 10.0] {
        let k = (t / 1e-2_f64).round() as usize;
        let a = msd(&p, t).unwrap();
        assert!((c.values[k - 1] - a).abs() <= 3.0 * se[k - 1], "t={t}");
    }
}

#[test]
fn standard_error_scales_with_sample_size() {
    let p = benchmark();
    let a = ensemble_msd(&simulate_paths(&p, 1e-2, 200, 2000, 9).unwrap()).unwrap();
    let b = ensemble_msd(&simulate_paths(&p, 1e-2, 200, 4000, 9).unwrap()).unwrap();
    let (sa, sb) = (a.stderr.unwrap(), b.stderr.unwrap());
    for k in [49, 199] {
        let r = sb[k] / sa[k];
        assert!((r / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "{r}");
    }
}

#[test]
fn paths_are_gaussian() {
    let p = benchmark();
    let n = 10_000;
    let e = simulate_paths(&p, 1e-2, 100, n, 77).unwrap();
    for k in [10, 100] {
        let xs: Vec<f64> = (0..n).map(|i| e.path(i)[k]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n as f64;
        let skew = m3 / m2.powf(1.5);
        assert!(skew.abs() < 4.0 * (6.0 / n as f64).sqrt(), "{skew}");
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let p = GleParams::new(0.6, 0.4, 0.2, 1.0, 1.0).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&p, 0.02, 300, 64, 99).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.positions.iter().zip(&b.positions).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a, simulate_paths(&p, 0.02, 300, 64, 99).unwrap());
}

#[test]
fn fft_and_direct_convolution_agree() {
    let p = benchmark();
    let mut cfg = SimConfig::new(1e-2, 600, 8, 4);
    let fft = simulate_paths_with(&p, &cfg).unwrap();
    cfg.method = ConvMethod::Direct;
    let direct = simulate_paths_with(&p, &cfg).unwrap();
    let scale = direct.positions.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (a, b) in fft.positions.iter().zip(&direct.positions) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn inertial_model_matches_analytic_msd() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
    let e = simulate_paths(&p, 1e-2, 500, 4000, 5).unwrap();
    let c = ensemble_msd(&e).unwrap();
    let se = c.stderr.as_ref().unwrap();
    let idx = check_indices(500, 20);
    let hits = idx
        .iter()
        .filter(|&&k| (c.values[k - 1] - msd(&p, c.times[k - 1]).unwrap()).abs() <= 3.0 * se[k - 1])
        .count();
    assert!(hits >= 19, "{hits}/20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_is_nonnegative(white in 0.0f64..3.0, power in 0.01f64..3.0, z in 0.02f64..0.98, dt in 1e-3f64..1.0) {
        let s = NoiseSpec::new(white, power, z, 1.0).unwrap();
        let g = NoiseGenerator::new(&s, dt, 257).unwrap();
        prop_assert!(g.clipped_fraction() <= CLIP_TOLERANCE);
    }

    #[test]
    fn noise_coefficients_follow_the_kernel(l1 in 0.0f64..2.0, l2 in 0.0f64..2.0, g in 0.1f64..0.9, kt in 0.1f64..3.0) {
        let p = GleParams::new(0.7, g, l1, l2, kt).unwrap();
        let s = NoiseSpec::from_params(&p).unwrap();
        prop_assert_eq!(s.white_coeff, 2.0 * kt * l1);
        prop_assert_eq!(s.powerlaw_coeff, kt * l2);
        prop_assert_eq!(s.noise_exponent, g);
    }
}
