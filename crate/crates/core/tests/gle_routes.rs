use proptest::prelude::*;
use sfd_core::gle::*;
use sfd_core::mlf::{ml_kernel, MlOrder};
use sfd_core::quad::{integrate, integrate_from_origin};
use sfd_core::special::{gamma, rgamma};
use sfd_core::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

fn centered() -> GleParams {
    GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(0.0)
        .unwrap()
        .with_force(0.0, 1.0)
        .unwrap()
}

#[test]
fn closed_form_examples() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
    let t = 1e-8;
    assert!(rel(green_closed(&p, t).unwrap(), t.sqrt() * rgamma(1.5)) < 1e-7);

    let od = GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap();
    assert!(rel(green_closed(&od, 1.0).unwrap(), 0.427583576155807) < 1e-12);

    let p = GleParams::new(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
    assert!(rel(green_closed(&p, 1.0).unwrap(), 0.7374822479018946) < 1e-12);
}

#[test]
fn series_reduces_to_closed_form_without_delta_kernel() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
    let s = green_series(&p, 2.0, 5).unwrap();
    assert_eq!(s.terms, 0);
    assert_eq!(s.value, green_closed(&p, 2.0).unwrap());
}

#[test]
fn series_matches_talbot_at_unit_time() {
    let p = GleParams::new(0.5, 0.5, 0.1, 1.0, 1.0).unwrap();
    let s = green_series(&p, 1.0, SERIES_MAX_TERMS).unwrap();
    let l = green_laplace(&p, 1.0).unwrap();
    assert!(rel(s.value, l) < 1e-5, "{} vs {l}", s.value);
    assert!(s.bound < 1e-9);
}

#[test]
fn first_correction_matches_direct_quadrature() {
    let (alpha, gamma_, l1, l2) = (0.5, 0.5, 0.1, 1.0);
    let p = GleParams::new(alpha, gamma_, l1, l2, 1.0).unwrap();
    let a = alpha - gamma_ + 1.0;
    let g0 = |u: f64| ml_kernel(MlOrder::new(a, alpha + 1.0).unwrap(), l2, alpha, u).unwrap();
    let g0_rate = |u: f64| ml_kernel(MlOrder::new(a, alpha).unwrap(), l2, alpha - 1.0, u).unwrap();
    let t = 1.0;
    let (left, _) = integrate_from_origin(|u| g0(t - u) * g0_rate(u), t / 2.0, 1e-12);
    let (right, _) = integrate_from_origin(|w| g0(w) * g0_rate(t - w), t / 2.0, 1e-12);
    let expected = g0(t) - l1 * (left + right);
    let one = green_series(&p, t, 1).unwrap();
    assert_eq!(one.terms, 1);
    assert!(rel(one.value, expected) < 1e-7, "{} vs {expected}", one.value);
    // the reported bound is the size of the second-order term
    let two = green_series(&p, t, 2).unwrap();
    assert!(rel((two.value - one.value).abs(), one.bound) < 1e-6);
}

#[test]
fn route_agreement_on_log_grid() {
    for l1 in [0.0, 0.1] {
        let p = GleParams::new(0.5, 0.5, l1, 1.0, 1.0).unwrap();
        for t in log_times(-2.0, 1.0, 13) {
            let lap = green_laplace(&p, t).unwrap();
            let ser = green_series(&p, t, SERIES_MAX_TERMS).unwrap().value;
            assert!(rel(ser, lap) < 1e-5, "l1={l1} t={t}: {ser} vs {lap}");
            if l1 == 0.0 {
                assert!(rel(green_closed(&p, t).unwrap(), lap) < 1e-5);
            }
        }
    }
}

#[test]
fn mean_examples() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(0.0)
        .unwrap()
        .with_force(0.0, 1.0)
        .unwrap()
        .with_x0(3.0)
        .unwrap();
    for t in [0.1, 1.0, 10.0] {
        assert_eq!(mean_displacement(&p, t).unwrap(), 3.0);
    }
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(1.0)
        .unwrap()
        .with_force(0.0, 1.0)
        .unwrap();
    let t = 1e-6;
    assert!(rel(mean_displacement(&p, t).unwrap(), t) < 1e-5);
    let p = p.with_force(1.0, 1.0).unwrap();
    let expected = t + t.sqrt() * rgamma(1.5);
    assert!(rel(mean_displacement(&p, t).unwrap(), expected) < 1e-5);
}

#[test]
fn mean_routes_agree() {
    for l1 in [0.0, 0.2] {
        let p = GleParams::new(0.7, 0.4, l1, 1.0, 1.0)
            .unwrap()
            .with_force(0.5, 0.6)
            .unwrap();
        for t in [0.05, 1.0, 5.0] {
            let m = mean_displacement(&p, t).unwrap();
            let lap = p.v0() * quantity_laplace(&p, GreenQuantity::VelocityResponse, t).unwrap()
                + 0.5 * quantity_laplace(&p, GreenQuantity::ForceResponse, t).unwrap();
            assert!(rel(m, lap) < 1e-5, "l1={l1} t={t}: {m} vs {lap}");
        }
    }
}

#[test]
fn variance_examples() {
    let od = GleParams::overdamped(0.5, 1.0, 1.0, 0.5).unwrap();
    assert!(rel(variance(&od, 1.0).unwrap(), 0.5559627432513196) < 1e-12);
    for t in [1e-5, 1e-4] {
        assert!(rel(variance(&od, t).unwrap(), 2.0 * 0.5 * t) < 0.01);
    }
    let p = centered();
    let t: f64 = 1e-4;
    let expected = 2.0 * t.powf(2.5) / (2.5 * gamma(1.5) * gamma(2.0));
    assert!(rel(variance(&p, t).unwrap(), expected) < 1e-3);
}

/// `2 kT int_0^t G (1 - D^alpha G)` from Talbot samples, an independent route.
fn variance_by_inversion(p: &GleParams, t: f64) -> f64 {
    let (v, _) = integrate(
        |u| {
            let g = green_laplace(p, u).unwrap();
            let d = quantity_laplace(p, GreenQuantity::Caputo, u).unwrap();
            g * (1.0 - d)
        },
        0.0,
        t,
        1e-9,
        1e-13 * t,
    );
    2.0 * p.kt * v
}

#[test]
fn variance_routes_agree() {
    for (alpha, gamma_, l1, l2) in [(0.5, 0.5, 0.0, 1.0), (0.5, 0.5, 0.1, 1.0), (0.8, 0.3, 0.5, 0.7)] {
        let p = GleParams::new(alpha, gamma_, l1, l2, 1.3).unwrap();
        for t in [0.1, 1.0, 4.0] {
            let v = variance(&p, t).unwrap();
            let o = variance_by_inversion(&p, t);
            assert!(rel(v, o) < 1e-5, "{alpha} {gamma_} {l1} t={t}: {v} vs {o}");
            let g = variance_series_grid(&p, t).unwrap();
            assert!(rel(g, o) < 1e-5, "{alpha} {gamma_} {l1} t={t}: grid {g} vs {o}");
        }
    }
}

#[test]
fn variance_of_single_delta_kernel_matches_first_principles() {
    // alpha = 1, gamma(t) = lambda1 delta: G = (1 - e^{-l t}) / l and the
    // velocity autocorrelation gives sigma^2 = (2 kT / l)(t - 2(1-e^{-lt})/l + (1-e^{-2lt})/(2l)).
    let (l, kt) = (0.7, 0.9);
    let p = GleParams::new(1.0, 0.5, l, 0.0, kt).unwrap();
    for t in [0.05, 1.0, 6.0] {
        let e = (-l * t).exp();
        let expected =
            2.0 * kt / l * (t - 2.0 * (1.0 - e) / l + (1.0 - e * e) / (2.0 * l));
        assert!(rel(variance(&p, t).unwrap(), expected) < 1e-9);
    }
}

#[test]
fn msd_examples() {
    let p = centered();
    assert_eq!(msd(&p, 2.0).unwrap(), variance(&p, 2.0).unwrap());
    let od = GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap().with_x0(2.0).unwrap();
    assert_eq!(msd(&od, 2.0).unwrap(), variance(&od, 2.0).unwrap());

    // a t / Gamma^2(3/2) short branch with kappa = 1
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(0.0)
        .unwrap()
        .with_force(1.0, 1.0)
        .unwrap();
    let t = 1e-7;
    assert!(rel(msd(&p, t).unwrap(), t * rgamma(1.5).powi(2)) < 1e-3);
}

#[test]
fn series_route_refuses_the_overdamped_model() {
    let od = GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap();
    assert!(matches!(green_series(&od, 1.0, 5), Err(Error::UnsupportedBranch(_))));
    let p = GleParams::new(0.5, 0.5, 0.1, 1.0, 1.0).unwrap();
    assert!(green_series(&p, 1.0, 0).is_err());
}

#[test]
fn asymptotic_law_examples() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_force(0.0, 1.0)
        .unwrap();
    let laws = asymptotic_laws(&p, CaseTag::Case3).unwrap();
    let long = laws.iter().find(|l| l.regime == Regime::Long).unwrap();
    assert_eq!(long.exponent, 0.5);
    assert!((long.prefactor.unwrap() - 2.0 / gamma(1.5)).abs() < 1e-12);
    assert!((long.prefactor.unwrap() - 2.2568).abs() < 1e-4);

    let p = GleParams::new(0.75, 0.5, 0.0, 1.0, 1.0)
        .unwrap()
        .with_v0(1.0)
        .unwrap()
        .with_force(0.0, 0.5)
        .unwrap();
    let laws = asymptotic_laws(&p, CaseTag::Case3).unwrap();
    let short = laws.iter().find(|l| l.regime == Regime::Short).unwrap();
    assert_eq!((short.exponent, short.prefactor), (2.0, Some(1.0)));

    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
    let laws = asymptotic_laws(&p, CaseTag::Case3b).unwrap();
    let a = p.force_amp();
    assert_eq!(laws[0].regime, Regime::Short);
    assert_eq!(laws[0].exponent, 1.0);
    assert!((laws[0].prefactor.unwrap() - a * a * rgamma(1.5).powi(2)).abs() < 1e-12);
    assert_eq!(laws[1].exponent, 0.5);
    assert!((laws[1].prefactor.unwrap() - 2.0 * rgamma(1.5)).abs() < 1e-12);

    for zeta in [0.2, 0.5, 0.9] {
        let p = GleParams::new(0.6, (2.0 * zeta + 1.0) / 4.0, 0.0, 1.0, 1.0)
            .unwrap()
            .with_force(0.0, 1.0)
            .unwrap();
        let laws = asymptotic_laws(&p, CaseTag::Case2 { noise_exponent: zeta }).unwrap();
        let long = laws.iter().find(|l| l.regime == Regime::Long).unwrap();
        assert!((long.exponent - 0.5).abs() < 1e-12);
        assert_eq!(long.prefactor, None);
    }
}

#[test]
fn case_validation() {
    let p = GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
    assert!(asymptotic_laws(&p, CaseTag::Case1).is_err());
    assert!(asymptotic_laws(&p, CaseTag::Case3a).is_err());
    // force present
    assert!(asymptotic_laws(&p, CaseTag::Case2 { noise_exponent: 0.5 }).is_err());
    let od = GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap();
    assert!(asymptotic_laws(&od, CaseTag::Case3).is_err());
    assert_eq!(asymptotic_laws(&od, CaseTag::Case3a).unwrap().len(), 2);
}

#[test]
fn overdamped_prefactor_variants_differ_by_gamma_ratio() {
    for g in [0.25, 0.5, 0.75] {
        let od = GleParams::overdamped(g, 1.5, 0.8, 0.7).unwrap();
        let c = overdamped_long_law(&od, OverdampedPrefactor::Corrected).unwrap();
        let l = overdamped_long_law(&od, OverdampedPrefactor::PaperLiteral).unwrap();
        let ratio = l.prefactor.unwrap() / c.prefactor.unwrap();
        assert!(rel(ratio, gamma(1.0 + g) / gamma(1.0 - g)) < 1e-14);
    }
}

/// Scan for the point where msd / law stays within 2% and report it.
fn attainment(p: &GleParams, law: &AsymptoticLaw) -> Option<f64> {
    let times = match law.regime {
        Regime::Short => log_times(-1.0, -9.0, 33),
        Regime::Long => log_times(0.0, 8.0, 33),
    };
    times.into_iter().find(|&t| {
        let r = msd(p, t).unwrap() / law.eval(t).unwrap();
        (0.98..=1.02).contains(&r)
    })
}

#[test]
fn asymptotes_are_attained() {
    let cases = [
        (GleParams::new(0.5, 0.5, 0.0, 1.0, 1.0).unwrap(), CaseTag::Case3b),
        (GleParams::new(0.75, 0.5, 0.0, 1.0, 1.0).unwrap().with_force(0.0, 1.0).unwrap(), CaseTag::Case3),
        (GleParams::new(0.9, 0.3, 0.0, 2.0, 0.5).unwrap().with_force(0.7, 0.5).unwrap(), CaseTag::Case3),
        (GleParams::new(0.8, 1.0, 1.0, 0.0, 1.0).unwrap().with_force(0.0, 1.0).unwrap(), CaseTag::Case1),
        (GleParams::overdamped(0.5, 1.0, 1.0, 1.0).unwrap(), CaseTag::Case3a),
    ];
    for (p, case) in cases {
        for law in asymptotic_laws(&p, case).unwrap() {
            let found = attainment(&p, &law);
            assert!(found.is_some(), "{case:?} {law:?} never attained");
            println!("{case:?} {:?} t^{} attained at t = {:e}", law.regime, law.exponent, found.unwrap());
        }
    }
}

fn fitted_slope(p: &GleParams, t: f64) -> f64 {
    let (a, b) = (t / 2.0, t * 2.0);
    (msd(p, b).unwrap() / msd(p, a).unwrap()).ln() / (b / a).ln()
}

#[test]
fn long_time_slope_is_independent_of_alpha() {
    let slopes: Vec<f64> = [0.6, 0.8, 1.0]
        .iter()
        .map(|&alpha| {
            let p = GleParams::new(alpha, 0.5, 0.0, 1.0, 1.0).unwrap();
            fitted_slope(&p, 1e6)
        })
        .collect();
    for s in &slopes {
        assert!((s - 0.5).abs() < 0.02, "{slopes:?}");
    }
}

#[test]
fn series_agrees_at_long_times_with_delta_kernel() {
    let p = GleParams::new(0.75, 0.5, 0.1, 1.0, 1.0).unwrap();
    for t in [30.0, 300.0] {
        let s = green_series(&p, t, SERIES_MAX_TERMS).unwrap().value;
        let l = green_laplace(&p, t).unwrap();
        assert!(rel(s, l) < 1e-4, "t={t}: {s} vs {l}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn msd_decomposes_and_variance_is_positive(
        alpha in 0.3f64..1.0,
        gamma_ in 0.2f64..1.0,
        l2 in 0.2f64..2.0,
        kt in 0.2f64..2.0,
        v0 in -1.0f64..1.0,
        amp in -1.0f64..1.0,
        kappa in 0.2f64..1.0,
        x0 in -2.0f64..2.0,
        t in 0.01f64..20.0,
    ) {
        let p = GleParams::new(alpha, gamma_, 0.0, l2, kt).unwrap()
            .with_v0(v0).unwrap()
            .with_force(amp, kappa).unwrap()
            .with_x0(x0).unwrap();
        let m = mean_displacement(&p, t).unwrap() - x0;
        let v = variance(&p, t).unwrap();
        let r = msd(&p, t).unwrap();
        prop_assert!(v > 0.0);
        prop_assert!((r - v - m * m).abs() <= 4.0 * f64::EPSILON * r);
    }

    #[test]
    fn closed_and_laplace_routes_agree(
        alpha in 0.3f64..1.0,
        gamma_ in 0.2f64..1.0,
        l2 in 0.2f64..2.0,
        t in 0.01f64..10.0,
    ) {
        let p = GleParams::new(alpha, gamma_, 0.0, l2, 1.0).unwrap();
        let c = green_closed(&p, t).unwrap();
        let l = green_laplace(&p, t).unwrap();
        prop_assert!((c - l).abs() <= 1e-7 * c.abs().max(1e-3), "{c} {l}");
    }

    #[test]
    fn overdamped_variance_is_increasing(
        gamma_ in 0.1f64..1.0,
        l1 in 0.2f64..3.0,
        l2 in 0.0f64..3.0,
        t in 0.01f64..100.0,
    ) {
        let od = GleParams::overdamped(gamma_, l1, l2, 1.0).unwrap();
        let a = variance(&od, t).unwrap();
        let b = variance(&od, t * 1.1).unwrap();
        prop_assert!(a > 0.0 && b > a);
    }
}

#[test]
fn divergent_series_falls_back_to_inversion() {
    let p = GleParams::new(0.5, 0.5, 5.0, 1.0, 1.0).unwrap();
    assert!(matches!(green_series(&p, 1.0, 25), Err(sfd_core::Error::Divergence { .. })));
    for t in [0.5, 1.0, 4.0] {
        let (g, l) = (green(&p, t).unwrap(), green_laplace(&p, t).unwrap());
        assert_eq!(g, l);
        let m = mean_displacement(&p, t).unwrap();
        let v0 = quantity_laplace(&p, GreenQuantity::VelocityResponse, t).unwrap();
        let f = quantity_laplace(&p, GreenQuantity::ForceResponse, t).unwrap();
        assert!((m - (v0 + f)).abs() <= 1e-14 * m.abs());
    }
    let grid = mean_on_grid(&p, 0.5, 8).unwrap();
    assert!((grid[8] - mean_displacement(&p, 4.0).unwrap()).abs() < 1e-12);
}
