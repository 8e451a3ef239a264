//! Property tests for the model, class checks, estimator and oracles.

use std::sync::Arc;

use proptest::prelude::*;

use minimaxkern::estimator::{bandwidth, decompose, kernel_estimate, rate};
use minimaxkern::holder::weak_defect;
use minimaxkern::lowerbound::{build_kernel, min_n_membership_amplitude, PerturbationSpec, DEFAULT_KERNEL_RESOLUTION};
use minimaxkern::martingale::{tail_second_moment, truncated_variance, truncation_split};
use minimaxkern::model::sample_run;
use minimaxkern::risk::folded_normal_mean;
use minimaxkern::stats::{ks_statistic, normal_cdf};
use minimaxkern::{EstimatorConfig, FunctionSpec, NoiseSpec, ScaleSpec, WeakHolderParams};

fn wave(a: f64, b: f64, omega: f64, phase: f64) -> FunctionSpec {
    FunctionSpec::new(
        "wave",
        move |x| a + b * (omega * x + phase).sin(),
        move |x| b * omega * (omega * x + phase).cos(),
    )
}

fn scale_strategy() -> impl Strategy<Value = ScaleSpec> {
    (0.1f64..3.0, 0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0)
        .prop_map(|(a0, a1, a2, a3)| ScaleSpec::new(a0, a1, a2, a3).unwrap())
}

fn function_strategy() -> impl Strategy<Value = FunctionSpec> {
    (-2.0f64..2.0, -3.0f64..3.0, 0.1f64..12.0, 0.0f64..6.3).prop_map(|(a, b, w, p)| wave(a, b, w, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_stays_within_bounds(scale in scale_strategy(), s in function_strategy(), x in 0.0f64..=1.0) {
        let g = scale.eval(x, &s);
        prop_assert!(g >= scale.g_floor() * (1.0 - 1e-14));
        prop_assert!(g <= scale.g_ceil() * (1.0 + 1e-14));
    }

    #[test]
    fn first_order_expansion(
        scale in scale_strategy(),
        s in function_strategy(),
        w in 0.5f64..10.0,
        p in 0.0f64..6.3,
        x in 0.0f64..=1.0,
    ) {
        // ‖f‖∞ = 1e-3.
        let f = FunctionSpec::new("f", move |t| 1e-3 * (w * t + p).cos(), move |t| -1e-3 * w * (w * t + p).sin());
        let lin = scale.frechet(x, &s, &f);
        let diff = scale.eval(x, &s.plus(&f)) - scale.eval(x, &s);
        prop_assert!((diff - lin).abs() / 1e-3 < 1e-2);
        prop_assert!(lin.abs() <= scale.frechet_bound() * 1e-3 * (1.0 + 1e-9));
    }

    #[test]
    fn defect_ignores_constants_and_odd_linear_terms(
        s in function_strategy(),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        h in 0.001f64..0.5,
        beta in 1.05f64..=2.0,
    ) {
        let z0 = 0.5;
        let shifted = s.plus(&FunctionSpec::linear(b, a - b * z0));
        let d0 = weak_defect(&s, z0, beta, h).unwrap();
        let d1 = weak_defect(&shifted, z0, beta, h).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-7 * (1.0 + d0), "{d0} vs {d1}");
    }

    #[test]
    fn defect_respects_holder_bound(c in 0.01f64..5.0, beta in 1.05f64..=2.0, h in 0.001f64..0.5) {
        // c|x - z0|^β has a (β-1)-Hölder derivative with constant cβ 2^{2-β}.
        let z0 = 0.5;
        let s = FunctionSpec::new(
            "power",
            move |x| c * (x - z0).abs().powf(beta),
            move |x| c * beta * (x - z0).abs().powf(beta - 1.0) * (x - z0).signum(),
        );
        let k = c * beta * 2f64.powf(2.0 - beta);
        let d = weak_defect(&s, z0, beta, h).unwrap();
        prop_assert!(d <= 2.0 * k / (beta * (beta + 1.0)) * (1.0 + 1e-9));
    }

    #[test]
    fn rate_and_bandwidth_identity(n in 1usize..10_000_000, beta in 1.01f64..=2.0) {
        let (h, phi) = (bandwidth(n, beta), rate(n, beta));
        prop_assert!((n as f64 * h - phi * phi).abs() <= 1e-10 * phi * phi);
    }

    #[test]
    fn window_count_tracks_twice_nh(n in 10usize..2_000_000, beta in 1.01f64..=2.0, z0 in 0.3f64..0.7) {
        let cfg = EstimatorConfig::new(n, beta, z0);
        prop_assume!(cfg.is_ok());
        let cfg = cfg.unwrap();
        let nh = n as f64 * cfg.h;
        prop_assert!((cfg.q_n() as f64 / nh - 2.0).abs() <= 3.0 / nh);
        let direct = (1..=n).filter(|&k| ((k as f64 / n as f64) - z0).abs() <= cfg.h).count();
        prop_assert_eq!(cfg.q_n(), direct);
    }

    #[test]
    fn estimator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let cfg = EstimatorConfig::new(3000, 2.0, 0.5).unwrap();
        let scale = ScaleSpec::constant(1.0).unwrap();
        let y1 = sample_run(&FunctionSpec::constant(0.0), &scale, &NoiseSpec::gaussian(), 3000, seed).unwrap();
        let y2 = sample_run(&FunctionSpec::constant(0.0), &scale, &NoiseSpec::gaussian(), 3000, seed + 1).unwrap();
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let (e1, _) = kernel_estimate(&y1, &cfg).unwrap();
        let (e2, _) = kernel_estimate(&y2, &cfg).unwrap();
        let (e, _) = kernel_estimate(&combo, &cfg).unwrap();
        prop_assert!((e - (a * e1 + b * e2)).abs() <= 1e-12 * (1.0 + e.abs()));
    }

    #[test]
    fn decomposition_reconstructs_estimate(s in function_strategy(), scale in scale_strategy(), seed in 0u64..1000) {
        let n = 2000;
        let cfg = EstimatorConfig::new(n, 1.5, 0.5).unwrap();
        let noise = NoiseSpec::gaussian();
        let xi = sample_run(&FunctionSpec::constant(0.0), &ScaleSpec::constant(1.0).unwrap(), &noise, n, seed).unwrap();
        let d = decompose(&s, &scale, &cfg, Some(&xi)).unwrap();
        let rebuilt = s.value(0.5) + d.b_n + d.noise_average.unwrap();
        prop_assert!((d.estimate - rebuilt).abs() <= 1e-14 * (1.0 + d.estimate.abs()) * 10.0);
        let phi2 = cfg.phi_n * cfg.phi_n;
        let back = (d.r_n + d.integral_term) * phi2 / d.q_n as f64;
        prop_assert!((back - d.b_n).abs() <= 1e-10 * (1.0 + d.b_n.abs()));
    }

    #[test]
    fn folded_mean_dominates_and_is_even(m in -5.0f64..5.0, s in 0.01f64..5.0) {
        let v = folded_normal_mean(m, s);
        prop_assert!(v >= m.abs() - 1e-14);
        prop_assert!(v >= s * (2.0 / std::f64::consts::PI).sqrt() - 1e-14);
        prop_assert!((v - folded_normal_mean(-m, s)).abs() <= 1e-14 * v.max(1.0));
    }

    #[test]
    fn ks_is_a_distance(xs in proptest::collection::vec(-4.0f64..4.0, 1..200)) {
        let d = ks_statistic(&xs, normal_cdf);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn truncated_variance_within_twice_tail(a in 0.2f64..20.0) {
        for p in NoiseSpec::catalog() {
            let an = truncated_variance(&p, a).unwrap();
            let kp = tail_second_moment(&p, a).unwrap();
            prop_assert!(kp >= 0.0);
            prop_assert!((an - 1.0).abs() <= 2.0 * kp + 1e-12, "{} a={a}", p.label());
        }
    }

    #[test]
    fn truncated_martingale_increments_are_bounded(seed in 0u64..200, n in 500usize..20_000) {
        let scale = ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap();
        let cfg = EstimatorConfig::new(n, 2.0, 0.5).unwrap();
        for p in NoiseSpec::catalog() {
            let (parts, real) = truncation_split(&FunctionSpec::constant(0.2), &scale, &p, &cfg, seed).unwrap();
            prop_assert!(real.max_abs_u_prime <= parts.u_prime_bound);
        }
    }
}

#[test]
fn perturbations_stay_certified_for_all_small_amplitudes() {
    // Away from the operating bandwidth the defect of S_{ν,u} is about
    // 0.3|u| (0.55|u| for ν = 0.2) at β = 2, so probes keep it below δ.
    for (nu, delta, b) in [(0.1, 0.5, 1.0), (0.05, 0.5, 1.5), (0.2, 0.9, 1.5)] {
        let k = Arc::new(build_kernel(nu, DEFAULT_KERNEL_RESOLUTION).unwrap());
        let n = min_n_membership_amplitude(nu, delta, 2.0, k.spec().l_prime_sup, b).unwrap() as usize;
        let wp = WeakHolderParams::new(0.5, delta, 2.0).unwrap();
        for i in 0..=8 {
            let u = -b + 2.0 * b * i as f64 / 8.0;
            let p = PerturbationSpec::new(k.clone(), u, n, 2.0, 0.5).unwrap();
            let r = minimaxkern::holder::check_weak_holder(&p.function(), &wp);
            assert!(r.member, "nu={nu} delta={delta} u={u}: {r:?}");
        }
    }
}
