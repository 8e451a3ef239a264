//! Monte Carlo checks against exact oracles and limit statements.

use minimaxkern::estimator::decompose;
use minimaxkern::martingale::{normal_approx_check, tail_second_moment, truncation_report};
use minimaxkern::model::shapes;
use minimaxkern::par::with_threads;
use minimaxkern::risk::{exact_gaussian_risk, monte_carlo_risk, sup_risk, FamilyBuilder, RiskConfig};
use minimaxkern::{EstimatorConfig, Execution, FunctionSpec, NoiseKind, NoiseSpec, ScaleSpec, EFFICIENCY_CONSTANT};

fn baseline() -> ScaleSpec {
    ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap()
}

#[test]
fn rademacher_risk_matches_gaussian_oracle() {
    let s = FunctionSpec::constant(0.2);
    let cfg = EstimatorConfig::new(100_000, 2.0, 0.5).unwrap();
    let rc = RiskConfig::new(cfg, 0.5, 20_000, 42, vec![s.clone()], baseline(), NoiseSpec::gaussian()).unwrap();
    let oracle = exact_gaussian_risk(&s, &rc).unwrap();
    let mc = monte_carlo_risk(&s, &rc.with_noise(NoiseSpec::new(NoiseKind::Rademacher))).unwrap();
    assert!((mc.mean - oracle).abs() <= 5.0 * mc.stderr, "{mc:?} vs {oracle}");
}

#[test]
fn constant_function_risk_approaches_the_constant() {
    let cfg = EstimatorConfig::new(100_000, 2.0, 0.5).unwrap();
    for (_, scale) in ScaleSpec::catalog() {
        let s = FunctionSpec::constant(0.2);
        let rc = RiskConfig::new(cfg, 0.5, 2, 1, vec![s.clone()], scale, NoiseSpec::gaussian()).unwrap();
        let exact = exact_gaussian_risk(&s, &rc).unwrap();
        let d = decompose(&s, &scale, &cfg, None).unwrap();
        let g0 = scale.eval(0.5, &s);
        // (1/√π)(σ_n/g(z0,S))(φ_n√2/√q_n), with φ_n√2/√q_n → 1.
        let closed = EFFICIENCY_CONSTANT * d.sigma_n_sq.sqrt() / g0 * cfg.phi_n * 2f64.sqrt() / (d.q_n as f64).sqrt();
        assert!((exact - closed).abs() <= 1e-12 * closed);
        assert!((exact - EFFICIENCY_CONSTANT).abs() < 0.01 * EFFICIENCY_CONSTANT);
    }
}

#[test]
fn sup_over_a_certified_family_respects_the_bias_slack() {
    let (n, delta) = (100_000, 0.1);
    let mut fb = FamilyBuilder::new(0.5, delta, 2.0).unwrap();
    let family = fb
        .family(&["const", "sine", "parabola", "poly", "bump_nu0.1"], n)
        .unwrap();
    let cfg = EstimatorConfig::new(n, 2.0, 0.5).unwrap();
    let rc = RiskConfig::new(cfg, delta, 5_000, 42, family.clone(), baseline(), NoiseSpec::gaussian()).unwrap();
    let report = sup_risk(&rc).unwrap();
    assert!(
        report.sup_risk <= EFFICIENCY_CONSTANT + delta / 2.0 + 3.0 * report.max_stderr(),
        "{report:?}"
    );

    let mut larger = family;
    larger.extend(fb.family(&["cosine", "wave"], n).unwrap());
    let rc2 = RiskConfig { family: larger, ..rc };
    assert!(sup_risk(&rc2).unwrap().sup_risk >= report.sup_risk);
}

#[test]
fn bias_contributions_respect_their_bounds() {
    let delta = 0.1;
    let mut fb = FamilyBuilder::new(0.5, delta, 2.0).unwrap();
    for n in [1_000usize, 10_000, 100_000] {
        let cfg = EstimatorConfig::new(n, 2.0, 0.5).unwrap();
        let (phi, q) = (cfg.phi_n, cfg.q_n() as f64);
        for s in fb.full_family(n).unwrap() {
            let d = decompose(&s, &baseline(), &cfg, None).unwrap();
            let integral_part = phi * (phi * phi / q * d.integral_term).abs();
            assert!(
                integral_part <= delta * phi.powi(3) * cfg.h.powf(2.0) / q * (1.0 + 1e-9),
                "{}",
                s.label()
            );
            let remainder_part = phi * (phi * phi / q * d.r_n).abs();
            assert!(
                remainder_part <= phi.powi(3) * 6.0 / (delta * q * n as f64),
                "{}",
                s.label()
            );
        }
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let mut fb = FamilyBuilder::new(0.5, 0.2, 2.0).unwrap();
    let family = fb.family(&["zero", "poly", "bump_neg"], 5_000).unwrap();
    let cfg = EstimatorConfig::new(5_000, 2.0, 0.5).unwrap();
    let rc = RiskConfig::new(
        cfg,
        0.2,
        500,
        7,
        family,
        baseline(),
        NoiseSpec::new(NoiseKind::Student5Std),
    )
    .unwrap();
    let one = with_threads(Some(1), || sup_risk(&rc).unwrap()).unwrap();
    let three = with_threads(Some(3), || sup_risk(&rc).unwrap()).unwrap();
    let seq = sup_risk(&rc.clone().with_execution(Execution::Sequential)).unwrap();
    assert_eq!(one, three);
    assert_eq!(one, seq);
}

#[test]
fn conditional_variance_ratio_tends_to_one() {
    let cfg = EstimatorConfig::new(1_000_000, 2.0, 0.5).unwrap();
    for (_, scale) in ScaleSpec::catalog() {
        for s in [FunctionSpec::constant(0.2), shapes::wave()] {
            for p in NoiseSpec::catalog() {
                let (parts, _) = minimaxkern::martingale::truncation_split(&s, &scale, &p, &cfg, 1).unwrap();
                assert!(
                    (parts.r_n - 1.0).abs() < 1e-2,
                    "{} {}: {}",
                    s.label(),
                    p.label(),
                    parts.r_n
                );
            }
        }
    }
}

#[test]
fn tail_part_second_moment_matches_theory() {
    let cfg = EstimatorConfig::new(10_000, 2.0, 0.5).unwrap();
    for kind in [NoiseKind::Student5Std, NoiseKind::LaplaceStd] {
        let r = truncation_report(
            &shapes::wave(),
            &baseline(),
            &NoiseSpec::new(kind),
            &cfg,
            10_000,
            42,
            Execution::Parallel,
        )
        .unwrap();
        let gap = (r.second_moment_mc - r.second_moment_zeta_dd).abs();
        assert!(gap <= 3.0 * r.second_moment_se, "{kind:?}: {r:?}");
    }
}

#[test]
fn rademacher_sum_is_close_to_normal() {
    let cfg = EstimatorConfig::new(100_000, 2.0, 0.5).unwrap();
    let ks = normal_approx_check(
        &FunctionSpec::constant(0.2),
        &baseline(),
        &NoiseSpec::new(NoiseKind::Rademacher),
        &cfg,
        10_000,
        42,
        Execution::Parallel,
    )
    .unwrap();
    assert!(ks < 0.01, "ks = {ks}");
}

#[test]
fn worst_tail_moment_decreases_with_n() {
    let sups: Vec<f64> = [1_000usize, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            let a = (EstimatorConfig::new(n, 2.0, 0.5).unwrap().q_n() as f64).powf(0.25);
            NoiseSpec::catalog()
                .iter()
                .map(|p| tail_second_moment(p, a).unwrap())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}
