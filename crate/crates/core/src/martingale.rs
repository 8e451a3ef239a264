//! Truncation of the standardised noise sum for non-Gaussian laws.
//!
//! With `a = q_n^{1/4}` each draw splits as `ξ = ξ′ + ξ″`,
//! `ξ′ = ξ𝕀{|ξ| ≤ a} - m(a)`, `ξ″ = ξ𝕀{|ξ| > a} + m(a)`,
//! `m(a) = E[ξ𝕀{|ξ| ≤ a}]`. Weighted by `g(x_k, S)/(√q_n g(z0, S))` over
//! the window these give the bounded martingale part `ζ̃′` and the tail
//! part `ζ̃″` of `ζ̃_n = ζ_n / g(z0, S)`.

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::model::{FunctionSpec, NoiseKind, NoiseSpec, ScaleSpec};
use crate::par::{map_indexed, Execution};
use crate::quadrature::{adaptive_simpson, tail_integral, KahanSum};
use crate::rng::{replication_rng, rng_from_seed};
use crate::stats::{ks_statistic, mean_stderr, normal_cdf, normal_pdf};

const QUADRATURE_TOL: f64 = 1e-12;
const SQRT3: f64 = 1.732_050_807_568_877_2;

fn check_threshold(a: f64) -> Result<()> {
    if a > 0.0 {
        Ok(())
    } else {
        Err(Error::param("a", format!("threshold must be positive, got {a}")))
    }
}

/// `K_p(a) = E[ξ² 𝕀{|ξ| > a}]`.
pub fn tail_second_moment(noise: &NoiseSpec, a: f64) -> Result<f64> {
    check_threshold(a)?;
    Ok(match noise.kind {
        NoiseKind::Gaussian => 2.0 * (a * normal_pdf(a) + 1.0 - normal_cdf(a)),
        NoiseKind::UniformStd => {
            if a < SQRT3 {
                (3.0 * SQRT3 - a * a * a) / (3.0 * SQRT3)
            } else {
                0.0
            }
        }
        NoiseKind::Rademacher => {
            if a < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        NoiseKind::Degenerate => 0.0,
        NoiseKind::LaplaceStd | NoiseKind::Student5Std => {
            let f = |x: f64| x * x * noise.density(x);
            2.0 * tail_integral(&f, a, QUADRATURE_TOL)
        }
    })
}

/// `m(a) = E[ξ 𝕀{|ξ| ≤ a}]`.
pub fn truncated_first_moment(noise: &NoiseSpec, a: f64) -> Result<f64> {
    check_threshold(a)?;
    Ok(match noise.kind {
        // Symmetric laws with an explicit form: the truncated mean is 0.
        NoiseKind::Gaussian | NoiseKind::UniformStd | NoiseKind::Rademacher | NoiseKind::Degenerate => 0.0,
        NoiseKind::LaplaceStd | NoiseKind::Student5Std => {
            let f = |x: f64| x * noise.density(x);
            adaptive_simpson(&f, -a, a, QUADRATURE_TOL)
        }
    })
}

/// `a_n = Var(ξ 𝕀{|ξ| ≤ a}) = Var ξ - K_p(a) - m(a)²`.
pub fn truncated_variance(noise: &NoiseSpec, a: f64) -> Result<f64> {
    let kp = tail_second_moment(noise, a)?;
    let m = truncated_first_moment(noise, a)?;
    Ok(noise.variance() - kp - m * m)
}

/// Deterministic quantities of the split at one `(S, scale, noise, n)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TruncationParts {
    /// `a = q_n^{1/4}`.
    pub a_threshold: f64,
    pub a_n: f64,
    pub k_p: f64,
    /// `m(a)`.
    pub centre: f64,
    /// `G_n(S)/q_n` with `G_n(S) = Σ_window g²(x_k, S)/g²(z0, S)`.
    pub g_n_over_qn: f64,
    /// `r_n(S) = (G_n(S)/q_n) a_n`.
    pub r_n: f64,
    /// Index of the `q_n`-th window point.
    pub tau_n: usize,
    /// `E[ζ̃″²] = (G_n(S)/q_n) E[ξ″²] = (G_n(S)/q_n)(K_p - m²)`.
    pub second_moment_zeta_dd: f64,
    /// `2 (g^⋆/g_⋆) q_n^{-1/4}`, the almost sure bound on `|u′_k|`.
    pub u_prime_bound: f64,
}

/// Realised split of one run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SplitRealization {
    pub zeta_prime: f64,
    pub zeta_second: f64,
    /// `ζ_n / g(z0, S)` summed directly from the same draws.
    pub zeta_tilde: f64,
    pub max_abs_u_prime: f64,
}

/// Deterministic parts plus replication diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TruncationReport {
    pub noise: String,
    pub n: usize,
    pub q_n: usize,
    pub a_threshold: f64,
    pub a_n: f64,
    pub k_p: f64,
    pub g_n_over_qn: f64,
    pub r_n: f64,
    pub tau_n: usize,
    /// KS distance between the replicated `ζ̃_n` and `Φ`.
    pub ks_distance: f64,
    pub second_moment_zeta_dd: f64,
    /// Replication mean of `ζ̃″²` and its standard error.
    pub second_moment_mc: f64,
    pub second_moment_se: f64,
    pub reps: usize,
}

/// Window weights `g(x_k, S)/(√q_n g(z0, S))` and the deterministic parts.
struct Prepared {
    weights: Vec<f64>,
    parts: TruncationParts,
}

fn prepare(s: &FunctionSpec, scale: &ScaleSpec, noise: &NoiseSpec, cfg: &EstimatorConfig) -> Result<Prepared> {
    let (lo, hi) = cfg.window_or_err()?;
    let q = hi - lo + 1;
    let qf = q as f64;
    let bound = scale.bind(s);
    let g0 = bound.g(cfg.z0);
    let a = qf.powf(0.25);
    let k_p = tail_second_moment(noise, a)?;
    let centre = truncated_first_moment(noise, a)?;
    let a_n = noise.variance() - k_p - centre * centre;
    let mut gsum = KahanSum::new();
    let mut weights = Vec::with_capacity(q);
    for k in lo..=hi {
        let g = bound.g(cfg.x(k));
        gsum.add(g * g / (g0 * g0));
        weights.push(g / (qf.sqrt() * g0));
    }
    let g_n_over_qn = gsum.value() / qf;
    Ok(Prepared {
        weights,
        parts: TruncationParts {
            a_threshold: a,
            a_n,
            k_p,
            centre,
            g_n_over_qn,
            r_n: g_n_over_qn * a_n,
            tau_n: hi,
            second_moment_zeta_dd: g_n_over_qn * (k_p - centre * centre),
            u_prime_bound: 2.0 * scale.g_ceil() / scale.g_floor() / a,
        },
    })
}

fn split_draws<R: rand::Rng + ?Sized>(prep: &Prepared, noise: &NoiseSpec, rng: &mut R) -> SplitRealization {
    let a = prep.parts.a_threshold;
    let m = prep.parts.centre;
    let mut prime = KahanSum::new();
    let mut second = KahanSum::new();
    let mut whole = KahanSum::new();
    let mut max_u = 0.0f64;
    for &w in &prep.weights {
        let xi = noise.sample(rng);
        let (inner, outer) = if xi.abs() <= a { (xi, 0.0) } else { (0.0, xi) };
        let u1 = w * (inner - m);
        prime.add(u1);
        second.add(w * (outer + m));
        whole.add(w * xi);
        max_u = max_u.max(u1.abs());
    }
    SplitRealization {
        zeta_prime: prime.value(),
        zeta_second: second.value(),
        zeta_tilde: whole.value(),
        max_abs_u_prime: max_u,
    }
}

/// One run of the split; noise is drawn for the window points only.
pub fn truncation_split(
    s: &FunctionSpec,
    scale: &ScaleSpec,
    noise: &NoiseSpec,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<(TruncationParts, SplitRealization)> {
    let prep = prepare(s, scale, noise, cfg)?;
    let mut rng = rng_from_seed(seed);
    let real = split_draws(&prep, noise, &mut rng);
    Ok((prep.parts, real))
}

/// Replicated split: KS distance of `ζ̃_n` to `Φ` and the second moment of `ζ̃″`.
pub fn truncation_report(
    s: &FunctionSpec,
    scale: &ScaleSpec,
    noise: &NoiseSpec,
    cfg: &EstimatorConfig,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<TruncationReport> {
    if reps < 100 {
        return Err(Error::param("reps", format!("need at least 100, got {reps}")));
    }
    let prep = prepare(s, scale, noise, cfg)?;
    let draws = map_indexed(reps, exec, |r| {
        let mut rng = replication_rng(seed, r as u64);
        split_draws(&prep, noise, &mut rng)
    });
    let zeta: Vec<f64> = draws.iter().map(|d| d.zeta_tilde).collect();
    let tail_sq: Vec<f64> = draws.iter().map(|d| d.zeta_second * d.zeta_second).collect();
    let sm = mean_stderr(&tail_sq);
    let p = prep.parts;
    Ok(TruncationReport {
        noise: noise.label().to_string(),
        n: cfg.n,
        q_n: prep.weights.len(),
        a_threshold: p.a_threshold,
        a_n: p.a_n,
        k_p: p.k_p,
        g_n_over_qn: p.g_n_over_qn,
        r_n: p.r_n,
        tau_n: p.tau_n,
        ks_distance: ks_statistic(&zeta, normal_cdf),
        second_moment_zeta_dd: p.second_moment_zeta_dd,
        second_moment_mc: sm.mean,
        second_moment_se: sm.stderr,
        reps,
    })
}

/// KS distance between `reps` replicated `ζ̃_n` and `Φ`.
pub fn normal_approx_check(
    s: &FunctionSpec,
    scale: &ScaleSpec,
    noise: &NoiseSpec,
    cfg: &EstimatorConfig,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    Ok(truncation_report(s, scale, noise, cfg, reps, seed, exec)?.ks_distance)
}
