//! The windowed-average estimator
//! `Ŝ_n(z0) = q_n⁻¹ Σ_k 𝕀{|x_k - z0| ≤ h} y_k` with `h = n^{-1/(2β+1)}`,
//! and its exact decomposition `Ŝ_n(z0) - S(z0) = B_n + ζ_n/√q_n`.

use crate::error::{Error, Result};
use crate::holder::{local_integral, validate_beta};
use crate::model::{FunctionSpec, ScaleSpec};
use crate::quadrature::KahanSum;

/// `n^{-1/(2β+1)}`.
pub fn bandwidth(n: usize, beta: f64) -> f64 {
    (n as f64).powf(-1.0 / (2.0 * beta + 1.0))
}

/// `φ_n = n^{β/(2β+1)}`.
pub fn rate(n: usize, beta: f64) -> f64 {
    (n as f64).powf(beta / (2.0 * beta + 1.0))
}

/// Sample size, smoothness, target point, and the derived window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EstimatorConfig {
    pub n: usize,
    pub beta: f64,
    pub z0: f64,
    pub h: f64,
    pub phi_n: f64,
    /// Inclusive one-based index range of design points in the window.
    window: Option<(usize, usize)>,
}

impl EstimatorConfig {
    pub fn new(n: usize, beta: f64, z0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        validate_beta(beta)?;
        if !(z0 > 0.0 && z0 < 1.0) {
            return Err(Error::param("z0", format!("must lie in (0, 1), got {z0}")));
        }
        let h = bandwidth(n, beta);
        let phi_n = rate(n, beta);
        let window = window_bounds(n, z0, h);
        Ok(Self {
            n,
            beta,
            z0,
            h,
            phi_n,
            window,
        })
    }

    /// `x_k = k/n` for a one-based `k`.
    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Closed indicator `Q((x_k - z0)/h)`; boundary ties count as inside.
    #[inline]
    pub fn in_window(&self, k: usize) -> bool {
        in_window(self.n, self.z0, self.h, k)
    }

    /// `(k_*, k^*)`, the first and last window indices, or `None` if
    /// no design point falls in the window.
    pub fn window(&self) -> Option<(usize, usize)> {
        self.window
    }

    pub fn window_or_err(&self) -> Result<(usize, usize)> {
        self.window.ok_or(Error::EmptyWindow {
            n: self.n,
            z0: self.z0,
            h: self.h,
        })
    }

    /// `q_n`, the number of design points in the window.
    pub fn q_n(&self) -> usize {
        self.window.map_or(0, |(lo, hi)| hi - lo + 1)
    }

    /// Iterator over window indices in ascending order.
    pub fn window_indices(&self) -> impl Iterator<Item = usize> {
        let (lo, hi) = self.window.unwrap_or((1, 0));
        lo..=hi
    }
}

#[inline]
fn in_window(n: usize, z0: f64, h: f64, k: usize) -> bool {
    (k as f64 / n as f64 - z0).abs() <= h
}

/// Starts from `k_* = ⌊n(z0-h)⌋ + 1`, `k^* = ⌊n(z0+h)⌋` and settles ties
/// with the floating-point predicate so `q_n` matches a direct count.
fn window_bounds(n: usize, z0: f64, h: f64) -> Option<(usize, usize)> {
    let nf = n as f64;
    let clamp = |v: f64| -> usize { v.max(1.0).min(nf) as usize };
    let mut lo = clamp((nf * (z0 - h)).floor() + 1.0);
    while lo > 1 && in_window(n, z0, h, lo - 1) {
        lo -= 1;
    }
    while lo <= n && !in_window(n, z0, h, lo) {
        lo += 1;
    }
    let mut hi = clamp((nf * (z0 + h)).floor());
    while hi < n && in_window(n, z0, h, hi + 1) {
        hi += 1;
    }
    while hi >= 1 && !in_window(n, z0, h, hi) {
        hi -= 1;
    }
    (lo <= hi && lo <= n && hi >= 1).then_some((lo, hi))
}

/// `(Ŝ_n(z0), q_n)` from observations `y_1..y_n`.
pub fn kernel_estimate(y: &[f64], cfg: &EstimatorConfig) -> Result<(f64, usize)> {
    if y.len() != cfg.n {
        return Err(Error::LengthMismatch {
            expected: cfg.n,
            got: y.len(),
        });
    }
    let (lo, hi) = cfg.window_or_err()?;
    let q = hi - lo + 1;
    let sum = y[lo - 1..hi].iter().copied().collect::<KahanSum>().value();
    Ok((sum / q as f64, q))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecompositionReport {
    /// `Ŝ_n(z0)`; without noise draws this is the noiseless `S(z0) + B_n`.
    pub estimate: f64,
    pub q_n: usize,
    /// `B_n = q_n⁻¹ Σ_window (S(x_k) - S(z0))`.
    pub b_n: f64,
    /// `∫_{-1}^{1} (S(z0+hu) - S(z0)) du`.
    pub integral_term: f64,
    /// `R_n = q_n B_n / φ_n² - integral_term`.
    pub r_n: f64,
    /// `σ_n²(S) = q_n⁻¹ Σ_window g²(x_k, S)`.
    pub sigma_n_sq: f64,
    /// `q_n⁻¹ Σ_window g(x_k, S) ξ_k` when draws were supplied.
    pub noise_average: Option<f64>,
}

/// Exact bias/variance split of the estimator for a known `S`.
///
/// `xi`, when given, must hold one draw per design point; the estimate is
/// then computed from `y_k = S(x_k) + g(x_k, S) ξ_k`.
pub fn decompose(
    s: &FunctionSpec,
    scale: &ScaleSpec,
    cfg: &EstimatorConfig,
    xi: Option<&[f64]>,
) -> Result<DecompositionReport> {
    let (lo, hi) = cfg.window_or_err()?;
    if let Some(xi) = xi {
        if xi.len() != cfg.n {
            return Err(Error::LengthMismatch {
                expected: cfg.n,
                got: xi.len(),
            });
        }
    }
    let q = hi - lo + 1;
    let qf = q as f64;
    let s0 = s.value(cfg.z0);
    let g = scale.bind(s);

    let mut bias = KahanSum::new();
    let mut var = KahanSum::new();
    let mut noise = KahanSum::new();
    let mut obs = KahanSum::new();
    for k in lo..=hi {
        let x = cfg.x(k);
        let sx = s.value(x);
        let g2 = g.g_squared(x);
        bias.add(sx - s0);
        var.add(g2);
        if let Some(xi) = xi {
            let e = g2.sqrt() * xi[k - 1];
            noise.add(e);
            obs.add(sx + e);
        }
    }
    let b_n = bias.value() / qf;
    let integral_term = local_integral(s, cfg.z0, cfg.h);
    let r_n = qf * b_n / (cfg.phi_n * cfg.phi_n) - integral_term;
    let (estimate, noise_average) = match xi {
        Some(_) => (obs.value() / qf, Some(noise.value() / qf)),
        None => (s0 + b_n, None),
    };
    Ok(DecompositionReport {
        estimate,
        q_n: q,
        b_n,
        integral_term,
        r_n,
        sigma_n_sq: var.value() / qf,
        noise_average,
    })
}

/// `σ_n²(S)` alone.
pub fn sigma_n_sq(s: &FunctionSpec, scale: &ScaleSpec, cfg: &EstimatorConfig) -> Result<f64> {
    let (lo, hi) = cfg.window_or_err()?;
    let g = scale.bind(s);
    let sum = (lo..=hi).map(|k| g.g_squared(cfg.x(k))).collect::<KahanSum>().value();
    Ok(sum / (hi - lo + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SigmaLimitRow {
    pub n: usize,
    pub sigma_n_sq: f64,
    pub limit: f64,
    pub gap: f64,
}

/// `σ_n²(S)` against its limit `g²(z0, S)` along `n_sequence`.
pub fn sigma_n_limit_check(
    s: &FunctionSpec,
    scale: &ScaleSpec,
    z0: f64,
    beta: f64,
    n_sequence: &[usize],
) -> Result<Vec<SigmaLimitRow>> {
    let limit = scale.bind(s).g_squared(z0);
    n_sequence
        .iter()
        .map(|&n| {
            let cfg = EstimatorConfig::new(n, beta, z0)?;
            let v = sigma_n_sq(s, scale, &cfg)?;
            Ok(SigmaLimitRow {
                n,
                sigma_n_sq: v,
                limit,
                gap: (v - limit).abs(),
            })
        })
        .collect()
}
