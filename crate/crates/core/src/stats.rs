//! Small statistical helpers shared by the simulation modules.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::quadrature::KahanSum;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function Φ, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Mean and standard error (sample standard deviation over √len).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Two-pass mean and standard error, summing in slice order.
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().copied().collect::<KahanSum>().value() / n as f64;
    if n < 2 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .value();
    let sd = (ss / (n - 1) as f64).sqrt();
    MeanStderr {
        mean,
        stderr: sd / (n as f64).sqrt(),
    }
}

/// One-sample Kolmogorov–Smirnov statistic `sup_x |F_n(x) - F(x)|`.
///
/// The empirical CDF is right-continuous, so at a tie block the jump is
/// taken over the whole block.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let n = sample.len();
    if n == 0 {
        return 0.0;
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        let below = i as f64 / nf;
        let at = (j + 1) as f64 / nf;
        d = d.max((f - below).abs()).max((at - f).abs());
        i = j + 1;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_reference_points() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-14);
        assert_abs_diff_eq!(normal_cdf(-2.0), 0.022_750_131_948_179_2, epsilon = 1e-15);
        assert!(normal_cdf(-40.0) >= 0.0);
    }

    #[test]
    fn ks_of_single_point() {
        // F(0) = 0.5: the jump from 0 to 1 sits half a unit from the CDF.
        assert_abs_diff_eq!(ks_statistic(&[0.0], normal_cdf), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_ties_use_full_jump() {
        let d = ks_statistic(&[0.0, 0.0, 0.0, 0.0], |x| if x < 0.0 { 0.0 } else { 0.5 });
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_of_evenly_spread_uniform_sample() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(d, 0.5 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn stderr_of_known_sample() {
        let m = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m.mean, 2.5, epsilon = 1e-15);
        // sd = sqrt(5/3)
        assert_abs_diff_eq!(m.stderr, (5.0f64 / 3.0).sqrt() / 2.0, epsilon = 1e-15);
    }
}
