//! Least-favourable perturbations for the lower bound.
//!
//! The plateau kernel is
//! `V_ν(x) = ν⁻¹ ∫ Q̃_ν(u) l((u - x)/ν) du`,
//! `Q̃_ν = 𝕀{|u| ≤ 1-2ν} + 2·𝕀{1-2ν ≤ |u| ≤ 1-ν}`,
//! with `l` the normalised bump `exp(-1/(1-z²))` on `(-1, 1)`. It satisfies
//! `V_ν(0) = 1` and `∫ V_ν = 2`, and the perturbations are
//! `S_{ν,u}(x) = (u/φ_n) V_ν((x - z0)/h)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::model::{FunctionSpec, NoiseSpec, ScaleSpec};
use crate::quadrature::{golden_max, simpson, KahanSum};
use crate::rng::rng_from_seed;

/// Intervals of the memo grid on `[-1, 1]`.
pub const KERNEL_GRID: usize = 4096;
/// Default Simpson panels per convolution piece.
pub const DEFAULT_KERNEL_RESOLUTION: usize = 512;
const NORMALIZER_PANELS: usize = 1 << 16;

fn raw_bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

/// The mollifier `l` and its cached constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MollifierSpec {
    pub nu: f64,
    /// `∫_{-1}^{1} exp(-1/(1-z²)) dz`.
    pub normalizer: f64,
    /// `‖l′‖∞`.
    pub l_prime_sup: f64,
    pub resolution: usize,
}

impl MollifierSpec {
    pub fn new(nu: f64, resolution: usize) -> Result<Self> {
        if !(nu > 0.0 && nu < 0.25) {
            return Err(Error::param("nu", format!("must lie in (0, 1/4), got {nu}")));
        }
        let normalizer = bump_normalizer();
        let (_, l_prime_sup) = golden_max(|z| (bump_derivative(z) / normalizer).abs(), 0.0, 1.0, 1e-12);
        Ok(Self {
            nu,
            normalizer,
            l_prime_sup,
            resolution: resolution.max(2),
        })
    }

    #[inline]
    pub fn l(&self, z: f64) -> f64 {
        raw_bump(z) / self.normalizer
    }

    #[inline]
    pub fn l_prime(&self, z: f64) -> f64 {
        bump_derivative(z) / self.normalizer
    }

    /// `∫_a^b l`, limits clipped to `[-1, 1]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(-1.0), b.min(1.0));
        if a >= b {
            return 0.0;
        }
        let panels = ((self.resolution as f64 * (b - a) / 2.0).ceil() as usize).max(16);
        simpson(|z| self.l(z), a, b, panels)
    }
}

fn bump_derivative(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - z * z;
    raw_bump(z) * (-2.0 * z / (d * d))
}

fn bump_normalizer() -> f64 {
    simpson(raw_bump, -1.0, 1.0, NORMALIZER_PANELS)
}

/// `V_ν`, memoised on a uniform grid with cubic Hermite interpolation
/// through exact node values and exact derivatives.
#[derive(Debug, Clone)]
pub struct PlateauKernel {
    spec: MollifierSpec,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PlateauKernel {
    pub fn spec(&self) -> &MollifierSpec {
        &self.spec
    }

    pub fn nu(&self) -> f64 {
        self.spec.nu
    }

    /// Level pieces `(lo, hi, height)` of `Q̃_ν`.
    fn pieces(&self) -> [(f64, f64, f64); 3] {
        let nu = self.spec.nu;
        [
            (-(1.0 - nu), -(1.0 - 2.0 * nu), 2.0),
            (-(1.0 - 2.0 * nu), 1.0 - 2.0 * nu, 1.0),
            (1.0 - 2.0 * nu, 1.0 - nu, 2.0),
        ]
    }

    /// `V_ν(x)` by direct quadrature, bypassing the memo grid.
    pub fn exact_value(&self, x: f64) -> f64 {
        let nu = self.spec.nu;
        self.pieces()
            .iter()
            .map(|&(lo, hi, c)| c * self.spec.mass((lo - x) / nu, (hi - x) / nu))
            .sum()
    }

    /// `V_ν′(x)`, exact in terms of `l`.
    pub fn derivative(&self, x: f64) -> f64 {
        let nu = self.spec.nu;
        self.pieces()
            .iter()
            .map(|&(lo, hi, c)| -c / nu * (self.spec.l((hi - x) / nu) - self.spec.l((lo - x) / nu)))
            .sum()
    }

    /// `V_ν(x)` from the memo grid; zero for `|x| ≥ 1`.
    pub fn value(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        let step = 2.0 / KERNEL_GRID as f64;
        let pos = (x + 1.0) / step;
        let i = (pos.floor() as usize).min(KERNEL_GRID - 1);
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * step, self.slopes[i + 1] * step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// `∫_{-1}^{1} V_ν`, Simpson over the memo nodes.
    pub fn integral(&self) -> f64 {
        simpson(|x| self.value(x), -1.0, 1.0, KERNEL_GRID)
    }

    /// `∫_{-1}^{1} V_ν²`.
    pub fn integral_sq(&self) -> f64 {
        simpson(|x| self.value(x).powi(2), -1.0, 1.0, KERNEL_GRID)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Builds `V_ν`; convolution pieces use `resolution` Simpson panels.
pub fn build_kernel(nu: f64, resolution: usize) -> Result<PlateauKernel> {
    let spec = MollifierSpec::new(nu, resolution)?;
    let mut kernel = PlateauKernel {
        spec,
        values: Vec::new(),
        slopes: Vec::new(),
    };
    let step = 2.0 / KERNEL_GRID as f64;
    let nodes: Vec<f64> = (0..=KERNEL_GRID).map(|i| -1.0 + step * i as f64).collect();
    kernel.values = nodes.iter().map(|&x| kernel.exact_value(x)).collect();
    kernel.slopes = nodes.iter().map(|&x| kernel.derivative(x)).collect();
    Ok(kernel)
}

/// `S_{ν,u}` at sample size `n`.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub kernel: Arc<PlateauKernel>,
    pub u: f64,
    pub cfg: EstimatorConfig,
}

impl PerturbationSpec {
    pub fn new(kernel: Arc<PlateauKernel>, u: f64, n: usize, beta: f64, z0: f64) -> Result<Self> {
        Ok(Self {
            kernel,
            u,
            cfg: EstimatorConfig::new(n, beta, z0)?,
        })
    }

    pub fn with_amplitude(&self, u: f64) -> Self {
        Self { u, ..self.clone() }
    }

    pub fn function(&self) -> FunctionSpec {
        let (k1, k2) = (self.kernel.clone(), self.kernel.clone());
        let (z0, h, phi, u) = (self.cfg.z0, self.cfg.h, self.cfg.phi_n, self.u);
        FunctionSpec::new(
            format!("bump(nu={},u={u})", self.kernel.nu()),
            move |x| u / phi * k1.value((x - z0) / h),
            move |x| u / (phi * h) * k2.derivative((x - z0) / h),
        )
    }
}

/// Sample size above which `S_ν` (amplitude `b`) has `‖S′‖ ≤ 1/δ`:
/// `⌈(2 b ‖l′‖∞ δ / ν²)^{(2β+1)/(β-1)}⌉`, saturating at `u64::MAX`.
pub fn min_n_membership_amplitude(nu: f64, delta: f64, beta: f64, l_prime_sup: f64, amplitude: f64) -> Result<u64> {
    if !(beta > 1.0) {
        return Err(Error::param("beta", format!("threshold needs beta > 1, got {beta}")));
    }
    let ratio = 2.0 * amplitude * l_prime_sup * delta / (nu * nu);
    if ratio <= 1.0 {
        return Ok(1);
    }
    let t = ratio.powf((2.0 * beta + 1.0) / (beta - 1.0)).ceil();
    Ok(if t >= u64::MAX as f64 { u64::MAX } else { t as u64 })
}

/// Amplitude-one threshold.
pub fn min_n_membership(nu: f64, delta: f64, beta: f64, l_prime_sup: f64) -> Result<u64> {
    min_n_membership_amplitude(nu, delta, beta, l_prime_sup, 1.0)
}

/// `(ς_n², σ_ν²)` with `g` evaluated at `S_{ν,u}` for every design point.
pub fn varsigma_sq(pert: &PerturbationSpec, scale: &ScaleSpec) -> Result<(f64, f64)> {
    let cfg = &pert.cfg;
    let (lo, hi) = cfg.window_or_err()?;
    let s = pert.function();
    let g = scale.bind(&s);
    let sum = (lo..=hi)
        .map(|k| {
            let x = cfg.x(k);
            let v = pert.kernel.value((x - cfg.z0) / cfg.h);
            v * v / g.g_squared(x)
        })
        .collect::<KahanSum>()
        .value();
    let varsigma = sum / (cfg.phi_n * cfg.phi_n);
    let g0 = scale.eval(cfg.z0, &FunctionSpec::constant(0.0));
    Ok((varsigma, sigma_nu_sq(&pert.kernel, g0)))
}

/// `σ_ν² = ∫_{-1}^{1} V_ν² / g_z0²`.
pub fn sigma_nu_sq(kernel: &PlateauKernel, g_z0: f64) -> f64 {
    kernel.integral_sq() / (g_z0 * g_z0)
}

/// Pieces of `log ρ_n(u) = u ς_n η_n - u² ς_n²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodParts {
    pub varsigma_sq: f64,
    pub eta: f64,
    pub log_ratio: f64,
}

/// `ς_n`, `η_n` and `log ρ_n(u)` for observations `y`.
pub fn likelihood_parts(u: f64, pert: &PerturbationSpec, scale: &ScaleSpec, y: &[f64]) -> Result<LikelihoodParts> {
    let p = pert.with_amplitude(u);
    let cfg = &p.cfg;
    if y.len() != cfg.n {
        return Err(Error::LengthMismatch {
            expected: cfg.n,
            got: y.len(),
        });
    }
    let (lo, hi) = cfg.window_or_err()?;
    let g = scale.bind(&p.function());
    let mut vv = KahanSum::new();
    let mut vy = KahanSum::new();
    for k in lo..=hi {
        let x = cfg.x(k);
        let v = p.kernel.value((x - cfg.z0) / cfg.h);
        let g2 = g.g_squared(x);
        vv.add(v * v / g2);
        vy.add(v * y[k - 1] / g2);
    }
    let phi = cfg.phi_n;
    let varsigma_sq = vv.value() / (phi * phi);
    let varsigma = varsigma_sq.sqrt();
    let eta = vy.value() / (varsigma * phi);
    Ok(LikelihoodParts {
        varsigma_sq,
        eta,
        log_ratio: u * varsigma * eta - 0.5 * u * u * varsigma_sq,
    })
}

/// `ρ_n(u) = dP_{S_{ν,u}} / dP` at `y`.
pub fn likelihood_ratio(u: f64, pert: &PerturbationSpec, scale: &ScaleSpec, y: &[f64]) -> Result<f64> {
    Ok(likelihood_parts(u, pert, scale, y)?.log_ratio.exp())
}

/// Pure-noise observations `y_k = g(x_k, S_{ν,u}) ξ_k`.
pub fn pure_noise_run(pert: &PerturbationSpec, scale: &ScaleSpec, seed: u64) -> Vec<f64> {
    let g = scale.bind(&pert.function());
    let noise = NoiseSpec::gaussian();
    let mut rng = rng_from_seed(seed);
    (1..=pert.cfg.n)
        .map(|k| g.g(pert.cfg.x(k)) * noise.sample(&mut rng))
        .collect()
}

/// `(σ_ν/√(2π)) · ((b-√b)/b) · ∫_{-√b}^{√b} (|t|/g_z0) e^{-σ_ν² t²/2} dt`.
pub fn bayes_bound_with_kernel(kernel: &PlateauKernel, b: f64, g_z0: f64) -> Result<f64> {
    if !(b > 1.0) {
        return Err(Error::param("b", format!("must exceed 1, got {b}")));
    }
    let s2 = sigma_nu_sq(kernel, g_z0);
    let sb = b.sqrt();
    // Beyond `t_max` the integrand is below e^{-40} of its scale.
    let t_max = sb.min((80.0 / s2).sqrt());
    let half = simpson(|t| t / g_z0 * (-0.5 * s2 * t * t).exp(), 0.0, t_max, KERNEL_GRID);
    Ok(s2.sqrt() / (2.0 * PI).sqrt() * (b - sb) / b * 2.0 * half)
}

pub fn bayes_bound(nu: f64, b: f64, g_z0: f64) -> Result<f64> {
    let kernel = build_kernel(nu, DEFAULT_KERNEL_RESOLUTION)?;
    bayes_bound_with_kernel(&kernel, b, g_z0)
}
