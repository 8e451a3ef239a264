//! Normalised pointwise risk `φ_n E|Ŝ_n(z0) - S(z0)| / g(z0, S)`.
//!
//! Monte Carlo replications only draw noise for design points inside the
//! estimation window, since the estimator ignores every other observation.
//! Replication `r` uses the generator seeded by `sub_seed(seed, r)`, so two
//! cells with the same master seed share their noise (common random
//! numbers) and results do not depend on the execution mode.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimator::{decompose, EstimatorConfig};
use crate::holder::{check_weak_holder, WeakHolderParams};
use crate::lowerbound::{build_kernel, PerturbationSpec, PlateauKernel, DEFAULT_KERNEL_RESOLUTION};
use crate::model::{shapes, FunctionSpec, NoiseSpec, ScaleSpec};
use crate::par::{map_indexed, Execution};
use crate::quadrature::KahanSum;
use crate::rng::replication_rng;
use crate::stats::{mean_stderr, normal_cdf, MeanStderr};
use crate::EFFICIENCY_CONSTANT;

/// Default number of Monte Carlo replications.
pub const DEFAULT_REPS: usize = 20_000;

/// `E|N(m, s²)| = s√(2/π) e^{-m²/(2s²)} + m(2Φ(m/s) - 1)`; `|m|` when `s = 0`.
pub fn folded_normal_mean(m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return m.abs();
    }
    let z = m / s;
    s * (2.0 / PI).sqrt() * (-0.5 * z * z).exp() + m * (2.0 * normal_cdf(z) - 1.0)
}

#[derive(Debug, Clone)]
pub struct RiskConfig {
    pub cfg: EstimatorConfig,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
    pub family: Vec<FunctionSpec>,
    pub scale: ScaleSpec,
    pub noise: NoiseSpec,
    pub exec: Execution,
}

impl RiskConfig {
    /// Validates `reps ≥ 2` and certifies every family member in the weak
    /// Hölder class at `(z0, δ, β)`.
    pub fn new(
        cfg: EstimatorConfig,
        delta: f64,
        reps: usize,
        seed: u64,
        family: Vec<FunctionSpec>,
        scale: ScaleSpec,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if reps < 2 {
            return Err(Error::param("reps", format!("need at least 2, got {reps}")));
        }
        let wp = WeakHolderParams::new(cfg.z0, delta, cfg.beta)?;
        for s in &family {
            if !check_weak_holder(s, &wp).member {
                return Err(Error::NotCertified {
                    label: s.label().to_string(),
                    delta,
                });
            }
        }
        cfg.window_or_err()?;
        Ok(Self {
            cfg,
            delta,
            reps,
            seed,
            family,
            scale,
            noise,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_noise(&self, noise: NoiseSpec) -> Self {
        Self { noise, ..self.clone() }
    }
}

/// `φ_n · E|N(B_n, σ_n²/q_n)| / g(z0, S)`, exact under Gaussian noise.
pub fn exact_gaussian_risk(s: &FunctionSpec, rc: &RiskConfig) -> Result<f64> {
    if !rc.noise.is_gaussian() {
        return Err(Error::NonGaussianNoise(rc.noise.label().to_string()));
    }
    let d = decompose(s, &rc.scale, &rc.cfg, None)?;
    let g0 = rc.scale.eval(rc.cfg.z0, s);
    let sd = (d.sigma_n_sq / d.q_n as f64).sqrt();
    Ok(rc.cfg.phi_n * folded_normal_mean(d.b_n, sd) / g0)
}

/// Mean and standard error of `φ_n |Ŝ_n(z0) - S(z0)| / g(z0, S)` over
/// `rc.reps` replications.
pub fn monte_carlo_risk(s: &FunctionSpec, rc: &RiskConfig) -> Result<MeanStderr> {
    if rc.reps < 2 {
        return Err(Error::param("reps", format!("need at least 2, got {}", rc.reps)));
    }
    let cfg = &rc.cfg;
    let (lo, hi) = cfg.window_or_err()?;
    let bound = rc.scale.bind(s);
    let (signal, spread): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .map(|k| {
            let x = cfg.x(k);
            (s.value(x), bound.g(x))
        })
        .unzip();
    let q = signal.len() as f64;
    let s0 = s.value(cfg.z0);
    let norm = cfg.phi_n / bound.g(cfg.z0);
    let noise = rc.noise;
    let losses = map_indexed(rc.reps, rc.exec, |r| {
        let mut rng = replication_rng(rc.seed, r as u64);
        let mut acc = KahanSum::new();
        for (sx, gx) in signal.iter().zip(&spread) {
            acc.add(sx + gx * noise.sample(&mut rng));
        }
        norm * (acc.value() / q - s0).abs()
    });
    Ok(mean_stderr(&losses))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RiskRow {
    pub function: String,
    pub noise: String,
    pub q_n: usize,
    pub phi_n: f64,
    pub risk_mc: f64,
    pub stderr: f64,
    /// Exact value, Gaussian noise only.
    pub risk_oracle: Option<f64>,
    /// `φ_n |B_n|`.
    pub bias_phin_bn: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    pub sup_risk: f64,
    /// `(function, noise)` of the row attaining `sup_risk`.
    pub argmax: (String, String),
    pub constant_target: f64,
}

impl RiskReport {
    pub fn max_stderr(&self) -> f64 {
        self.rows.iter().map(|r| r.stderr).fold(0.0, f64::max)
    }
}

/// One row per family member under `rc.noise`.
pub fn risk_row(s: &FunctionSpec, rc: &RiskConfig) -> Result<RiskRow> {
    let mc = monte_carlo_risk(s, rc)?;
    let d = decompose(s, &rc.scale, &rc.cfg, None)?;
    let risk_oracle = if rc.noise.is_gaussian() {
        Some(exact_gaussian_risk(s, rc)?)
    } else {
        None
    };
    Ok(RiskRow {
        function: s.label().to_string(),
        noise: rc.noise.label().to_string(),
        q_n: d.q_n,
        phi_n: rc.cfg.phi_n,
        risk_mc: mc.mean,
        stderr: mc.stderr,
        risk_oracle,
        bias_phin_bn: rc.cfg.phi_n * d.b_n.abs(),
    })
}

fn report(rows: Vec<RiskRow>) -> Result<RiskReport> {
    let best = rows
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, r)| match acc {
            Some((_, v)) if v >= r.risk_mc => acc,
            _ => Some((i, r.risk_mc)),
        })
        .ok_or_else(|| Error::param("family", "must not be empty"))?;
    let argmax = (rows[best.0].function.clone(), rows[best.0].noise.clone());
    Ok(RiskReport {
        rows,
        sup_risk: best.1,
        argmax,
        constant_target: EFFICIENCY_CONSTANT,
    })
}

/// Monte Carlo risk of every family member; the sup over the family.
pub fn sup_risk(rc: &RiskConfig) -> Result<RiskReport> {
    let rows = rc.family.iter().map(|s| risk_row(s, rc)).collect::<Result<Vec<_>>>()?;
    report(rows)
}

/// Sup over the family and over a list of noise laws.
pub fn sup_risk_over_noises(rc: &RiskConfig, noises: &[NoiseSpec]) -> Result<RiskReport> {
    let mut rows = Vec::with_capacity(rc.family.len() * noises.len());
    for s in &rc.family {
        for &p in noises {
            rows.push(risk_row(s, &rc.with_noise(p))?);
        }
    }
    report(rows)
}

/// Labels accepted by [`FamilyBuilder::member`].
pub const FAMILY_LABELS: [&str; 12] = [
    "zero",
    "const",
    "linear",
    "cosine",
    "sine",
    "parabola",
    "poly",
    "wave",
    "bump_nu0.05",
    "bump_nu0.1",
    "bump_nu0.2",
    "bump_neg",
];

/// Builds members of a finite stand-in for the weak Hölder class.
///
/// Each shape is scaled to sit strictly inside the class: the amplitude is
/// the smallest of its cap, `0.9δ` over the unit shape's largest defect on
/// the probe grid, and `0.9/δ` over its largest slope.
#[derive(Debug, Clone)]
pub struct FamilyBuilder {
    pub params: WeakHolderParams,
    kernels: HashMap<u64, Arc<PlateauKernel>>,
}

impl FamilyBuilder {
    pub fn new(z0: f64, delta: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            params: WeakHolderParams::new(z0, delta, beta)?,
            kernels: HashMap::new(),
        })
    }

    /// Same builder at another `δ`, keeping the cached kernels.
    pub fn at_delta(&self, delta: f64) -> Result<Self> {
        Ok(Self {
            params: self.params.with_delta(delta)?,
            kernels: self.kernels.clone(),
        })
    }

    fn kernel(&mut self, nu: f64) -> Result<Arc<PlateauKernel>> {
        if let Some(k) = self.kernels.get(&nu.to_bits()) {
            return Ok(k.clone());
        }
        let k = Arc::new(build_kernel(nu, DEFAULT_KERNEL_RESOLUTION)?);
        self.kernels.insert(nu.to_bits(), k.clone());
        Ok(k)
    }

    fn fit(&self, unit: FunctionSpec, cap: f64, label: &str) -> FunctionSpec {
        let r = check_weak_holder(&unit, &self.params);
        let delta = self.params.delta;
        let mut amp = cap;
        if r.max_defect > 0.0 {
            amp = amp.min(0.9 * delta / r.max_defect);
        }
        if r.sup_derivative > 0.0 {
            amp = amp.min(0.9 / (delta * r.sup_derivative));
        }
        unit.scaled(amp).with_label(label)
    }

    fn bump(&mut self, nu: f64, sign: f64, n: usize, label: &str) -> Result<FunctionSpec> {
        let p = self.params.clone();
        let pert = PerturbationSpec::new(self.kernel(nu)?, sign, n, p.beta, p.z0)?;
        Ok(self.fit(pert.function(), 1.0, label))
    }

    /// The member named `label`; bumps depend on the sample size `n`.
    pub fn member(&mut self, label: &str, n: usize) -> Result<FunctionSpec> {
        let z0 = self.params.z0;
        let s = match label {
            "zero" => FunctionSpec::constant(0.0).with_label(label),
            "const" => FunctionSpec::constant(0.2).with_label(label),
            "linear" => self.fit(FunctionSpec::linear(1.0, 0.1 - z0), 1.0, label),
            "cosine" => self.fit(shapes::cosine(z0, 2.0 * PI), 0.3, label),
            "sine" => self.fit(shapes::sine(z0, 2.0 * PI), 0.3, label),
            "parabola" => self.fit(shapes::parabola(z0), 1.0, label),
            "poly" => {
                let unit = FunctionSpec::new(
                    label,
                    move |x| {
                        let t = x - z0;
                        0.1 + 0.5 * t + t * t + 0.5 * t * t * t
                    },
                    move |x| {
                        let t = x - z0;
                        0.5 + 2.0 * t + 1.5 * t * t
                    },
                );
                self.fit(unit, 1.0, label)
            }
            "wave" => self.fit(shapes::wave(), 1.0, label),
            "bump_nu0.05" => self.bump(0.05, 1.0, n, label)?,
            "bump_nu0.1" => self.bump(0.1, 1.0, n, label)?,
            "bump_nu0.2" => self.bump(0.2, 1.0, n, label)?,
            "bump_neg" => self.bump(0.1, -1.0, n, label)?,
            other => return Err(Error::param("function", format!("unknown family member `{other}`"))),
        };
        Ok(s)
    }

    pub fn family(&mut self, labels: &[&str], n: usize) -> Result<Vec<FunctionSpec>> {
        labels.iter().map(|l| self.member(l, n)).collect()
    }

    /// Every member of [`FAMILY_LABELS`].
    pub fn full_family(&mut self, n: usize) -> Result<Vec<FunctionSpec>> {
        self.family(&FAMILY_LABELS, n)
    }
}
