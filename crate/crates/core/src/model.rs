//! The observation model `y_k = S(x_k) + g(x_k, S) ξ_k`, `x_k = k/n`.
//!
//! Scale functionals come from the family
//! `g²(x, S) = G(x, S(x)) + ∫₀¹ V(S(t)) dt` with
//! `G(x, y) = α₀ + α₁x + α₂ sin²y` and `V(y) = α₃ sin²y`;
//! a constant scale is the special case `α = (c², 0, 0, 0)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use libm::tgamma as gamma;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::rng::{rng_from_seed, SimRng};

/// Panels of the composite Simpson rule used for `∫₀¹ V(S(t)) dt`.
pub const SCALE_QUADRATURE_PANELS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    n: usize,
    points: Vec<f64>,
}

impl DesignGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `x_k` for a one-based index `k`.
    pub fn point(&self, k: usize) -> f64 {
        self.points[k - 1]
    }
}

/// Design points `x_k = k/n`, `k = 1..=n`.
pub fn design_grid(n: usize) -> Result<DesignGrid> {
    if n == 0 {
        return Err(Error::param("n", "design grid needs n >= 1"));
    }
    let nf = n as f64;
    let points = (1..=n).map(|k| k as f64 / nf).collect();
    Ok(DesignGrid { n, points })
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A regression function with its derivative, both evaluable on `[0, 1]`.
#[derive(Clone)]
pub struct FunctionSpec {
    label: String,
    eval: RealFn,
    deriv: RealFn,
}

impl fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSpec").field("label", &self.label).finish()
    }
}

impl FunctionSpec {
    pub fn new<F, D>(label: impl Into<String>, eval: F, deriv: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c, |_| 0.0)
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self::new(
            format!("linear({slope},{intercept})"),
            move |x| intercept + slope * x,
            move |_| slope,
        )
    }

    /// `c·S`.
    pub fn scaled(&self, c: f64) -> Self {
        let (e, d) = (self.eval.clone(), self.deriv.clone());
        Self {
            label: format!("{}*{c}", self.label),
            eval: Arc::new(move |x| c * e(x)),
            deriv: Arc::new(move |x| c * d(x)),
        }
    }

    /// `S + other`.
    pub fn plus(&self, other: &FunctionSpec) -> Self {
        let (e1, d1) = (self.eval.clone(), self.deriv.clone());
        let (e2, d2) = (other.eval.clone(), other.deriv.clone());
        Self {
            label: format!("{}+{}", self.label, other.label),
            eval: Arc::new(move |x| e1(x) + e2(x)),
            deriv: Arc::new(move |x| d1(x) + d2(x)),
        }
    }

    /// Largest gap between the stored derivative and a central difference
    /// of `eval` with the given step, over `probes` evenly spaced points
    /// kept `step` away from the ends of `[0, 1]`.
    pub fn derivative_gap(&self, probes: usize, step: f64) -> f64 {
        let probes = probes.max(2);
        (0..probes)
            .map(|i| {
                let x = step + (1.0 - 2.0 * step) * i as f64 / (probes - 1) as f64;
                let fd = (self.value(x + step) - self.value(x - step)) / (2.0 * step);
                (fd - self.derivative(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Parameters of the scale family; `g` is bounded by `[√α₀, √(α₀+α₁+α₂+α₃)]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScaleSpec {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl ScaleSpec {
    pub fn new(alpha0: f64, alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::param("alpha0", format!("must be positive, got {alpha0}")));
        }
        for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2), ("alpha3", alpha3)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::param(name, format!("must be non-negative, got {a}")));
            }
        }
        Ok(Self {
            alpha0,
            alpha1,
            alpha2,
            alpha3,
        })
    }

    /// `g ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(c * c, 0.0, 0.0, 0.0)
    }

    /// Named heteroscedastic scales used by the experiment presets.
    pub fn catalog() -> Vec<(&'static str, ScaleSpec)> {
        vec![
            ("baseline", ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap()),
            ("sine", ScaleSpec::new(0.5, 0.25, 1.0, 0.5).unwrap()),
            ("mild", ScaleSpec::new(2.0, 0.5, 0.25, 0.25).unwrap()),
        ]
    }

    pub fn is_constant(&self) -> bool {
        self.alpha1 == 0.0 && self.alpha2 == 0.0 && self.alpha3 == 0.0
    }

    /// Lower bound `g_⋆ = √α₀`.
    pub fn g_floor(&self) -> f64 {
        self.alpha0.sqrt()
    }

    /// Upper bound `g^⋆ = √(α₀+α₁+α₂+α₃)`.
    pub fn g_ceil(&self) -> f64 {
        (self.alpha0 + self.alpha1 + self.alpha2 + self.alpha3).sqrt()
    }

    /// `G(x, y)`.
    pub fn local_part(&self, x: f64, y: f64) -> f64 {
        let s = y.sin();
        self.alpha0 + self.alpha1 * x + self.alpha2 * s * s
    }

    /// `∂G/∂y (x, y) = α₂ sin 2y`.
    pub fn local_part_dy(&self, _x: f64, y: f64) -> f64 {
        self.alpha2 * (2.0 * y).sin()
    }

    /// `V(y) = α₃ sin²y`.
    pub fn integral_part(&self, y: f64) -> f64 {
        let s = y.sin();
        self.alpha3 * s * s
    }

    /// `V′(y) = α₃ sin 2y`.
    pub fn integral_part_dy(&self, y: f64) -> f64 {
        self.alpha3 * (2.0 * y).sin()
    }

    /// `sup |∂G/∂y|`.
    pub fn local_lipschitz(&self) -> f64 {
        self.alpha2
    }

    /// `‖V′‖∞`.
    pub fn integral_lipschitz(&self) -> f64 {
        self.alpha3
    }

    /// `∫₀¹ V(S(t)) dt` by composite Simpson.
    pub fn integral_term(&self, s: &FunctionSpec) -> f64 {
        if self.alpha3 == 0.0 {
            return 0.0;
        }
        simpson(|t| self.integral_part(s.value(t)), 0.0, 1.0, SCALE_QUADRATURE_PANELS)
    }

    /// `g(x, S)`.
    pub fn eval(&self, x: f64, s: &FunctionSpec) -> f64 {
        (self.local_part(x, s.value(x)) + self.integral_term(s)).sqrt()
    }

    /// Fréchet derivative `L_{x,S}(f)` of `S ↦ g(x, S)`.
    pub fn frechet(&self, x: f64, s: &FunctionSpec, f: &FunctionSpec) -> f64 {
        let g = self.eval(x, s);
        let integral = if self.alpha3 == 0.0 {
            0.0
        } else {
            simpson(
                |t| self.integral_part_dy(s.value(t)) * f.value(t),
                0.0,
                1.0,
                SCALE_QUADRATURE_PANELS,
            )
        };
        (self.local_part_dy(x, s.value(x)) * f.value(x) + integral) / (2.0 * g)
    }

    /// Bound on `|L_{x,S}(f)| / ‖f‖` uniform in `x` and `S`.
    pub fn frechet_bound(&self) -> f64 {
        (self.local_lipschitz() + self.integral_lipschitz()) / (2.0 * self.alpha0.sqrt())
    }

    /// Freezes `S` so the integral term is computed once.
    pub fn bind(&self, s: &FunctionSpec) -> BoundScale {
        BoundScale {
            scale: *self,
            function: s.clone(),
            integral: self.integral_term(s),
        }
    }
}

/// `g(·, S)` for a fixed `S`.
#[derive(Debug, Clone)]
pub struct BoundScale {
    scale: ScaleSpec,
    function: FunctionSpec,
    integral: f64,
}

impl BoundScale {
    #[inline]
    pub fn g_squared(&self, x: f64) -> f64 {
        self.scale.local_part(x, self.function.value(x)) + self.integral
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.g_squared(x).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn scale(&self) -> &ScaleSpec {
        &self.scale
    }

    pub fn function(&self) -> &FunctionSpec {
        &self.function
    }
}

/// Noise laws with mean 0 and variance 1, plus a degenerate zero law
/// used to switch noise off in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    UniformStd,
    /// `±1` with probability 1/2.
    Rademacher,
    /// Laplace with scale `1/√2`.
    LaplaceStd,
    /// Student t with 5 degrees of freedom times `√(3/5)`.
    Student5Std,
    /// Always 0. Not a member of any moment class.
    Degenerate,
}

impl NoiseKind {
    pub const CATALOG: [NoiseKind; 5] = [
        NoiseKind::Gaussian,
        NoiseKind::UniformStd,
        NoiseKind::Rademacher,
        NoiseKind::LaplaceStd,
        NoiseKind::Student5Std,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::UniformStd => "uniform_std",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::LaplaceStd => "laplace_std",
            NoiseKind::Student5Std => "student5_std",
            NoiseKind::Degenerate => "degenerate",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [NoiseKind::Degenerate]
            .into_iter()
            .chain(Self::CATALOG)
            .find(|k| k.label() == label)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const STUDENT_DOF: f64 = 5.0;

fn laplace_scale() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

fn student_scale() -> f64 {
    (3.0f64 / 5.0).sqrt()
}

/// A noise law together with the moment class parameters `(ε, L)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub epsilon: f64,
    pub l_bound: f64,
}

/// Moment condition checks for the class `P_{ε,L}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NoiseCertificate {
    pub label: &'static str,
    pub mean: f64,
    pub variance: f64,
    pub abs_moment: f64,
    pub epsilon: f64,
    pub l_bound: f64,
    pub member: bool,
}

impl NoiseSpec {
    pub const DEFAULT_EPSILON: f64 = 1.0;
    pub const DEFAULT_L: f64 = 10.0;

    pub fn new(kind: NoiseKind) -> Self {
        Self {
            kind,
            epsilon: Self::DEFAULT_EPSILON,
            l_bound: Self::DEFAULT_L,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(NoiseKind::Gaussian)
    }

    pub fn from_label(label: &str) -> Option<Self> {
        NoiseKind::from_label(label).map(Self::new)
    }

    pub fn catalog() -> Vec<NoiseSpec> {
        NoiseKind::CATALOG.into_iter().map(Self::new).collect()
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == NoiseKind::Gaussian
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, NoiseKind::Rademacher | NoiseKind::Degenerate)
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => StandardNormal.sample(rng),
            NoiseKind::UniformStd => rng.random_range(-SQRT3..SQRT3),
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::LaplaceStd => {
                // Inverse CDF on u ∈ (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let mag = -(1.0 - 2.0 * u.abs()).ln();
                laplace_scale() * mag.copysign(u)
            }
            NoiseKind::Student5Std => {
                let t: f64 = StudentT::new(STUDENT_DOF).expect("dof > 0").sample(rng);
                student_scale() * t
            }
            NoiseKind::Degenerate => 0.0,
        }
    }

    /// Density of the law; for the discrete laws, the mass function.
    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => crate::stats::normal_pdf(x),
            NoiseKind::UniformStd => {
                if x.abs() <= SQRT3 {
                    0.5 / SQRT3
                } else {
                    0.0
                }
            }
            NoiseKind::Rademacher => {
                if x.abs() == 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            NoiseKind::LaplaceStd => {
                let b = laplace_scale();
                (-x.abs() / b).exp() / (2.0 * b)
            }
            NoiseKind::Student5Std => {
                let s = student_scale();
                let t = x / s;
                let nu = STUDENT_DOF;
                let c = gamma((nu + 1.0) / 2.0) / ((nu * PI).sqrt() * gamma(nu / 2.0));
                c * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0) / s
            }
            NoiseKind::Degenerate => {
                if x == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form mean.
    pub fn mean(&self) -> f64 {
        0.0
    }

    /// Variance: exactly 1 for every standardised law, 0 for the degenerate one.
    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::Degenerate => 0.0,
            _ => 1.0,
        }
    }

    /// Closed-form `E|ξ|^p` (for the Student law, finite only for `p < 5`).
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt(),
            NoiseKind::UniformStd => SQRT3.powf(p) / (p + 1.0),
            NoiseKind::Rademacher => 1.0,
            NoiseKind::LaplaceStd => gamma(p + 1.0) * laplace_scale().powf(p),
            NoiseKind::Student5Std => {
                let nu = STUDENT_DOF;
                if p >= nu {
                    return f64::INFINITY;
                }
                student_scale().powf(p) * nu.powf(p / 2.0) * gamma((p + 1.0) / 2.0) * gamma((nu - p) / 2.0)
                    / (PI.sqrt() * gamma(nu / 2.0))
            }
            NoiseKind::Degenerate => 0.0,
        }
    }

    /// Moment conditions of `P_{ε,L}`; non-members are flagged, not rejected.
    pub fn certify(&self) -> NoiseCertificate {
        let mean = self.mean();
        // From the law's parameters, not from the standardisation.
        let variance = self.abs_moment(2.0) - mean * mean;
        let abs_moment = self.abs_moment(2.0 + self.epsilon);
        let member = mean.abs() <= 1e-12 && (variance - 1.0).abs() <= 1e-12 && abs_moment <= self.l_bound;
        NoiseCertificate {
            label: self.label(),
            mean,
            variance,
            abs_moment,
            epsilon: self.epsilon,
            l_bound: self.l_bound,
            member,
        }
    }
}

/// Free-function form of [`NoiseSpec::certify`].
pub fn certify_noise(noise: &NoiseSpec) -> NoiseCertificate {
    noise.certify()
}

/// Free-function form of [`ScaleSpec::eval`].
pub fn scale_eval(scale: &ScaleSpec, x: f64, s: &FunctionSpec) -> f64 {
    scale.eval(x, s)
}

/// Free-function form of [`ScaleSpec::frechet`].
pub fn scale_frechet(scale: &ScaleSpec, x: f64, s: &FunctionSpec, f: &FunctionSpec) -> f64 {
    scale.frechet(x, s, f)
}

/// Draws `y_1..y_n` with a generator seeded from `seed`.
pub fn sample_run(s: &FunctionSpec, scale: &ScaleSpec, noise: &NoiseSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let grid = design_grid(n)?;
    let bound = scale.bind(s);
    let mut rng: SimRng = rng_from_seed(seed);
    Ok(grid
        .points()
        .iter()
        .map(|&x| s.value(x) + bound.g(x) * noise.sample(&mut rng))
        .collect())
}

/// Smooth shapes used to build test families.
pub mod shapes {
    use super::FunctionSpec;
    use std::f64::consts::PI;

    /// `0.2 + 0.3 sin(2πx)`.
    pub fn wave() -> FunctionSpec {
        FunctionSpec::new(
            "wave",
            |x| 0.2 + 0.3 * (2.0 * PI * x).sin(),
            |x| 0.6 * PI * (2.0 * PI * x).cos(),
        )
    }

    /// `cos(ω(x - z0))`, even about `z0`.
    pub fn cosine(z0: f64, omega: f64) -> FunctionSpec {
        FunctionSpec::new(
            "cosine",
            move |x| (omega * (x - z0)).cos(),
            move |x| -omega * (omega * (x - z0)).sin(),
        )
    }

    /// `sin(ω(x - z0))`, odd about `z0`.
    pub fn sine(z0: f64, omega: f64) -> FunctionSpec {
        FunctionSpec::new(
            "sine",
            move |x| (omega * (x - z0)).sin(),
            move |x| omega * (omega * (x - z0)).cos(),
        )
    }

    /// `(x - z0)²`.
    pub fn parabola(z0: f64) -> FunctionSpec {
        FunctionSpec::new("parabola", move |x| (x - z0) * (x - z0), move |x| 2.0 * (x - z0))
    }

    /// `(x - z0)³ + (x - z0)/2`, odd about `z0`.
    pub fn odd_cubic(z0: f64) -> FunctionSpec {
        FunctionSpec::new(
            "odd_cubic",
            move |x| (x - z0).powi(3) + 0.5 * (x - z0),
            move |x| 3.0 * (x - z0) * (x - z0) + 0.5,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_examples() {
        assert_eq!(design_grid(4).unwrap().points(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(design_grid(1).unwrap().points(), &[1.0]);
        let g = design_grid(100_000).unwrap();
        assert_eq!(g.point(50_000), 0.5);
        assert_eq!(g.points().len(), 100_000);
        assert_eq!(*g.points().last().unwrap(), 1.0);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(design_grid(0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn scale_eval_examples() {
        let s = shapes::wave();
        let unit = ScaleSpec::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(scale_eval(&unit, 0.3, &s), 1.0);
        let lin = ScaleSpec::new(1.0, 0.5, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(scale_eval(&lin, 1.0, &s), 1.5f64.sqrt(), epsilon = 1e-15);
        let v = ScaleSpec::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let half_pi = FunctionSpec::constant(PI / 2.0);
        assert_abs_diff_eq!(scale_eval(&v, 0.7, &half_pi), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn frechet_examples() {
        let one = FunctionSpec::constant(1.0);
        let unit = ScaleSpec::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(scale_frechet(&unit, 0.4, &shapes::wave(), &one), 0.0);
        let g2 = ScaleSpec::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(scale_frechet(&g2, 0.4, &FunctionSpec::constant(0.0), &one), 0.0);
    }

    #[test]
    fn scale_bounds() {
        let sc = ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(sc.g_floor(), 1.0);
        assert_abs_diff_eq!(sc.g_ceil(), 2.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(ScaleSpec::constant(2.0).unwrap().g_floor(), 2.0);
        assert!(ScaleSpec::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ScaleSpec::new(1.0, -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn builtin_derivatives_are_consistent() {
        for f in [
            shapes::wave(),
            shapes::cosine(0.5, 2.0 * PI),
            shapes::sine(0.5, 3.0),
            shapes::parabola(0.4),
            shapes::odd_cubic(0.5),
            FunctionSpec::linear(2.0, 1.0),
        ] {
            assert!(f.derivative_gap(101, 1e-5) < 1e-6, "{}", f.label());
        }
    }

    #[test]
    fn certify_catalog() {
        for noise in NoiseSpec::catalog() {
            let c = certify_noise(&noise);
            assert!(c.member, "{c:?}");
        }
        let rad = NoiseSpec::new(NoiseKind::Rademacher).certify();
        assert_eq!(rad.abs_moment, 1.0);
        let g = NoiseSpec::gaussian().certify();
        assert_abs_diff_eq!(g.abs_moment, 2.0 * (2.0 / PI).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(NoiseSpec::new(NoiseKind::UniformStd).variance(), 1.0, epsilon = 1e-15);
        assert!(!NoiseSpec::new(NoiseKind::Degenerate).certify().member);
    }

    #[test]
    fn abs_moments_match_independent_quadrature() {
        for noise in NoiseSpec::catalog().into_iter().filter(|n| !n.is_discrete()) {
            let f = |x: f64| x.abs().powi(3) * noise.density(x);
            let q = 2.0 * crate::quadrature::adaptive_simpson(&f, 0.0, 60.0, 1e-12)
                + 2.0 * crate::quadrature::tail_integral(&f, 60.0, 1e-12);
            assert_abs_diff_eq!(q, noise.abs_moment(3.0), epsilon = 1e-7);
            let v = 2.0 * crate::quadrature::adaptive_simpson(&|x: f64| x * x * noise.density(x), 0.0, 60.0, 1e-12)
                + 2.0 * crate::quadrature::tail_integral(&|x: f64| x * x * noise.density(x), 60.0, 1e-12);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn sampled_moments_within_three_standard_errors() {
        let draws = 1_000_000;
        for noise in NoiseSpec::catalog() {
            let mut rng = rng_from_seed(11);
            let xs: Vec<f64> = (0..draws).map(|_| noise.sample(&mut rng)).collect();
            let m = crate::stats::mean_stderr(&xs);
            assert!(m.mean.abs() <= 3.0 * m.stderr, "{}: {m:?}", noise.label());
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let v = crate::stats::mean_stderr(&sq);
            assert!((v.mean - 1.0).abs() <= 3.0 * v.stderr, "{}: {v:?}", noise.label());
        }
    }

    #[test]
    fn degenerate_noise_gives_noiseless_run() {
        let y = sample_run(
            &FunctionSpec::constant(0.7),
            &ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap(),
            &NoiseSpec::new(NoiseKind::Degenerate),
            50,
            3,
        )
        .unwrap();
        assert!(y.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn sample_run_is_bit_reproducible() {
        let sc = ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap();
        let a = sample_run(&shapes::wave(), &sc, &NoiseSpec::gaussian(), 1000, 9).unwrap();
        let b = sample_run(&shapes::wave(), &sc, &NoiseSpec::gaussian(), 1000, 9).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c = sample_run(&shapes::wave(), &sc, &NoiseSpec::gaussian(), 1000, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn residual_variance_matches_g_squared() {
        // Many independent one-point runs at x = 1 (n = 1).
        let sc = ScaleSpec::new(1.0, 0.5, 0.5, 0.5).unwrap();
        let s = shapes::wave();
        let g2 = sc.eval(1.0, &s).powi(2);
        let bound = sc.bind(&s);
        let noise = NoiseSpec::gaussian();
        let mut rng = rng_from_seed(5);
        let sq: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let r = bound.g(1.0) * noise.sample(&mut rng);
                r * r
            })
            .collect();
        let m = crate::stats::mean_stderr(&sq);
        assert!((m.mean - g2).abs() <= 3.0 * m.stderr, "{m:?} vs {g2}");
    }
}
