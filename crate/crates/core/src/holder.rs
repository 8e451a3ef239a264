//! Membership checks for the Hölder ball `H(M, K, β)` and the local weak
//! Hölder class `U_{z0,δ}`.
//!
//! All suprema are grid suprema; reports state the grids that were used.

use crate::error::{Error, Result};
use crate::model::FunctionSpec;
use crate::quadrature::simpson;

/// Panels for the defect integral `∫_{-1}^{1} (S(z0+hu) - S(z0)) du`.
pub const DEFECT_PANELS: usize = 4096;
/// Default number of points for derivative sup norms.
pub const DEFAULT_RESOLUTION: usize = 10_000;
/// Default bandwidth probe grid: 32 points decreasing by this factor.
pub const DEFAULT_H_POINTS: usize = 32;
pub const DEFAULT_H_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HolderParams {
    pub beta: f64,
    pub alpha: f64,
    pub m: f64,
    pub k: f64,
}

pub(crate) fn validate_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta <= 2.0 {
        Ok(())
    } else {
        Err(Error::param("beta", format!("must lie in (1, 2], got {beta}")))
    }
}

impl HolderParams {
    pub fn new(beta: f64, m: f64, k: f64) -> Result<Self> {
        validate_beta(beta)?;
        if !(m > 0.0) {
            return Err(Error::param("M", format!("must be positive, got {m}")));
        }
        if !(k > 0.0) {
            return Err(Error::param("K", format!("must be positive, got {k}")));
        }
        Ok(Self {
            beta,
            alpha: beta - 1.0,
            m,
            k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HolderReport {
    pub member: bool,
    pub sup_derivative: f64,
    pub holder_quotient: f64,
    pub resolution: usize,
}

/// Grid check of `‖S′‖ ≤ M` and `sup |S′(y) - S′(x)| / |x - y|^α ≤ K`.
///
/// The quotient is taken over all pairs of the grid, so cost is quadratic
/// in `resolution`.
pub fn check_holder(s: &FunctionSpec, p: &HolderParams, resolution: usize) -> HolderReport {
    let resolution = resolution.max(2);
    let xs: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| s.derivative(x)).collect();
    let sup_derivative = ds.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mut quotient = 0.0f64;
    for i in 0..resolution {
        for j in (i + 1)..resolution {
            let q = (ds[j] - ds[i]).abs() / (xs[j] - xs[i]).powf(p.alpha);
            quotient = quotient.max(q);
        }
    }
    HolderReport {
        member: sup_derivative <= p.m && quotient <= p.k,
        sup_derivative,
        holder_quotient: quotient,
        resolution,
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeakHolderParams {
    pub z0: f64,
    pub delta: f64,
    pub beta: f64,
    pub h_grid: Vec<f64>,
    pub resolution: usize,
}

impl WeakHolderParams {
    /// Default probe grid: 32 bandwidths from `min(z0, 1 - z0)` down by 0.7.
    pub fn new(z0: f64, delta: f64, beta: f64) -> Result<Self> {
        let top = z0.min(1.0 - z0);
        let h_grid = (0..DEFAULT_H_POINTS)
            .map(|i| top * DEFAULT_H_RATIO.powi(i as i32))
            .collect();
        Self::with_grid(z0, delta, beta, h_grid, DEFAULT_RESOLUTION)
    }

    pub fn with_grid(z0: f64, delta: f64, beta: f64, h_grid: Vec<f64>, resolution: usize) -> Result<Self> {
        if !(z0 > 0.0 && z0 < 1.0) {
            return Err(Error::param("z0", format!("must lie in (0, 1), got {z0}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
        }
        validate_beta(beta)?;
        if h_grid.is_empty() {
            return Err(Error::param("h_grid", "must not be empty"));
        }
        for &h in &h_grid {
            if !(h > 0.0) || z0 - h < 0.0 || z0 + h > 1.0 {
                return Err(Error::WindowOutsideUnitInterval { z0, h });
            }
        }
        Ok(Self {
            z0,
            delta,
            beta,
            h_grid,
            resolution: resolution.max(2),
        })
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::with_grid(self.z0, delta, self.beta, self.h_grid.clone(), self.resolution)
    }
}

/// `∫_{-1}^{1} (S(z0+hu) - S(z0)) du`, composite Simpson with 4096 panels.
pub fn local_integral(s: &FunctionSpec, z0: f64, h: f64) -> f64 {
    let s0 = s.value(z0);
    simpson(|u| s.value(z0 + h * u) - s0, -1.0, 1.0, DEFECT_PANELS)
}

/// `|∫_{-1}^{1} (S(z0+hu) - S(z0)) du| / h^β`.
pub fn weak_defect(s: &FunctionSpec, z0: f64, beta: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || z0 - h < 0.0 || z0 + h > 1.0 {
        return Err(Error::WindowOutsideUnitInterval { z0, h });
    }
    Ok(local_integral(s, z0, h).abs() / h.powf(beta))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeakHolderReport {
    pub member: bool,
    pub sup_derivative: f64,
    pub derivative_limit: f64,
    pub max_defect: f64,
    /// Probe bandwidth where the largest defect occurred.
    pub worst_h: f64,
    pub h_points: usize,
    pub resolution: usize,
}

/// `sup |S′| ≤ 1/δ` on the grid and `max_h defect ≤ δ` over `h_grid`.
pub fn check_weak_holder(s: &FunctionSpec, p: &WeakHolderParams) -> WeakHolderReport {
    let res = p.resolution;
    let sup_derivative = (0..res)
        .map(|i| s.derivative(i as f64 / (res - 1) as f64).abs())
        .fold(0.0f64, f64::max);
    let (worst_h, max_defect) = p
        .h_grid
        .iter()
        .map(|&h| {
            let d = weak_defect(s, p.z0, p.beta, h).expect("h_grid validated at construction");
            (h, d)
        })
        .fold(
            (p.h_grid[0], 0.0f64),
            |acc, (h, d)| if d > acc.1 { (h, d) } else { acc },
        );
    let derivative_limit = 1.0 / p.delta;
    WeakHolderReport {
        member: sup_derivative <= derivative_limit && max_defect <= p.delta,
        sup_derivative,
        derivative_limit,
        max_defect,
        worst_h,
        h_points: p.h_grid.len(),
        resolution: res,
    }
}
