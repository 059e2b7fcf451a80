//! Backward similarity variables centered at the origin, the weighted energy
//! and the initial-data functionals that bound the Morrey norm.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::evolution::Trajectory;
use crate::field::{abs_pow, RadialField};
use crate::math::sphere_area;
use crate::params::ModelParams;
use crate::quadrature::convolve_values;

/// Radial y-grid of the rescaled variables.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimilarityGrid {
    pub y_max: f64,
    pub spacing: f64,
}

impl Default for SimilarityGrid {
    fn default() -> Self {
        Self {
            y_max: 10.0,
            spacing: 0.01,
        }
    }
}

impl SimilarityGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_max >= 8.0 && self.y_max.is_finite()) {
            return Err(invalid("y_max", "the Gaussian weight needs y_max >= 8"));
        }
        if !(self.spacing > 0.0 && self.spacing <= self.y_max / 16.0) {
            return Err(invalid("h_y", "y spacing must be positive and resolve [0, y_max]"));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        (self.y_max / self.spacing).round() as usize + 1
    }
}

/// w(y) = (T-t)^β u(y √(T-t), t) sampled on a [`SimilarityGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledField {
    pub grid: SimilarityGrid,
    pub values: Vec<f64>,
    pub t: f64,
    pub big_t: f64,
    /// s = -log(T - t).
    pub s: f64,
    /// y_max √(T-t) exceeded R_max.
    pub truncated: bool,
}

pub fn to_similarity(
    field: &RadialField,
    t: f64,
    big_t: f64,
    params: &ModelParams,
    grid: SimilarityGrid,
) -> Result<RescaledField> {
    grid.validate()?;
    if !(big_t > t) {
        return Err(invalid("T", "rescaling time must exceed t"));
    }
    let tau = big_t - t;
    let scale = tau.sqrt();
    let amp = tau.powf(params.beta);
    let interp = field.interpolator();
    let values = (0..grid.len())
        .map(|j| amp * interp.eval(j as f64 * grid.spacing * scale))
        .collect();
    Ok(RescaledField {
        grid,
        values,
        t,
        big_t,
        s: -tau.ln(),
        truncated: grid.y_max * scale > field.grid().r_max(),
    })
}

/// Weighted integrals of a rescaled profile (all over R^n with ρ = e^{-|y|²/4}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// E = ∫ (½|∇w|² + β/2 w² - |w|^{p+1}/(p+1)) ρ.
    pub energy: f64,
    /// m = ∫ w² ρ.
    pub mass: f64,
    /// ∫ |∇w|² ρ.
    pub gradient: f64,
    /// ∫ |w|^{p+1} ρ.
    pub nonlinear: f64,
}

pub fn energy(w: &RescaledField, params: &ModelParams) -> EnergyParts {
    let h = w.grid.spacing;
    let v = &w.values;
    let last = v.len() - 1;
    let sphere = sphere_area(params.n);
    let n1 = (params.n - 1) as i32;
    let (mut g, mut m, mut nl) = (0.0, 0.0, 0.0);
    for j in 0..=last {
        let y = j as f64 * h;
        let dw = if j == 0 {
            0.0
        } else if j == last {
            (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h)
        } else {
            (v[j + 1] - v[j - 1]) / (2.0 * h)
        };
        let weight = if j == 0 || j == last { 0.5 * h } else { h } * y.powi(n1) * (-0.25 * y * y).exp();
        g += weight * dw * dw;
        m += weight * v[j] * v[j];
        nl += weight * abs_pow(v[j], params.p + 1.0);
    }
    let (g, m, nl) = (sphere * g, sphere * m, sphere * nl);
    EnergyParts {
        energy: 0.5 * g + 0.5 * params.beta * m - nl / (params.p + 1.0),
        mass: m,
        gradient: g,
        nonlinear: nl,
    }
}

/// E at the constant state w ≡ κ = β^β: κ² β (p-1) / (2(p+1)) (4π)^{n/2}.
pub fn stationary_energy(params: &ModelParams) -> f64 {
    let kappa = params.kappa();
    kappa * kappa * params.beta * (params.p - 1.0) / (2.0 * (params.p + 1.0))
        * (4.0 * core::f64::consts::PI).powf(params.n as f64 / 2.0)
}

/// Times t = T - e^{-s} at which a trajectory must be stored for `s_grid`.
pub fn checkpoint_times(big_t: f64, s_grid: &[f64]) -> Result<Vec<f64>> {
    if !(big_t > 0.0) {
        return Err(invalid("T", "rescaling time must be positive"));
    }
    let s0 = -big_t.ln();
    s_grid
        .iter()
        .map(|&s| {
            if s < s0 - 1e-12 {
                return Err(invalid("s_grid", "s must be >= -log T"));
            }
            Ok((big_t - (-s).exp()).max(0.0))
        })
        .collect()
}

/// `count` points s0, s0 + ds, ... starting at s0 = -log T.
pub fn uniform_s_grid(big_t: f64, ds: f64, count: usize) -> Vec<f64> {
    let s0 = -big_t.ln();
    (0..count).map(|j| s0 + ds * j as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub s: f64,
    pub parts: EnergyParts,
    /// |½ dm/ds + 2E - (p-1)/(p+1) ∫|w|^{p+1}ρ| / (∫|∇w|²ρ + β m + ∫|w|^{p+1}ρ),
    /// with centered differences; `None` at the two ends of the grid.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub big_t: f64,
    pub samples: Vec<EnergySample>,
    /// Steps with E(s_{j+1}) > E(s_j) + 1e-6 (1 + |E(s_j)|).
    pub monotonicity_violations: usize,
    /// Largest step increase of E relative to 1 + |E|.
    pub max_increase: f64,
    pub min_energy: f64,
    pub max_residual: f64,
    /// max_s m(s) / E(s_0)^{2/(p+1)}, when E(s_0) > 0.
    pub mass_bound_constant: Option<f64>,
    pub truncated: bool,
}

pub const ENERGY_STEP_TOL: f64 = 1e-6;

/// Energy, mass and the residual of the mass identity along a trajectory.
///
/// `s_grid` must be increasing with at least three points; every time
/// T - e^{-s} must be a stored checkpoint (or 0). The identity residual uses
/// centered differences of m and is only defined at interior points.
pub fn energy_series(
    traj: &Trajectory,
    big_t: f64,
    params: &ModelParams,
    s_grid: &[f64],
    grid: SimilarityGrid,
) -> Result<EnergySeries> {
    if s_grid.len() < 3 || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("s_grid", "need at least three increasing values"));
    }
    let times = checkpoint_times(big_t, s_grid)?;
    let mut parts = Vec::with_capacity(s_grid.len());
    let mut truncated = false;
    for (&s, &t) in s_grid.iter().zip(&times) {
        let field = traj.field_at(t).ok_or(Error::MissingCheckpoint { t, s })?;
        let w = to_similarity(field, t, big_t, params, grid)?;
        truncated |= w.truncated;
        parts.push(energy(&w, params));
    }
    let k = s_grid.len();
    let mut samples = Vec::with_capacity(k);
    for j in 0..k {
        let p = &parts[j];
        let residual = if j == 0 || j == k - 1 {
            None
        } else {
            let (h1, h2) = (s_grid[j - 1] - s_grid[j], s_grid[j + 1] - s_grid[j]);
            let dm = three_point(p.mass, parts[j - 1].mass, parts[j + 1].mass, h1, h2);
            let rhs = -2.0 * p.energy + (params.p - 1.0) / (params.p + 1.0) * p.nonlinear;
            let scale = p.gradient + params.beta * p.mass + p.nonlinear;
            Some(if scale > 0.0 {
                (0.5 * dm - rhs).abs() / scale
            } else {
                0.0
            })
        };
        samples.push(EnergySample {
            s: s_grid[j],
            parts: *p,
            residual,
        });
    }
    let mut violations = 0;
    let mut max_increase = f64::NEG_INFINITY;
    for w in samples.windows(2) {
        let (e0, e1) = (w[0].parts.energy, w[1].parts.energy);
        let rel = (e1 - e0) / (1.0 + e0.abs());
        max_increase = max_increase.max(rel);
        if rel > ENERGY_STEP_TOL {
            violations += 1;
        }
    }
    let e0 = samples[0].parts.energy;
    let max_mass = samples.iter().map(|s| s.parts.mass).fold(0.0, f64::max);
    Ok(EnergySeries {
        big_t,
        monotonicity_violations: violations,
        max_increase,
        min_energy: samples.iter().map(|s| s.parts.energy).fold(f64::INFINITY, f64::min),
        max_residual: samples.iter().filter_map(|s| s.residual).fold(0.0, f64::max),
        mass_bound_constant: (e0 > 0.0).then(|| max_mass / e0.powf(2.0 / (params.p + 1.0))),
        samples,
        truncated,
    })
}

/// Derivative at x0 of the quadratic through (x0, f0), (x0 + h1, f1), (x0 + h2, f2).
fn three_point(f0: f64, f1: f64, f2: f64, h1: f64, h2: f64) -> f64 {
    // Lagrange basis derivatives at the first node
    let d0 = -(h1 + h2) / (h1 * h2);
    let d1 = h2 / (h1 * (h2 - h1));
    let d2 = -h1 / (h2 * (h2 - h1));
    d0 * f0 + d1 * f1 + d2 * f2
}

fn squared(f: &RadialField) -> Vec<f64> {
    f.values().iter().map(|v| v * v).collect()
}

/// T^{(p+1)/(p-1)} (G_T*|∇u0|²)(a) + T^{2/(p-1)} (G_T*|u0|²)(a).
pub fn functional_a(u0: &RadialField, grad_u0: &RadialField, big_t: f64, a: f64, params: &ModelParams) -> Result<f64> {
    u0.check_same_grid(grad_u0)?;
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(invalid("T", "time must be positive"));
    }
    if !(a >= 0.0) {
        return Err(invalid("a", "center must be >= 0"));
    }
    let grid = u0.grid();
    let (g2, u2) = (squared(grad_u0), squared(u0));
    let b = params.beta;
    Ok(big_t.powf((params.p + 1.0) * b) * convolve_values(grid, &g2, big_t, a)
        + big_t.powf(2.0 * b) * convolve_values(grid, &u2, big_t, a))
}

/// Finite surrogate of sup_{t ≥ t0} (t^{(p+1)/(p-1)} ‖G_t*|∇u0|²‖_∞ + t^{2/(p-1)} ‖G_t*|u0|²‖_∞),
/// with t over `t_grid` and the sup norms over `centers`.
pub fn functional_n(
    u0: &RadialField,
    grad_u0: &RadialField,
    t0: f64,
    t_grid: &[f64],
    centers: &[f64],
    params: &ModelParams,
) -> Result<f64> {
    u0.check_same_grid(grad_u0)?;
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t >= t0 && t > 0.0 && t.is_finite())) {
        return Err(invalid("t_grid", "times must be finite and >= t0 > 0"));
    }
    if centers.is_empty() || centers.iter().any(|&a| !(a >= 0.0)) {
        return Err(invalid("centers", "need at least one center >= 0"));
    }
    let grid = u0.grid();
    let (g2, u2) = (squared(grad_u0), squared(u0));
    let b = params.beta;
    let mut best = 0.0f64;
    for &t in t_grid {
        let (mut sg, mut su) = (0.0f64, 0.0f64);
        for &a in centers {
            sg = sg.max(convolve_values(grid, &g2, t, a));
            su = su.max(convolve_values(grid, &u2, t, a));
        }
        best = best.max(t.powf((params.p + 1.0) * b) * sg + t.powf(2.0 * b) * su);
    }
    Ok(best)
}
