//! Geometric kernels that reduce n-dimensional integrals of radial functions
//! over off-center balls, and against off-center Gaussians, to integrals in r.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;
use once_cell::race::OnceBox;

use crate::error::{invalid, Result};
use crate::field::{abs_pow, Boundary, RadialField, RadialGrid};
use crate::math::{gamma_half, gauss_legendre, gl_integrate, sphere_area};

// ---------------------------------------------------------------------------
// spherical caps

/// Normalized measure of spherical caps {cos θ ≥ c} on S^{n-1}.
///
/// The cap measure is ∫_0^θ sin^{n-2}, evaluated in closed form by the
/// reduction formula; a Gauss–Legendre route is kept for cross-checks.
#[derive(Debug, Clone)]
pub struct CapTable {
    n: usize,
    total: f64,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl CapTable {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "caps need n >= 2");
        let k = n - 2;
        let (gl_nodes, gl_weights) = gauss_legendre(64);
        Self {
            n,
            total: sine_power_integral(k, -1.0),
            gl_nodes,
            gl_weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Fraction of the sphere with cos θ ≥ c.
    pub fn fraction(&self, c: f64) -> f64 {
        let c = c.clamp(-1.0, 1.0);
        if c < 0.0 {
            return 1.0 - self.fraction(-c);
        }
        (sine_power_integral(self.n - 2, c) / self.total).clamp(0.0, 1.0)
    }

    /// Same quantity by 64-point Gauss–Legendre in θ.
    pub fn fraction_by_quadrature(&self, c: f64) -> f64 {
        let theta = c.clamp(-1.0, 1.0).acos();
        let k = (self.n - 2) as i32;
        gl_integrate(&self.gl_nodes, &self.gl_weights, 0.0, theta, |t| t.sin().powi(k)) / self.total
    }
}

/// ∫_0^θ sin^k, with θ = arccos(c), by the reduction formula.
fn sine_power_integral(k: usize, c: f64) -> f64 {
    let s = ((1.0 - c) * (1.0 + c)).max(0.0).sqrt();
    let theta = s.atan2(c);
    let mut even = theta; // I_0
    let mut odd = 1.0 - c; // I_1
    if k == 0 {
        return even;
    }
    if k == 1 {
        return odd;
    }
    // I_j = -s^{j-1} c / j + (j-1)/j I_{j-2}
    let mut s_pow_even = 1.0; // s^{j-1} for odd j
    let mut s_pow_odd = s; // s^{j-1} for even j
    for j in 2..=k {
        let jf = j as f64;
        if j % 2 == 0 {
            even = -s_pow_odd * c / jf + (jf - 1.0) / jf * even;
            s_pow_odd *= s * s;
        } else {
            s_pow_even *= s * s;
            odd = -s_pow_even * c / jf + (jf - 1.0) / jf * odd;
        }
    }
    if k % 2 == 0 {
        even
    } else {
        odd
    }
}

/// Fraction of the sphere {|x| = s} that lies inside B_R(a e_1).
pub fn cap_fraction(n: usize, a: f64, s: f64, radius: f64) -> f64 {
    cap_fraction_with(&CapTable::new(n), a, s, radius)
}

pub(crate) fn cap_fraction_with(table: &CapTable, a: f64, s: f64, radius: f64) -> f64 {
    if a + s <= radius {
        return 1.0;
    }
    if (a - s).abs() >= radius || a == 0.0 || s == 0.0 {
        return 0.0;
    }
    let c = (s * s + a * a - radius * radius) / (2.0 * a * s);
    table.fraction(c)
}

// ---------------------------------------------------------------------------
// ball integrals

/// Result of a ball integral; `truncated` is set when the ball leaves the
/// grid while the field is still nonzero at R_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallIntegral {
    pub value: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Linear,
    Power(f64),
}

/// Precomputed radial integrals of |f|^q s^{n-1} for repeated ball queries.
///
/// Between nodes |f|^q is reconstructed as a power law when both end values
/// are positive (exact for r^{-k} tails), otherwise linearly; the weight
/// s^{n-1} and the cap fraction are integrated against that reconstruction.
#[derive(Debug, Clone)]
pub struct BallIntegrator {
    n: usize,
    spacing: f64,
    density: Vec<f64>,
    cells: Vec<Cell>,
    prefix: Vec<f64>,
    caps: CapTable,
    sphere: f64,
    edge_nonzero: bool,
    gl_low: (Vec<f64>, Vec<f64>),
    gl_high: (Vec<f64>, Vec<f64>),
    gl_linear: (Vec<f64>, Vec<f64>),
}

const MAX_POWER_EXPONENT: f64 = 200.0;

impl BallIntegrator {
    pub fn new(f: &RadialField, q: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(invalid("q", "Morrey exponent must be finite and >= 1"));
        }
        let density: Vec<f64> = f.values().iter().map(|&v| abs_pow(v, q)).collect();
        Ok(Self::from_density(
            f.grid(),
            density,
            f.values()[f.grid().intervals()] != 0.0,
        ))
    }

    fn from_density(grid: &RadialGrid, density: Vec<f64>, edge_nonzero: bool) -> Self {
        let n = grid.dim();
        let h = grid.spacing();
        let cells: Vec<Cell> = (0..grid.intervals())
            .map(|i| {
                let (a, b) = (density[i], density[i + 1]);
                if i == 0 || a <= 0.0 || b <= 0.0 || a == b {
                    return if a == b && a > 0.0 && i > 0 {
                        Cell::Power(0.0)
                    } else {
                        Cell::Linear
                    };
                }
                let gamma = (b / a).ln() / ((i + 1) as f64 / i as f64).ln();
                if gamma.abs() > MAX_POWER_EXPONENT {
                    Cell::Linear
                } else {
                    Cell::Power(gamma)
                }
            })
            .collect();
        let mut me = Self {
            n,
            spacing: h,
            density,
            cells,
            prefix: Vec::new(),
            caps: CapTable::new(n.max(2)),
            sphere: sphere_area(n),
            edge_nonzero,
            gl_low: gauss_legendre(4),
            gl_high: gauss_legendre(10),
            gl_linear: gauss_legendre(n / 2 + 2),
        };
        let mut prefix = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for i in 0..grid.intervals() {
            acc += me.cell_integral(i, i as f64 * h, (i + 1) as f64 * h);
            prefix.push(acc);
        }
        me.prefix = prefix;
        me
    }

    fn r_max(&self) -> f64 {
        self.spacing * self.cells.len() as f64
    }

    #[inline]
    fn density_at(&self, i: usize, s: f64) -> f64 {
        let si = i as f64 * self.spacing;
        match self.cells[i] {
            Cell::Linear => {
                let tau = (s - si) / self.spacing;
                self.density[i] + (self.density[i + 1] - self.density[i]) * tau
            }
            Cell::Power(gamma) => self.density[i] * (s / si).powf(gamma),
        }
    }

    /// ∫_{x0}^{x1} F(s) s^{n-1} ds inside cell i.
    fn cell_integral(&self, i: usize, x0: f64, x1: f64) -> f64 {
        if x1 <= x0 {
            return 0.0;
        }
        match self.cells[i] {
            Cell::Linear => {
                let (nodes, weights) = &self.gl_linear;
                let n1 = (self.n - 1) as i32;
                gl_integrate(nodes, weights, x0, x1, |s| self.density_at(i, s) * s.powi(n1))
            }
            Cell::Power(gamma) => {
                let si = i as f64 * self.spacing;
                let e = self.n as f64 + gamma;
                let l1 = (x1 / si).ln();
                let l0 = (x0 / si).ln();
                let core = if e.abs() < 1e-10 {
                    (l1 - l0) + 0.5 * e * (l1 * l1 - l0 * l0)
                } else {
                    (libm::expm1(e * l1) - libm::expm1(e * l0)) / e
                };
                self.density[i] * si.powi(self.n as i32) * core
            }
        }
    }

    /// ∫_0^x F(s) s^{n-1} ds (without the sphere constant).
    fn cumulative(&self, x: f64) -> f64 {
        let x = x.min(self.r_max());
        if x <= 0.0 {
            return 0.0;
        }
        let i = ((x / self.spacing).floor() as usize).min(self.cells.len() - 1);
        let si = i as f64 * self.spacing;
        self.prefix[i] + self.cell_integral(i, si, x)
    }

    /// ∫_{B_R(a e_1)} |f|^q dx.
    pub fn integral(&self, a: f64, radius: f64) -> BallIntegral {
        let r_max = self.r_max();
        let truncated = a + radius > r_max && self.edge_nonzero;
        if radius <= 0.0 {
            return BallIntegral { value: 0.0, truncated };
        }
        if a <= 0.0 {
            return BallIntegral {
                value: self.sphere * self.cumulative(radius),
                truncated,
            };
        }
        let mut total = self.cumulative(radius - a);
        let lo = (radius - a).abs();
        let hi = (radius + a).min(r_max);
        // the density is nonnegative, so an annulus carrying no mass is skipped
        if lo < hi && self.cumulative(hi) > self.cumulative(lo) {
            let h = self.spacing;
            let first = ((lo / h).floor() as usize).min(self.cells.len() - 1);
            let last = ((hi / h).ceil() as usize).min(self.cells.len());
            let n1 = (self.n - 1) as i32;
            for i in first..last {
                let x0 = (i as f64 * h).max(lo);
                let x1 = ((i + 1) as f64 * h).min(hi);
                if x1 <= x0 {
                    continue;
                }
                let (nodes, weights) = if i == first || i + 1 == last {
                    &self.gl_high
                } else {
                    &self.gl_low
                };
                total += gl_integrate(nodes, weights, x0, x1, |s| {
                    self.density_at(i, s) * s.powi(n1) * cap_fraction_with(&self.caps, a, s, radius)
                });
            }
        }
        BallIntegral {
            value: self.sphere * total,
            truncated,
        }
    }

    /// Whole-space integral ∫ |f|^q dx over the grid.
    pub fn total(&self) -> f64 {
        self.sphere * self.prefix[self.cells.len()]
    }
}

/// ∫_{B_R(a e_1)} |f(|x|)|^q dx.
pub fn ball_integral(f: &RadialField, q: f64, a: f64, radius: f64) -> Result<BallIntegral> {
    if !(a >= 0.0) {
        return Err(invalid("a", "center offset must be >= 0"));
    }
    if !(radius > 0.0) {
        return Err(invalid("R", "ball radius must be > 0"));
    }
    Ok(BallIntegrator::new(f, q)?.integral(a, radius))
}

// ---------------------------------------------------------------------------
// Gaussian kernel

/// Values of the scaled angular integral
/// Λ̃(z) = e^{-z} ∫_0^π e^{z cos θ} sin^{n-2}θ dθ.
///
/// Tabulated with cubic Hermite interpolation on [0, Z_TABLE] from adaptive
/// Gauss–Legendre quadrature; above that the (finite for odd n) asymptotic
/// series of the modified Bessel function is used.
#[derive(Debug)]
pub struct AngularKernel {
    n: usize,
    values: Vec<f64>,
    slopes: Vec<f64>,
    bessel_prefactor: f64,
    nu: f64,
}

const Z_TABLE: f64 = 64.0;
const Z_STEP: f64 = 1.0 / 256.0;
const ANGULAR_TOL: f64 = 1e-12;

impl AngularKernel {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let count = (Z_TABLE / Z_STEP) as usize + 1;
        let mut values = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for j in 0..count {
            let z = j as f64 * Z_STEP;
            let (v, d) = angular_integral_with_slope(n, z);
            values.push(v);
            slopes.push(d);
        }
        let nu = (n as f64 - 2.0) / 2.0;
        Self {
            n,
            values,
            slopes,
            bessel_prefactor: PI.sqrt() * gamma_half(n - 1) * 2f64.powf(nu),
            nu,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, z: f64) -> f64 {
        if z < Z_TABLE {
            let pos = z / Z_STEP;
            let j = pos.floor() as usize;
            let tau = pos - j as f64;
            let (y0, y1) = (self.values[j], self.values[j + 1]);
            let (m0, m1) = (self.slopes[j] * Z_STEP, self.slopes[j + 1] * Z_STEP);
            let t2 = tau * tau;
            let t3 = t2 * tau;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + tau) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
        } else {
            self.asymptotic(z)
        }
    }

    fn asymptotic(&self, z: f64) -> f64 {
        let mu = 4.0 * self.nu * self.nu;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            term *= -(mu - odd * odd) / (k as f64 * 8.0 * z);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        self.bessel_prefactor * z.powf(-self.nu) * sum / (2.0 * PI * z).sqrt()
    }
}

/// Λ̃(z) and its z-derivative by adaptive Gauss–Legendre in θ (64 nodes,
/// doubled until the relative change is below 1e-12).
pub fn angular_integral_with_slope(n: usize, z: f64) -> (f64, f64) {
    let k = (n - 2) as i32;
    let theta_max = if z * 2.0 <= 60.0 {
        PI
    } else {
        (1.0 - 60.0 / z).clamp(-1.0, 1.0).acos()
    };
    let half = 0.5 * theta_max;
    let mut prev: Option<(f64, f64)> = None;
    for level in 0..GL_LEVELS {
        let (nodes, weights) = gl_rule(level);
        let (mut v, mut d) = (0.0, 0.0);
        for (x, w) in nodes.iter().zip(weights) {
            let (sin, cos) = (half * (1.0 + x)).sin_cos();
            let e = (z * (cos - 1.0)).exp() * sin.powi(k) * w;
            v += e;
            d += (cos - 1.0) * e;
        }
        let (v, d) = (v * half, d * half);
        if let Some((pv, pd)) = prev {
            let dv = (v - pv).abs() <= ANGULAR_TOL * v.abs();
            let dd = (d - pd).abs() <= ANGULAR_TOL * d.abs().max(1e-300);
            if dv && dd {
                return (v, d);
            }
        }
        prev = Some((v, d));
    }
    prev.unwrap_or((0.0, 0.0))
}

const GL_LEVELS: usize = 6;
static GL_RULES: [OnceBox<(Vec<f64>, Vec<f64>)>; GL_LEVELS] = [const { OnceBox::new() }; GL_LEVELS];

/// Gauss–Legendre rule with 64·2^level nodes, built once.
fn gl_rule(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    GL_RULES[level].get_or_init(|| Box::new(gauss_legendre(64 << level)))
}

/// Λ̃(z) by direct quadrature.
pub fn angular_integral(n: usize, z: f64) -> f64 {
    angular_integral_with_slope(n, z).0
}

const CACHED_DIMS: usize = 24;

static KERNELS: [OnceBox<AngularKernel>; CACHED_DIMS] = [const { OnceBox::new() }; CACHED_DIMS];
static CAPS: [OnceBox<CapTable>; CACHED_DIMS] = [const { OnceBox::new() }; CACHED_DIMS];

/// Shared angular kernel for dimension `n` (built on first use).
pub fn angular_kernel(n: usize) -> &'static AngularKernel {
    assert!((2..CACHED_DIMS).contains(&n), "dimension {n} outside the cached range");
    KERNELS[n].get_or_init(|| Box::new(AngularKernel::new(n)))
}

pub fn cap_table(n: usize) -> &'static CapTable {
    assert!((2..CACHED_DIMS).contains(&n), "dimension {n} outside the cached range");
    CAPS[n].get_or_init(|| Box::new(CapTable::new(n)))
}

/// Beyond this many units of e^{-x}, kernel contributions are dropped.
const KERNEL_CUTOFF: f64 = 44.0;

fn kernel_constant(n: usize, t: f64) -> f64 {
    sphere_area(n - 1) * (4.0 * PI * t).powf(-(n as f64) / 2.0)
}

/// (G_t * f)(a e_1) for radial f extended by zero beyond R_max.
///
/// Composite trapezoid in s on the field grid; the Gaussian factor is
/// combined with the angular integral as e^{-(s-a)²/4t} Λ̃(as/2t), which is
/// overflow-free for any z.
pub fn gauss_convolve(f: &RadialField, t: f64, a: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "time must be positive"));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid("a", "evaluation radius must be >= 0"));
    }
    Ok(convolve_values(f.grid(), f.values(), t, a))
}

pub(crate) fn convolve_values(grid: &RadialGrid, values: &[f64], t: f64, a: f64) -> f64 {
    let n = grid.dim();
    let kernel = angular_kernel(n);
    let h = grid.spacing();
    let m = grid.intervals();
    let width = (4.0 * t * KERNEL_CUTOFF).sqrt();
    let lo = (((a - width) / h).floor().max(0.0)) as usize;
    let hi = (((a + width) / h).ceil() as usize).min(m);
    let n1 = (n - 1) as i32;
    let mut acc = 0.0;
    for (j, &v) in values.iter().enumerate().take(hi + 1).skip(lo) {
        if v == 0.0 {
            continue;
        }
        let s = grid.node(j);
        let w = if j == 0 || j == m { 0.5 * h } else { h };
        let d = s - a;
        acc += w * v * s.powi(n1) * (-(d * d) / (4.0 * t)).exp() * kernel.eval(a * s / (2.0 * t));
    }
    kernel_constant(n, t) * acc
}

/// The operator f ↦ G_t * f evaluated at every grid node, stored as a banded
/// matrix so it can be applied repeatedly.
#[derive(Debug, Clone)]
pub struct HeatPropagator {
    grid: RadialGrid,
    t: f64,
    rows: Vec<(usize, Vec<f64>)>,
}

impl HeatPropagator {
    pub fn new(grid: RadialGrid, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("t", "time must be positive"));
        }
        let n = grid.dim();
        let kernel = angular_kernel(n);
        let h = grid.spacing();
        let m = grid.intervals();
        let width = (4.0 * t * KERNEL_CUTOFF).sqrt();
        let constant = kernel_constant(n, t);
        let n1 = (n - 1) as i32;
        let rows = (0..grid.len())
            .map(|i| {
                let a = grid.node(i);
                let lo = (((a - width) / h).floor().max(0.0)) as usize;
                let hi = (((a + width) / h).ceil() as usize).min(m);
                let weights = (lo..=hi)
                    .map(|j| {
                        let s = grid.node(j);
                        let w = if j == 0 || j == m { 0.5 * h } else { h };
                        let d = s - a;
                        constant * w * s.powi(n1) * (-(d * d) / (4.0 * t)).exp() * kernel.eval(a * s / (2.0 * t))
                    })
                    .collect();
                (lo, weights)
            })
            .collect();
        Ok(Self { grid, t, rows })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.grid.len());
        self.rows
            .iter()
            .map(|(lo, w)| w.iter().zip(&values[*lo..]).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// G_t * f at all nodes; the result carries no boundary constraint.
    pub fn apply(&self, f: &RadialField) -> Result<RadialField> {
        if *f.grid() != self.grid {
            return Err(crate::error::Error::GridMismatch(
                "propagator built for another grid".into(),
            ));
        }
        Ok(RadialField::from_parts_unchecked(
            self.grid,
            self.apply_values(f.values()),
            Boundary::EvenAtOriginOnly,
        ))
    }
}

/// G_t * f on the whole grid.
pub fn heat_flow(f: &RadialField, t: f64) -> Result<RadialField> {
    HeatPropagator::new(*f.grid(), t)?.apply(f)
}
