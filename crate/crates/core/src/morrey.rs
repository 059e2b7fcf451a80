//! Morrey norms over a finite (center, radius) lattice, plus the heat-kernel
//! majorant and the smoothing/contraction measurements built on them.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::field::RadialField;
use crate::math::logspace;
use crate::quadrature::{convolve_values, BallIntegrator, HeatPropagator};

/// The pair (q, λ) selecting the norm of M^{q,λ}.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MorreySpec {
    pub q: f64,
    pub lambda: f64,
}

impl MorreySpec {
    pub fn new(q: f64, lambda: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(invalid("q", "Morrey exponent must be finite and >= 1"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", "Morrey index must be >= 0"));
        }
        Ok(Self { q, lambda })
    }

    /// Scale-invariant pairing λ = 2q/(p-1).
    pub fn critical(q: f64, p: f64) -> Result<Self> {
        Self::new(q, 2.0 * q / (p - 1.0))
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.lambda > n as f64 {
            return Err(invalid("lambda", "Morrey index must not exceed the dimension"));
        }
        Ok(())
    }
}

/// A Lebesgue exponent that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(q) => 1.0 / q,
            Exponent::Infinity => 0.0,
        }
    }
}

/// Finite set of ball centers and radii standing in for sup over a and R.
#[derive(Debug, Clone, PartialEq)]
pub struct MorreyLattice {
    centers: Vec<f64>,
    radii: Vec<f64>,
}

const BASE_CENTERS: usize = 32;
const BASE_RADII: usize = 48;

impl MorreyLattice {
    pub fn new(mut centers: Vec<f64>, mut radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || radii.is_empty() {
            return Err(invalid("lattice", "centers and radii must be nonempty"));
        }
        if centers.iter().any(|a| !(*a >= 0.0 && a.is_finite())) || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("lattice", "centers must be >= 0 and radii > 0"));
        }
        centers.sort_by(f64::total_cmp);
        centers.dedup();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Ok(Self { centers, radii })
    }

    /// {0} ∪ 32 log-spaced centers in [h, R_max]; 48 log-spaced radii in [h, 2 R_max].
    pub fn default_for(f: &RadialField) -> Self {
        Self::refined(f, 0)
    }

    /// The default lattice with each log step split into 2^level pieces;
    /// every level contains the previous one.
    pub fn refined(f: &RadialField, level: u32) -> Self {
        let grid = f.grid();
        let h = grid.spacing();
        let r_max = grid.r_max();
        let mut centers = alloc::vec![0.0];
        centers.extend(nested_logspace(h, r_max, BASE_CENTERS, level));
        let radii = nested_logspace(h, 2.0 * r_max, BASE_RADII, level);
        Self { centers, radii }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// Log-spaced points whose level-0 members are bitwise identical at every level.
fn nested_logspace(lo: f64, hi: f64, base: usize, level: u32) -> Vec<f64> {
    if lo >= hi {
        return logspace(lo, hi, 1);
    }
    let k = 1usize << level;
    let count = (base - 1) * k + 1;
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (base - 1) as f64;
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + step * (i as f64 / k as f64)).exp()
            }
        })
        .collect()
}

/// A Morrey-norm estimate with its maximizing ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorreyEstimate {
    /// Norm after local refinement around the best lattice cell.
    pub value: f64,
    /// Norm from the lattice sweep alone.
    pub lattice_value: f64,
    pub argmax_a: f64,
    pub argmax_r: f64,
    /// A maximizing ball left the grid while the field was nonzero at R_max.
    pub truncated: bool,
}

struct Maximand {
    integrator: BallIntegrator,
    exponent: f64,
    truncated: core::cell::Cell<bool>,
}

impl Maximand {
    fn new(f: &RadialField, spec: &MorreySpec) -> Result<Self> {
        spec.check_dim(f.grid().dim())?;
        Ok(Self {
            integrator: BallIntegrator::new(f, spec.q)?,
            exponent: spec.lambda - f.grid().dim() as f64,
            truncated: core::cell::Cell::new(false),
        })
    }

    /// R^{λ-n} ∫_{B_R(a)} |f|^q.
    fn eval(&self, a: f64, radius: f64) -> f64 {
        let b = self.integrator.integral(a, radius);
        if b.truncated {
            self.truncated.set(true);
        }
        radius.powf(self.exponent) * b.value
    }
}

/// ‖f‖_{M^{q,λ}} estimated on the lattice and then refined locally.
///
/// For λ = n the norm is the L^q norm and is returned directly. Otherwise the
/// maximand R^{λ-n}∫_{B_R(a)}|f|^q is swept over the lattice and the best
/// cell is polished by alternating golden-section searches in log R and a.
/// Only the q-th power is optimized, so the result obeys the power identity
/// ‖|f|^m‖_{M^{q/m,λ}} = ‖f‖^m_{M^{q,λ}} to rounding.
pub fn morrey_norm(f: &RadialField, spec: MorreySpec, lattice: &MorreyLattice) -> Result<MorreyEstimate> {
    let m = Maximand::new(f, &spec)?;
    let n = f.grid().dim() as f64;
    if spec.lambda == n {
        let total = m.integrator.total();
        let v = total.powf(1.0 / spec.q);
        return Ok(MorreyEstimate {
            value: v,
            lattice_value: v,
            argmax_a: 0.0,
            argmax_r: f64::INFINITY,
            truncated: f.values()[f.grid().intervals()] != 0.0,
        });
    }
    let (mut best, mut ia, mut ir) = (0.0, 0, 0);
    for (i, &a) in lattice.centers.iter().enumerate() {
        for (j, &r) in lattice.radii.iter().enumerate() {
            let v = m.eval(a, r);
            // near-ties go to the smaller center (quadrature noise is ~1e-13)
            if v > best * (1.0 + TIE_SLACK) {
                best = v;
                ia = i;
                ir = j;
            }
        }
    }
    let raw = best;
    if raw == 0.0 {
        return Ok(MorreyEstimate {
            value: 0.0,
            lattice_value: 0.0,
            argmax_a: 0.0,
            argmax_r: lattice.radii[0],
            truncated: false,
        });
    }
    let (mut a, mut r) = (lattice.centers[ia], lattice.radii[ir]);
    let r_lo = lattice.radii[ir.saturating_sub(1)];
    let r_hi = lattice.radii[(ir + 1).min(lattice.radii.len() - 1)];
    let a_lo = lattice.centers[ia.saturating_sub(1)];
    let a_hi = lattice.centers[(ia + 1).min(lattice.centers.len() - 1)];
    for _ in 0..POLISH_ROUNDS {
        if r_hi > r_lo {
            let (x, v) = golden_max(r_lo.ln(), r_hi.ln(), |x| m.eval(a, x.exp()));
            if v > best {
                best = v;
                r = x.exp();
            }
        }
        if a_hi > a_lo {
            let (x, v) = golden_max(a_lo, a_hi, |x| m.eval(x, r));
            if v > best {
                best = v;
                a = x;
            }
        }
    }
    let inv = 1.0 / spec.q;
    Ok(MorreyEstimate {
        value: best.powf(inv),
        lattice_value: raw.powf(inv),
        argmax_a: a,
        argmax_r: r,
        truncated: m.truncated.get(),
    })
}

const POLISH_ROUNDS: usize = 3;
const TIE_SLACK: f64 = 1e-10;
const GOLDEN_STEPS: usize = 40;

/// Golden-section search for a maximum on [lo, hi]; returns the best point seen.
fn golden_max(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// One lattice cell of the maximand R^{λ-n}∫_{B_R(a)}|f|^q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorreyCell {
    pub a: f64,
    pub radius: f64,
    pub value: f64,
}

/// Every lattice cell of the maximand, centers outermost.
pub fn morrey_cells(f: &RadialField, spec: MorreySpec, lattice: &MorreyLattice) -> Result<Vec<MorreyCell>> {
    let m = Maximand::new(f, &spec)?;
    let mut cells = Vec::with_capacity(lattice.centers.len() * lattice.radii.len());
    for &a in &lattice.centers {
        for &radius in &lattice.radii {
            cells.push(MorreyCell {
                a,
                radius,
                value: m.eval(a, radius),
            });
        }
    }
    Ok(cells)
}

/// max over `t_grid` of t^{λ/2} sup_a (G_t * |f|^q)(a), with a on the lattice
/// centers. This bounds ‖f‖^q_{M^{q,λ}} up to a constant.
pub fn kernel_majorant(f: &RadialField, spec: MorreySpec, t_grid: &[f64], lattice: &MorreyLattice) -> Result<f64> {
    spec.check_dim(f.grid().dim())?;
    check_times(t_grid)?;
    let density: Vec<f64> = f.values().iter().map(|&v| crate::field::abs_pow(v, spec.q)).collect();
    let mut best = 0.0f64;
    for &t in t_grid {
        let weight = t.powf(0.5 * spec.lambda);
        for &a in &lattice.centers {
            best = best.max(weight * convolve_values(f.grid(), &density, t, a));
        }
    }
    Ok(best)
}

fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid("t_grid", "times must be a nonempty list of positive values"));
    }
    Ok(())
}

/// One time of a smoothing measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSample {
    pub t: f64,
    /// ‖G_t*f‖_{M^{to,λ}} / (t^{-(λ/2)(1/from - 1/to)} ‖f‖_{M^{from,λ}}).
    pub ratio: f64,
    /// ‖G_t*f‖_{M^{from,λ}} / ‖f‖_{M^{from,λ}}, at most 1 in exact arithmetic.
    pub contraction: f64,
}

/// Measures the Morrey-scale smoothing and contraction of the heat semigroup.
///
/// `to_q = Infinity` uses sup over the lattice centers of |G_t*f|. With
/// λ = 0 the "Morrey norm" is the sup norm; at the lattice level this is the
/// maximum over lattice centers as well.
pub fn smoothing_profile(
    f: &RadialField,
    from_q: f64,
    to_q: Exponent,
    lambda: f64,
    t_grid: &[f64],
    lattice: &MorreyLattice,
) -> Result<Vec<SmoothingSample>> {
    check_times(t_grid)?;
    if let Exponent::Finite(q) = to_q {
        if q < from_q {
            return Err(invalid("to_q", "target exponent must be >= source exponent"));
        }
    }
    let from = MorreySpec::new(from_q, lambda)?;
    from.check_dim(f.grid().dim())?;
    let norm = |g: &RadialField, q: Exponent| -> Result<f64> {
        match q {
            Exponent::Finite(q) if lambda > 0.0 => Ok(morrey_norm(g, MorreySpec::new(q, lambda)?, lattice)?.value),
            _ => Ok(lattice_sup(g, lattice)),
        }
    };
    let base = norm(f, Exponent::Finite(from_q))?;
    let gap = 0.5 * lambda * (1.0 / from_q - to_q.reciprocal());
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let flowed = HeatPropagator::new(*f.grid(), t)?.apply(f)?;
        let (ratio, contraction) = if base == 0.0 {
            (0.0, 0.0)
        } else {
            (
                norm(&flowed, to_q)? / (t.powf(-gap) * base),
                norm(&flowed, Exponent::Finite(from_q))? / base,
            )
        };
        out.push(SmoothingSample { t, ratio, contraction });
    }
    Ok(out)
}

/// max over lattice centers of |g(a)|, reading g between nodes by interpolation.
fn lattice_sup(g: &RadialField, lattice: &MorreyLattice) -> f64 {
    let interp = g.interpolator();
    lattice.centers.iter().fold(0.0, |m, &a| m.max(interp.eval(a).abs()))
}
