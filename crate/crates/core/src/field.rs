//! Radial grids and fields, norms of record and the scaling transformation.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::math::MonotoneCubic;
use crate::params::ModelParams;

/// Uniform radial grid r_i = i h, i = 0..=M, in dimension n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    n: usize,
    intervals: usize,
    spacing: f64,
}

impl RadialGrid {
    pub const MIN_INTERVALS: usize = 16;

    pub fn new(n: usize, r_max: f64, intervals: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if intervals < Self::MIN_INTERVALS {
            return Err(invalid("nodes", "a grid needs at least 16 intervals"));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(invalid("r_max", "outer radius must be finite and positive"));
        }
        Ok(Self {
            n,
            intervals,
            spacing: r_max / intervals as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of intervals M; there are M + 1 nodes.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn r_max(&self) -> f64 {
        self.spacing * self.intervals as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.spacing * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }
}

/// Far-field condition attached to a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// Ω is the ball B_{R_max}; the last sample is zero.
    DirichletAtRmax,
    /// Ω = R^n truncated at R_max; only evenness at the origin is imposed.
    EvenAtOriginOnly,
}

/// A radial function sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
    boundary: Boundary,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples"));
        }
        if boundary == Boundary::DirichletAtRmax && values[grid.intervals()] != 0.0 {
            return Err(invalid("values", "Dirichlet field must vanish at R_max"));
        }
        Ok(Self { grid, values, boundary })
    }

    /// Samples `f` at the nodes; a Dirichlet field gets its last sample forced to 0.
    pub fn from_fn(grid: RadialGrid, boundary: Boundary, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes().map(&mut f).collect();
        if boundary == Boundary::DirichletAtRmax {
            values[grid.intervals()] = 0.0;
        }
        Self::new(grid, values, boundary)
    }

    pub fn zeros(grid: RadialGrid, boundary: Boundary) -> Self {
        Self {
            grid,
            values: alloc::vec![0.0; grid.len()],
            boundary,
        }
    }

    pub(crate) fn from_parts_unchecked(grid: RadialGrid, values: Vec<f64>, boundary: Boundary) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, boundary }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map; the boundary tag is kept and re-enforced.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if self.boundary == Boundary::DirichletAtRmax {
            values[self.grid.intervals()] = 0.0;
        }
        Self::new(self.grid, values, self.boundary)
    }

    /// `|f|^q` as a field.
    pub fn abs_pow(&self, q: f64) -> Result<Self> {
        self.map(|v| abs_pow(v, q))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| factor * v)
    }

    /// Pointwise difference `self - other` on a shared grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::new(self.grid, values, self.boundary)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// max_i |u_i|.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max_i r_i^k |u_i|; for radial data this is ess sup |x|^k |f(x)|.
    pub fn weighted_sup_norm(&self, k: f64) -> f64 {
        if k == 0.0 {
            return self.sup_norm();
        }
        self.values
            .iter()
            .enumerate()
            .fold(0.0, |m, (i, v)| m.max(self.grid.node(i).powf(k) * v.abs()))
    }

    /// Radius of the (first) maximum of |u|.
    pub fn argmax_radius(&self) -> f64 {
        let mut best = (0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > best.1 {
                best = (i, v.abs());
            }
        }
        self.grid.node(best.0)
    }

    /// ∂_r u by centered differences; zero at the origin, one-sided at R_max.
    pub fn radial_derivative(&self) -> Self {
        let h = self.grid.spacing();
        let m = self.grid.intervals();
        let u = &self.values;
        let mut d = alloc::vec![0.0; u.len()];
        for i in 1..m {
            d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        d[m] = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
        Self::from_parts_unchecked(self.grid, d, Boundary::EvenAtOriginOnly)
    }

    /// Value at an arbitrary radius by monotone cubic interpolation, zero
    /// beyond R_max.
    pub fn interpolator(&self) -> FieldInterpolator<'_> {
        FieldInterpolator {
            cubic: MonotoneCubic::new(self.grid.spacing(), &self.values),
        }
    }
}

/// Evaluates a field between nodes; zero extension beyond R_max.
pub struct FieldInterpolator<'a> {
    cubic: MonotoneCubic<'a>,
}

impl FieldInterpolator<'_> {
    pub fn eval(&self, r: f64) -> f64 {
        self.cubic.eval(r.abs()).unwrap_or(0.0)
    }
}

#[inline]
pub(crate) fn abs_pow(v: f64, q: f64) -> f64 {
    if q == 1.0 {
        v.abs()
    } else if q == 2.0 {
        v * v
    } else {
        v.abs().powf(q)
    }
}

/// max_i |u_i|.
pub fn sup_norm(f: &RadialField) -> f64 {
    f.sup_norm()
}

/// max_i r_i^k |u_i|.
pub fn weighted_sup_norm(f: &RadialField, k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(invalid("k", "weight exponent must be non-negative"));
    }
    Ok(f.weighted_sup_norm(k))
}

/// u_λ(r) = λ^{2/(p-1)} u(λ r), resampled onto the original grid by monotone
/// cubic interpolation. Values needed beyond R_max are zero.
pub fn rescale_field(f: &RadialField, lambda: f64, params: &ModelParams) -> Result<RadialField> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", "scaling factor must be positive"));
    }
    let amp = lambda.powf(params.scaling_exponent());
    let interp = f.interpolator();
    let grid = *f.grid();
    let values = grid.nodes().map(|r| amp * interp.eval(lambda * r)).collect::<Vec<_>>();
    let mut values = values;
    if f.boundary() == Boundary::DirichletAtRmax {
        values[grid.intervals()] = 0.0;
    }
    RadialField::new(grid, values, f.boundary())
}
