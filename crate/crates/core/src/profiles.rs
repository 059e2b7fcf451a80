//! Named analytic families of initial data, with exact radial derivatives.

use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::field::{Boundary, RadialField, RadialGrid};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Profile {
    /// A exp(-r²/w²).
    Gaussian { amplitude: f64, width: f64 },
    /// A on [0, R], cosine taper to 0 on [R, R + ramp], 0 beyond.
    Plateau { amplitude: f64, radius: f64, ramp: f64 },
    /// A (1 + (r/c)²)^{-exponent/2}, decaying like r^{-exponent}.
    PowerTail {
        amplitude: f64,
        exponent: f64,
        core_radius: f64,
    },
    /// 1 on the closed ball of the given radius.
    Indicator { radius: f64 },
    /// L r^{-2/(p-1)}, held constant on [0, r_1].
    SingularSteadyState,
}

impl Profile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian { amplitude, width }
    }

    pub fn plateau(amplitude: f64, radius: f64, ramp: f64) -> Self {
        Self::Plateau {
            amplitude,
            radius,
            ramp,
        }
    }

    pub fn power_tail(amplitude: f64, exponent: f64, core_radius: f64) -> Self {
        Self::PowerTail {
            amplitude,
            exponent,
            core_radius,
        }
    }

    pub fn indicator(radius: f64) -> Self {
        Self::Indicator { radius }
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        let ok = match *self {
            Profile::Gaussian { amplitude, width } => amplitude.is_finite() && width > 0.0,
            Profile::Plateau {
                amplitude,
                radius,
                ramp,
            } => amplitude.is_finite() && radius >= 0.0 && ramp > 0.0,
            Profile::PowerTail {
                amplitude,
                exponent,
                core_radius,
            } => amplitude.is_finite() && exponent >= 0.0 && core_radius > 0.0,
            Profile::Indicator { radius } => radius > 0.0,
            Profile::SingularSteadyState => {
                if params.singular_steady_coefficient().is_none() {
                    return Err(invalid("profile", "no singular steady state for these (n, p)"));
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("profile", "profile parameters out of range"))
        }
    }

    /// Profile value at radius `r`.
    pub fn value(&self, r: f64, params: &ModelParams, grid: &RadialGrid) -> f64 {
        match *self {
            Profile::Gaussian { amplitude, width } => amplitude * (-(r * r) / (width * width)).exp(),
            Profile::Plateau {
                amplitude,
                radius,
                ramp,
            } => {
                if r <= radius {
                    amplitude
                } else if r >= radius + ramp {
                    0.0
                } else {
                    0.5 * amplitude * (1.0 + (PI * (r - radius) / ramp).cos())
                }
            }
            Profile::PowerTail {
                amplitude,
                exponent,
                core_radius,
            } => {
                let x = r / core_radius;
                amplitude * (1.0 + x * x).powf(-0.5 * exponent)
            }
            Profile::Indicator { radius } => {
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::SingularSteadyState => {
                let l = params.singular_steady_coefficient().unwrap_or(0.0);
                l * r.max(grid.spacing()).powf(-params.scaling_exponent())
            }
        }
    }

    /// Exact radial derivative (zero on the cap of U_*, and a.e. for the indicator).
    pub fn derivative(&self, r: f64, params: &ModelParams, grid: &RadialGrid) -> f64 {
        match *self {
            Profile::Gaussian { amplitude, width } => {
                let w2 = width * width;
                -2.0 * r / w2 * amplitude * (-(r * r) / w2).exp()
            }
            Profile::Plateau {
                amplitude,
                radius,
                ramp,
            } => {
                if r <= radius || r >= radius + ramp {
                    0.0
                } else {
                    -0.5 * amplitude * PI / ramp * (PI * (r - radius) / ramp).sin()
                }
            }
            Profile::PowerTail {
                amplitude,
                exponent,
                core_radius,
            } => {
                let x = r / core_radius;
                -amplitude * exponent * x / core_radius * (1.0 + x * x).powf(-0.5 * exponent - 1.0)
            }
            Profile::Indicator { .. } => 0.0,
            Profile::SingularSteadyState => {
                if r <= grid.spacing() {
                    0.0
                } else {
                    let l = params.singular_steady_coefficient().unwrap_or(0.0);
                    let k = params.scaling_exponent();
                    -k * l * r.powf(-k - 1.0)
                }
            }
        }
    }

    pub fn sample(&self, grid: RadialGrid, params: &ModelParams, boundary: Boundary) -> Result<RadialField> {
        self.validate(params)?;
        RadialField::from_fn(grid, boundary, |r| self.value(r, params, &grid))
    }

    /// |∇u_0| = |∂_r u_0| sampled on the grid.
    pub fn gradient(&self, grid: RadialGrid, params: &ModelParams) -> Result<RadialField> {
        self.validate(params)?;
        RadialField::from_fn(grid, Boundary::EvenAtOriginOnly, |r| self.derivative(r, params, &grid))
    }
}
