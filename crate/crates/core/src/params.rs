#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Result};

/// Dimension, exponent and the critical quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub n: usize,
    pub p: f64,
    /// Sobolev exponent (n+2)/(n-2).
    pub p_sobolev: f64,
    /// 1/(p-1).
    pub beta: f64,
    /// 4/(p-1), the Morrey index paired with q = 2.
    pub mu: f64,
    /// Critical Lebesgue exponent n(p-1)/2.
    pub q_critical: f64,
    pub supercritical: bool,
}

impl ModelParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n", "dimension must be at least 3"));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(invalid("p", "exponent must be finite and > 1"));
        }
        let nf = n as f64;
        let p_sobolev = (nf + 2.0) / (nf - 2.0);
        let beta = 1.0 / (p - 1.0);
        Ok(Self {
            n,
            p,
            p_sobolev,
            beta,
            mu: 4.0 * beta,
            q_critical: nf / (2.0 * beta),
            supercritical: p > p_sobolev,
        })
    }

    /// Decay exponent 2/(p-1) of the scale-invariant profile.
    pub fn scaling_exponent(&self) -> f64 {
        2.0 * self.beta
    }

    /// Morrey index λ = 2q/(p-1) that makes M^{q,λ} scale invariant.
    pub fn critical_lambda(&self, q: f64) -> f64 {
        2.0 * q * self.beta
    }

    /// Constant state of the rescaled flow, κ = β^β.
    pub fn kappa(&self) -> f64 {
        self.beta.powf(self.beta)
    }

    /// Coefficient L of the singular steady state L r^{-2/(p-1)}, when it exists
    /// (needs n - 2 > 2/(p-1)).
    pub fn singular_steady_coefficient(&self) -> Option<f64> {
        let k = self.scaling_exponent();
        let base = k * (self.n as f64 - 2.0 - k);
        (base > 0.0).then(|| base.powf(self.beta))
    }
}

/// Convenience alias matching the operation name used by the runner.
pub fn make_params(n: usize, p: f64) -> Result<ModelParams> {
    ModelParams::new(n, p)
}
