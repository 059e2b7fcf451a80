//! Method-of-lines integration of u_t = Δu + |u|^{p-1}u for radial data,
//! blowup-time extrapolation and decay diagnostics.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::field::{Boundary, RadialField};
use crate::math::{integer_exponent, line_fit, odd_power};
use crate::params::ModelParams;
use crate::quadrature::HeatPropagator;

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    /// Fraction of the explicit diffusive limit h²/(2n).
    pub safety: f64,
    /// dt ≤ nonlinear_cap · ‖u‖_∞^{1-p}.
    pub nonlinear_cap: f64,
    pub blowup_threshold: f64,
    pub t_end: f64,
    /// Times at which full fields are stored (hit exactly).
    pub checkpoints: Vec<f64>,
    /// Abort when |u(R_max - h)| exceeds this fraction of ‖u‖_∞ in R^n mode.
    pub contamination_tol: f64,
    /// Switch off the reaction term (pure heat flow), for testing.
    pub linear_only: bool,
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-6,
            dt_min: 1e-14,
            safety: 0.9,
            nonlinear_cap: 0.05,
            blowup_threshold: 1e8,
            t_end: 200.0,
            checkpoints: Vec::new(),
            contamination_tol: 1e-6,
            linear_only: false,
            max_steps: 100_000_000,
        }
    }
}

impl SolverConfig {
    pub fn with_horizon(t_end: f64) -> Self {
        Self {
            t_end,
            ..Self::default()
        }
    }

    /// `count` log-spaced checkpoints on [t_first, t_end].
    pub fn log_checkpoints(mut self, t_first: f64, count: usize) -> Self {
        self.checkpoints = crate::math::logspace(t_first, self.t_end, count);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "horizon must be positive"));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return Err(invalid("dt_min", "need 0 < dt_min < dt_init"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(invalid("safety", "safety factor must lie in (0, 1]"));
        }
        if !(self.nonlinear_cap > 0.0 && self.nonlinear_cap <= 0.5) {
            return Err(invalid("nonlinear_cap", "nonlinear step cap must lie in (0, 0.5]"));
        }
        if !(self.blowup_threshold >= 1e6) {
            return Err(invalid("blowup_threshold", "blowup threshold must be >= 1e6"));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("checkpoints", "checkpoint times must be strictly increasing"));
        }
        if self.checkpoints.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return Err(invalid("checkpoints", "checkpoint times must lie in [0, t_end]"));
        }
        if !(self.contamination_tol > 0.0) {
            return Err(invalid("contamination_tol", "tolerance must be positive"));
        }
        Ok(())
    }
}

/// One recorded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub sup_norm: f64,
    /// max r^{2/(p-1)} |u|.
    pub weighted_sup: f64,
    /// Step that led to this row (0 for the initial row).
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub field: RadialField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    NonFinite,
    BoundaryContamination,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    ReachedHorizon {
        t_end: f64,
    },
    /// `fit_quality` is the R² of the extrapolation, 0 when it fell back to the ODE rate.
    Blowup {
        t_est: f64,
        fit_quality: f64,
    },
    Aborted {
        reason: AbortReason,
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub initial: RadialField,
    pub checkpoints: Vec<Checkpoint>,
    pub series: Vec<SeriesRow>,
    pub final_field: RadialField,
    pub status: Status,
}

impl Trajectory {
    pub fn last_time(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.t)
    }

    pub fn reached_horizon(&self) -> bool {
        matches!(self.status, Status::ReachedHorizon { .. })
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self.status, Status::Blowup { .. })
    }

    /// Stored field at time `t` (relative match 1e-9), including t = 0.
    pub fn field_at(&self, t: f64) -> Option<&RadialField> {
        if t == 0.0 {
            return Some(&self.initial);
        }
        self.checkpoints
            .iter()
            .find(|c| (c.t - t).abs() <= 1e-9 * t.abs().max(1e-300))
            .map(|c| &c.field)
    }
}

/// Right-hand side L_n u + |u|^{p-1}u with u_M held at zero.
struct Rhs {
    n: usize,
    inv_h2: f64,
    /// (n-1)/(2 h r_i)
    drift: Vec<f64>,
    p: f64,
    integer_p: Option<i32>,
    linear_only: bool,
}

impl Rhs {
    fn new(grid: &crate::field::RadialGrid, params: &ModelParams, linear_only: bool) -> Self {
        let h = grid.spacing();
        Rhs {
            n: params.n,
            inv_h2: 1.0 / (h * h),
            drift: (0..grid.len())
                .map(|i| {
                    if i == 0 {
                        0.0
                    } else {
                        (params.n as f64 - 1.0) / (2.0 * h * grid.node(i))
                    }
                })
                .collect(),
            p: params.p,
            integer_p: integer_exponent(params.p),
            linear_only,
        }
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len() - 1;
        out[0] = 2.0 * self.n as f64 * (u[1] - u[0]) * self.inv_h2;
        for i in 1..m {
            let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * self.inv_h2 + self.drift[i] * (u[i + 1] - u[i - 1]);
            out[i] = lap;
        }
        out[m] = 0.0;
        if !self.linear_only {
            for i in 0..m {
                out[i] += odd_power(u[i], self.p, self.integer_p);
            }
        }
    }
}

/// Discrete L_n u + |u|^{p-1}u with the solver's stencil; zero at R_max.
///
/// For a steady state this is the residual of Δu + |u|^{p-1}u = 0.
pub fn discrete_rhs(u: &RadialField, params: &ModelParams) -> Result<RadialField> {
    if u.grid().dim() != params.n {
        return Err(invalid("u", "field dimension differs from params.n"));
    }
    let mut out = alloc::vec![0.0; u.grid().len()];
    Rhs::new(u.grid(), params, false).eval(u.values(), &mut out);
    Ok(RadialField::from_parts_unchecked(
        *u.grid(),
        out,
        Boundary::EvenAtOriginOnly,
    ))
}

/// Integrates the radial problem by explicit RK4.
///
/// The step is the smallest of the diffusive limit safety·h²/(2n), the
/// reaction limit nonlinear_cap·‖u‖^{1-p}, the distance to the next
/// checkpoint and to t_end, and twice the previous step. A run is declared
/// blowup when ‖u‖_∞ reaches the threshold or the reaction limit drops below
/// dt_min.
pub fn solve(u0: &RadialField, params: &ModelParams, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = *u0.grid();
    if grid.dim() != params.n {
        return Err(invalid("u0", "field dimension differs from params.n"));
    }
    let h = grid.spacing();
    let m = grid.intervals();
    let rhs = Rhs::new(&grid, params, cfg.linear_only);
    let weights: Vec<f64> = grid.nodes().map(|r| r.powf(params.scaling_exponent())).collect();
    let measure = |u: &[f64]| -> (f64, f64) {
        let mut s = 0.0f64;
        let mut w = 0.0f64;
        for (v, r) in u.iter().zip(&weights) {
            s = s.max(v.abs());
            w = w.max(v.abs() * r);
        }
        (s, w)
    };

    let mut u: Vec<f64> = u0.values().to_vec();
    // both modes integrate with u_M = 0
    u[m] = 0.0;
    let len = u.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        alloc::vec![0.0; len],
        alloc::vec![0.0; len],
        alloc::vec![0.0; len],
        alloc::vec![0.0; len],
        alloc::vec![0.0; len],
    );

    let diffusive = cfg.safety * h * h / (2.0 * params.n as f64);
    let rn_mode = u0.boundary() == Boundary::EvenAtOriginOnly;
    let mut t = 0.0;
    let (s0, w0) = measure(&u);
    let mut series = alloc::vec![SeriesRow {
        t,
        sup_norm: s0,
        weighted_sup: w0,
        dt: 0.0
    }];
    let mut checkpoints = Vec::new();
    let mut next_cp = 0;
    while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] <= 0.0 {
        checkpoints.push(Checkpoint {
            t: 0.0,
            field: u0.clone(),
        });
        next_cp += 1;
    }
    let mut sup = s0;
    let mut prev_dt = cfg.dt_init;
    let mut steps: u64 = 0;
    let status = loop {
        if t >= cfg.t_end {
            break Status::ReachedHorizon { t_end: cfg.t_end };
        }
        if sup >= cfg.blowup_threshold {
            break blowup_status(&series, params, t);
        }
        if steps >= cfg.max_steps {
            break Status::Aborted {
                reason: AbortReason::StepLimit,
                t,
            };
        }
        let reaction = if cfg.linear_only || sup == 0.0 {
            f64::INFINITY
        } else {
            cfg.nonlinear_cap * sup.powf(1.0 - params.p)
        };
        if reaction < cfg.dt_min {
            break blowup_status(&series, params, t);
        }
        let mut dt = diffusive.min(reaction).min(2.0 * prev_dt);
        let mut hits_checkpoint = false;
        if next_cp < cfg.checkpoints.len() && t + dt >= cfg.checkpoints[next_cp] {
            dt = cfg.checkpoints[next_cp] - t;
            hits_checkpoint = true;
        }
        let mut hits_end = false;
        if t + dt >= cfg.t_end {
            dt = cfg.t_end - t;
            hits_end = true;
        }

        rhs.eval(&u, &mut k1);
        for i in 0..len {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        rhs.eval(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        rhs.eval(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = u[i] + dt * k3[i];
        }
        rhs.eval(&tmp, &mut k4);
        let sixth = dt / 6.0;
        for i in 0..len {
            u[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        steps += 1;
        t = if hits_end {
            cfg.t_end
        } else if hits_checkpoint {
            cfg.checkpoints[next_cp]
        } else {
            t + dt
        };
        // steps shortened to land on a checkpoint do not throttle the growth limit
        if !hits_checkpoint && !hits_end {
            prev_dt = dt;
        }

        if u.iter().any(|v| !v.is_finite()) {
            break Status::Aborted {
                reason: AbortReason::NonFinite,
                t,
            };
        }
        let (s, w) = measure(&u);
        sup = s;
        series.push(SeriesRow {
            t,
            sup_norm: s,
            weighted_sup: w,
            dt,
        });
        while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] <= t {
            checkpoints.push(Checkpoint {
                t: cfg.checkpoints[next_cp],
                field: RadialField::from_parts_unchecked(grid, u.clone(), u0.boundary()),
            });
            next_cp += 1;
        }
        if rn_mode && u[m - 1].abs() > cfg.contamination_tol * sup {
            break Status::Aborted {
                reason: AbortReason::BoundaryContamination,
                t,
            };
        }
    };
    Ok(Trajectory {
        params: *params,
        initial: u0.clone(),
        checkpoints,
        series,
        final_field: RadialField::from_parts_unchecked(grid, u, u0.boundary()),
        status,
    })
}

fn blowup_status(series: &[SeriesRow], params: &ModelParams, t: f64) -> Status {
    match fit_blowup(series, params) {
        Ok(fit) if fit.t_est > t => Status::Blowup {
            t_est: fit.t_est,
            fit_quality: fit.r_squared,
        },
        _ => {
            // ODE rate from the last sample: ‖u‖^{1-p} = (p-1)(T - t)
            let last = series.last().map_or(0.0, |r| r.sup_norm);
            let remaining = if last > 0.0 {
                last.powf(1.0 - params.p) / (params.p - 1.0)
            } else {
                0.0
            };
            let t_est = if remaining > 0.0 { t + remaining } else { next_up(t) };
            Status::Blowup {
                t_est,
                fit_quality: 0.0,
            }
        }
    }
}

fn next_up(t: f64) -> f64 {
    if t == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(t.to_bits() + 1)
    }
}

/// Result of the type-I extrapolation of the blowup time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    pub t_est: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Why no blowup time was extrapolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitRefusal {
    /// The run neither blew up nor grew by a factor 10³.
    NoGrowth,
    /// Fewer than the minimum number of samples in the last decade.
    TooFewSamples(usize),
    Degenerate,
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Fits ‖u(t)‖_∞^{1-p} ≈ (p-1)(T - t) over the last decade of growth and
/// returns T with the R² of the fit.
pub fn estimate_blowup_time(traj: &Trajectory, params: &ModelParams) -> core::result::Result<BlowupFit, FitRefusal> {
    let first = traj.series.first().map_or(0.0, |r| r.sup_norm);
    let peak = traj.series.iter().fold(0.0f64, |m, r| m.max(r.sup_norm));
    if !traj.is_blowup() && !(first > 0.0 && peak >= 1e3 * first) {
        return Err(FitRefusal::NoGrowth);
    }
    fit_blowup(&traj.series, params)
}

fn fit_blowup(series: &[SeriesRow], params: &ModelParams) -> core::result::Result<BlowupFit, FitRefusal> {
    let last = match series.last() {
        Some(r) if r.sup_norm > 0.0 => r.sup_norm,
        _ => return Err(FitRefusal::Degenerate),
    };
    // rows after the last one still below a tenth of the final value
    let start = series
        .iter()
        .rposition(|r| r.sup_norm < 0.1 * last)
        .map_or(0, |i| i + 1);
    let window = &series[start..];
    if window.len() < MIN_FIT_SAMPLES {
        return Err(FitRefusal::TooFewSamples(window.len()));
    }
    let xs: Vec<f64> = window.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = window.iter().map(|r| r.sup_norm.powf(1.0 - params.p)).collect();
    let fit = line_fit(&xs, &ys).ok_or(FitRefusal::Degenerate)?;
    if !(fit.slope < 0.0) {
        return Err(FitRefusal::Degenerate);
    }
    Ok(BlowupFit {
        t_est: -fit.intercept / fit.slope,
        r_squared: fit.r_squared,
        samples: window.len(),
    })
}

/// Long-time behavior of a run that reached its horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayDiagnostics {
    /// d log‖u‖_∞ / d log t over the final decade; `None` for zero data.
    pub slope: Option<f64>,
    /// max over the series of t^{1/(p-1)} ‖u(t)‖_∞.
    pub sup_t_beta_norm: f64,
    /// t^{1/(p-1)} ‖u(t)‖_∞ nonincreasing over the final decade.
    pub tail_monotone: bool,
}

const MONOTONE_SLACK: f64 = 1e-9;

pub fn decay_diagnostics(traj: &Trajectory, params: &ModelParams) -> DecayDiagnostics {
    decay_diagnostics_over(traj, params, 0.1)
}

/// As [`decay_diagnostics`], with the tail window t ≥ `tail_fraction`·t_last.
pub fn decay_diagnostics_over(traj: &Trajectory, params: &ModelParams, tail_fraction: f64) -> DecayDiagnostics {
    let beta = params.beta;
    let t_last = traj.last_time();
    let weighted = |r: &SeriesRow| r.t.powf(beta) * r.sup_norm;
    let sup_t_beta_norm = traj.series.iter().map(weighted).fold(0.0, f64::max);
    let decade: Vec<&SeriesRow> = traj
        .series
        .iter()
        .filter(|r| r.t > 0.0 && r.t >= tail_fraction * t_last)
        .collect();
    let tail_monotone = decade
        .windows(2)
        .all(|w| weighted(w[1]) <= weighted(w[0]) * (1.0 + MONOTONE_SLACK));
    let (xs, ys): (Vec<f64>, Vec<f64>) = decade
        .iter()
        .filter(|r| r.sup_norm > 0.0)
        .map(|r| (r.t.ln(), r.sup_norm.ln()))
        .unzip();
    let slope = if xs.len() >= 2 {
        line_fit(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    DecayDiagnostics {
        slope,
        sup_t_beta_norm,
        tail_monotone,
    }
}

/// Default floor below which G_t*|u0| is treated as zero.
pub const DOMINATION_FLOOR: f64 = 1e-14;

/// max over stored checkpoints (t > 0) and nodes of |u(r,t)| / (G_t*|u0|)(r).
pub fn linear_domination(traj: &Trajectory, u0: &RadialField) -> Result<f64> {
    linear_domination_with_floor(traj, u0, DOMINATION_FLOOR)
}

/// As [`linear_domination`], skipping nodes where G_t*|u0| < `floor`.
pub fn linear_domination_with_floor(traj: &Trajectory, u0: &RadialField, floor: f64) -> Result<f64> {
    let abs_u0 = u0.map(f64::abs)?;
    let mut worst = 0.0f64;
    for cp in traj.checkpoints.iter().filter(|c| c.t > 0.0) {
        cp.field.check_same_grid(u0)?;
        let lin = HeatPropagator::new(*u0.grid(), cp.t)?.apply_values(abs_u0.values());
        for (u, g) in cp.field.values().iter().zip(&lin) {
            if *g >= floor {
                worst = worst.max(u.abs() / g);
            }
        }
    }
    Ok(worst)
}

/// Outcome of the check |∂_r u(t)| ≤ 2 G_t*|∇u0|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub holds: bool,
    /// max of |∂_r u| / G_t*|∇u0| over nodes with a nonnegligible majorant.
    pub worst_ratio: f64,
    /// 2 - worst_ratio; infinite when nothing was compared.
    pub margin: f64,
    pub times_checked: usize,
}

/// Checks the gradient majorant on every stored checkpoint with 0 < t ≤ t_small.
pub fn gradient_majorant_check(
    traj: &Trajectory,
    u0: &RadialField,
    grad_u0: &RadialField,
    t_small: f64,
) -> Result<GradientCheck> {
    grad_u0.check_same_grid(u0)?;
    let abs_grad = grad_u0.map(f64::abs)?;
    let scale = abs_grad.sup_norm();
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut holds = true;
    let mut times = 0;
    for cp in traj.checkpoints.iter().filter(|c| c.t > 0.0 && c.t <= t_small) {
        times += 1;
        let majorant = HeatPropagator::new(*u0.grid(), cp.t)?.apply_values(abs_grad.values());
        let du = cp.field.radial_derivative();
        for (d, g) in du.values().iter().zip(&majorant) {
            if d.abs() > 2.0 * g + floor {
                holds = false;
            }
            if *g > floor {
                worst = worst.max(d.abs() / g);
            }
        }
    }
    let margin = if worst > 0.0 { 2.0 - worst } else { f64::INFINITY };
    Ok(GradientCheck {
        holds,
        worst_ratio: worst,
        margin,
        times_checked: times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RadialGrid;
    use crate::params::make_params;
    use crate::profiles::Profile;

    #[test]
    fn zero_data_reaches_horizon() {
        let params = make_params(5, 3.0).unwrap();
        let grid = RadialGrid::new(5, 10.0, 100).unwrap();
        let u0 = RadialField::zeros(grid, Boundary::DirichletAtRmax);
        let traj = solve(&u0, &params, &SolverConfig::with_horizon(1.0)).unwrap();
        assert_eq!(traj.status, Status::ReachedHorizon { t_end: 1.0 });
        assert!(traj.series.iter().all(|r| r.sup_norm == 0.0));
        let d = decay_diagnostics(&traj, &params);
        assert_eq!(d.slope, None);
        assert_eq!(d.sup_t_beta_norm, 0.0);
        assert_eq!(estimate_blowup_time(&traj, &params), Err(FitRefusal::NoGrowth));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::with_horizon(1.0);
        c.checkpoints = alloc::vec![0.5, 0.2];
        assert!(c.validate().is_err());
        let mut c = SolverConfig::with_horizon(1.0);
        c.blowup_threshold = 1e3;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::with_horizon(1.0);
        c.dt_min = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn checkpoints_are_hit_exactly() {
        let params = make_params(5, 3.0).unwrap();
        let grid = RadialGrid::new(5, 10.0, 100).unwrap();
        let u0 = Profile::gaussian(0.1, 1.0)
            .sample(grid, &params, Boundary::DirichletAtRmax)
            .unwrap();
        let cfg = SolverConfig::with_horizon(1.0).log_checkpoints(0.01, 5);
        let traj = solve(&u0, &params, &cfg).unwrap();
        let times: Vec<f64> = traj.checkpoints.iter().map(|c| c.t).collect();
        assert_eq!(times, cfg.checkpoints);
        assert!(traj.series.windows(2).all(|w| w[1].t > w[0].t));
        assert!(traj.field_at(1.0).is_some());
    }

    #[test]
    fn exact_ode_series_fits_exactly() {
        let params = make_params(5, 3.0).unwrap();
        let series: Vec<SeriesRow> = (0..200)
            .map(|k| {
                let t = 0.5 - 0.5 * 0.97f64.powi(k);
                let s = (2.0 * (0.5 - t)).powf(-0.5);
                SeriesRow {
                    t,
                    sup_norm: s,
                    weighted_sup: 0.0,
                    dt: 0.0,
                }
            })
            .collect();
        let fit = fit_blowup(&series, &params).unwrap();
        assert!((fit.t_est - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
