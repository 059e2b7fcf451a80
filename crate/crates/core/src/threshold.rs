//! Classification of runs and bisection for the threshold amplitude λ* along
//! a ray λφ of initial data.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by std inherent methods when std is in the build graph
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::evolution::{decay_diagnostics_over, solve, SolverConfig, Status, Trajectory};
use crate::field::RadialField;
use crate::morrey::{morrey_norm, MorreyLattice, MorreySpec};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassifyOptions {
    /// Decaying requires ‖u(t_end)‖_∞ < terminal_factor·‖u0‖_∞.
    pub terminal_factor: f64,
    /// Tail window for the monotonicity of t^{1/(p-1)}‖u‖_∞: t ≥ tail_fraction·t_end.
    pub tail_fraction: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            terminal_factor: 1e-2,
            tail_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Verdict {
    Decaying,
    Blowup { t_est: f64 },
    Undecided,
}

impl Verdict {
    pub fn is_decaying(&self) -> bool {
        matches!(self, Verdict::Decaying)
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Verdict::Blowup { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub trajectory: Trajectory,
}

/// Runs the solver and turns its status into a verdict.
///
/// Decaying means the horizon was reached with a monotone tail of
/// t^{1/(p-1)}‖u‖_∞ and a terminal sup norm below terminal_factor·‖u0‖_∞
/// (zero data is Decaying). Blowup comes from the solver status; anything
/// else is Undecided.
pub fn classify(
    u0: &RadialField,
    params: &ModelParams,
    cfg: &SolverConfig,
    opts: &ClassifyOptions,
) -> Result<Classification> {
    let trajectory = solve(u0, params, cfg)?;
    let verdict = verdict_of(&trajectory, u0, params, opts);
    Ok(Classification { verdict, trajectory })
}

fn verdict_of(traj: &Trajectory, u0: &RadialField, params: &ModelParams, opts: &ClassifyOptions) -> Verdict {
    match traj.status {
        Status::Blowup { t_est, .. } => Verdict::Blowup { t_est },
        Status::Aborted { .. } => Verdict::Undecided,
        Status::ReachedHorizon { .. } => {
            let s0 = u0.sup_norm();
            if s0 == 0.0 {
                return Verdict::Decaying;
            }
            let d = decay_diagnostics_over(traj, params, opts.tail_fraction);
            if d.tail_monotone && traj.final_field.sup_norm() < opts.terminal_factor * s0 {
                Verdict::Decaying
            } else {
                Verdict::Undecided
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trial {
    pub lambda: f64,
    pub verdict: Verdict,
    /// Last time reached by the run.
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Largest amplitude with a Decaying run.
    pub lambda_lo: f64,
    /// Smallest amplitude with a Blowup run.
    pub lambda_hi: f64,
    pub rel_width: f64,
    /// Every run in the order performed, the two initial endpoints first.
    pub trials: Vec<Trial>,
    /// (t, ‖u(t)‖_{M^{2,4/(p-1)}}) on t = 0 and the stored checkpoints.
    pub morrey_series_lo: Vec<(f64, f64)>,
    pub morrey_series_hi: Vec<(f64, f64)>,
    /// Undecided verdicts stopped the bisection before rel_tol was met.
    pub stalled: bool,
}

impl ThresholdResult {
    /// Verdicts on the ray are ordered: no Decaying run above a Blowup run.
    pub fn ray_consistent(&self) -> bool {
        let min_blow = self
            .trials
            .iter()
            .filter(|t| t.verdict.is_blowup())
            .map(|t| t.lambda)
            .fold(f64::INFINITY, f64::min);
        self.trials
            .iter()
            .filter(|t| t.verdict.is_decaying())
            .all(|t| t.lambda < min_blow)
    }

    /// T_est nonincreasing in λ over the Blowup trials, up to a relative slack.
    pub fn blowup_times_monotone(&self, slack: f64) -> bool {
        let mut blow: Vec<(f64, f64)> = self
            .trials
            .iter()
            .filter_map(|t| match t.verdict {
                Verdict::Blowup { t_est } => Some((t.lambda, t_est)),
                _ => None,
            })
            .collect();
        blow.sort_by(|a, b| a.0.total_cmp(&b.0));
        blow.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + slack))
    }

    /// The endpoints carry Decaying and Blowup verdicts.
    pub fn bracket_valid(&self) -> bool {
        let lo_ok = self
            .trials
            .iter()
            .any(|t| t.lambda == self.lambda_lo && t.verdict.is_decaying());
        let hi_ok = self
            .trials
            .iter()
            .any(|t| t.lambda == self.lambda_hi && t.verdict.is_blowup());
        lo_ok && hi_ok && self.lambda_lo < self.lambda_hi
    }
}

/// Bisection output together with the endpoint runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub result: ThresholdResult,
    pub lo_run: Trajectory,
    pub hi_run: Trajectory,
}

/// Morrey series of a run in M^{2,4/(p-1)}.
pub fn morrey_series(traj: &Trajectory, params: &ModelParams) -> Result<Vec<(f64, f64)>> {
    let spec = MorreySpec::critical(2.0, params.p)?;
    let mut out = Vec::with_capacity(traj.checkpoints.len() + 1);
    let mut push = |t: f64, f: &RadialField| -> Result<()> {
        let v = morrey_norm(f, spec, &MorreyLattice::default_for(f))?.value;
        out.push((t, v));
        Ok(())
    };
    push(0.0, &traj.initial)?;
    for cp in &traj.checkpoints {
        push(cp.t, &cp.field)?;
    }
    Ok(out)
}

/// Bisection in the amplitude of a family of data.
///
/// The endpoints of `bracket` must classify as Decaying and Blowup. When a
/// midpoint is Undecided the points at 1/4 and 3/4 of the bracket are tried;
/// if both are Undecided the bisection stops and reports `stalled`.
/// With `with_series` the Morrey series of the two endpoint runs are computed.
pub fn bisect_family(
    family: &dyn Fn(f64) -> Result<RadialField>,
    params: &ModelParams,
    cfg: &SolverConfig,
    opts: &ClassifyOptions,
    bracket: (f64, f64),
    rel_tol: f64,
    with_series: bool,
) -> Result<BisectionOutcome> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && rel_tol > 0.0) {
        return Err(invalid("bracket", "need 0 < lo < hi and rel_tol > 0"));
    }
    let mut trials = Vec::new();
    let run = |lambda: f64, trials: &mut Vec<Trial>| -> Result<Classification> {
        let c = classify(&family(lambda)?, params, cfg, opts)?;
        trials.push(Trial {
            lambda,
            verdict: c.verdict,
            horizon: c.trajectory.last_time(),
        });
        Ok(c)
    };
    let lo_c = run(lo, &mut trials)?;
    if !lo_c.verdict.is_decaying() {
        return Err(Error::Precondition(alloc::format!(
            "lower endpoint {lo} is not Decaying"
        )));
    }
    let hi_c = run(hi, &mut trials)?;
    if !hi_c.verdict.is_blowup() {
        return Err(Error::Precondition(alloc::format!("upper endpoint {hi} is not Blowup")));
    }
    let (mut lo_run, mut hi_run) = (lo_c.trajectory, hi_c.trajectory);
    let mut stalled = false;
    while (hi - lo) / lo >= rel_tol {
        let mut moved = false;
        for frac in [0.5, 0.25, 0.75] {
            let mid = lo + frac * (hi - lo);
            let c = run(mid, &mut trials)?;
            match c.verdict {
                Verdict::Decaying => {
                    lo = mid;
                    lo_run = c.trajectory;
                }
                Verdict::Blowup { .. } => {
                    hi = mid;
                    hi_run = c.trajectory;
                }
                Verdict::Undecided => continue,
            }
            moved = true;
            break;
        }
        if !moved {
            stalled = true;
            break;
        }
    }
    let (morrey_series_lo, morrey_series_hi) = if with_series {
        (morrey_series(&lo_run, params)?, morrey_series(&hi_run, params)?)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(BisectionOutcome {
        result: ThresholdResult {
            lambda_lo: lo,
            lambda_hi: hi,
            rel_width: (hi - lo) / lo,
            trials,
            morrey_series_lo,
            morrey_series_hi,
            stalled,
        },
        lo_run,
        hi_run,
    })
}

/// Bisection along the ray λφ, with Morrey series at both endpoints.
pub fn bisect_lambda(
    phi: &RadialField,
    params: &ModelParams,
    cfg: &SolverConfig,
    opts: &ClassifyOptions,
    bracket: (f64, f64),
    rel_tol: f64,
) -> Result<ThresholdResult> {
    let family = |l: f64| phi.scaled(l);
    Ok(bisect_family(&family, params, cfg, opts, bracket, rel_tol, true)?.result)
}

/// Finds amplitudes (lo, hi) with Decaying and Blowup verdicts by doubling
/// and halving from `start`.
pub fn find_bracket(
    phi: &RadialField,
    params: &ModelParams,
    cfg: &SolverConfig,
    opts: &ClassifyOptions,
    start: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    if !(start > 0.0) || phi.sup_norm() == 0.0 {
        return Err(invalid("phi", "need nontrivial data and a positive start"));
    }
    let verdict = |l: f64| -> Result<Verdict> { Ok(classify(&phi.scaled(l)?, params, cfg, opts)?.verdict) };
    let first = verdict(start)?;
    let (mut lo, mut hi) = (None, None);
    match first {
        Verdict::Decaying => lo = Some(start),
        Verdict::Blowup { .. } => hi = Some(start),
        Verdict::Undecided => {}
    }
    let (mut up, mut down) = (start, start);
    for _ in 0..max_steps {
        if let (Some(l), Some(h)) = (lo, hi) {
            return Ok((l, h));
        }
        if hi.is_none() {
            up *= 2.0;
            match verdict(up)? {
                Verdict::Blowup { .. } => hi = Some(up),
                Verdict::Decaying => lo = Some(up),
                Verdict::Undecided => {}
            }
        }
        if lo.is_none() {
            down *= 0.5;
            match verdict(down)? {
                Verdict::Decaying => lo = Some(down),
                Verdict::Blowup { .. } => hi = Some(down),
                Verdict::Undecided => {}
            }
        }
    }
    match (lo, hi) {
        (Some(l), Some(h)) => Ok((l, h)),
        _ => Err(Error::Precondition("no Decaying/Blowup bracket found".into())),
    }
}

/// A run slightly below (δ > 0) or above (δ < 0) the bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderlineProbe {
    pub delta: f64,
    pub lambda: f64,
    pub verdict: Verdict,
    /// Start of the final monotone decrease of t^{1/(p-1)}‖u(t)‖_∞ (Decaying runs only).
    pub t0: Option<f64>,
    pub morrey_series: Vec<(f64, f64)>,
    /// Morrey norm at the last checkpoint below its value at t = 1.
    pub morrey_decreasing: Option<bool>,
}

/// Time where the final monotone decrease of t^{1/(p-1)}‖u‖_∞ begins.
pub fn final_decrease_onset(traj: &Trajectory, params: &ModelParams) -> Option<f64> {
    let rows = &traj.series;
    if rows.len() < 2 {
        return None;
    }
    let w = |i: usize| rows[i].t.powf(params.beta) * rows[i].sup_norm;
    let mut i = rows.len() - 1;
    while i > 0 && w(i - 1) >= w(i) {
        i -= 1;
    }
    Some(rows[i].t)
}

/// Runs λ = lambda_lo·(1 - δ) for each δ; requires a bracket narrower than 1e-2.
pub fn borderline_probe(
    result: &ThresholdResult,
    phi: &RadialField,
    params: &ModelParams,
    cfg: &SolverConfig,
    opts: &ClassifyOptions,
    deltas: &[f64],
) -> Result<Vec<BorderlineProbe>> {
    if !(result.rel_width < 1e-2) {
        return Err(Error::Precondition("bracket width must be below 1e-2".into()));
    }
    deltas
        .iter()
        .map(|&delta| {
            let lambda = result.lambda_lo * (1.0 - delta);
            let c = classify(&phi.scaled(lambda)?, params, cfg, opts)?;
            let morrey = morrey_series(&c.trajectory, params)?;
            let at_one = morrey.iter().find(|(t, _)| (t - 1.0).abs() < 1e-9).map(|p| p.1);
            let morrey_decreasing = match (at_one, morrey.last()) {
                (Some(v1), Some(&(t, v))) if c.verdict.is_decaying() && t > 1.0 => Some(v < v1),
                _ => None,
            };
            Ok(BorderlineProbe {
                delta,
                lambda,
                verdict: c.verdict,
                t0: if c.verdict.is_decaying() {
                    final_decrease_onset(&c.trajectory, params)
                } else {
                    None
                },
                morrey_series: morrey,
                morrey_decreasing,
            })
        })
        .collect()
}
