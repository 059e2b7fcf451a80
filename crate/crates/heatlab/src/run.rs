//! Experiment pipelines: each turns a validated config into a [`Bundle`].

use heatlab_core::duhamel::{continuous_dependence, picard_solve};
use heatlab_core::evolution::{
    decay_diagnostics, estimate_blowup_time, linear_domination, solve, SolverConfig, Status, Trajectory,
};
use heatlab_core::hypotheses::check_hypotheses;
use heatlab_core::math::logspace;
use heatlab_core::morrey::{morrey_cells, morrey_norm, smoothing_profile, Exponent, MorreyLattice, MorreySpec};
use heatlab_core::quadrature::ball_integral;
use heatlab_core::similarity::{checkpoint_times, energy_series, stationary_energy, uniform_s_grid};
use heatlab_core::threshold::{bisect_lambda, borderline_probe, find_bracket, ThresholdResult, Verdict};
use heatlab_core::RadialField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    DependenceOptions, EnergyOptions, Experiment, ExperimentConfig, MorreyOptions, PicardExperiment, SmoothingOptions,
    SolveOptions, ThresholdOptions,
};
use crate::output::{Bundle, Csv};

/// A module error raised inside a pipeline stage.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: heatlab_core::Error,
}

type Result<T> = std::result::Result<T, PipelineError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for heatlab_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Runs the pipeline named by the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Bundle> {
    let mut bundle = match &config.experiment {
        Experiment::Solve(o) => run_solve(config, o),
        Experiment::Morrey(o) => run_morrey(config, o),
        Experiment::Smoothing(o) => run_smoothing(config, o),
        Experiment::Energy(o) => run_energy(config, o),
        Experiment::Picard(o) => run_picard(config, o),
        Experiment::Threshold(o) => run_threshold(config, o),
        Experiment::Dependence(o) => run_dependence(config, o),
        Experiment::Hypotheses(_) => run_hypotheses(config),
    }?;
    bundle.report("seed", config.seed);
    debug_assert!(unique_invariants(&bundle));
    Ok(bundle)
}

fn unique_invariants(b: &Bundle) -> bool {
    let mut names: Vec<&str> = b.invariants.iter().map(|i| i.name.as_str()).collect();
    names.sort_unstable();
    names.windows(2).all(|w| w[0] != w[1])
}

fn status_json(status: &Status) -> Value {
    match *status {
        Status::ReachedHorizon { t_end } => json!({"kind": "reached_horizon", "t_end": t_end}),
        Status::Blowup { t_est, fit_quality } => json!({"kind": "blowup", "t_est": t_est, "fit_quality": fit_quality}),
        Status::Aborted { reason, t } => json!({"kind": "aborted", "reason": format!("{reason:?}"), "t": t}),
    }
}

fn verdict_json(v: &Verdict) -> (&'static str, Option<f64>) {
    match *v {
        Verdict::Decaying => ("decaying", None),
        Verdict::Blowup { t_est } => ("blowup", Some(t_est)),
        Verdict::Undecided => ("undecided", None),
    }
}

fn field_csv(f: &RadialField) -> Csv {
    let mut csv = Csv::new(&["r", "u"]);
    for (r, &u) in f.grid().nodes().zip(f.values()) {
        csv.row(&[r, u]);
    }
    csv
}

fn series_csv(traj: &Trajectory) -> Csv {
    let mut csv = Csv::new(&["t", "sup_norm", "weighted_sup", "dt"]);
    for r in &traj.series {
        csv.row(&[r.t, r.sup_norm, r.weighted_sup, r.dt]);
    }
    csv
}

fn pairs_csv(header: [&str; 2], pairs: &[(f64, f64)]) -> Csv {
    let mut csv = Csv::new(&header);
    for &(x, y) in pairs {
        csv.row(&[x, y]);
    }
    csv
}

fn stored_fields(traj: &Trajectory) -> impl Iterator<Item = &RadialField> {
    traj.checkpoints
        .iter()
        .map(|c| &c.field)
        .chain(std::iter::once(&traj.final_field))
}

fn report_trajectory(bundle: &mut Bundle, traj: &Trajectory, config: &ExperimentConfig) {
    let params = config.model();
    bundle.report("status", status_json(&traj.status));
    if traj.reached_horizon() {
        let d = decay_diagnostics(traj, &params);
        bundle.report(
            "decay",
            json!({"slope": d.slope, "sup_t_beta_norm": d.sup_t_beta_norm, "tail_monotone": d.tail_monotone}),
        );
    }
    match estimate_blowup_time(traj, &params) {
        Ok(fit) => bundle.report(
            "blowup_fit",
            json!({"t_est": fit.t_est, "r_squared": fit.r_squared, "samples": fit.samples}),
        ),
        Err(why) => bundle.report("blowup_fit", format!("{why:?}")),
    }
}

fn run_solve(config: &ExperimentConfig, o: &SolveOptions) -> Result<Bundle> {
    let params = config.model();
    let u0 = config.initial_field();
    let cfg = &config.solver;
    let (traj, mirror) = if o.check_symmetry {
        let neg = u0.scaled(-1.0).stage("solve")?;
        let (a, b) = rayon::join(|| solve(&u0, &params, cfg), || solve(&neg, &params, cfg));
        (a.stage("solve")?, Some(b.stage("solve")?))
    } else {
        (solve(&u0, &params, cfg).stage("solve")?, None)
    };
    let mut bundle = Bundle::default();
    bundle.csv("series.csv", series_csv(&traj));
    for (i, cp) in traj.checkpoints.iter().enumerate() {
        bundle.csv(format!("checkpoint_{i:03}.csv"), field_csv(&cp.field));
    }
    bundle.report(
        "checkpoint_times",
        traj.checkpoints.iter().map(|c| c.t).collect::<Vec<_>>(),
    );
    bundle.plot_series("sup_norm", traj.series.iter().map(|r| (r.t, r.sup_norm)));
    bundle.plot_series("weighted_sup", traj.series.iter().map(|r| (r.t, r.weighted_sup)));
    report_trajectory(&mut bundle, &traj, config);
    if traj.checkpoints.iter().any(|c| c.t > 0.0) {
        bundle.report(
            "linear_domination",
            linear_domination(&traj, &u0).stage("linear domination")?,
        );
    }

    if u0.values().iter().all(|&v| v >= 0.0) {
        let lowest = stored_fields(&traj)
            .flat_map(|f| f.values().iter().copied())
            .fold(0.0f64, f64::min);
        bundle.check("positivity", lowest, -o.positivity_tol * u0.sup_norm(), true);
    }
    if let Some(mirror) = mirror {
        let mut gap = 0.0f64;
        for (a, b) in stored_fields(&traj).zip(stored_fields(&mirror)) {
            for (x, y) in a.values().iter().zip(b.values()) {
                gap = gap.max((x + y).abs());
            }
        }
        for (a, b) in traj.series.iter().zip(&mirror.series) {
            gap = gap.max((a.sup_norm - b.sup_norm).abs()).max((a.t - b.t).abs());
        }
        if traj.series.len() != mirror.series.len() {
            gap = f64::INFINITY;
        }
        bundle.check("sign_symmetry", gap, 0.0, false);
    }
    Ok(bundle)
}

fn run_morrey(config: &ExperimentConfig, o: &MorreyOptions) -> Result<Bundle> {
    let params = config.model();
    let f = config.initial_field();
    let lambda = o.lambda.unwrap_or_else(|| params.critical_lambda(o.q));
    let spec = MorreySpec::new(o.q, lambda).stage("morrey spec")?;
    let lattice = MorreyLattice::refined(&f, o.lattice_level);
    let est = morrey_norm(&f, spec, &lattice).stage("morrey norm")?;
    let mut bundle = Bundle::default();
    bundle.json(
        "morrey.json",
        &json!({
            "q": o.q, "lambda": lambda, "value": est.value, "lattice_value": est.lattice_value,
            "argmax_a": est.argmax_a, "argmax_r": est.argmax_r, "truncated": est.truncated,
        }),
    );
    if o.cells {
        let mut csv = Csv::new(&["a", "R", "value"]);
        for c in morrey_cells(&f, spec, &lattice).stage("morrey cells")? {
            csv.row(&[c.a, c.radius, c.value]);
        }
        bundle.csv("cells.csv", csv);
    }
    bundle.report("morrey_norm", est.value);
    bundle.report("truncated", est.truncated);

    let powered = f.abs_pow(o.q).stage("power identity")?;
    let linear = morrey_norm(&powered, MorreySpec::new(1.0, lambda).stage("morrey spec")?, &lattice)
        .stage("power identity")?
        .value;
    let qth = est.value.powf(o.q);
    let mismatch = if qth > 0.0 {
        (linear - qth).abs() / qth
    } else {
        linear.abs()
    };
    bundle.check("power_identity", mismatch, 1e-12, false);

    if o.random_probes > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let grid = f.grid();
        let (h, r_max) = (grid.spacing(), grid.r_max());
        let mut best = 0.0f64;
        for _ in 0..o.random_probes {
            let a = rng.gen_range(0.0..r_max);
            let radius = h * (2.0 * r_max / h).powf(rng.gen::<f64>());
            let b = ball_integral(&f, o.q, a, radius).stage("random probe")?;
            best = best.max(radius.powf(lambda - params.n as f64) * b.value);
        }
        let ratio = if qth > 0.0 { best / qth } else { best };
        bundle.check("random_probe_bound", ratio, 1.0 + 1e-3, false);
    }
    Ok(bundle)
}

fn run_smoothing(config: &ExperimentConfig, o: &SmoothingOptions) -> Result<Bundle> {
    let params = config.model();
    let f = config.initial_field();
    let lambda = o.lambda.unwrap_or_else(|| params.critical_lambda(o.from_q));
    let to_q = o.to_q.map_or(Exponent::Infinity, Exponent::Finite);
    let ts = logspace(o.t_min, o.t_max, o.count);
    let lattice = MorreyLattice::default_for(&f);
    let samples = smoothing_profile(&f, o.from_q, to_q, lambda, &ts, &lattice).stage("smoothing")?;
    let mut bundle = Bundle::default();
    let mut csv = Csv::new(&["t", "ratio", "contraction"]);
    for s in &samples {
        csv.row(&[s.t, s.ratio, s.contraction]);
    }
    bundle.csv("smoothing.csv", csv);
    bundle.plot_series("ratio", samples.iter().map(|s| (s.t, s.ratio)));
    bundle.plot_series("contraction", samples.iter().map(|s| (s.t, s.contraction)));
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let max_contraction = samples.iter().map(|s| s.contraction).fold(0.0, f64::max);
    bundle.report("smoothing_constant", max_ratio);
    bundle.report("lambda", lambda);
    bundle.check("contraction", max_contraction, 1.0 + 1e-6, false);
    Ok(bundle)
}

fn label(x: f64) -> String {
    format!("{x}")
}

fn run_energy(config: &ExperimentConfig, o: &EnergyOptions) -> Result<Bundle> {
    let params = config.model();
    let u0 = config.initial_field();
    let grids: Vec<(f64, Vec<f64>)> = o.times.iter().map(|&t| (t, uniform_s_grid(t, o.ds, o.count))).collect();
    let mut cfg = config.solver.clone();
    for (t, s) in &grids {
        cfg.checkpoints
            .extend(checkpoint_times(*t, s).stage("checkpoint times")?);
    }
    cfg.checkpoints.retain(|&t| t > 0.0);
    cfg.checkpoints.sort_by(f64::total_cmp);
    cfg.checkpoints.dedup();
    if let Some(&last) = cfg.checkpoints.last() {
        cfg.t_end = cfg.t_end.max(last);
    }
    let traj = solve(&u0, &params, &cfg).stage("solve")?;
    let series = grids
        .par_iter()
        .map(|(t, s)| energy_series(&traj, *t, &params, s, o.similarity))
        .collect::<heatlab_core::Result<Vec<_>>>()
        .stage("energy series")?;

    let mut bundle = Bundle::default();
    report_trajectory(&mut bundle, &traj, config);
    bundle.report("stationary_energy", stationary_energy(&params));
    let mut constants = serde_json::Map::new();
    for e in &series {
        let t = label(e.big_t);
        let mut csv = Csv::new(&["s", "E", "m", "residual_identity"]);
        for s in &e.samples {
            csv.row(&[s.s, s.parts.energy, s.parts.mass, s.residual.unwrap_or(f64::NAN)]);
        }
        bundle.csv(format!("energy_T{t}.csv"), csv);
        bundle.plot_series(&format!("E[T={t}]"), e.samples.iter().map(|s| (s.s, s.parts.energy)));
        bundle.plot_series(&format!("m[T={t}]"), e.samples.iter().map(|s| (s.s, s.parts.mass)));
        bundle.check(
            format!("energy_monotone[T={t}]"),
            e.monotonicity_violations as f64,
            0.0,
            false,
        );
        bundle.check(format!("energy_nonnegative[T={t}]"), e.min_energy, -1e-6, true);
        bundle.check(
            format!("identity_residual[T={t}]"),
            e.max_residual,
            o.residual_tol,
            false,
        );
        constants.insert(
            t.clone(),
            json!({"mass_bound_constant": e.mass_bound_constant, "truncated": e.truncated}),
        );
    }
    bundle.report("per_T", Value::Object(constants));
    Ok(bundle)
}

fn run_picard(config: &ExperimentConfig, o: &PicardExperiment) -> Result<Bundle> {
    let params = config.model();
    let u0 = config.initial_field();
    let t_end = config.solver.t_end;
    let run = picard_solve(&u0, &params, t_end, o.k_max, &o.sample_times, &o.picard).stage("picard")?;
    let mut bundle = Bundle::default();
    let mut csv = Csv::new(&["t", "budget_r", "budget_inf", "cauchy_diff"]);
    for b in &run.budget {
        csv.row(&[b.t, b.budget_r, b.budget_inf, b.cauchy_diff]);
    }
    bundle.csv("budget.csv", csv);
    for (i, cp) in run.checkpoints.iter().enumerate() {
        bundle.csv(format!("picard_{i:03}.csv"), field_csv(&cp.field));
    }
    bundle.plot_series(
        "cauchy_max",
        run.cauchy_max.iter().enumerate().map(|(k, &d)| ((k + 1) as f64, d)),
    );
    bundle.plot_series("budget_inf", run.budget.iter().map(|b| (b.t, b.budget_inf)));
    bundle.report("status", run.status);
    bundle.report("iterations", run.iterations);
    bundle.report("convergence_ratio", run.convergence_ratio);
    bundle.report("time_steps", run.time_steps);
    bundle.report("quadrature_change", run.quadrature_change);
    bundle.report("time_grid_saturated", run.time_grid_saturated);
    bundle.report("aux_exponent", run.aux_exponent);

    if let Some(tol) = o.compare_tol {
        let mut cfg = config.solver.clone();
        cfg.checkpoints.extend(o.sample_times.iter().copied());
        cfg.checkpoints.sort_by(f64::total_cmp);
        cfg.checkpoints.dedup();
        let traj = solve(&u0, &params, &cfg).stage("solve")?;
        let mut worst = 0.0f64;
        for &t in &o.sample_times {
            worst = match (run.field_at(t), traj.field_at(t)) {
                (Some(a), Some(b)) => {
                    let d = a.difference(b).stage("compare")?.sup_norm();
                    let scale = b.sup_norm();
                    worst.max(if scale > 0.0 { d / scale } else { d })
                }
                _ => f64::INFINITY,
            };
        }
        bundle.check("mild_classical_agreement", worst, tol, false);
    }
    Ok(bundle)
}

fn threshold_json(res: &ThresholdResult) -> Value {
    let trials: Vec<Value> = res
        .trials
        .iter()
        .map(|t| {
            let (verdict, t_est) = verdict_json(&t.verdict);
            let mut v = json!({"lambda": t.lambda, "verdict": verdict, "horizon": t.horizon});
            if let Some(te) = t_est {
                v["T_est"] = json!(te);
            }
            v
        })
        .collect();
    json!({
        "lambda_lo": res.lambda_lo,
        "lambda_hi": res.lambda_hi,
        "rel_width": res.rel_width,
        "stalled": res.stalled,
        "trials": trials,
        "morrey_series_lo": res.morrey_series_lo,
        "morrey_series_hi": res.morrey_series_hi,
    })
}

fn threshold_solver(config: &ExperimentConfig) -> SolverConfig {
    let mut cfg = config.solver.clone();
    if cfg.checkpoints.is_empty() {
        let first = 0.01_f64.min(cfg.t_end);
        cfg = cfg.log_checkpoints(first, 9);
        if cfg.t_end > 1.0 {
            cfg.checkpoints.push(1.0);
        }
        cfg.checkpoints.sort_by(f64::total_cmp);
        cfg.checkpoints.dedup();
    }
    cfg
}

fn run_threshold(config: &ExperimentConfig, o: &ThresholdOptions) -> Result<Bundle> {
    let params = config.model();
    let phi = config.initial_field();
    let cfg = threshold_solver(config);
    let bracket = match o.bracket {
        Some(b) => b,
        None => find_bracket(&phi, &params, &cfg, &o.classify, o.start, o.max_steps).stage("bracket search")?,
    };
    let res = bisect_lambda(&phi, &params, &cfg, &o.classify, bracket, o.rel_tol).stage("bisection")?;

    let mut bundle = Bundle::default();
    bundle.json("threshold.json", &threshold_json(&res));
    bundle.csv("morrey_lo.csv", pairs_csv(["t", "morrey"], &res.morrey_series_lo));
    bundle.csv("morrey_hi.csv", pairs_csv(["t", "morrey"], &res.morrey_series_hi));
    bundle.plot_series("morrey_lo", res.morrey_series_lo.iter().copied());
    bundle.plot_series("morrey_hi", res.morrey_series_hi.iter().copied());
    bundle.check_flag("bracket_valid", res.bracket_valid());
    bundle.check_flag("ray_consistent", res.ray_consistent());
    bundle.check_flag("blowup_times_monotone", res.blowup_times_monotone(o.blowup_time_slack));
    bundle.check("bracket_width", res.rel_width, o.rel_tol, false);

    if res.rel_width < 1e-2 && !o.deltas.is_empty() {
        let probes = o
            .deltas
            .par_iter()
            .map(|&d| borderline_probe(&res, &phi, &params, &cfg, &o.classify, &[d]))
            .collect::<heatlab_core::Result<Vec<_>>>()
            .stage("borderline probes")?;
        let mut rows = Vec::new();
        for p in probes.into_iter().flatten() {
            let (verdict, t_est) = verdict_json(&p.verdict);
            rows.push(json!({
                "delta": p.delta, "lambda": p.lambda, "verdict": verdict, "T_est": t_est,
                "t0": p.t0, "morrey_decreasing": p.morrey_decreasing, "morrey_series": p.morrey_series,
            }));
            if p.delta > 0.0 {
                let d = label(p.delta);
                bundle.check_flag(format!("probe_decaying[delta={d}]"), p.verdict.is_decaying());
                bundle.check_flag(
                    format!("probe_morrey_decay[delta={d}]"),
                    p.morrey_decreasing == Some(true),
                );
            }
        }
        bundle.json("probes.json", &Value::Array(rows));
    } else {
        bundle.report("probes", "skipped: bracket wider than 1e-2");
    }
    Ok(bundle)
}

fn run_dependence(config: &ExperimentConfig, o: &DependenceOptions) -> Result<Bundle> {
    let params = config.model();
    let u0 = config.initial_field();
    let spec = MorreySpec::critical(o.q, params.p).stage("morrey spec")?;
    let mut cfg = config.solver.clone();
    if cfg.checkpoints.is_empty() {
        cfg.checkpoints = logspace(0.01_f64.min(o.t0), o.t0, 12);
    }
    let runs = o
        .perturbations
        .par_iter()
        .map(|&d| {
            let v0 = u0.scaled(1.0 + d)?;
            continuous_dependence(&u0, &v0, o.t0, &params, spec, &cfg)
        })
        .collect::<heatlab_core::Result<Vec<_>>>()
        .stage("continuous dependence")?;

    let mut bundle = Bundle::default();
    let mut csv = Csv::new(&["delta", "t", "ratio"]);
    let mut maxima = Vec::new();
    for (&d, s) in o.perturbations.iter().zip(&runs) {
        for x in &s.samples {
            csv.row(&[d, x.t, x.ratio]);
        }
        let l = label(d);
        bundle.plot_series(&format!("ratio[delta={l}]"), s.samples.iter().map(|x| (x.t, x.ratio)));
        bundle.check_flag(format!("run_completed[delta={l}]"), s.failure.is_none());
        let initial = s.samples.first().map_or(f64::NAN, |x| x.ratio);
        bundle.check(format!("initial_ratio[delta={l}]"), initial, 1.0 - 1e-9, true);
        maxima.push(s.max_ratio);
    }
    bundle.csv("dependence.csv", csv);
    let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    bundle.report("max_ratio", &maxima);
    bundle.check("lipschitz_stability", hi / lo - 1.0, o.variation_tol, false);
    Ok(bundle)
}

fn run_hypotheses(config: &ExperimentConfig) -> Result<Bundle> {
    let params = config.model();
    let f = config.initial_field();
    let grad = config.initial_gradient().stage("gradient")?;
    let report = check_hypotheses(&f, &grad, &params).stage("hypotheses")?;
    let mut bundle = Bundle::default();
    bundle.json(
        "hypotheses.json",
        &serde_json::to_value(&report).expect("report serializes"),
    );
    bundle.plot_series("kernel_trend", report.kernel_trend.iter().copied());
    for (name, c) in report.conditions() {
        bundle.report(name, c);
    }
    Ok(bundle)
}
