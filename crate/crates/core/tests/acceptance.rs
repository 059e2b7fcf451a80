//! Acceptance suite for the default regime n = 5, p = 3.
//!
//! Runs every criterion on its own thread and prints one PASS/FAIL line per
//! criterion. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use heatlab_core::duhamel::{continuous_dependence, picard_solve, PicardOptions};
use heatlab_core::evolution::{
    decay_diagnostics, discrete_rhs, estimate_blowup_time, gradient_majorant_check, solve, SolverConfig, Trajectory,
};
use heatlab_core::field::rescale_field;
use heatlab_core::math::{ball_volume, logspace};
use heatlab_core::morrey::{morrey_norm, smoothing_profile, Exponent, MorreyLattice, MorreySpec};
use heatlab_core::quadrature::gauss_convolve;
use heatlab_core::similarity::{
    checkpoint_times, energy_series, functional_n, stationary_energy, uniform_s_grid, SimilarityGrid,
};
use heatlab_core::threshold::{bisect_lambda, borderline_probe, find_bracket, ClassifyOptions, Verdict};
use heatlab_core::{Boundary, ModelParams, Profile, RadialField, RadialGrid};

type Outcome = Result<(bool, String), heatlab_core::Error>;

/// (criterion number, name, outcome, seconds)
type Row = (usize, &'static str, Outcome, f64);
type Job = (usize, &'static str, fn() -> Outcome);

fn params() -> ModelParams {
    ModelParams::new(5, 3.0).unwrap()
}

fn grid(r_max: f64, intervals: usize) -> RadialGrid {
    RadialGrid::new(5, r_max, intervals).unwrap()
}

fn sample(profile: Profile, g: RadialGrid) -> RadialField {
    profile.sample(g, &params(), Boundary::DirichletAtRmax).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn heat_kernel(t: f64, r: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-2.5) * (-r * r / (4.0 * t)).exp()
}

fn kernel_semigroup() -> Outcome {
    let g = grid(30.0, 3000);
    let g1 = RadialField::from_fn(g, Boundary::EvenAtOriginOnly, |r| heat_kernel(1.0, r))?;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let a = 8.0 * i as f64 / 49.0;
        worst = worst.max(rel(gauss_convolve(&g1, 1.0, a)?, heat_kernel(2.0, a)));
    }
    Ok((worst < 1e-6, format!("max rel err {worst:.2e} over a in [0, 8]")))
}

fn kernel_contraction() -> Outcome {
    let g = grid(20.0, 400);
    let ts = logspace(1e-2, 1e2, 20);
    let mut worst = 0.0f64;
    for f in [
        sample(Profile::indicator(1.0), g),
        sample(Profile::gaussian(1.0, 2.0), g),
    ] {
        let lattice = MorreyLattice::default_for(&f);
        for lambda in [1.0, 2.0, 5.0] {
            for s in smoothing_profile(&f, 2.0, Exponent::Finite(2.0), lambda, &ts, &lattice)? {
                worst = worst.max(s.contraction);
            }
        }
    }
    Ok((worst <= 1.0 + 1e-6, format!("max ratio {worst:.9}")))
}

fn morrey_oracle() -> Outcome {
    let mut worst_ind = 0.0f64;
    for n in [3, 5] {
        let params = ModelParams::new(n, 3.0)?;
        let g = RadialGrid::new(n, 4.0, 400)?;
        let f = Profile::indicator(1.0).sample(g, &params, Boundary::DirichletAtRmax)?;
        let exact = ball_volume(n).sqrt();
        for level in 0..=2 {
            let est = morrey_norm(&f, MorreySpec::new(2.0, 1.0)?, &MorreyLattice::refined(&f, level))?;
            worst_ind = worst_ind.max(rel(est.value, exact));
        }
    }
    let params = params();
    let g = grid(40.0, 4000);
    let l = params.singular_steady_coefficient().unwrap();
    let f = sample(Profile::SingularSteadyState, g).scaled(1.0 / l)?;
    let lambda = 2.0;
    let exact = (5.0 * ball_volume(5) / (5.0 - lambda)).sqrt();
    let est = morrey_norm(&f, MorreySpec::new(2.0, lambda)?, &MorreyLattice::default_for(&f))?;
    let power = rel(est.value, exact);
    Ok((
        worst_ind < 0.02 && power < 0.03,
        format!("indicator max rel err {worst_ind:.2e}, r^-1 profile rel err {power:.2e}"),
    ))
}

fn scaling_invariance() -> Outcome {
    let params = params();
    let spec = MorreySpec::critical(2.0, params.p)?;
    let g = grid(40.0, 4000);
    let mut worst = 0.0f64;
    for profile in [Profile::gaussian(1.0, 2.0), Profile::power_tail(1.0, 2.0, 1.0)] {
        let f = sample(profile, g);
        let base = morrey_norm(&f, spec, &MorreyLattice::default_for(&f))?.value;
        for lambda in [0.5, 2.0] {
            let h = rescale_field(&f, lambda, &params)?;
            let v = morrey_norm(&h, spec, &MorreyLattice::default_for(&h))?.value;
            worst = worst.max(rel(v, base));
        }
    }
    Ok((worst < 0.01, format!("max rel change {worst:.2e}")))
}

fn power_identity() -> Outcome {
    let g = grid(20.0, 1000);
    let mut worst = 0.0f64;
    for profile in [
        Profile::gaussian(1.0, 2.0),
        Profile::power_tail(1.0, 2.0, 1.0),
        Profile::indicator(1.0),
    ] {
        let f = sample(profile, g);
        let f2 = f.abs_pow(2.0)?;
        for lambda in [1.0, 2.0, 5.0] {
            let a = morrey_norm(&f2, MorreySpec::new(1.0, lambda)?, &MorreyLattice::default_for(&f2))?.value;
            let b = morrey_norm(&f, MorreySpec::new(2.0, lambda)?, &MorreyLattice::default_for(&f))?.value;
            worst = worst.max(rel(a, b * b));
        }
    }
    Ok((worst <= 1e-12, format!("max rel mismatch {worst:.2e}")))
}

fn ode_blowup() -> Outcome {
    let params = params();
    let g = grid(40.0, 800);
    let mut pass = true;
    let mut detail = Vec::new();
    for amp in [1.0f64, 2.0] {
        let exact = 1.0 / ((params.p - 1.0) * amp.powf(params.p - 1.0));
        let traj = solve(
            &sample(Profile::plateau(amp, 15.0, 2.0), g),
            &params,
            &SolverConfig::with_horizon(10.0),
        )?;
        match estimate_blowup_time(&traj, &params) {
            Ok(fit) => {
                let e = rel(fit.t_est, exact);
                pass &= e < 0.02 && fit.r_squared > 0.999;
                detail.push(format!(
                    "A={amp}: T_est {:.6} (rel {e:.1e}, R² {:.7})",
                    fit.t_est, fit.r_squared
                ));
            }
            Err(why) => {
                pass = false;
                detail.push(format!("A={amp}: no fit ({why:?})"));
            }
        }
    }
    Ok((pass, detail.join("; ")))
}

fn steady_state_residual() -> Outcome {
    let params = params();
    let mut rels = Vec::new();
    for m in [4000, 8000] {
        let g = grid(40.0, m);
        let u = sample(Profile::SingularSteadyState, g);
        let res = discrete_rhs(&u, &params)?;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (i, r) in g.nodes().enumerate() {
            if (0.5..=20.0).contains(&r) {
                num = num.max(res.values()[i].abs());
                den = den.max(u.values()[i].powf(params.p));
            }
        }
        rels.push(num / den);
    }
    let order = rels[0] / rels[1];
    Ok((
        rels[0] < 1e-3 && (3.0..=5.0).contains(&order),
        format!(
            "rel residual {:.2e} (M=4000), {:.2e} (M=8000), ratio {order:.2}",
            rels[0], rels[1]
        ),
    ))
}

const ENERGY_TIMES: [f64; 3] = [2.0, 5.0, 10.0];
const CHAIN_TIMES: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

fn small_gaussian_run(
    h: f64,
    with_energy: bool,
) -> Result<(RadialField, RadialField, Trajectory), heatlab_core::Error> {
    let params = params();
    let g = grid(40.0, (40.0 / h).round() as usize);
    let profile = Profile::gaussian(0.1, 6.0);
    let u0 = sample(profile, g);
    let grad = profile.gradient(g, &params)?;
    let mut times = CHAIN_TIMES.to_vec();
    if with_energy {
        for big_t in ENERGY_TIMES {
            times.extend(checkpoint_times(big_t, &uniform_s_grid(big_t, 0.01, 301))?);
        }
    }
    times.retain(|&t| t > 0.0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cfg = SolverConfig::with_horizon(10.0);
    cfg.checkpoints = times;
    let traj = solve(&u0, &params, &cfg)?;
    Ok((u0, grad, traj))
}

fn energy_laws(traj: &Trajectory) -> Outcome {
    let params = params();
    let mut pass = true;
    let mut detail = Vec::new();
    for big_t in ENERGY_TIMES {
        let series = energy_series(
            traj,
            big_t,
            &params,
            &uniform_s_grid(big_t, 0.01, 301),
            SimilarityGrid::default(),
        )?;
        pass &= series.monotonicity_violations == 0 && series.min_energy >= -1e-6 && series.max_residual < 1e-3;
        detail.push(format!(
            "T={big_t}: violations {}, min E {:.2e}, residual {:.2e}",
            series.monotonicity_violations, series.min_energy, series.max_residual
        ));
    }

    // constant plateau data blows up at the ODE time, where w is the constant state
    let g = grid(40.0, 800);
    let big_t = 0.5;
    let s_grid = uniform_s_grid(big_t, 0.01, 601);
    let times = checkpoint_times(big_t, &s_grid)?;
    let mut cfg = SolverConfig::with_horizon(*times.last().unwrap());
    cfg.checkpoints = times.into_iter().filter(|&t| t > 0.0).collect();
    let traj = solve(&sample(Profile::plateau(1.0, 15.0, 2.0), g), &params, &cfg)?;
    let series = energy_series(&traj, big_t, &params, &s_grid, SimilarityGrid::default())?;
    let exact = stationary_energy(&params);
    let dev = series
        .samples
        .iter()
        .map(|s| rel(s.parts.energy, exact))
        .fold(0.0, f64::max);
    let slope = series
        .samples
        .windows(3)
        .map(|w| ((w[2].parts.energy - w[0].parts.energy) / (w[2].s - w[0].s)).abs())
        .fold(0.0, f64::max);
    pass &= dev < 1e-4 && slope < 1e-6;
    detail.push(format!("stationary: rel dev {dev:.2e}, max |dE/ds| {slope:.2e}"));
    Ok((pass, detail.join("; ")))
}

/// ‖u(t0)‖_{M^{2,2}} / 𝒩(u0, t0)^{1/(p+1)} at each chain time.
fn chain_ratios(u0: &RadialField, grad: &RadialField, traj: &Trajectory) -> Result<Vec<f64>, heatlab_core::Error> {
    let params = params();
    let spec = MorreySpec::critical(2.0, params.p)?;
    let centers: Vec<f64> = (0..=80).map(|i| i as f64 * 0.5).collect();
    CHAIN_TIMES
        .iter()
        .map(|&t0| {
            let f = traj.field_at(t0).expect("chain time stored");
            let m = morrey_norm(f, spec, &MorreyLattice::default_for(f))?.value;
            let n = functional_n(u0, grad, t0, &logspace(t0, 1e4, 40), &centers, &params)?;
            Ok(m / n.powf(1.0 / (params.p + 1.0)))
        })
        .collect()
}

fn variation(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

fn morrey_chain(coarse: &(RadialField, RadialField, Trajectory)) -> Outcome {
    let ratios = chain_ratios(&coarse.0, &coarse.1, &coarse.2)?;
    let fine = small_gaussian_run(0.05, false)?;
    let fine_ratios = chain_ratios(&fine.0, &fine.1, &fine.2)?;
    // C fitted on growing sets of t0: the smallest constant valid on the set
    let fitted: Vec<f64> = (1..=ratios.len())
        .map(|k| ratios[..k].iter().copied().fold(0.0, f64::max))
        .collect();
    let c = *fitted.last().unwrap();
    let c_fine = fine_ratios.iter().copied().fold(0.0, f64::max);
    let across = variation(&fitted);
    let refine = rel(c_fine, c);
    Ok((
        across < 0.2 && refine < 0.2,
        format!(
            "C {c:.4} (variation over t0 sets {across:.2e}, refinement {refine:.2e}); ratios {:?}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    ))
}

fn decay_rates() -> Outcome {
    let params = params();
    let tail = {
        let u0 = sample(Profile::power_tail(0.05, 2.0, 1.0), grid(400.0, 800));
        let traj = solve(&u0, &params, &SolverConfig::with_horizon(100.0))?;
        decay_diagnostics(&traj, &params)
    };
    let gauss = {
        let u0 = sample(Profile::gaussian(0.3, 1.5), grid(40.0, 400));
        let traj = solve(&u0, &params, &SolverConfig::with_horizon(100.0))?;
        decay_diagnostics(&traj, &params)
    };
    let slope = tail.slope.unwrap_or(f64::NAN);
    Ok((
        (slope + 1.0).abs() <= 0.1 && tail.tail_monotone && gauss.tail_monotone,
        format!(
            "slope {slope:.4}; t^β sup nonincreasing: power tail {}, gaussian {}",
            tail.tail_monotone, gauss.tail_monotone
        ),
    ))
}

fn mild_classical() -> Outcome {
    let params = params();
    let u0 = sample(Profile::gaussian(0.3, 1.5), grid(20.0, 400));
    let ts = [0.1, 0.5, 1.0];
    let run = picard_solve(&u0, &params, 1.0, 40, &ts, &PicardOptions::default())?;
    let mut cfg = SolverConfig::with_horizon(1.0);
    cfg.checkpoints = ts.to_vec();
    let traj = solve(&u0, &params, &cfg)?;
    let mut worst = 0.0f64;
    for t in ts {
        let (a, b) = (
            run.field_at(t).expect("sample time"),
            traj.field_at(t).expect("checkpoint"),
        );
        worst = worst.max(a.difference(b)?.sup_norm() / b.sup_norm());
    }
    Ok((
        worst < 0.01,
        format!(
            "max rel sup diff {worst:.2e}; picard {:?} after {} iterations",
            run.status, run.iterations
        ),
    ))
}

fn threshold_bisection() -> Outcome {
    let params = params();
    let phi = sample(Profile::gaussian(1.0, 2.0), grid(40.0, 400));
    let mut cfg = SolverConfig::with_horizon(200.0).log_checkpoints(0.01, 9);
    cfg.checkpoints.push(1.0);
    cfg.checkpoints.sort_by(f64::total_cmp);
    cfg.checkpoints.dedup();
    let opts = ClassifyOptions::default();
    let bracket = find_bracket(&phi, &params, &cfg, &opts, 1.0, 10)?;
    let res = bisect_lambda(&phi, &params, &cfg, &opts, bracket, 1e-3)?;
    let tail: Vec<f64> = res
        .morrey_series_lo
        .iter()
        .filter(|(t, _)| *t >= 1.0)
        .map(|&(_, m)| m)
        .collect();
    let decreasing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);
    let probes = borderline_probe(&res, &phi, &params, &cfg, &opts, &[0.1, 0.01, 0.001])?;
    let all_decaying = probes.iter().all(|p| p.verdict == Verdict::Decaying);
    let onsets: Vec<Option<f64>> = probes.iter().map(|p| p.t0).collect();
    let onsets_ordered = onsets.iter().all(Option::is_some) && onsets.windows(2).all(|w| w[1] >= w[0]);
    Ok((
        res.rel_width < 1e-3 && res.ray_consistent() && res.bracket_valid() && decreasing && all_decaying && onsets_ordered,
        format!(
            "[{:.6}, {:.6}] width {:.2e}, consistent {}, series decreasing {decreasing}, probes decaying {all_decaying}, t0 {:?}",
            res.lambda_lo,
            res.lambda_hi,
            res.rel_width,
            res.ray_consistent() && res.bracket_valid(),
            onsets.iter().map(|t| t.map(|t| format!("{t:.3}"))).collect::<Vec<_>>()
        ),
    ))
}

fn dependence() -> Outcome {
    let params = params();
    let u0 = sample(Profile::gaussian(1.0, 2.0), grid(40.0, 400));
    let spec = MorreySpec::critical(2.0, params.p)?;
    let cfg = SolverConfig::with_horizon(5.0).log_checkpoints(0.01, 12);
    let (mut maxima, mut positive) = (Vec::new(), Vec::new());
    for d in [1e-2, 1e-3, 1e-4] {
        let s = continuous_dependence(&u0, &u0.scaled(1.0 + d)?, 5.0, &params, spec, &cfg)?;
        if s.failure.is_some() || s.degenerate {
            return Ok((false, format!("perturbation {d}: run failed or degenerate")));
        }
        maxima.push(s.max_ratio);
        positive.push(
            s.samples
                .iter()
                .filter(|x| x.t > 0.0)
                .map(|x| x.ratio)
                .fold(0.0, f64::max),
        );
    }
    let (v, vp) = (variation(&maxima), variation(&positive));
    Ok((
        v < 0.25 && vp < 0.25,
        format!("M {maxima:.5?} (variation {v:.2e}); max over t > 0 variation {vp:.2e}"),
    ))
}

fn gradient_majorant() -> Outcome {
    let params = params();
    let g = grid(20.0, 400);
    let profile = Profile::gaussian(0.5, 1.0);
    let u0 = sample(profile, g);
    let grad = profile.gradient(g, &params)?;
    let t_end = 1.0;
    let cfg = SolverConfig::with_horizon(t_end).log_checkpoints(1e-3, 16);
    let traj = solve(&u0, &params, &cfg)?;
    let check = gradient_majorant_check(&traj, &u0, &grad, 0.05 * t_end)?;
    Ok((
        check.holds && check.times_checked > 0,
        format!(
            "{} times checked, worst ratio {:.4}, margin {:.4}",
            check.times_checked, check.worst_ratio, check.margin
        ),
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<Row> = std::thread::scope(|scope| {
        let timed = |f: fn() -> Outcome| {
            let t = Instant::now();
            let out = f();
            (out, t.elapsed().as_secs_f64())
        };
        let jobs: Vec<Job> = vec![
            (1, "kernel semigroup", kernel_semigroup),
            (2, "kernel contraction", kernel_contraction),
            (3, "Morrey oracle", morrey_oracle),
            (4, "scaling invariance", scaling_invariance),
            (5, "power identity", power_identity),
            (6, "ODE blowup time", ode_blowup),
            (7, "singular steady state", steady_state_residual),
            (10, "decay rates", decay_rates),
            (11, "mild/classical agreement", mild_classical),
            (12, "threshold bisection", threshold_bisection),
            (13, "continuous dependence", dependence),
            (14, "gradient majorant", gradient_majorant),
        ];
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(id, name, job)| (id, name, scope.spawn(move || timed(job))))
            .collect();
        // criteria 8 and 9 share one trajectory
        let shared = scope.spawn(move || {
            let t = Instant::now();
            match small_gaussian_run(0.1, true) {
                Ok(run) => {
                    let energy = energy_laws(&run.2);
                    let chain = morrey_chain(&run);
                    let dt = t.elapsed().as_secs_f64();
                    vec![
                        (8, "energy laws", energy, dt),
                        (9, "Morrey bound by initial data", chain, dt),
                    ]
                }
                Err(e) => {
                    let dt = t.elapsed().as_secs_f64();
                    vec![
                        (8, "energy laws", Err(e.clone()), dt),
                        (9, "Morrey bound by initial data", Err(e), dt),
                    ]
                }
            }
        });
        let mut out: Vec<_> = handles
            .into_iter()
            .map(|(id, name, h)| {
                let (o, dt) = h.join().expect("criterion panicked");
                (id, name, o, dt)
            })
            .collect();
        out.extend(shared.join().expect("criteria 8/9 panicked"));
        out
    });
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, outcome, dt) in &results {
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (*pass, detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name}: {detail} [{dt:.1}s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{}/{} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
