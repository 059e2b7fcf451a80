use heatlab_core::evolution::{solve, SolverConfig};
use heatlab_core::math::logspace;
use heatlab_core::morrey::{morrey_norm, MorreyLattice, MorreySpec};
use heatlab_core::quadrature::{ball_integral, cap_fraction, heat_flow};
use heatlab_core::{Boundary, ModelParams, Profile, RadialField, RadialGrid};
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(5, 3.0).unwrap()
}

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        (0.1f64..3.0, 0.5f64..4.0).prop_map(|(a, w)| Profile::gaussian(a, w)),
        (0.1f64..3.0, 0.5f64..3.0, 0.2f64..2.0).prop_map(|(a, r, ramp)| Profile::plateau(a, r, ramp)),
        (0.1f64..3.0, 1.0f64..4.0, 0.3f64..2.0).prop_map(|(a, e, c)| Profile::power_tail(a, e, c)),
        (0.3f64..3.0).prop_map(Profile::indicator),
    ]
}

fn sample(p: Profile, grid: RadialGrid) -> RadialField {
    p.sample(grid, &params(), Boundary::DirichletAtRmax).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cap_fraction_is_a_monotone_fraction(n in 3usize..8, a in 0.0f64..5.0, s in 0.0f64..5.0, r1 in 0.01f64..6.0, dr in 0.0f64..2.0) {
        let small = cap_fraction(n, a, s, r1);
        let large = cap_fraction(n, a, s, r1 + dr);
        prop_assert!((0.0..=1.0).contains(&small));
        prop_assert!(large >= small - 1e-12);
    }

    #[test]
    fn ball_integrals_grow_with_the_radius(p in profile(), q in 1.0f64..3.0, a in 0.0f64..8.0, r1 in 0.05f64..6.0, dr in 0.0f64..4.0) {
        let f = sample(p, RadialGrid::new(5, 10.0, 400).unwrap());
        let small = ball_integral(&f, q, a, r1).unwrap().value;
        let large = ball_integral(&f, q, a, r1 + dr).unwrap().value;
        prop_assert!(small >= 0.0);
        prop_assert!(large >= small * (1.0 - 1e-12));
    }

    #[test]
    fn morrey_norm_is_homogeneous(p in profile(), c in -4.0f64..4.0, lambda in 0.5f64..5.0) {
        prop_assume!(c.abs() > 1e-3);
        let f = sample(p, RadialGrid::new(5, 10.0, 200).unwrap());
        let lattice = MorreyLattice::default_for(&f);
        let spec = MorreySpec::new(2.0, lambda).unwrap();
        let base = morrey_norm(&f, spec, &lattice).unwrap().value;
        let scaled = morrey_norm(&f.scaled(c).unwrap(), spec, &lattice).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * c.abs() * base);
    }

    #[test]
    fn power_identity_holds_to_rounding(p in profile(), lambda in 0.5f64..5.0, m in 1.0f64..3.0) {
        let f = sample(p, RadialGrid::new(5, 10.0, 200).unwrap());
        let lattice = MorreyLattice::default_for(&f);
        let q = 2.0 * m;
        let lhs = morrey_norm(&f.abs_pow(m).unwrap(), MorreySpec::new(2.0, lambda).unwrap(), &lattice).unwrap().value;
        let rhs = morrey_norm(&f, MorreySpec::new(q, lambda).unwrap(), &lattice).unwrap().value.powf(m);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn heat_flow_does_not_raise_the_maximum(p in profile(), t in 1e-3f64..10.0) {
        let f = sample(p, RadialGrid::new(5, 10.0, 200).unwrap());
        let g = heat_flow(&f, t).unwrap();
        prop_assert!(g.sup_norm() <= f.sup_norm() * (1.0 + 1e-9));
        prop_assert!(g.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn solutions_are_odd_in_the_data(amp in -1.5f64..1.5, width in 0.5f64..3.0) {
        let params = params();
        let grid = RadialGrid::new(5, 10.0, 50).unwrap();
        let u0 = sample(Profile::gaussian(amp, width), grid);
        let cfg = SolverConfig::with_horizon(0.2).log_checkpoints(0.01, 4);
        let a = solve(&u0, &params, &cfg).unwrap();
        let b = solve(&u0.scaled(-1.0).unwrap(), &params, &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.checkpoints.len(), b.checkpoints.len());
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            prop_assert_eq!(x.t, y.t);
            prop_assert!(x.field.values().iter().zip(y.field.values()).all(|(u, v)| *u == -*v));
        }
    }

    #[test]
    fn nonnegative_data_stay_nonnegative(p in profile()) {
        let params = params();
        let grid = RadialGrid::new(5, 10.0, 50).unwrap();
        let u0 = sample(p, grid);
        let cfg = SolverConfig::with_horizon(0.1).log_checkpoints(0.001, 6);
        let traj = solve(&u0, &params, &cfg).unwrap();
        let floor = -1e-10 * u0.sup_norm();
        for cp in &traj.checkpoints {
            prop_assert!(cp.field.values().iter().all(|&v| v >= floor));
        }
    }

    #[test]
    fn logspace_hits_both_ends(lo in 1e-6f64..1.0, ratio in 1.5f64..1e6, count in 2usize..50) {
        let hi = lo * ratio;
        let xs = logspace(lo, hi, count);
        prop_assert_eq!(xs.len(), count);
        prop_assert_eq!(xs[0], lo);
        prop_assert!((xs[count - 1] - hi).abs() <= 1e-12 * hi);
        prop_assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}
