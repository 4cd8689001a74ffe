use std::sync::Arc;

use gasket_core::solvers::{
    brute_force_critical_points, default_radius, double_critical_points, geometry_probe, minimize,
    minimize_in_ball, mountain_pass, OracleOptions, ProbeOptions, SolverOptions,
};
use gasket_core::{
    Bounds, DiscreteForm, Nonlinearity, PrefractalGraph, ProblemInstance, ScalarFunction,
    VertexField,
};
use proptest::prelude::*;

fn problem(m: u32, a: f64, g_tilt: f64, f: ScalarFunction) -> ProblemInstance {
    let form =
        Arc::new(DiscreteForm::new(Arc::new(PrefractalGraph::build(3, m).unwrap())).unwrap());
    let nv = form.graph().vertex_count();
    let g = VertexField::new(
        (0..nv)
            .map(|i| 1.0 + g_tilt * ((i % 5) as f64 / 4.0 - 0.5))
            .collect(),
    );
    ProblemInstance::new(
        form,
        VertexField::constant(nv, a),
        g,
        VertexField::zeros(nv),
        ScalarFunction::constant(1.0),
        Nonlinearity::new(f, 4.0),
        Bounds {
            m: 1.0,
            m1: 1.0,
            beta: 1.0,
            eta: 0.0,
            g_lo: 0.5,
            g_hi: 1.5,
            h_lo: 1.0,
            h_hi: 1.0,
            epsilon: 0.5,
            c: 0.25,
        },
    )
    .unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions {
        grad_tol: 1e-9,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn descent_is_monotone_and_verified(a in -2.0f64..0.0, tilt in 0.0f64..0.8, scale in 0.1f64..2.0, start in prop::collection::vec(-1.0f64..1.0, 12)) {
        let p = problem(2, a, tilt, ScalarFunction::power(scale, 4.0));
        let res = minimize(&p, &opts(), &p.to_field(&start)).unwrap();
        // nonincreasing up to rounding in the action
        for w in res.trace.windows(2) {
            prop_assert!(w[1].value <= w[0].value + 1e-10 * w[0].value.abs().max(1.0));
        }
        if res.converged() {
            let recheck = p.dual_norm(&res.point).unwrap();
            prop_assert!(recheck <= opts().grad_tol, "{}", recheck);
            prop_assert_eq!(recheck, res.dual_grad_norm);
        }
    }

    #[test]
    fn ball_minimizer_stays_in_ball(a in -2.0f64..0.0, tilt in 0.0f64..0.8, r in 0.05f64..2.0) {
        let f = ScalarFunction::Sum {
            terms: vec![ScalarFunction::RegularizedSign { eta: 0.05, width: 1e-3 }, ScalarFunction::power(1.0, 4.0)],
        };
        let p = problem(2, a, tilt, f);
        let res = minimize_in_ball(&p, r, &opts()).unwrap();
        let norm = p.form().energy(&res.point).unwrap().sqrt();
        prop_assert!(norm <= r * (1.0 + 1e-12));
        // nonincreasing up to rounding in the action
        for w in res.trace.windows(2) {
            prop_assert!(w[1].value <= w[0].value + 1e-10 * w[0].value.abs().max(1.0));
        }
    }

    #[test]
    fn mountain_pass_climbs_above_endpoints(a in -1.0f64..0.0, tilt in 0.0f64..0.8, scale in 0.5f64..3.0) {
        let p = problem(2, a, tilt, ScalarFunction::power(scale, 4.0));
        let r = default_radius(&p);
        let geo = geometry_probe(&p, r, &ProbeOptions::default()).unwrap();
        let x_star = geo.x_star.unwrap();
        let res = mountain_pass(&p, &x_star, &opts()).unwrap();
        let floor = p.action(&p.zero_field()).unwrap().max(p.action(&x_star).unwrap());
        prop_assert!(res.value >= floor - 1e-10);
        if res.converged() {
            prop_assert!(p.dual_norm(&res.point).unwrap() <= opts().grad_tol);
        }
    }

    #[test]
    fn double_points_straddle_zero(tilt in 0.0f64..0.5, eta in 0.002f64..0.01) {
        let f = ScalarFunction::Sum {
            terms: vec![ScalarFunction::RegularizedSign { eta, width: 1e-5 }, ScalarFunction::power(0.01, 4.0)],
        };
        let p = problem(2, -0.5, tilt, f);
        let r = default_radius(&p);
        if let Ok(dc) = double_critical_points(&p, r, None, &ProbeOptions::default(), &opts()) {
            prop_assert!(dc.minimizer.value < 0.0 && dc.saddle.value > 0.0);
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical(seed in 0u64..1000, a in -1.0f64..0.0) {
        let p = problem(2, a, 0.3, ScalarFunction::power(1.0, 4.0));
        let o = SolverOptions { seed, ..opts() };
        let x = minimize_in_ball(&p, 0.3, &o).unwrap();
        let y = minimize_in_ball(&p, 0.3, &o).unwrap();
        prop_assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn level_one_solutions_match_oracle(a in -1.0f64..0.0, tilt in 0.0f64..0.6, start in prop::collection::vec(-0.5f64..0.5, 3)) {
        let p = problem(1, a, tilt, ScalarFunction::power(1.0, 4.0));
        let oracle = brute_force_critical_points(&p, &OracleOptions::default()).unwrap();
        let near = |x: &VertexField| {
            let xi = p.form().restrict(x).unwrap();
            oracle
                .iter()
                .map(|c| p.energy_distance_interior(&xi, &p.form().restrict(&c.point).unwrap()))
                .fold(f64::INFINITY, f64::min)
        };
        let min = minimize(&p, &opts(), &p.to_field(&start)).unwrap();
        prop_assert!(near(&min.point) <= 1e-4);
        let geo = geometry_probe(&p, default_radius(&p), &ProbeOptions::default()).unwrap();
        let mpa = mountain_pass(&p, &geo.x_star.unwrap(), &opts()).unwrap();
        if mpa.converged() {
            prop_assert!(near(&mpa.point) <= 1e-4, "{}", near(&mpa.point));
        }
    }
}
