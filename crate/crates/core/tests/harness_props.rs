use std::sync::Arc;

use gasket_core::harness::{
    build_sequence, random_ball_sample, run_convergence_experiment, uniform_convergence_estimate,
    ExperimentOptions, Schedule, ScheduleKind, SolverKind,
};
use gasket_core::solvers::{minimize, SolverOptions};
use gasket_core::{
    Bounds, DiscreteForm, Nonlinearity, PrefractalGraph, ProblemInstance, ScalarFunction,
    VertexField,
};
use proptest::prelude::*;

fn base(f: ScalarFunction, a: f64) -> ProblemInstance {
    let form =
        Arc::new(DiscreteForm::new(Arc::new(PrefractalGraph::build(3, 2).unwrap())).unwrap());
    let nv = form.graph().vertex_count();
    ProblemInstance::new(
        form,
        VertexField::constant(nv, a),
        VertexField::new((0..nv).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect()),
        VertexField::new((0..nv).map(|i| 0.2 * (i as f64).cos()).collect()),
        ScalarFunction::Polynomial {
            coeffs: vec![1.0, 0.3],
        },
        Nonlinearity::new(f, 4.0),
        Bounds {
            m: 1.0,
            m1: 1.0,
            beta: 1.0,
            eta: 0.0,
            g_lo: 0.9,
            g_hi: 1.1,
            h_lo: 0.7,
            h_hi: 1.3,
            epsilon: 0.5,
            c: 0.25,
        },
    )
    .unwrap()
}

fn drift(nv: usize) -> VertexField {
    VertexField::new(
        (0..nv)
            .map(|i| 0.3 * ((i * 5 % 7) as f64 / 7.0 - 0.5))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimates_shrink_along_monotone_schedules(delta in 0.05f64..1.5, scale in 0.1f64..2.0, seed in 0u64..100, combined in any::<bool>()) {
        let b = base(ScalarFunction::power(scale, 4.0), -0.5);
        let nv = b.graph().vertex_count();
        let sample = random_ball_sample(&b, 2.0, 16, seed).unwrap();
        let schedule = if combined { Schedule::combined(delta, drift(nv)) } else { Schedule::g_scale(delta) };
        let seq = build_sequence(b, schedule, 8).unwrap();
        let est = uniform_convergence_estimate(&seq, &sample).unwrap();
        prop_assert!(est.monotone_value);
        prop_assert!(est.monotone_dual);
    }

    #[test]
    fn zero_delta_gives_zero_estimates(scale in 0.1f64..2.0, seed in 0u64..100) {
        let b = base(ScalarFunction::power(scale, 4.0), -0.5);
        let nv = b.graph().vertex_count();
        let sample = random_ball_sample(&b, 3.0, 8, seed).unwrap();
        let seq = build_sequence(b, Schedule::combined(0.0, drift(nv)), 5).unwrap();
        prop_assert!(uniform_convergence_estimate(&seq, &sample).unwrap().all_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn convex_warm_and_cold_agree(a in -2.0f64..0.0, delta in 0.1f64..1.0) {
        // f = 1 with theta unused: the action is a strictly convex quadratic
        let b = base(ScalarFunction::constant(1.0), a);
        let nv = b.graph().vertex_count();
        let seq = build_sequence(b, Schedule { kind: ScheduleKind::Combined, delta, drift: Some(drift(nv)), theta_delta: 0.0 }, 6).unwrap();
        let opts = ExperimentOptions {
            solver: SolverOptions { grad_tol: 1e-11, ..Default::default() },
            sample_size: 4,
            ..Default::default()
        };
        let table = run_convergence_experiment(&seq, SolverKind::Min, &opts).unwrap();
        let limit = seq.base();
        // the limit row is a weak solution, checked without the harness
        let x0 = minimize(limit, &opts.solver, &limit.zero_field()).unwrap();
        prop_assert!(limit.dual_norm(&x0.point).unwrap() <= opts.solver.grad_tol);
        prop_assert!(table.rows[0].grad_norm_limit <= opts.solver.grad_tol, "{:?}", table.rows[0]);
        for row in &table.rows[1..] {
            let p = seq.instance(row.n).unwrap();
            let cold = minimize(&p, &opts.solver, &p.zero_field()).unwrap();
            let xc = limit.form().restrict(&cold.point).unwrap();
            let x0i = limit.form().restrict(&x0.point).unwrap();
            let cold_distance = limit.energy_distance_interior(&xc, &x0i);
            prop_assert!((cold_distance - row.distance).abs() <= 1e-6, "n = {}: warm {} cold {}", row.n, row.distance, cold_distance);
        }
    }
}
