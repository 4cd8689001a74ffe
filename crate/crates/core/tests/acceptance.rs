//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gasket_core::forms::{harmonic_extension, measure_weights};
use gasket_core::harness::{hypothesis_check, run_convergence_experiment, HypothesisOptions};
use gasket_core::io::{parse_config_str, RunConfig, SolutionFile, SolutionMeta};
use gasket_core::solvers::{
    brute_force_critical_points, default_radius, double_critical_points, geometry_probe, minimize,
    minimize_in_ball, mountain_pass, CriticalPointResult, OracleOptions, SolverOptions,
};
use gasket_core::{
    DiscreteForm, Nonlinearity, PrefractalGraph, ProblemInstance, ScalarFunction, VertexField,
};

const CUBIC_M1: &str = include_str!("../../../configs/cubic_m1.json");
const MOUNTAIN_PASS_M3: &str = include_str!("../../../configs/mountain_pass_m3.json");
const DOUBLE_M2: &str = include_str!("../../../configs/double_m2.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn form(n: usize, m: u32) -> DiscreteForm {
    DiscreteForm::new(Arc::new(PrefractalGraph::build(n, m).unwrap())).unwrap()
}

fn config(text: &str) -> RunConfig {
    parse_config_str(text).unwrap()
}

/// Vertices of `V_m` by applying every word of `m` contractions
/// `x -> (x + e_i) / 2` to the corners, in integer numerators over `2^m`.
fn ifs_enumeration(n: usize, m: u32) -> (BTreeSet<Vec<u64>>, usize) {
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..m {
        words = words
            .into_iter()
            .flat_map(|w| {
                (0..n).map(move |i| {
                    let mut w = w.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    let mut points = BTreeSet::new();
    for w in &words {
        for corner in 0..n {
            let mut num = vec![0u64; n];
            num[corner] = 1;
            // innermost map first
            for (k, &i) in w.iter().rev().enumerate() {
                num[i] += 1u64 << k;
            }
            points.insert(num);
        }
    }
    (points, words.len())
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    for m in 0..=6u32 {
        let g = PrefractalGraph::build(3, m).unwrap();
        let expected = 3 * (3usize.pow(m) + 1) / 2;
        let (oracle, cells) = ifs_enumeration(3, m);
        let built: BTreeSet<Vec<u64>> = g
            .vertices()
            .iter()
            .map(|v| v.at_level(m).unwrap().coords)
            .collect();
        if g.vertex_count() != expected || oracle.len() != expected || built != oracle {
            bad.push(format!(
                "m={m}: |V|={} expected {expected}",
                g.vertex_count()
            ));
        }
        if g.cells().len() != 3usize.pow(m) || cells != 3usize.pow(m) {
            bad.push(format!("m={m}: cells={}", g.cells().len()));
        }
    }
    let el = t.elapsed();
    outcome(
        bad.is_empty() && within(el, 1.0),
        format!(
            "m = 0..6 match IFS enumeration ({} mismatches), {:.3}s",
            bad.len(),
            el.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for m in 0..=4u32 {
        let coarse = form(3, m);
        let fine = form(3, m + 1);
        for _ in 0..100 {
            let u = VertexField::new(
                (0..coarse.graph().vertex_count())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
            );
            let ext = harmonic_extension(coarse.graph(), fine.graph(), &u).unwrap();
            let (wc, wf) = (coarse.energy(&u).unwrap(), fine.energy(&ext).unwrap());
            worst = worst.max((wf - wc).abs() / wc.max(1e-300));
        }
    }
    let el = t.elapsed();
    outcome(
        worst <= 1e-9 && within(el, 5.0),
        format!(
            "max relative energy change {worst:.2e} over 500 fields, {:.3}s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for n in [3usize, 4] {
        for m in 0..=4u32 {
            let g = PrefractalGraph::build(n, m).unwrap();
            let total: f64 = measure_weights(&g).values().iter().sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max |sum of weights - 1| = {worst:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for m in 1..=4u32 {
        let f = form(3, m);
        let lap = f.dirichlet_laplacian().unwrap();
        let nv = f.graph().vertex_count();
        for _ in 0..25 {
            let u = VertexField::new((0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let mut v = VertexField::new((0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect());
            for &b in f.graph().boundary() {
                v.values_mut()[b] = 0.0;
            }
            let lu = lap.apply(&u);
            let lhs: f64 = lap
                .rows()
                .iter()
                .zip(&lu)
                .map(|(&i, l)| f.measure()[i] * l * v[i])
                .sum();
            let rhs = -f.bilinear(&u, &v).unwrap();
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max pairing defect {worst:.2e} over 100 pairs"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for k in 0..1000 {
        let m = 1 + (k % 4) as u32;
        let f = form(3, m);
        let nv = f.graph().vertex_count();
        let spike = k % 3 == 0;
        let mut u = VertexField::new(
            (0..nv)
                .map(|_| if spike { 0.0 } else { rng.gen_range(-1.0..1.0) })
                .collect(),
        );
        if spike {
            let i = f.interior()[rng.gen_range(0..f.interior().len())];
            u.values_mut()[i] = 1.0;
        }
        for &b in f.graph().boundary() {
            u.values_mut()[b] = 0.0;
        }
        let norms = f.norms(&u).unwrap();
        worst_ratio = worst_ratio.max(norms.sup / norms.energy);
        if norms.sup > 9.0 * norms.energy {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 1000 fields, max sup/energy ratio {worst_ratio:.3} against 9"),
    )
}

fn criterion_6() -> Outcome {
    let f = Arc::new(form(3, 3));
    let nv = f.graph().vertex_count();
    let base = ProblemInstance::simple(f.clone(), Nonlinearity::power(1.0, 4.0)).unwrap();
    let a = VertexField::new(
        (0..nv)
            .map(|i| -0.3 - 0.1 * (i as f64).sin().abs())
            .collect(),
    );
    let g = VertexField::new(
        (0..nv)
            .map(|i| 1.0 + 0.25 * (i as f64 * 0.7).cos())
            .collect(),
    );
    let u = VertexField::new((0..nv).map(|i| 0.4 * (i as f64 * 1.3).sin()).collect());
    let mut bounds = *base.bounds();
    bounds.g_lo = 0.75;
    bounds.g_hi = 1.25;
    bounds.h_lo = 0.5;
    bounds.h_hi = 1.5;
    let p = ProblemInstance::new(
        f,
        a,
        g,
        u,
        ScalarFunction::Polynomial {
            coeffs: vec![1.0, 0.3, 0.1],
        },
        Nonlinearity::power(1.0, 4.0),
        bounds,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = p.to_field(
            &(0..p.dofs())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect::<Vec<_>>(),
        );
        let w = p.to_field(
            &(0..p.dofs())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<_>>(),
        );
        let plus = x.zip_map(&w, |a, b| a + t * b);
        let minus = x.zip_map(&w, |a, b| a - t * b);
        let fd = (p.action(&plus).unwrap() - p.action(&minus).unwrap()) / (2.0 * t);
        let exact = p.directional_derivative(&x, &w).unwrap();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-8));
    }
    outcome(
        worst <= 1e-5,
        format!("max relative FD mismatch {worst:.2e} on 20 pairs"),
    )
}

fn nearest(points: &[CriticalPointResult], p: &ProblemInstance, x: &VertexField) -> f64 {
    let xi = p.form().restrict(x).unwrap();
    points
        .iter()
        .map(|c| p.energy_distance_interior(&xi, &p.form().restrict(&c.point).unwrap()))
        .fold(f64::INFINITY, f64::min)
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let cfg = config(CUBIC_M1);
    let p = cfg.build_problem().unwrap();
    let coarse = brute_force_critical_points(&p, &cfg.oracle).unwrap();
    let fine_opts = OracleOptions {
        resolution: 2 * cfg.oracle.resolution - 1,
        ..cfg.oracle.clone()
    };
    let fine = brute_force_critical_points(&p, &fine_opts).unwrap();
    let stable = coarse.len() == fine.len()
        && coarse.iter().all(|c| nearest(&fine, &p, &c.point) <= 1e-6)
        && fine.iter().all(|c| nearest(&coarse, &p, &c.point) <= 1e-6);

    let opts = &cfg.solver;
    let r = default_radius(&p);
    let start = p.to_field(&[0.3, -0.2, 0.1]);
    let min = minimize(&p, opts, &start).unwrap();
    let ball = minimize_in_ball(&p, r, opts).unwrap();
    let x_star = geometry_probe(&p, r, &cfg.probe).unwrap().x_star.unwrap();
    let mpa = mountain_pass(&p, &x_star, opts).unwrap();
    let d = [min.point, ball.point, mpa.point].map(|x| nearest(&coarse, &p, &x));
    let el = t.elapsed();
    outcome(
        d.iter().all(|v| *v <= 1e-4) && stable && within(el, 60.0),
        format!(
            "{} oracle points, stable under halving: {stable}; distances min {:.1e}, ball {:.1e}, mpa {:.1e}; {:.2}s",
            coarse.len(),
            d[0],
            d[1],
            d[2],
            el.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let cfg = config(MOUNTAIN_PASS_M3);
    let p = cfg.build_problem().unwrap();
    let report = gasket_core::assumptions::check_assumptions(&p, Default::default());
    let a1_a4 = report.all_pass(&["A1", "A2", "A3", "A4"]);
    let r = default_radius(&p);
    let x_star = geometry_probe(&p, r, &cfg.probe).unwrap().x_star.unwrap();
    let opts = SolverOptions {
        grad_tol: 1e-8,
        ..cfg.solver.clone()
    };
    let res = mountain_pass(&p, &x_star, &opts).unwrap();
    let grad = p.dual_norm(&res.point).unwrap();
    let j0 = p.action(&p.zero_field()).unwrap();
    let js = p.action(&x_star).unwrap();
    let value = p.action(&res.point).unwrap();
    let norm = p.form().energy(&res.point).unwrap().sqrt();
    let el = t.elapsed();
    outcome(
        a1_a4 && grad <= 1e-7 && value > 0.0 && 0.0 >= j0.max(js) && norm > 1e-6 && within(el, 120.0),
        format!(
            "A1-A4 pass: {a1_a4}; |J'| = {grad:.2e}, J = {value:.6e}, J(0) = {j0:.1e}, J(x*) = {js:.3e}, norm {norm:.3e}; {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = config(DOUBLE_M2);
    let seq = cfg.build_sequence().unwrap();
    let p = seq.base().clone();
    let r = default_radius(&p);
    let dc = double_critical_points(&p, r, None, &cfg.probe, &cfg.solver).unwrap();
    let x_star = dc.geometry.x_star.clone().unwrap();
    let hyp = hypothesis_check(
        &seq,
        r,
        &x_star,
        &HypothesisOptions {
            probe: cfg.probe.clone(),
            seed: cfg.seed,
            ..Default::default()
        },
    )
    .unwrap();
    let j1 = p.action(&dc.minimizer.point).unwrap();
    let j2 = p.action(&dc.saddle.point).unwrap();
    let ready = hyp.double_ready();
    outcome(
        ready && j1 < 0.0 && 0.0 < j2 && dc.distance >= 1e-3,
        format!(
            "hypotheses DCPT1-3 pass: {ready}; J1 = {j1:.3e}, J2 = {j2:.3e}, distance {:.3e}",
            dc.distance
        ),
    )
}

fn criterion_10() -> Outcome {
    let t = Instant::now();
    let cfg = config(DOUBLE_M2);
    let seq = cfg.build_sequence().unwrap();
    let table =
        run_convergence_experiment(&seq, cfg.harness.solver, &cfg.experiment_options()).unwrap();
    let last = table.rows.last().unwrap();
    let fit = table.estimate.value_rate;
    let rate_ok = fit.is_some_and(|f| f.within_factor_two);
    let el = t.elapsed();
    outcome(
        table.decreasing_beyond_4
            && last.n == 32
            && last.distance <= 1e-4
            && last.value_gap <= 1e-6
            && rate_ok
            && within(el, 600.0),
        format!(
            "decreasing beyond 4: {}; distance(32) = {:.3e}, value gap(32) = {:.3e}, C/n ratios in [{:.3}, {:.3}]; {:.2}s",
            table.decreasing_beyond_4,
            last.distance,
            last.value_gap,
            fit.map_or(f64::NAN, |f| f.ratio_min),
            fit.map_or(f64::NAN, |f| f.ratio_max),
            el.as_secs_f64()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut cfg = config(DOUBLE_M2);
    cfg.harness.delta = 0.0;
    let seq = cfg.build_sequence().unwrap();
    let table =
        run_convergence_experiment(&seq, cfg.harness.solver, &cfg.experiment_options()).unwrap();
    let worst = table.rows.iter().map(|r| r.distance).fold(0.0f64, f64::max);
    let zero = table.estimate.all_zero();
    outcome(
        worst <= cfg.solver.grad_tol && zero,
        format!("max distance to the limit point {worst:.2e}; estimates identically zero: {zero}"),
    )
}

fn run_files(cfg: &RunConfig) -> Vec<(String, String)> {
    let p = cfg.build_problem().unwrap();
    let hash = cfg.hash().unwrap();
    let r = default_radius(&p);
    let dc = double_critical_points(&p, r, None, &cfg.probe, &cfg.solver).unwrap();
    let table = run_convergence_experiment(
        &cfg.build_sequence().unwrap(),
        cfg.harness.solver,
        &cfg.experiment_options(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    for (name, res) in [("minimizer", &dc.minimizer), ("saddle", &dc.saddle)] {
        let sol =
            SolutionFile::from_result(&p, res, SolutionMeta::new(hash.clone(), cfg.seed, name))
                .unwrap();
        let path = gasket_core::io::persist_result(&sol, dir.path(), name).unwrap();
        out.push((
            format!("{name}.json"),
            std::fs::read_to_string(path).unwrap(),
        ));
        out.push((format!("{name}_trace.csv"), res.trace_csv()));
    }
    out.push(("table.csv".into(), table.to_csv().unwrap()));
    out.push((
        "table.json".into(),
        serde_json::to_string_pretty(&table).unwrap(),
    ));
    out
}

fn criterion_12() -> Outcome {
    let cfg = config(DOUBLE_M2);
    let a = run_files(&cfg);
    let b = run_files(&cfg);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    outcome(
        differing.is_empty() && a.len() == b.len(),
        format!(
            "{} files ({bytes} bytes) compared, differing: {differing:?}",
            a.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let criteria: [Criterion; 12] = [
        ("geometry counts", criterion_1),
        ("harmonic-extension energy invariance", criterion_2),
        ("measure normalization", criterion_3),
        ("Laplacian pairing identity", criterion_4),
        ("discrete embedding", criterion_5),
        ("gradient consistency", criterion_6),
        ("oracle equivalence", criterion_7),
        ("mountain-pass conclusion", criterion_8),
        ("double critical points", criterion_9),
        ("parametric convergence", criterion_10),
        ("zero-perturbation control", criterion_11),
        ("determinism", criterion_12),
    ];
    if std::env::args().any(|a| a == "--list") {
        for (k, (name, _)) in criteria.iter().enumerate() {
            println!(
                "criterion_{:02}_{}: test",
                k + 1,
                name.replace([' ', '-'], "_").to_lowercase()
            );
        }
        return;
    }
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:2} {}: {} ({})",
            k + 1,
            if result.pass { "PASS" } else { "FAIL" },
            name,
            result.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
