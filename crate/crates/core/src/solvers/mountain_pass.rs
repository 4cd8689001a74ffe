use super::newton::newton_polish;
use super::{axpy, Classification, CriticalPointResult, SolveStatus, SolverOptions, TraceEntry};
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;

/// `points` equispaced nodes on the segment from `start` to `end`.
pub fn straight_path(start: &VertexField, end: &VertexField, points: usize) -> Vec<VertexField> {
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|k| {
            let t = k as f64 / last;
            start.zip_map(end, |a, b| (1.0 - t) * a + t * b)
        })
        .collect()
}

/// Saddle search between `0` and `x_star`.
pub fn mountain_pass(
    problem: &ProblemInstance,
    x_star: &VertexField,
    opts: &SolverOptions,
) -> Result<CriticalPointResult> {
    opts.validate()?;
    let j0 = problem.action(&problem.zero_field())?;
    let js = problem.action(x_star)?;
    if j0 > 0.0 || js > 0.0 {
        return Err(Error::Precondition(format!(
            "mountain pass needs J(0) <= 0 and J(x_star) <= 0, got {j0} and {js}"
        )));
    }
    if problem.form().energy(x_star)? == 0.0 {
        return Err(Error::Precondition("x_star must be nonzero".into()));
    }
    let path = straight_path(&problem.zero_field(), x_star, opts.path_points);
    Ok(mountain_pass_with_path(problem, path, opts)?.0)
}

/// Equal-arclength resampling of the polyline through `old` onto `count`
/// nodes, endpoints kept.
fn resample(problem: &ProblemInstance, old: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let p = old.len();
    let mut arc = vec![0.0; p];
    for k in 1..p {
        arc[k] = arc[k - 1] + problem.energy_distance_interior(&old[k - 1], &old[k]);
    }
    let total = arc[p - 1];
    if count < 2 || !(total > 0.0) || p < 2 {
        return (0..count)
            .map(|k| old[(k * (p - 1)) / (count - 1).max(1)].clone())
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    out.push(old[0].clone());
    let mut seg = 0;
    for k in 1..count - 1 {
        let target = total * k as f64 / (count - 1) as f64;
        while seg + 1 < p - 1 && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let t = if len > 0.0 {
            (target - arc[seg]) / len
        } else {
            0.0
        };
        out.push(lerp(&old[seg], &old[seg + 1], t));
    }
    out.push(old[p - 1].clone());
    out
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

/// Redistributes the nodes at equal energy arclength on either side of node
/// `peak`, which is kept and moved to the index matching its arclength
/// position. Returns the new index of the peak.
fn redistribute(problem: &ProblemInstance, nodes: &mut Vec<Vec<f64>>, peak: usize) -> usize {
    let p = nodes.len();
    let before: f64 = (1..=peak)
        .map(|k| problem.energy_distance_interior(&nodes[k - 1], &nodes[k]))
        .sum();
    let after: f64 = (peak + 1..p)
        .map(|k| problem.energy_distance_interior(&nodes[k - 1], &nodes[k]))
        .sum();
    if !(before + after > 0.0) {
        return peak;
    }
    let at = ((before / (before + after)) * (p - 1) as f64).round() as usize;
    let at = at.clamp(1, p - 2);
    let mut left = resample(problem, &nodes[..=peak], at + 1);
    let right = resample(problem, &nodes[peak..], p - at);
    left.extend(right.into_iter().skip(1));
    *nodes = left;
    at
}

/// Maximizes `J` along the polyline `nodes[k-1] → nodes[k] → nodes[k+1]` by
/// golden-section search, never returning a lower point than `nodes[k]`.
fn climb(problem: &ProblemInstance, nodes: &[Vec<f64>], k: usize, value: f64) -> (Vec<f64>, f64) {
    let at = |s: f64| {
        if s < 1.0 {
            lerp(&nodes[k - 1], &nodes[k], s)
        } else {
            lerp(&nodes[k], &nodes[k + 1], s - 1.0)
        }
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 2.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = problem.action_interior(&at(c));
    let mut fd = problem.action_interior(&at(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = problem.action_interior(&at(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = problem.action_interior(&at(d));
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let s = 0.5 * (a + b);
    let x = at(s);
    let v = problem.action_interior(&x);
    if v > value {
        (x, v)
    } else {
        (nodes[k].clone(), value)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Path deformation: repeatedly push the highest node downhill and
/// redistribute the nodes at equal energy arclength. Endpoints stay fixed.
/// Returns the saddle estimate and the final path.
pub fn mountain_pass_with_path(
    problem: &ProblemInstance,
    path: Vec<VertexField>,
    opts: &SolverOptions,
) -> Result<(CriticalPointResult, Vec<VertexField>)> {
    opts.validate()?;
    if path.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "mountain pass path needs at least 3 nodes, got {}",
            path.len()
        )));
    }
    let mut nodes = Vec::with_capacity(path.len());
    for f in &path {
        problem.form().require_dirichlet(f)?;
        nodes.push(problem.form().restrict(f)?);
    }
    let p = nodes.len();
    let mut values: Vec<f64> = nodes.iter().map(|x| problem.action_interior(x)).collect();
    let end_max = values[0].max(values[p - 1]);

    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut notes = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut last_newton = f64::INFINITY;
    let mut iter = 0usize;
    let mut peak: Vec<f64>;
    let mut peak_value;
    let mut grad_norm;

    loop {
        let k = argmax(&values);
        if k == 0 || k == p - 1 {
            return Err(Error::PathCollapse { endpoint: k });
        }
        (peak, peak_value) = climb(problem, &nodes, k, values[k]);
        nodes[k] = peak.clone();
        values[k] = peak_value;
        let (dir, gn, _) = problem.gradient_interior(&peak)?;
        grad_norm = gn;
        trace.push(TraceEntry {
            iter,
            value: peak_value,
            grad_norm,
        });
        if opts.record_iterates {
            iterates.push(problem.to_field(&peak));
        }
        if grad_norm <= opts.grad_tol {
            status = SolveStatus::Converged;
            break;
        }

        let scale = problem.energy_norm_interior(&peak);
        if opts.newton_switch > 0.0
            && grad_norm <= opts.newton_switch * scale
            && grad_norm < 0.5 * last_newton
        {
            last_newton = grad_norm;
            if let Some((y, gy)) = newton_polish(problem, &peak, opts.grad_tol, 50) {
                let vy = problem.action_interior(&y);
                let ny = problem.energy_norm_interior(&y);
                let near = problem.energy_distance_interior(&y, &peak) <= 0.5 * scale;
                if vy >= end_max && ny > 1e-6 && near {
                    notes.push(format!(
                        "newton polish from path maximum at iteration {iter}"
                    ));
                    peak = y;
                    peak_value = vy;
                    grad_norm = gy;
                    iter += 1;
                    trace.push(TraceEntry {
                        iter,
                        value: peak_value,
                        grad_norm,
                    });
                    status = SolveStatus::Converged;
                    break;
                }
            }
        }
        if iter >= opts.max_iters {
            break;
        }

        // descend across the path, the climb handles the direction along it
        let tangent: Vec<f64> = nodes[k + 1]
            .iter()
            .zip(&nodes[k - 1])
            .map(|(a, b)| a - b)
            .collect();
        let tn = problem.energy_norm_interior(&tangent);
        let dir = if tn > 0.0 {
            let along = problem.form().interior_inner(&dir, &tangent) / (tn * tn);
            axpy(-along, &tangent, &dir)
        } else {
            dir
        };
        let dn = problem.energy_norm_interior(&dir);
        let spacing = problem
            .energy_distance_interior(&nodes[k - 1], &nodes[k])
            .min(problem.energy_distance_interior(&nodes[k], &nodes[k + 1]));
        let mut t = opts.initial_step.min(spacing.max(1e-300) / dn.max(1e-300));
        let mut moved = false;
        while t > 1e-20 && dn > 0.0 {
            let y = axpy(-t, &dir, &peak);
            let vy = problem.action_interior(&y);
            if vy.is_finite() && vy <= peak_value - opts.armijo * t * dn * dn {
                nodes[k] = y;
                moved = true;
                break;
            }
            t *= opts.backtrack;
        }
        if !moved {
            status = SolveStatus::Stalled;
            notes.push(format!(
                "no descent step at the path maximum at iteration {iter}"
            ));
            break;
        }
        redistribute(problem, &mut nodes, k);
        values = nodes.iter().map(|x| problem.action_interior(x)).collect();
        iter += 1;
    }

    if peak_value < end_max {
        notes.push("saddle value below the endpoint values".into());
    }
    let result = CriticalPointResult {
        point: problem.to_field(&peak),
        value: peak_value,
        dual_grad_norm: grad_norm,
        iterations: iter,
        status,
        classification: Classification::MountainPass,
        trace,
        iterates,
        notes,
    };
    let path = nodes.iter().map(|x| problem.to_field(x)).collect();
    Ok((result, path))
}
