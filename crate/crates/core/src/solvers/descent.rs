use super::probe::{ball_radii, unit_directions};
use super::{axpy, Classification, CriticalPointResult, SolveStatus, SolverOptions, TraceEntry};
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;

/// Consecutive on-sphere iterations before a stalled ball minimization is
/// declared a boundary minimizer.
const SPHERE_STREAK: usize = 10;

/// Backtracking descent along the energy-norm Riesz gradient.
pub fn minimize(
    problem: &ProblemInstance,
    opts: &SolverOptions,
    start: &VertexField,
) -> Result<CriticalPointResult> {
    opts.validate()?;
    problem.form().require_dirichlet(start)?;
    let x0 = problem.form().restrict(start)?;
    descend(problem, opts, x0, None)
}

/// Projected descent on the closed energy ball of radius `r`, started from
/// the lowest sampled point of the ball.
pub fn minimize_in_ball(
    problem: &ProblemInstance,
    r: f64,
    opts: &SolverOptions,
) -> Result<CriticalPointResult> {
    let start = initial_guess_in_ball(problem, r, 64, opts.seed)?;
    minimize_in_ball_from(problem, r, opts, &start)
}

pub fn minimize_in_ball_from(
    problem: &ProblemInstance,
    r: f64,
    opts: &SolverOptions,
    start: &VertexField,
) -> Result<CriticalPointResult> {
    opts.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    problem.form().require_dirichlet(start)?;
    let x0 = problem.form().restrict(start)?;
    descend(problem, opts, x0, Some(r))
}

/// Lowest action among rays `s d`, `s` in `ball_radii(r, 16)`, over sampled
/// unit directions `d`; the zero field if nothing is negative.
pub fn initial_guess_in_ball(
    problem: &ProblemInstance,
    r: f64,
    n_directions: usize,
    seed: u64,
) -> Result<VertexField> {
    let mut best = (0.0, vec![0.0; problem.dofs()]);
    for d in unit_directions(problem, n_directions, seed)? {
        for s in ball_radii(r, 16) {
            let x: Vec<f64> = d.iter().map(|v| v * s).collect();
            let val = problem.action_interior(&x);
            if val < best.0 {
                best = (val, x);
            }
        }
    }
    Ok(problem.to_field(&best.1))
}

fn project(problem: &ProblemInstance, x: &mut [f64], r: f64) {
    let norm = problem.energy_norm_interior(x);
    if norm > r {
        let scale = r / norm;
        x.iter_mut().for_each(|v| *v *= scale);
        // guard against rounding just above the sphere
        while problem.energy_norm_interior(x) > r {
            x.iter_mut().for_each(|v| *v *= 1.0 - 1e-15);
        }
    }
}

fn descend(
    problem: &ProblemInstance,
    opts: &SolverOptions,
    mut x: Vec<f64>,
    radius: Option<f64>,
) -> Result<CriticalPointResult> {
    if let Some(r) = radius {
        project(problem, &mut x, r);
    }
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut notes = Vec::new();
    let mut step = opts.initial_step;
    let mut status = SolveStatus::MaxIterations;
    let mut sphere_streak = 0usize;
    let mut value = problem.action_interior(&x);
    let mut grad_norm;
    let mut iter = 0usize;

    loop {
        let (p, gn, _) = problem.gradient_interior(&x)?;
        grad_norm = gn;
        trace.push(TraceEntry {
            iter,
            value,
            grad_norm,
        });
        if opts.record_iterates {
            iterates.push(problem.to_field(&x));
        }
        if value < opts.value_floor {
            return Err(Error::Unbounded {
                value,
                floor: opts.value_floor,
                iteration: iter,
            });
        }
        if grad_norm <= opts.grad_tol {
            status = SolveStatus::Converged;
            break;
        }
        if iter >= opts.max_iters {
            break;
        }

        // below this, action differences are rounding noise
        let noise = 1e-12 * value.abs().max(problem.energy_norm_interior(&x).powi(2));
        let mut t = (step / opts.backtrack).min(opts.initial_step);
        let accepted = loop {
            let mut y = axpy(-t, &p, &x);
            if let Some(r) = radius {
                project(problem, &mut y, r);
            }
            let vy = problem.action_interior(&y);
            let required = match radius {
                None => opts.armijo * t * grad_norm * grad_norm,
                Some(_) => {
                    let d = problem.energy_distance_interior(&x, &y);
                    opts.armijo * d * d / t
                }
            };
            if required <= noise {
                // value comparisons are meaningless here; require the gradient to shrink
                if vy <= value + noise && problem.gradient_interior(&y)?.1 < grad_norm {
                    break Some((y, vy));
                }
            } else if vy <= value - required && vy.is_finite() {
                break Some((y, vy));
            }
            t *= opts.backtrack;
            if t < 1e-20 {
                break None;
            }
        };
        let Some((y, vy)) = accepted else {
            let on_sphere =
                radius.is_some_and(|r| problem.energy_norm_interior(&x) >= r * (1.0 - 1e-10));
            status = if on_sphere {
                SolveStatus::BoundaryMinimizer
            } else {
                SolveStatus::Stalled
            };
            notes.push(format!("line search failed at iteration {iter}"));
            break;
        };

        if let Some(r) = radius {
            let moved = problem.energy_distance_interior(&x, &y) / t;
            if problem.energy_norm_interior(&y) >= r * (1.0 - 1e-10) {
                sphere_streak += 1;
            } else {
                sphere_streak = 0;
            }
            if sphere_streak >= SPHERE_STREAK && moved <= opts.grad_tol {
                x = y;
                value = vy;
                iter += 1;
                let (_, gn, _) = problem.gradient_interior(&x)?;
                grad_norm = gn;
                trace.push(TraceEntry {
                    iter,
                    value,
                    grad_norm,
                });
                status = SolveStatus::BoundaryMinimizer;
                break;
            }
        }
        x = y;
        value = vy;
        step = t;
        iter += 1;
    }

    if status == SolveStatus::BoundaryMinimizer
        || (radius.is_some() && sphere_streak >= SPHERE_STREAK)
    {
        notes.push("boundary minimizer: iterates stuck on the sphere, hypothesis of a critical point inside the ball violated".into());
    }
    Ok(CriticalPointResult {
        point: problem.to_field(&x),
        value,
        dual_grad_norm: grad_norm,
        iterations: iter,
        status,
        classification: Classification::Minimizer,
        trace,
        iterates,
        notes,
    })
}
