use crate::problem::ProblemInstance;

/// Damped Newton on `J'(x) = 0` with the analytic Hessian, using the dual
/// gradient norm as merit function. Returns the interior point and its dual
/// norm once the norm drops below `tol`.
pub fn newton_polish(
    problem: &ProblemInstance,
    start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Option<(Vec<f64>, f64)> {
    let mut x = start.to_vec();
    let (_, mut gn, mut residual) = problem.gradient_interior(&x).ok()?;
    for _ in 0..max_iters {
        if gn <= tol {
            return Some((x, gn));
        }
        let hess = problem.hessian_interior(&x);
        let rhs = nalgebra::DVector::from_iterator(residual.len(), residual.iter().map(|r| -r));
        let delta = hess.lu().solve(&rhs)?;
        let mut s = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let y: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + s * d).collect();
            let (_, gy, ry) = problem.gradient_interior(&y).ok()?;
            if gy.is_finite() && gy < (1.0 - 1e-4 * s) * gn {
                x = y;
                gn = gy;
                residual = ry;
                improved = true;
                break;
            }
            s *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (gn <= tol).then_some((x, gn))
}
