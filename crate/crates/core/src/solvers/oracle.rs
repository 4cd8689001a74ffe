//! Exhaustive critical-point search for instances with at most four
//! interior unknowns: grid scan of the dual gradient norm, Newton polish of
//! every local minimum, deduplication.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Classification, CriticalPointResult, SolveStatus, TraceEntry};
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

pub const MAX_ORACLE_DOFS: usize = 4;
pub const MAX_ORACLE_POINTS: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    pub lo: f64,
    pub hi: f64,
    /// Grid points per axis, endpoints included.
    pub resolution: usize,
    pub newton_tol: f64,
    pub newton_iters: usize,
    /// Central-difference step for the Jacobian of the gradient.
    pub fd_step: f64,
    pub dedup_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            resolution: 41,
            newton_tol: 1e-10,
            newton_iters: 100,
            fd_step: 1e-6,
            dedup_tol: 1e-6,
        }
    }
}

impl OracleOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            out.push(format!(
                "oracle box must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            ));
        }
        if self.resolution < 2 {
            out.push(format!(
                "oracle resolution must be at least 2, got {}",
                self.resolution
            ));
        }
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("fd_step", self.fd_step),
            ("dedup_tol", self.dedup_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("oracle {name} must be positive, got {v}"));
            }
        }
        out
    }
}

struct Scanner<'a> {
    problem: &'a ProblemInstance,
    // inverse interior stiffness: dual norm² = rᵀ K⁻¹ r
    inverse: DMatrix<f64>,
}

impl Scanner<'_> {
    fn dual_norm(&self, x: &[f64]) -> f64 {
        let r = DVector::from_vec(self.problem.residual_interior(x));
        (r.dot(&(&self.inverse * &r))).max(0.0).sqrt()
    }

    fn jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let d = x.len();
        let mut jac = DMatrix::zeros(d, d);
        let mut y = x.to_vec();
        for j in 0..d {
            y[j] = x[j] + h;
            let plus = self.problem.residual_interior(&y);
            y[j] = x[j] - h;
            let minus = self.problem.residual_interior(&y);
            y[j] = x[j];
            for i in 0..d {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn polish(&self, start: Vec<f64>, opts: &OracleOptions) -> Option<(Vec<f64>, f64, usize)> {
        let mut x = start;
        let mut gn = self.dual_norm(&x);
        for it in 0..opts.newton_iters {
            if gn <= opts.newton_tol {
                return Some((x, gn, it));
            }
            let r = DVector::from_vec(self.problem.residual_interior(&x));
            let step = self.jacobian(&x, opts.fd_step).lu().solve(&(-r))?;
            let mut s = 1.0;
            let mut improved = false;
            while s > 1e-12 {
                let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + s * d).collect();
                let gy = self.dual_norm(&y);
                if gy.is_finite() && gy < (1.0 - 1e-4 * s) * gn {
                    x = y;
                    gn = gy;
                    improved = true;
                    break;
                }
                s *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (gn <= opts.newton_tol).then_some((x, gn, opts.newton_iters))
    }
}

fn classify(problem: &ProblemInstance, x: &[f64]) -> Classification {
    let eig = SymmetricEigen::new(problem.hessian_interior(x)).eigenvalues;
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if eig.iter().any(|v| v.abs() <= 1e-8 * scale) {
        return Classification::Degenerate;
    }
    match eig.iter().filter(|v| **v < 0.0).count() {
        0 => Classification::Minimizer,
        1 => Classification::MountainPass,
        _ => Classification::HigherSaddle,
    }
}

fn unravel(mut index: usize, res: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for slot in out.iter_mut() {
        *slot = index % res;
        index /= res;
    }
    out
}

/// Every critical point found in the box `[lo, hi]^d`, sorted by action
/// value and then coordinates.
pub fn brute_force_critical_points(
    problem: &ProblemInstance,
    opts: &OracleOptions,
) -> Result<Vec<CriticalPointResult>> {
    let v = opts.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let d = problem.dofs();
    if d == 0 {
        return Err(Error::EmptyInterior);
    }
    if d > MAX_ORACLE_DOFS {
        return Err(Error::SizeLimit {
            what: "oracle interior unknowns",
            needed: d as u128,
            limit: MAX_ORACLE_DOFS as u128,
        });
    }
    let res = opts.resolution;
    let total = (res as u128).pow(d as u32);
    if total > MAX_ORACLE_POINTS {
        return Err(Error::SizeLimit {
            what: "oracle grid points",
            needed: total,
            limit: MAX_ORACLE_POINTS,
        });
    }
    let total = total as usize;
    let inverse = problem
        .form()
        .interior_stiffness()
        .to_dense()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("interior stiffness is singular".into()))?;
    let scanner = Scanner { problem, inverse };
    let coord = |i: usize| opts.lo + (opts.hi - opts.lo) * i as f64 / (res - 1) as f64;
    let point = |idx: &[usize]| idx.iter().map(|&i| coord(i)).collect::<Vec<f64>>();

    let norms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|k| scanner.dual_norm(&point(&unravel(k, res, d))))
        .collect();

    let stride: Vec<usize> = (0..d).map(|a| res.pow(a as u32)).collect();
    let candidates: Vec<usize> = (0..total)
        .into_par_iter()
        .filter(|&k| {
            let idx = unravel(k, res, d);
            (0..d).all(|a| {
                let lower = idx[a] == 0 || norms[k] <= norms[k - stride[a]];
                let upper = idx[a] + 1 == res || norms[k] <= norms[k + stride[a]];
                lower && upper
            })
        })
        .collect();

    let polished: Vec<Option<(Vec<f64>, f64, usize)>> = candidates
        .par_iter()
        .map(|&k| scanner.polish(point(&unravel(k, res, d)), opts))
        .collect();

    let margin = 1e-9 * (opts.hi - opts.lo);
    let mut found: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (x, gn, it) in polished.into_iter().flatten() {
        if x.iter()
            .any(|v| *v < opts.lo - margin || *v > opts.hi + margin)
        {
            continue;
        }
        if found
            .iter()
            .any(|(y, _, _)| problem.energy_distance_interior(&x, y) <= opts.dedup_tol)
        {
            continue;
        }
        found.push((x, gn, it));
    }

    let mut out: Vec<CriticalPointResult> = found
        .into_iter()
        .map(|(x, gn, it)| {
            let value = problem.action_interior(&x);
            CriticalPointResult {
                classification: classify(problem, &x),
                point: problem.to_field(&x),
                value,
                dual_grad_norm: gn,
                iterations: it,
                status: SolveStatus::Converged,
                trace: vec![TraceEntry {
                    iter: it,
                    value,
                    grad_norm: gn,
                }],
                iterates: Vec::new(),
                notes: Vec::new(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.value.total_cmp(&b.value).then_with(|| {
            a.point
                .values()
                .iter()
                .zip(b.point.values())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::forms::DiscreteForm;
    use crate::functions::Nonlinearity;
    use crate::geometry::PrefractalGraph;

    fn problem(m: u32, nl: Nonlinearity) -> ProblemInstance {
        let form = DiscreteForm::new(Arc::new(PrefractalGraph::build(3, m).unwrap())).unwrap();
        ProblemInstance::simple(Arc::new(form), nl).unwrap()
    }

    #[test]
    fn quadratic_has_only_zero() {
        let p = problem(1, Nonlinearity::zero(4.0));
        let pts = brute_force_critical_points(&p, &OracleOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].point.values().iter().all(|v| v.abs() < 1e-10));
        assert_eq!(pts[0].classification, Classification::Minimizer);
    }

    #[test]
    fn cubic_contains_symmetric_saddle() {
        let p = problem(1, Nonlinearity::power(1.0, 4.0));
        let pts = brute_force_critical_points(&p, &OracleOptions::default()).unwrap();
        assert!(pts
            .iter()
            .any(|c| c.point.values().iter().all(|v| v.abs() < 1e-10)));
        let t = 15f64.sqrt();
        assert!(pts.iter().any(|c| {
            let x = p.form().restrict(&c.point).unwrap();
            x.iter().all(|v| (v - t).abs() < 1e-8) && (c.value - 37.5).abs() < 1e-8
        }));
        for c in &pts {
            assert!(c.dual_grad_norm <= 1e-10);
        }
    }

    #[test]
    fn too_many_unknowns() {
        let p = problem(2, Nonlinearity::zero(4.0));
        assert!(matches!(
            brute_force_critical_points(&p, &OracleOptions::default()),
            Err(Error::SizeLimit { .. })
        ));
    }
}
