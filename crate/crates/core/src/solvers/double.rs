use serde::{Deserialize, Serialize};

use super::probe::{geometry_probe, GeometryReport, ProbeOptions};
use super::{descent, mountain_pass, CriticalPointResult, SolverOptions};
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;

pub const DISTINCT_TOL: f64 = 1e-3;
pub const NONTRIVIAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleCriticalPoints {
    /// Negative-energy minimizer in the ball.
    pub minimizer: CriticalPointResult,
    /// Positive-energy saddle between `0` and `x_star`.
    pub saddle: CriticalPointResult,
    pub geometry: GeometryReport,
    pub distance: f64,
    pub distinct: bool,
    pub nontrivial: bool,
}

/// Minimizer in the ball of radius `r` and mountain-pass point beyond it.
/// `x_star` defaults to the one found by the geometry probe.
pub fn double_critical_points(
    problem: &ProblemInstance,
    r: f64,
    x_star: Option<&VertexField>,
    probe: &ProbeOptions,
    opts: &SolverOptions,
) -> Result<DoubleCriticalPoints> {
    opts.validate()?;
    let geometry = geometry_probe(problem, r, probe)?;
    if !(geometry.ball_inf_estimate < 0.0 && 0.0 < geometry.sphere_inf_estimate) {
        return Err(Error::Precondition(format!(
            "double critical point geometry needs ball inf < 0 < sphere inf, got {} and {}",
            geometry.ball_inf_estimate, geometry.sphere_inf_estimate
        )));
    }
    let x_star = match x_star {
        Some(x) => x.clone(),
        None => geometry
            .x_star
            .clone()
            .ok_or_else(|| Error::Precondition("no x_star found by the geometry probe".into()))?,
    };
    let norm = problem.form().energy(&x_star)?.sqrt();
    let value = problem.action(&x_star)?;
    if !(norm > r && value <= 0.0) {
        return Err(Error::Precondition(format!(
            "x_star needs norm > r = {r} and J(x_star) <= 0, got norm {norm} and J {value}"
        )));
    }

    let minimizer = descent::minimize_in_ball_from(problem, r, opts, &geometry.ball_witness)?;
    let saddle = mountain_pass(problem, &x_star, opts)?;
    let diff = minimizer.point.zip_map(&saddle.point, |a, b| a - b);
    let distance = problem.form().energy(&diff)?.sqrt();
    let n1 = problem.form().energy(&minimizer.point)?.sqrt();
    let n2 = problem.form().energy(&saddle.point)?.sqrt();
    Ok(DoubleCriticalPoints {
        distinct: distance > DISTINCT_TOL,
        nontrivial: n1 > NONTRIVIAL_TOL && n2 > NONTRIVIAL_TOL,
        distance,
        minimizer,
        saddle,
        geometry,
    })
}
