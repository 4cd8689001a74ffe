use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;

/// Grad norms at or below this count as vanishing.
const VANISHING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalaisSmaleReport {
    pub len: usize,
    pub sup_abs_value: f64,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub norms: Vec<f64>,
    /// Last (up to) ten grad norms.
    pub grad_tail: Vec<f64>,
    pub grad_vanishing: bool,
    /// Largest `R` with `c R² − R/(2+ε) ≤ b`, `b = sup |J(x_k)|`: the bound
    /// on `‖x_k‖` for every term with dual grad norm at most one, when `c > 0`.
    pub radius_bound: Option<f64>,
    /// Indices with grad norm at most one whose norm exceeds the bound.
    pub radius_violations: Vec<usize>,
    /// Energy diameter of the last quarter of the sequence.
    pub tail_diameter: f64,
    pub clustered: bool,
}

impl PalaisSmaleReport {
    pub fn bounded(&self) -> bool {
        self.sup_abs_value.is_finite()
    }
}

/// `R` solving `c R² − s R − b = 0` for the positive root.
pub(crate) fn ps_radius(c: f64, slope: f64, b: f64) -> Option<f64> {
    if !(c > 0.0) || !(b >= 0.0) {
        return None;
    }
    Some((slope + (slope * slope + 4.0 * c * b).sqrt()) / (2.0 * c))
}

pub fn palais_smale_diagnostic(
    problem: &ProblemInstance,
    sequence: &[VertexField],
) -> Result<PalaisSmaleReport> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument(
            "Palais-Smale diagnostic needs a nonempty sequence".into(),
        ));
    }
    let mut interior = Vec::with_capacity(sequence.len());
    let mut values = Vec::with_capacity(sequence.len());
    let mut grad_norms = Vec::with_capacity(sequence.len());
    let mut norms = Vec::with_capacity(sequence.len());
    for x in sequence {
        problem.form().require_dirichlet(x)?;
        let xi = problem.form().restrict(x)?;
        values.push(problem.action_interior(&xi));
        grad_norms.push(problem.gradient_interior(&xi)?.1);
        norms.push(problem.energy_norm_interior(&xi));
        interior.push(xi);
    }
    let sup_abs_value = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = *grad_norms.last().unwrap();
    let grad_vanishing =
        last <= VANISHING || (grad_norms.len() > 1 && last <= 1e-3 * grad_norms[0]);

    let b = problem.bounds();
    let radius_bound = ps_radius(b.c, 1.0 / (2.0 + b.epsilon), sup_abs_value);
    let radius_violations = match radius_bound {
        Some(r) => (0..sequence.len())
            .filter(|&k| grad_norms[k] <= 1.0 && norms[k] > r * (1.0 + 1e-12))
            .collect(),
        None => Vec::new(),
    };

    let start = sequence.len() - (sequence.len() / 4).max(1).min(sequence.len());
    let tail = &interior[start..];
    let mut tail_diameter = 0.0f64;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            tail_diameter = tail_diameter.max(problem.energy_distance_interior(&tail[i], &tail[j]));
        }
    }
    let scale = norms[start..].iter().fold(1.0f64, |m, &v| m.max(v));
    let clustered = tail_diameter <= 1e-3 * scale;

    Ok(PalaisSmaleReport {
        len: sequence.len(),
        sup_abs_value,
        grad_tail: grad_norms[grad_norms.len().saturating_sub(10)..].to_vec(),
        values,
        grad_norms,
        norms,
        grad_vanishing,
        radius_bound,
        radius_violations,
        tail_diameter,
        clustered,
    })
}
