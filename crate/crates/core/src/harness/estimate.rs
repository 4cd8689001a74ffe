use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProblemSequence;
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;
use crate::solvers::unit_directions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub n: usize,
    /// `sup |Φ_n − Φ₀|` over the sample.
    pub sup_value_diff: f64,
    /// `sup ‖Φ_n′ − Φ₀′‖` (dual norm) over the sample.
    pub sup_dual_diff: f64,
}

/// Least-squares fit `e_n ≈ C / n` and the spread of `n e_n / C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub constant: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Every ratio within a factor two of one.
    pub within_factor_two: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEstimate {
    pub sample_size: usize,
    pub sample: String,
    pub rows: Vec<EstimateRow>,
    pub monotone_value: bool,
    pub monotone_dual: bool,
    /// `None` when every estimate is zero.
    pub value_rate: Option<RateFit>,
    pub dual_rate: Option<RateFit>,
}

impl ConvergenceEstimate {
    pub fn all_zero(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.sup_value_diff == 0.0 && r.sup_dual_diff == 0.0)
    }
}

pub fn fit_inverse_rate(values: &[(usize, f64)]) -> Option<RateFit> {
    let num: f64 = values.iter().map(|&(n, e)| e / n as f64).sum();
    let den: f64 = values
        .iter()
        .map(|&(n, _)| 1.0 / (n as f64 * n as f64))
        .sum();
    let constant = num / den;
    if !(constant > 0.0) || !constant.is_finite() {
        return None;
    }
    let ratios = values.iter().map(|&(n, e)| n as f64 * e / constant);
    let (ratio_min, ratio_max) = crate::problem::min_max(&ratios.collect::<Vec<_>>());
    Some(RateFit {
        constant,
        ratio_min,
        ratio_max,
        within_factor_two: ratio_min >= 0.5 && ratio_max <= 2.0,
    })
}

fn nonincreasing(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// `count` seeded Dirichlet fields with energy norm uniform in `(0, radius]`.
pub fn random_ball_sample(
    problem: &ProblemInstance,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<VertexField>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample radius must be positive, got {radius}"
        )));
    }
    let dirs = unit_directions(problem, count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    Ok(dirs
        .into_iter()
        .map(|d| {
            let s = radius * (1.0 - rng.gen::<f64>());
            problem.to_field(&d.iter().map(|v| v * s).collect::<Vec<_>>())
        })
        .collect())
}

/// Suprema of `|Φ_n − Φ₀|` and of the dual norm of `Φ_n′ − Φ₀′` over a
/// finite sample, for `n = 1..=n_max`.
pub fn uniform_convergence_estimate(
    seq: &ProblemSequence,
    sample: &[VertexField],
) -> Result<ConvergenceEstimate> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument(
            "convergence estimate needs a nonempty sample".into(),
        ));
    }
    let base = seq.base();
    let form = base.form();
    let mut points = Vec::with_capacity(sample.len());
    for x in sample {
        form.require_dirichlet(x)?;
        let xi = form.restrict(x)?;
        let value = base.action_interior(&xi);
        let residual = base.residual_interior(&xi);
        points.push((xi, value, residual));
    }
    let rows = (1..=seq.n_max())
        .into_par_iter()
        .map(|n| -> Result<EstimateRow> {
            let p = seq.instance(n)?;
            let mut sup_value_diff = 0.0f64;
            let mut sup_dual_diff = 0.0f64;
            for (xi, v0, r0) in &points {
                sup_value_diff = sup_value_diff.max((p.action_interior(xi) - v0).abs());
                let diff: Vec<f64> = p
                    .residual_interior(xi)
                    .iter()
                    .zip(r0)
                    .map(|(a, b)| a - b)
                    .collect();
                if diff.iter().any(|d| *d != 0.0) {
                    let riesz = form.solve_interior(&diff)?;
                    let sq: f64 = riesz.iter().zip(&diff).map(|(a, b)| a * b).sum();
                    sup_dual_diff = sup_dual_diff.max(sq.max(0.0).sqrt());
                }
            }
            Ok(EstimateRow {
                n,
                sup_value_diff,
                sup_dual_diff,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let value_rate = fit_inverse_rate(
        &rows
            .iter()
            .map(|r| (r.n, r.sup_value_diff))
            .collect::<Vec<_>>(),
    );
    let dual_rate = fit_inverse_rate(
        &rows
            .iter()
            .map(|r| (r.n, r.sup_dual_diff))
            .collect::<Vec<_>>(),
    );
    Ok(ConvergenceEstimate {
        sample_size: sample.len(),
        sample: format!("{} Dirichlet fields supplied by the caller", sample.len()),
        monotone_value: nonincreasing(rows.iter().map(|r| r.sup_value_diff)),
        monotone_dual: nonincreasing(rows.iter().map(|r| r.sup_dual_diff)),
        rows,
        value_rate,
        dual_rate,
    })
}
