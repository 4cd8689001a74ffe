//! Functional sequences built from converging data, estimates of their
//! uniform convergence, hypothesis checks and the convergence experiment.

mod estimate;
mod experiment;
mod hypotheses;

pub use estimate::{
    fit_inverse_rate, random_ball_sample, uniform_convergence_estimate, ConvergenceEstimate,
    EstimateRow, RateFit,
};
pub use experiment::{
    run_convergence_experiment, ConvergenceTable, ExperimentOptions, SolverKind, TableRow,
    TABLE_COLUMNS,
};
pub use hypotheses::{hypothesis_check, HypothesisEntry, HypothesisOptions, HypothesisReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::functions::{Nonlinearity, ScalarFunction};
use crate::problem::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `g_n = g₀ (1 + δ/n)`
    GScale,
    /// `u_n = u₀ + (δ/n) w`
    UDrift,
    /// both of the above
    Combined,
}

impl ScheduleKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "g_scale" | "g-scale" => Ok(Self::GScale),
            "u_drift" | "u-drift" => Ok(Self::UDrift),
            "combined" => Ok(Self::Combined),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule {other:?}, expected g_scale, u_drift or combined"
            ))),
        }
    }

    fn scales_g(self) -> bool {
        matches!(self, Self::GScale | Self::Combined)
    }

    fn drifts_u(self) -> bool {
        matches!(self, Self::UDrift | Self::Combined)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub delta: f64,
    /// Drift direction `w` for `u`; required by the drifting kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<VertexField>,
    /// `θ_n = θ₀ + theta_delta / n`; power terms with exponent `θ₀` follow.
    #[serde(default)]
    pub theta_delta: f64,
}

impl Schedule {
    pub fn g_scale(delta: f64) -> Self {
        Self {
            kind: ScheduleKind::GScale,
            delta,
            drift: None,
            theta_delta: 0.0,
        }
    }

    pub fn combined(delta: f64, drift: VertexField) -> Self {
        Self {
            kind: ScheduleKind::Combined,
            delta,
            drift: Some(drift),
            theta_delta: 0.0,
        }
    }
}

/// Limit problem (index 0) and the rule producing indices `1..=n_max`.
#[derive(Debug, Clone)]
pub struct ProblemSequence {
    base: ProblemInstance,
    schedule: Schedule,
    n_max: usize,
}

fn retarget_power(f: &ScalarFunction, from: f64, to: f64) -> ScalarFunction {
    match f {
        ScalarFunction::ScaledPower { scale, exponent } if *exponent == from => {
            ScalarFunction::ScaledPower {
                scale: *scale,
                exponent: to,
            }
        }
        ScalarFunction::Sum { terms } => ScalarFunction::Sum {
            terms: terms.iter().map(|t| retarget_power(t, from, to)).collect(),
        },
        other => other.clone(),
    }
}

/// Validates every index up front; instances are then rebuilt on demand.
pub fn build_sequence(
    base: ProblemInstance,
    schedule: Schedule,
    n_max: usize,
) -> Result<ProblemSequence> {
    if !schedule.delta.is_finite() || !schedule.theta_delta.is_finite() {
        return Err(Error::InvalidArgument(
            "schedule parameters must be finite".into(),
        ));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if schedule.kind.drifts_u() {
        match &schedule.drift {
            None => {
                return Err(Error::InvalidArgument(format!(
                    "schedule {:?} needs a drift field",
                    schedule.kind
                )))
            }
            Some(w) => {
                w.check_len(base.graph())?;
                if !w.is_finite() {
                    return Err(Error::InvalidArgument("drift field must be finite".into()));
                }
            }
        }
    }
    let seq = ProblemSequence {
        base,
        schedule,
        n_max,
    };
    for n in 1..=n_max {
        seq.instance(n)?;
    }
    Ok(seq)
}

impl ProblemSequence {
    pub fn base(&self) -> &ProblemInstance {
        &self.base
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Instance `n`; `n = 0` is the limit problem.
    pub fn instance(&self, n: usize) -> Result<ProblemInstance> {
        if n == 0 {
            return Ok(self.base.clone());
        }
        if n > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "index {n} beyond n_max = {}",
                self.n_max
            )));
        }
        let step = self.schedule.delta / n as f64;
        let mut p = self.base.clone();
        if self.schedule.kind.scales_g() && step != 0.0 {
            let g = self.base.g().map(|v| v * (1.0 + step));
            if let Some(i) = g.values().iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Schedule {
                    n,
                    reason: format!("g_n = {} at vertex {i} is not positive", g[i]),
                });
            }
            p = p.with_g(g)?;
        }
        if self.schedule.kind.drifts_u() && step != 0.0 {
            let w = self
                .schedule
                .drift
                .as_ref()
                .expect("checked in build_sequence");
            let u = self.base.u_data().zip_map(w, |u, w| u + step * w);
            let m = self.base.bounds().m;
            if let Some(i) = u.values().iter().position(|v| v.abs() > m) {
                return Err(Error::Schedule {
                    n,
                    reason: format!("|u_n| = {} at vertex {i} exceeds M = {m}", u[i].abs()),
                });
            }
            p = p.with_u_data(u)?;
        }
        if self.schedule.theta_delta != 0.0 {
            let nl = self.base.nonlinearity();
            let theta = nl.theta + self.schedule.theta_delta / n as f64;
            if !(theta > 2.0 + self.base.bounds().epsilon) {
                return Err(Error::Schedule {
                    n,
                    reason: format!("theta_n = {theta} is not above 2 + eps"),
                });
            }
            let f = retarget_power(&nl.f, nl.theta, theta);
            p = p.with_nonlinearity(Nonlinearity {
                f,
                theta,
                quadrature: nl.quadrature,
            })?;
        }
        Ok(p)
    }
}
