//! Critical point finders for the action functional and the probes that
//! check mountain-pass and double-critical-point geometry.

mod descent;
mod double;
mod mountain_pass;
mod newton;
mod oracle;
mod palais_smale;
mod probe;

pub use descent::{initial_guess_in_ball, minimize, minimize_in_ball, minimize_in_ball_from};
pub use double::{double_critical_points, DoubleCriticalPoints};
pub use mountain_pass::{mountain_pass, mountain_pass_with_path, straight_path};
pub use newton::newton_polish;
pub use oracle::{brute_force_critical_points, OracleOptions};
pub use palais_smale::{palais_smale_diagnostic, PalaisSmaleReport};
pub use probe::{
    default_radius, geometric_grid, geometry_probe, unit_directions, GeometryFlags, GeometryReport,
    ProbeOptions, SmallRayBound,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::VertexField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once the dual norm of `J'` drops below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    /// Step shrink factor in backtracking, in (0, 1).
    pub backtrack: f64,
    /// Sufficient-decrease constant, in (0, 1).
    pub armijo: f64,
    /// Nodes on the mountain-pass path, endpoints included.
    pub path_points: usize,
    pub seed: u64,
    /// Action values below this are taken as divergence to minus infinity.
    pub value_floor: f64,
    /// Mountain pass hands over to Newton once the path maximum has relative
    /// dual gradient norm below this. Zero disables the hand-over.
    pub newton_switch: f64,
    /// Keep every iterate in the result (for Palais-Smale diagnostics).
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 20_000,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            path_points: 41,
            seed: 0,
            value_floor: -1e12,
            newton_switch: 1e-2,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            out.push(format!(
                "solver.grad_tol must be positive and finite, got {}",
                self.grad_tol
            ));
        }
        if self.path_points < 3 {
            out.push(format!(
                "solver.path_points must be at least 3, got {}",
                self.path_points
            ));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            out.push(format!(
                "solver.initial_step must be positive, got {}",
                self.initial_step
            ));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            out.push(format!(
                "solver.backtrack must lie in (0, 1), got {}",
                self.backtrack
            ));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            out.push(format!(
                "solver.armijo must lie in (0, 1), got {}",
                self.armijo
            ));
        }
        if !self.value_floor.is_finite() {
            out.push("solver.value_floor must be finite".into());
        }
        if !(self.newton_switch >= 0.0 && self.newton_switch.is_finite()) {
            out.push(format!(
                "solver.newton_switch must be >= 0, got {}",
                self.newton_switch
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Minimizer,
    MountainPass,
    /// Critical point with Morse index above one (oracle only).
    HigherSaddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stalled,
    /// Ball minimization stuck on the sphere: no interior critical point.
    BoundaryMinimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointResult {
    pub point: VertexField,
    pub value: f64,
    pub dual_grad_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub classification: Classification,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<VertexField>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriticalPointResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Trace as CSV text with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,value,grad_norm\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{:.16e},{:.16e}\n",
                t.iter, t.value, t.grad_norm
            ));
        }
        out
    }
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    // y + alpha x
    x.iter().zip(y).map(|(a, b)| b + alpha * a).collect()
}
