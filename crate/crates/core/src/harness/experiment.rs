use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::estimate::{random_ball_sample, uniform_convergence_estimate, ConvergenceEstimate};
use super::{ProblemSequence, Schedule};
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;
use crate::solvers::{
    default_radius, geometry_probe, initial_guess_in_ball, minimize, minimize_in_ball,
    minimize_in_ball_from, mountain_pass_with_path, straight_path, CriticalPointResult,
    ProbeOptions, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Min,
    Ball,
    Mpa,
    Double,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "ball" => Ok(Self::Ball),
            "mpa" => Ok(Self::Mpa),
            "double" => Ok(Self::Double),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver {other:?}, expected min, ball, mpa or double"
            ))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Min => "min",
            Self::Ball => "ball",
            Self::Mpa => "mpa",
            Self::Double => "double",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub solver: SolverOptions,
    pub probe: ProbeOptions,
    /// Ball radius; defaults to `M₁ / (2N + 3)`.
    pub r: Option<f64>,
    /// Far endpoint for mountain-pass paths; found by the probe if absent.
    pub x_star: Option<VertexField>,
    /// Cold start for the `min` solver; the best sampled ball point if absent.
    pub start: Option<VertexField>,
    /// Random fields added to the solutions for the convergence estimate.
    pub sample_size: usize,
    /// Radius of the random sample; defaults to the largest solution norm
    /// (at least `r`).
    pub sample_radius: Option<f64>,
    /// Final-row distance target.
    pub tolerance: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            probe: ProbeOptions::default(),
            r: None,
            x_star: None,
            start: None,
            sample_size: 32,
            sample_radius: None,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// `0` is the limit problem.
    pub n: usize,
    /// `‖x̄_n − x̄₀‖`
    pub distance: f64,
    /// `J₀(x̄_n)`
    pub value_limit: f64,
    /// `|J₀(x̄_n) − J₀(x̄₀)|`
    pub value_gap: f64,
    /// Dual norm of `J₀′(x̄_n)`.
    pub grad_norm_limit: f64,
    /// Dual norm of `J_n′(x̄_n)`.
    pub grad_norm_own: f64,
    pub iterations: usize,
    pub status: String,
    pub sup_value_diff: f64,
    pub sup_dual_diff: f64,
    /// Second point of the `double` solver (the saddle).
    #[serde(default)]
    pub secondary_distance: Option<f64>,
    #[serde(default)]
    pub secondary_value_gap: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub format_version: u32,
    pub solver: SolverKind,
    pub schedule: Schedule,
    pub n_max: usize,
    pub r: f64,
    pub rows: Vec<TableRow>,
    pub estimate: ConvergenceEstimate,
    pub tolerance: f64,
    pub final_distance: f64,
    pub final_within_tolerance: bool,
    /// `‖x̄_n − x̄₀‖` strictly decreasing for `n ≥ 4`.
    pub decreasing_beyond_4: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

pub const TABLE_COLUMNS: [&str; 13] = [
    "n",
    "distance",
    "value_limit",
    "value_gap",
    "grad_norm_limit",
    "grad_norm_own",
    "iterations",
    "status",
    "sup_value_diff",
    "sup_dual_diff",
    "secondary_distance",
    "secondary_value_gap",
    "error",
];

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                fmt_f(r.distance),
                fmt_f(r.value_limit),
                fmt_f(r.value_gap),
                fmt_f(r.grad_norm_limit),
                fmt_f(r.grad_norm_own),
                r.iterations.to_string(),
                r.status.clone(),
                fmt_f(r.sup_value_diff),
                fmt_f(r.sup_dual_diff),
                fmt_opt(r.secondary_distance),
                fmt_opt(r.secondary_value_gap),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        Ok(String::from_utf8(
            w.into_inner()
                .map_err(|e| Error::Numerical(e.to_string()))?,
        )
        .expect("csv output is utf-8"))
    }

    /// `n, distance, value_gap` for plotting.
    pub fn plot_data_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "distance", "value_gap"])?;
        for r in self.rows.iter().filter(|r| r.n > 0) {
            w.write_record([r.n.to_string(), fmt_f(r.distance), fmt_f(r.value_gap)])?;
        }
        Ok(String::from_utf8(
            w.into_inner()
                .map_err(|e| Error::Numerical(e.to_string()))?,
        )
        .expect("csv output is utf-8"))
    }
}

/// State carried from one index to the next.
#[derive(Clone)]
struct Solved {
    primary: CriticalPointResult,
    secondary: Option<CriticalPointResult>,
    path: Option<Vec<VertexField>>,
}

struct Runner<'a> {
    kind: SolverKind,
    opts: &'a ExperimentOptions,
    r: f64,
    x_star: Option<VertexField>,
}

impl Runner<'_> {
    fn saddle(
        &self,
        p: &ProblemInstance,
        path: Option<&Vec<VertexField>>,
    ) -> Result<(CriticalPointResult, Vec<VertexField>)> {
        let path = match path {
            Some(path) => path.clone(),
            None => {
                let x_star = self.x_star.as_ref().ok_or_else(|| {
                    Error::Precondition("no x_star available for the mountain pass".into())
                })?;
                straight_path(&p.zero_field(), x_star, self.opts.solver.path_points)
            }
        };
        mountain_pass_with_path(p, path, &self.opts.solver)
    }

    fn cold(&self, p: &ProblemInstance) -> Result<Solved> {
        let s = &self.opts.solver;
        Ok(match self.kind {
            SolverKind::Min => {
                let start = match &self.opts.start {
                    Some(x) => x.clone(),
                    None => initial_guess_in_ball(p, self.r, 64, s.seed)?,
                };
                Solved {
                    primary: minimize(p, s, &start)?,
                    secondary: None,
                    path: None,
                }
            }
            SolverKind::Ball => Solved {
                primary: minimize_in_ball(p, self.r, s)?,
                secondary: None,
                path: None,
            },
            SolverKind::Mpa => {
                let (res, path) = self.saddle(p, None)?;
                Solved {
                    primary: res,
                    secondary: None,
                    path: Some(path),
                }
            }
            SolverKind::Double => {
                let min = minimize_in_ball(p, self.r, s)?;
                let (res, path) = self.saddle(p, None)?;
                Solved {
                    primary: min,
                    secondary: Some(res),
                    path: Some(path),
                }
            }
        })
    }

    fn warm(&self, p: &ProblemInstance, prev: &Solved) -> Result<Solved> {
        let s = &self.opts.solver;
        Ok(match self.kind {
            SolverKind::Min => Solved {
                primary: minimize(p, s, &prev.primary.point)?,
                secondary: None,
                path: None,
            },
            SolverKind::Ball => Solved {
                primary: minimize_in_ball_from(p, self.r, s, &prev.primary.point)?,
                secondary: None,
                path: None,
            },
            SolverKind::Mpa => {
                let (res, path) = self.saddle(p, prev.path.as_ref())?;
                Solved {
                    primary: res,
                    secondary: None,
                    path: Some(path),
                }
            }
            SolverKind::Double => {
                let min = minimize_in_ball_from(p, self.r, s, &prev.primary.point)?;
                let (res, path) = self.saddle(p, prev.path.as_ref())?;
                Solved {
                    primary: min,
                    secondary: Some(res),
                    path: Some(path),
                }
            }
        })
    }
}

fn status_label(res: &CriticalPointResult) -> String {
    serde_json::to_value(res.status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Solves the limit problem cold and every index `n >= 1` warm from index
/// `n - 1`, then tabulates distances to the limit solution.
pub fn run_convergence_experiment(
    seq: &ProblemSequence,
    kind: SolverKind,
    opts: &ExperimentOptions,
) -> Result<ConvergenceTable> {
    let clock = Instant::now();
    opts.solver.validate()?;
    let base = seq.base();
    let r = opts.r.unwrap_or_else(|| default_radius(base));
    let mut notes = Vec::new();
    let x_star = match (&opts.x_star, kind) {
        (Some(x), _) => Some(x.clone()),
        (None, SolverKind::Mpa | SolverKind::Double) => {
            let geo = geometry_probe(base, r, &opts.probe)?;
            if geo.x_star.is_none() {
                return Err(Error::Precondition(
                    "geometry probe found no x_star for the limit problem".into(),
                ));
            }
            geo.x_star
        }
        _ => None,
    };
    if matches!(kind, SolverKind::Min | SolverKind::Ball) {
        notes.push(
            "minimizers are local; global minimality is only certified for convex problems".into(),
        );
    }
    let runner = Runner {
        kind,
        opts,
        r,
        x_star,
    };

    let limit = runner.cold(base)?;
    let limit_point = base.form().restrict(&limit.primary.point)?;
    let limit_value = base.action_interior(&limit_point);
    let limit_secondary = match &limit.secondary {
        Some(s) => Some(base.form().restrict(&s.point)?),
        None => None,
    };

    let mut solved: Vec<Option<Solved>> = vec![Some(limit.clone())];
    let mut errors: Vec<Option<String>> = vec![None];
    let mut last_good = limit.clone();
    for n in 1..=seq.n_max() {
        match seq.instance(n).and_then(|p| runner.warm(&p, &last_good)) {
            Ok(s) => {
                last_good = s.clone();
                solved.push(Some(s));
                errors.push(None);
            }
            Err(e) => {
                solved.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }

    let mut sample: Vec<VertexField> = Vec::new();
    let mut max_norm = r;
    for s in solved.iter().flatten() {
        for res in std::iter::once(&s.primary).chain(s.secondary.iter()) {
            max_norm = max_norm.max(base.form().energy(&res.point)?.sqrt());
            sample.push(res.point.clone());
        }
    }
    let sample_radius = opts.sample_radius.unwrap_or(max_norm);
    if opts.sample_size > 0 {
        sample.extend(random_ball_sample(
            base,
            sample_radius,
            opts.sample_size,
            opts.solver.seed,
        )?);
    }
    let solution_count = sample.len() - opts.sample_size;
    let mut estimate = uniform_convergence_estimate(seq, &sample)?;
    estimate.sample = format!(
        "{solution_count} computed critical points plus {} random fields in the ball of radius {sample_radius} (seed {})",
        opts.sample_size, opts.solver.seed
    );

    let mut rows = Vec::with_capacity(solved.len());
    for (n, (s, err)) in solved.iter().zip(errors).enumerate() {
        let (sup_value_diff, sup_dual_diff) = match n {
            0 => (0.0, 0.0),
            _ => (
                estimate.rows[n - 1].sup_value_diff,
                estimate.rows[n - 1].sup_dual_diff,
            ),
        };
        let row = match s {
            Some(s) => {
                let x = base.form().restrict(&s.primary.point)?;
                let value_limit = base.action_interior(&x);
                let (secondary_distance, secondary_value_gap) =
                    match (&s.secondary, &limit_secondary) {
                        (Some(sec), Some(lim)) => {
                            let y = base.form().restrict(&sec.point)?;
                            (
                                Some(base.energy_distance_interior(&y, lim)),
                                Some((base.action_interior(&y) - base.action_interior(lim)).abs()),
                            )
                        }
                        _ => (None, None),
                    };
                TableRow {
                    n,
                    distance: base.energy_distance_interior(&x, &limit_point),
                    value_limit,
                    value_gap: (value_limit - limit_value).abs(),
                    grad_norm_limit: base.gradient_interior(&x)?.1,
                    grad_norm_own: s.primary.dual_grad_norm,
                    iterations: s.primary.iterations,
                    status: status_label(&s.primary),
                    sup_value_diff,
                    sup_dual_diff,
                    secondary_distance,
                    secondary_value_gap,
                    error: err,
                }
            }
            None => TableRow {
                n,
                distance: f64::NAN,
                value_limit: f64::NAN,
                value_gap: f64::NAN,
                grad_norm_limit: f64::NAN,
                grad_norm_own: f64::NAN,
                iterations: 0,
                status: "failed".into(),
                sup_value_diff,
                sup_dual_diff,
                secondary_distance: None,
                secondary_value_gap: None,
                error: err,
            },
        };
        rows.push(row);
    }

    let final_distance = rows.last().map(|r| r.distance).unwrap_or(f64::NAN);
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.n >= 4)
        .map(|r| r.distance)
        .collect();
    let decreasing_beyond_4 = tail.windows(2).all(|w| w[1] < w[0]);
    for r in rows.iter().filter(|r| r.error.is_some()) {
        notes.push(format!(
            "index {} failed: {}",
            r.n,
            r.error.as_deref().unwrap_or("")
        ));
    }
    Ok(ConvergenceTable {
        format_version: 1,
        solver: kind,
        schedule: seq.schedule().clone(),
        n_max: seq.n_max(),
        r,
        rows,
        estimate,
        tolerance: opts.tolerance,
        final_distance,
        final_within_tolerance: final_distance <= opts.tolerance,
        decreasing_beyond_4,
        notes,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::base;
    use super::super::{build_sequence, Schedule};
    use super::*;
    use crate::functions::{Nonlinearity, ScalarFunction};

    #[test]
    fn zero_delta_reproduces_limit() {
        let b = base(2)
            .with_nonlinearity(Nonlinearity::new(ScalarFunction::constant(0.5), 4.0))
            .unwrap();
        let w = VertexField::constant(b.graph().vertex_count(), 0.1);
        let seq = build_sequence(b, Schedule::combined(0.0, w), 4).unwrap();
        let table =
            run_convergence_experiment(&seq, SolverKind::Min, &ExperimentOptions::default())
                .unwrap();
        assert_eq!(table.rows.len(), 5);
        for r in &table.rows {
            assert!(r.distance < 1e-7, "{r:?}");
            assert_eq!(r.sup_value_diff, 0.0);
            assert_eq!(r.sup_dual_diff, 0.0);
        }
        assert!(table.estimate.all_zero());
    }

    #[test]
    fn convex_warm_and_cold_agree() {
        let b = base(2)
            .with_nonlinearity(Nonlinearity::new(ScalarFunction::constant(0.5), 4.0))
            .unwrap();
        let seq = build_sequence(b, Schedule::g_scale(1.0), 6).unwrap();
        let opts = ExperimentOptions::default();
        let table = run_convergence_experiment(&seq, SolverKind::Min, &opts).unwrap();
        let p = seq.instance(6).unwrap();
        let cold = minimize(&p, &opts.solver, &p.zero_field()).unwrap();
        let warm = table.rows[6].clone();
        let limit = minimize(seq.base(), &opts.solver, &p.zero_field()).unwrap();
        let d = p
            .form()
            .energy(&cold.point.zip_map(&limit.point, |a, b| a - b))
            .unwrap()
            .sqrt();
        assert!((d - warm.distance).abs() < 1e-6);
        assert!(table.decreasing_beyond_4);
        let csv = table.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("n,distance,"));
    }
}
