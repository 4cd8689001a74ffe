//! Run configuration: JSON schema, defaults, and validation that reports
//! every violation at once.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forms::{DiscreteForm, VertexField};
use crate::functions::{Nonlinearity, ScalarFunction};
use crate::geometry::{PrefractalGraph, DEFAULT_MAX_VERTICES};
use crate::harness::{
    build_sequence, ExperimentOptions, ProblemSequence, Schedule, ScheduleKind, SolverKind,
};
use crate::problem::{min_max, Bounds, ProblemInstance, H_GRID};
use crate::solvers::{OracleOptions, ProbeOptions, SolverOptions};

pub const CONFIG_VERSION: u32 = 1;

/// A vertex field given as one number, an explicit list, or an affine
/// function of the barycentric coordinates clamped to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Shape(FieldShape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldShape {
    Constant {
        value: f64,
    },
    Values {
        values: Vec<f64>,
    },
    ClampedAffine {
        offset: f64,
        coeffs: Vec<f64>,
        #[serde(default = "neg_inf")]
        lo: f64,
        #[serde(default = "pos_inf")]
        hi: f64,
    },
}

fn neg_inf() -> f64 {
    f64::MIN
}

fn pos_inf() -> f64 {
    f64::MAX
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        Self::Number(value)
    }

    pub fn evaluate(&self, graph: &PrefractalGraph) -> Result<VertexField> {
        let nv = graph.vertex_count();
        match self {
            Self::Number(v) | Self::Shape(FieldShape::Constant { value: v }) => {
                Ok(VertexField::constant(nv, *v))
            }
            Self::Shape(FieldShape::Values { values }) => {
                if values.len() != nv {
                    return Err(Error::GraphMismatch {
                        expected: nv,
                        got: values.len(),
                    });
                }
                Ok(VertexField::new(values.clone()))
            }
            Self::Shape(FieldShape::ClampedAffine {
                offset,
                coeffs,
                lo,
                hi,
            }) => {
                if coeffs.len() != graph.n() {
                    return Err(Error::InvalidArgument(format!(
                        "clamped_affine needs {} coefficients, got {}",
                        graph.n(),
                        coeffs.len()
                    )));
                }
                if !(lo <= hi) {
                    return Err(Error::InvalidArgument(format!(
                        "clamped_affine needs lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                let denom = (1u64 << graph.level()) as f64;
                Ok(VertexField::new(
                    graph
                        .vertices()
                        .iter()
                        .map(|v| {
                            let s: f64 = v
                                .coords
                                .iter()
                                .zip(coeffs)
                                .map(|(c, k)| *c as f64 / denom * k)
                                .sum();
                            (offset + s).clamp(*lo, *hi)
                        })
                        .collect(),
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasketConfig {
    pub n: usize,
    pub level: u32,
    #[serde(default = "default_max_vertices")]
    pub max_vertices: usize,
}

fn default_max_vertices() -> usize {
    DEFAULT_MAX_VERTICES
}

/// Bounds as written by the user; missing entries are inferred.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsInput {
    pub m: Option<f64>,
    pub m1: Option<f64>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub g_lo: Option<f64>,
    pub g_hi: Option<f64>,
    pub h_lo: Option<f64>,
    pub h_hi: Option<f64>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub a: FieldSpec,
    pub g: FieldSpec,
    pub u: FieldSpec,
    pub h: ScalarFunction,
    pub nonlinearity: Nonlinearity,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub schedule: ScheduleKind,
    pub delta: f64,
    pub n_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<FieldSpec>,
    pub theta_delta: f64,
    pub solver: SolverKind,
    pub tolerance: f64,
    pub sample_size: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleKind::GScale,
            delta: 1.0,
            n_max: 32,
            drift: None,
            theta_delta: 0.0,
            solver: SolverKind::Min,
            tolerance: 1e-4,
            sample_size: 32,
        }
    }
}

/// Effective configuration: every default filled in, so serializing it
/// yields a self-describing record of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub gasket: GasketConfig,
    pub problem: ProblemConfig,
    pub solver: SolverOptions,
    pub probe: ProbeOptions,
    pub oracle: OracleOptions,
    pub harness: HarnessConfig,
    /// Ball radius; `M₁ / (2N + 3)` when absent.
    pub r: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

const TOP_KEYS: [&str; 10] = [
    "format_version",
    "gasket",
    "problem",
    "solver",
    "probe",
    "oracle",
    "harness",
    "r",
    "seed",
    "output",
];
const PROBLEM_KEYS: [&str; 6] = ["a", "g", "u", "h", "nonlinearity", "bounds"];

fn section<T: DeserializeOwned + Default>(root: &Value, key: &str, errors: &mut Vec<String>) -> T {
    match root.get(key) {
        None | Some(Value::Null) => T::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errors.push(format!("{key}: {e}"));
            T::default()
        }),
    }
}

fn required<T: DeserializeOwned>(root: &Value, path: &str, errors: &mut Vec<String>) -> Option<T> {
    let mut cur = root;
    for part in path.split('.') {
        match cur.get(part) {
            Some(v) => cur = v,
            None => {
                errors.push(format!("missing required field {path}"));
                return None;
            }
        }
    }
    serde_json::from_value(cur.clone())
        .map_err(|e| errors.push(format!("{path}: {e}")))
        .ok()
}

fn optional<T: DeserializeOwned>(root: &Value, path: &str, errors: &mut Vec<String>) -> Option<T> {
    let mut cur = root;
    for part in path.split('.') {
        match cur.get(part) {
            Some(Value::Null) | None => return None,
            Some(v) => cur = v,
        }
    }
    serde_json::from_value(cur.clone())
        .map_err(|e| errors.push(format!("{path}: {e}")))
        .ok()
}

fn check_keys(root: &Value, path: &str, allowed: &[&str], errors: &mut Vec<String>) {
    if let Some(obj) = root.as_object() {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                let at = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                errors.push(format!("unknown field {at}"));
            }
        }
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses and validates a configuration, collecting every violation.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("config is not valid JSON: {e}")))?;
    if !root.is_object() {
        return Err(Error::Parse("config must be a JSON object".into()));
    }
    let mut errors = Vec::new();
    check_keys(&root, "", &TOP_KEYS, &mut errors);
    if let Some(p) = root.get("problem") {
        check_keys(p, "problem", &PROBLEM_KEYS, &mut errors);
    }
    if let Some(v) = optional::<u32>(&root, "format_version", &mut errors) {
        if v != CONFIG_VERSION {
            errors.push(format!(
                "format_version {v} is not supported (expected {CONFIG_VERSION})"
            ));
        }
    }

    let gasket: Option<GasketConfig> = match (
        required::<usize>(&root, "gasket.n", &mut errors),
        required::<u32>(&root, "gasket.level", &mut errors),
    ) {
        (Some(n), Some(level)) => Some(GasketConfig {
            n,
            level,
            max_vertices: optional(&root, "gasket.max_vertices", &mut errors)
                .unwrap_or(DEFAULT_MAX_VERTICES),
        }),
        _ => None,
    };
    let nonlinearity: Option<Nonlinearity> = required(&root, "problem.nonlinearity", &mut errors);
    let a: FieldSpec = optional(&root, "problem.a", &mut errors).unwrap_or(FieldSpec::Number(0.0));
    let g: FieldSpec = optional(&root, "problem.g", &mut errors).unwrap_or(FieldSpec::Number(1.0));
    let u: FieldSpec = optional(&root, "problem.u", &mut errors).unwrap_or(FieldSpec::Number(0.0));
    let h: ScalarFunction =
        optional(&root, "problem.h", &mut errors).unwrap_or(ScalarFunction::constant(1.0));
    let bounds_in: BoundsInput = optional(&root, "problem.bounds", &mut errors).unwrap_or_default();

    let mut solver: SolverOptions = section(&root, "solver", &mut errors);
    let mut probe: ProbeOptions = section(&root, "probe", &mut errors);
    let oracle: OracleOptions = section(&root, "oracle", &mut errors);
    let harness: HarnessConfig = section(&root, "harness", &mut errors);
    let r: Option<f64> = optional(&root, "r", &mut errors);
    let seed: u64 = optional(&root, "seed", &mut errors).unwrap_or(0);
    let output: Option<String> = optional(&root, "output", &mut errors);
    solver.seed = seed;
    probe.seed = seed;

    errors.extend(solver.violations());
    errors.extend(oracle.violations());
    if probe.n_directions < 16 {
        errors.push(format!(
            "probe.n_directions must be at least 16, got {}",
            probe.n_directions
        ));
    }
    if probe.s_grid.is_empty() || probe.s_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        errors.push("probe.s_grid must be a nonempty list of positive numbers".into());
    }
    if let Some(r) = r {
        if !(r > 0.0 && r.is_finite()) {
            errors.push(format!("r must be positive, got {r}"));
        }
    }
    if !harness.delta.is_finite() {
        errors.push("harness.delta must be finite".into());
    }
    if harness.n_max == 0 {
        errors.push("harness.n_max must be at least 1".into());
    }
    if !(harness.tolerance > 0.0) {
        errors.push(format!(
            "harness.tolerance must be positive, got {}",
            harness.tolerance
        ));
    }
    if matches!(
        harness.schedule,
        ScheduleKind::UDrift | ScheduleKind::Combined
    ) && harness.drift.is_none()
    {
        errors.push(format!(
            "harness.schedule {:?} needs harness.drift",
            harness.schedule
        ));
    }

    let theta = nonlinearity.as_ref().map(|n| n.theta).unwrap_or(f64::NAN);
    let mut bounds = Bounds {
        m: bounds_in.m.unwrap_or(1.0),
        m1: bounds_in.m1.unwrap_or(1.0),
        beta: bounds_in.beta.unwrap_or(1.0),
        eta: bounds_in.eta.unwrap_or(0.0),
        g_lo: bounds_in.g_lo.unwrap_or(f64::NAN),
        g_hi: bounds_in.g_hi.unwrap_or(f64::NAN),
        h_lo: bounds_in.h_lo.unwrap_or(f64::NAN),
        h_hi: bounds_in.h_hi.unwrap_or(f64::NAN),
        epsilon: bounds_in
            .epsilon
            .unwrap_or(((theta - 2.0) / 2.0).clamp(f64::MIN_POSITIVE, 0.5)),
        c: bounds_in.c.unwrap_or(0.5 - 1.0 / theta),
    };
    if !(bounds.m > 0.0) {
        errors.push(format!(
            "problem.bounds.m: M must be positive, got {}",
            bounds.m
        ));
    }
    if bounds.h_lo.is_nan() || bounds.h_hi.is_nan() {
        let values: Vec<f64> = (0..H_GRID)
            .map(|k| h.eval(-bounds.m + 2.0 * bounds.m * k as f64 / (H_GRID - 1) as f64))
            .collect();
        let (lo, hi) = min_max(&values);
        if bounds.h_lo.is_nan() {
            bounds.h_lo = lo;
        }
        if bounds.h_hi.is_nan() {
            bounds.h_hi = hi;
        }
    }

    let graph = gasket.as_ref().and_then(|gc| {
        PrefractalGraph::build_with_limit(gc.n, gc.level, gc.max_vertices)
            .map_err(|e| errors.push(format!("gasket: {e}")))
            .ok()
    });
    let mut fields = None;
    if let Some(graph) = &graph {
        let mut eval = |name: &str, spec: &FieldSpec| {
            spec.evaluate(graph)
                .map_err(|e| errors.push(format!("problem.{name}: {e}")))
                .ok()
        };
        let (fa, fg, fu) = (eval("a", &a), eval("g", &g), eval("u", &u));
        if let Some(w) = &harness.drift {
            if let Err(e) = w.evaluate(graph) {
                errors.push(format!("harness.drift: {e}"));
            }
        }
        if let (Some(fa), Some(fg), Some(fu)) = (fa, fg, fu) {
            let (lo, hi) = min_max(fg.values());
            if bounds.g_lo.is_nan() {
                bounds.g_lo = lo;
            }
            if bounds.g_hi.is_nan() {
                bounds.g_hi = hi;
            }
            if let Some((i, v)) = fu
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| v.abs() > bounds.m)
            {
                errors.push(format!(
                    "problem.u: |u| = {} at vertex {i} exceeds M = {}",
                    v.abs(),
                    bounds.m
                ));
            }
            fields = Some((fa, fg, fu));
        }
    }

    if let (Some(graph), Some((fa, fg, fu)), Some(nl)) = (graph, fields, nonlinearity.clone()) {
        if errors.is_empty() {
            match DiscreteForm::new(Arc::new(graph)).and_then(|form| {
                ProblemInstance::new(Arc::new(form), fa, fg, fu, h.clone(), nl, bounds)
            }) {
                Ok(p) => errors.extend(p.validate()),
                Err(Error::Validation(v)) => errors.extend(v),
                Err(e) => errors.push(format!("problem: {e}")),
            }
        }
    } else if nonlinearity.is_some() && errors.is_empty() {
        errors.push("problem could not be assembled".into());
    }

    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(RunConfig {
        format_version: CONFIG_VERSION,
        gasket: gasket.expect("validated"),
        problem: ProblemConfig {
            a,
            g,
            u,
            h,
            nonlinearity: nonlinearity.expect("validated"),
            bounds,
        },
        solver,
        probe,
        oracle,
        harness,
        r,
        seed,
        output,
    })
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.seed = seed;
        self.probe.seed = seed;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact effective configuration, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn build_graph(&self) -> Result<PrefractalGraph> {
        PrefractalGraph::build_with_limit(
            self.gasket.n,
            self.gasket.level,
            self.gasket.max_vertices,
        )
    }

    pub fn build_problem(&self) -> Result<ProblemInstance> {
        let graph = self.build_graph()?;
        let pc = &self.problem;
        let a = pc.a.evaluate(&graph)?;
        let g = pc.g.evaluate(&graph)?;
        let u = pc.u.evaluate(&graph)?;
        let form = DiscreteForm::new(Arc::new(graph))?;
        ProblemInstance::new(
            Arc::new(form),
            a,
            g,
            u,
            pc.h.clone(),
            pc.nonlinearity.clone(),
            pc.bounds,
        )
    }

    pub fn schedule(&self, graph: &PrefractalGraph) -> Result<Schedule> {
        Ok(Schedule {
            kind: self.harness.schedule,
            delta: self.harness.delta,
            drift: self
                .harness
                .drift
                .as_ref()
                .map(|w| w.evaluate(graph))
                .transpose()?,
            theta_delta: self.harness.theta_delta,
        })
    }

    pub fn build_sequence(&self) -> Result<ProblemSequence> {
        let problem = self.build_problem()?;
        let schedule = self.schedule(problem.graph())?;
        build_sequence(problem, schedule, self.harness.n_max)
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            solver: self.solver.clone(),
            probe: self.probe.clone(),
            r: self.r,
            x_star: None,
            start: None,
            sample_size: self.harness.sample_size,
            sample_radius: None,
            tolerance: self.harness.tolerance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "gasket": {"n": 3, "level": 2},
        "problem": {"nonlinearity": {"f": {"kind": "scaled_power", "scale": 1.0, "exponent": 4.0}, "theta": 4.0}}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverOptions::default());
        assert_eq!(c.problem.bounds.m, 1.0);
        assert_eq!(c.problem.bounds.g_lo, 1.0);
        assert_eq!(c.problem.bounds.h_hi, 1.0);
        assert_eq!(c.problem.bounds.c, 0.25);
        assert_eq!(c.problem.bounds.epsilon, 0.5);
        let echoed = c.to_json().unwrap();
        assert!(echoed.contains("\"grad_tol\""));
        assert!(echoed.contains("\"path_points\": 41"));
        // the effective config parses back to itself
        assert_eq!(parse_config_str(&echoed).unwrap(), c);
    }

    #[test]
    fn theta_below_two_names_a3() {
        let text = MINIMAL.replace("\"theta\": 4.0", "\"theta\": 1.5");
        let Err(Error::Validation(v)) = parse_config_str(&text) else {
            panic!("expected validation error")
        };
        assert!(
            v.iter()
                .any(|m| m.contains("A3") && m.contains("theta > 2 + epsilon")),
            "{v:?}"
        );
    }

    #[test]
    fn positive_a_names_a1() {
        let text = MINIMAL.replace("\"problem\": {", "\"problem\": {\"a\": 1.0, ");
        let Err(Error::Validation(v)) = parse_config_str(&text) else {
            panic!("expected validation error")
        };
        assert!(v.iter().any(|m| m.starts_with("A1")), "{v:?}");
    }

    #[test]
    fn all_violations_reported() {
        let text = r#"{
            "gasket": {"n": 1},
            "problem": {"bounds": {"m": -1}},
            "solver": {"grad_tol": -1, "path_points": 2},
            "bogus": 3
        }"#;
        let Err(Error::Validation(v)) = parse_config_str(text) else {
            panic!("expected validation error")
        };
        for needle in [
            "gasket.level",
            "problem.nonlinearity",
            "grad_tol",
            "path_points",
            "bogus",
            "M must be positive",
        ] {
            assert!(
                v.iter().any(|m| m.contains(needle)),
                "{needle} missing from {v:?}"
            );
        }
    }

    #[test]
    fn field_shapes() {
        let g = PrefractalGraph::build(3, 1).unwrap();
        let f = FieldSpec::Shape(FieldShape::ClampedAffine {
            offset: 0.0,
            coeffs: vec![1.0, 2.0, 4.0],
            lo: 0.0,
            hi: 3.0,
        })
        .evaluate(&g)
        .unwrap();
        for (v, x) in g.vertices().iter().zip(f.values()) {
            let want =
                (v.coords[0] as f64 + 2.0 * v.coords[1] as f64 + 4.0 * v.coords[2] as f64) / 2.0;
            assert_eq!(*x, want.clamp(0.0, 3.0));
        }
        let bad = FieldSpec::Shape(FieldShape::Values { values: vec![1.0] });
        assert!(bad.evaluate(&g).is_err());
        let parsed: FieldSpec =
            serde_json::from_str("{\"kind\": \"values\", \"values\": [1, 2]}").unwrap();
        assert_eq!(
            parsed,
            FieldSpec::Shape(FieldShape::Values {
                values: vec![1.0, 2.0]
            })
        );
        let parsed: FieldSpec = serde_json::from_str("2.5").unwrap();
        assert_eq!(parsed, FieldSpec::Number(2.5));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config_str(MINIMAL).unwrap();
        let b = a.clone().with_seed(7);
        assert_eq!(a.hash().unwrap(), a.clone().hash().unwrap());
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
