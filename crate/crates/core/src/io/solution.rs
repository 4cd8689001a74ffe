//! Persisted critical points: vertex records keyed by barycentric address.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Norms, VertexField};
use crate::geometry::PrefractalGraph;
use crate::problem::ProblemInstance;
use crate::solvers::{Classification, CriticalPointResult, SolveStatus};

pub const SOLUTION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    /// Which solver produced the point (`min`, `ball`, `mpa`, ...).
    pub producer: String,
}

impl SolutionMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64, producer: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            producer: producer.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub level: u32,
    pub address: Vec<u64>,
    pub cartesian: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format_version: u32,
    pub meta: SolutionMeta,
    pub n: usize,
    pub level: u32,
    pub action: f64,
    pub dual_grad_norm: f64,
    pub norms: Norms,
    pub iterations: usize,
    /// Solver outcome; absent for fields stored without a solve.
    pub status: Option<SolveStatus>,
    pub classification: Option<Classification>,
    pub vertices: Vec<VertexRecord>,
}

impl SolutionFile {
    /// Records `field` with scalars recomputed from `problem`.
    pub fn from_field(
        problem: &ProblemInstance,
        field: &VertexField,
        meta: SolutionMeta,
    ) -> Result<Self> {
        let graph = problem.graph();
        field.check_len(graph)?;
        if !field.is_finite() {
            return Err(Error::Numerical(
                "cannot persist a field with non-finite values".into(),
            ));
        }
        let action = problem.action(field)?;
        let dual_grad_norm = problem.dual_norm(field)?;
        let norms = problem.form().norms(field)?;
        let coords = graph.embed_coordinates();
        Ok(Self {
            format_version: SOLUTION_VERSION,
            meta,
            n: graph.n(),
            level: graph.level(),
            action,
            dual_grad_norm,
            norms,
            iterations: 0,
            status: None,
            classification: None,
            vertices: graph
                .vertices()
                .iter()
                .zip(coords)
                .zip(field.values())
                .map(|((v, x), value)| VertexRecord {
                    level: v.level,
                    address: v.coords.clone(),
                    cartesian: x,
                    value: *value,
                })
                .collect(),
        })
    }

    pub fn from_result(
        problem: &ProblemInstance,
        result: &CriticalPointResult,
        meta: SolutionMeta,
    ) -> Result<Self> {
        let mut s = Self::from_field(problem, &result.point, meta)?;
        s.iterations = result.iterations;
        s.status = Some(result.status);
        s.classification = Some(result.classification);
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("solution file: {e}")))?;
        if s.format_version != SOLUTION_VERSION {
            return Err(Error::Parse(format!(
                "solution format_version {} is not supported (expected {SOLUTION_VERSION})",
                s.format_version
            )));
        }
        Ok(s)
    }

    /// Values laid out in the vertex order of `graph`.
    pub fn field_for(&self, graph: &PrefractalGraph) -> Result<VertexField> {
        if self.n != graph.n() || self.level != graph.level() {
            return Err(Error::AddressMismatch(format!(
                "file holds N = {}, level {}; graph has N = {}, level {}",
                self.n,
                self.level,
                graph.n(),
                graph.level()
            )));
        }
        if self.vertices.len() != graph.vertex_count() {
            return Err(Error::AddressMismatch(format!(
                "file holds {} vertices, graph has {}",
                self.vertices.len(),
                graph.vertex_count()
            )));
        }
        let mut values = vec![f64::NAN; graph.vertex_count()];
        let mut seen = vec![false; graph.vertex_count()];
        for rec in &self.vertices {
            if rec.level != graph.level() || rec.address.len() != graph.n() {
                return Err(Error::AddressMismatch(format!(
                    "record {:?} at level {} does not fit the graph",
                    rec.address, rec.level
                )));
            }
            let i = graph.index_of(&rec.address).ok_or_else(|| {
                Error::AddressMismatch(format!("address {:?} is not a vertex", rec.address))
            })?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::AddressMismatch(format!(
                    "address {:?} appears twice",
                    rec.address
                )));
            }
            values[i] = rec.value;
        }
        Ok(VertexField::new(values))
    }
}

/// Writes `solution` as `<dir>/<name>.json` and returns the path.
pub fn persist_result(solution: &SolutionFile, dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, solution.to_json()?)?;
    Ok(path)
}

pub fn load_solution(path: &Path) -> Result<SolutionFile> {
    SolutionFile::from_json(&std::fs::read_to_string(path)?)
}

pub fn load_field(path: &Path, graph: &PrefractalGraph) -> Result<VertexField> {
    load_solution(path)?.field_for(graph)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::forms::DiscreteForm;
    use crate::functions::Nonlinearity;

    fn problem(level: u32) -> ProblemInstance {
        let form = DiscreteForm::new(Arc::new(PrefractalGraph::build(3, level).unwrap())).unwrap();
        ProblemInstance::simple(Arc::new(form), Nonlinearity::power(1.0, 4.0)).unwrap()
    }

    fn random_field(p: &ProblemInstance, seed: u64) -> VertexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..p.dofs())
            .map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-8..3)))
            .collect();
        p.to_field(&x)
    }

    #[test]
    fn bitwise_round_trip() {
        let p = problem(2);
        let dir = tempfile::tempdir().unwrap();
        let x = random_field(&p, 11);
        let s = SolutionFile::from_field(&p, &x, SolutionMeta::new("abc", 11, "test")).unwrap();
        let path = persist_result(&s, dir.path(), "point").unwrap();
        let back = load_field(&path, p.graph()).unwrap();
        for (a, b) in x.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let reloaded = load_solution(&path).unwrap();
        assert_eq!(reloaded, s);
        assert!((p.action(&back).unwrap() - reloaded.action).abs() <= 1e-12);
    }

    #[test]
    fn level_mismatch() {
        let p2 = problem(2);
        let p3 = problem(3);
        let dir = tempfile::tempdir().unwrap();
        let s =
            SolutionFile::from_field(&p2, &random_field(&p2, 1), SolutionMeta::new("", 0, "test"))
                .unwrap();
        let path = persist_result(&s, dir.path(), "p").unwrap();
        assert!(matches!(
            load_field(&path, p3.graph()),
            Err(Error::AddressMismatch(_))
        ));
    }

    #[test]
    fn unknown_address_rejected() {
        let p = problem(1);
        let mut s = SolutionFile::from_field(&p, &p.zero_field(), SolutionMeta::new("", 0, "test"))
            .unwrap();
        s.vertices[0].address = vec![1, 1, 1];
        assert!(matches!(
            s.field_for(p.graph()),
            Err(Error::AddressMismatch(_))
        ));
        s.vertices[0].address = s.vertices[1].address.clone();
        assert!(matches!(
            s.field_for(p.graph()),
            Err(Error::AddressMismatch(_))
        ));
    }
}
