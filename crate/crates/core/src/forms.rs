//! Renormalized discrete Dirichlet energy on `V_m`, the self-similar measure
//! quadrature, harmonic extension between levels and the Dirichlet Laplacian.
//!
//! Edges are counted once (unordered pairs). Critical points do not depend on
//! this global factor, and with it the harmonic extension from `V_m` to
//! `V_(m+1)` preserves the renormalized energy exactly.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PrefractalGraph;
use crate::sparse::CsrMatrix;

/// Interior systems up to this size are factored densely; larger ones use
/// preconditioned conjugate gradients.
const DENSE_FACTOR_LIMIT: usize = 4000;

/// Real values on every vertex of a prefractal, in graph vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexField(Vec<f64>);

impl VertexField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len());
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn check_len(&self, graph: &PrefractalGraph) -> Result<()> {
        if self.len() != graph.vertex_count() {
            return Err(Error::GraphMismatch {
                expected: graph.vertex_count(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for VertexField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

enum InteriorSolver {
    Empty,
    Dense(Cholesky<f64, Dyn>),
    Iterative { inv_diag: Vec<f64> },
}

impl std::fmt::Debug for InteriorSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Empty => f.write_str("Empty"),
            Self::Dense(_) => f.write_str("Dense"),
            Self::Iterative { .. } => f.write_str("Iterative"),
        }
    }
}

/// Assembled energy form and measure on one prefractal level.
#[derive(Debug)]
pub struct DiscreteForm {
    graph: Arc<PrefractalGraph>,
    renormalization: f64,
    stiffness: CsrMatrix,
    measure: Vec<f64>,
    interior: Vec<usize>,
    interior_slot: Vec<Option<usize>>,
    interior_stiffness: CsrMatrix,
    solver: InteriorSolver,
}

/// Self-similar measure weights: each cell carries `N^-m`, split equally
/// among its `N` vertices.
pub fn measure_weights(graph: &PrefractalGraph) -> VertexField {
    let share = (graph.n() as f64).powi(-(graph.level() as i32 + 1));
    VertexField::new(
        (0..graph.vertex_count())
            .map(|i| graph.incident_cells(i) as f64 * share)
            .collect(),
    )
}

pub fn integrate(graph: &PrefractalGraph, u: &VertexField) -> Result<f64> {
    u.check_len(graph)?;
    let w = measure_weights(graph);
    Ok(w.values().iter().zip(u.values()).map(|(a, b)| a * b).sum())
}

impl DiscreteForm {
    pub fn new(graph: Arc<PrefractalGraph>) -> Result<Self> {
        let n = graph.n() as f64;
        let renormalization = ((n + 2.0) / n).powi(graph.level() as i32);
        let nv = graph.vertex_count();

        let mut triplets = Vec::with_capacity(4 * graph.edges().len());
        for &(i, j) in graph.edges() {
            triplets.push((i, i, renormalization));
            triplets.push((j, j, renormalization));
            triplets.push((i, j, -renormalization));
            triplets.push((j, i, -renormalization));
        }
        let stiffness = CsrMatrix::from_triplets(nv, nv, triplets);

        let interior: Vec<usize> = graph.interior().collect();
        let mut interior_slot = vec![None; nv];
        for (k, &i) in interior.iter().enumerate() {
            interior_slot[i] = Some(k);
        }
        let interior_triplets = interior
            .iter()
            .enumerate()
            .flat_map(|(k, &i)| {
                let slot = &interior_slot;
                stiffness
                    .row(i)
                    .filter_map(move |(j, v)| slot[j].map(|l| (k, l, v)))
            })
            .collect();
        let interior_stiffness =
            CsrMatrix::from_triplets(interior.len(), interior.len(), interior_triplets);

        let solver = if interior.is_empty() {
            InteriorSolver::Empty
        } else if interior.len() <= DENSE_FACTOR_LIMIT {
            let dense = interior_stiffness.to_dense();
            InteriorSolver::Dense(Cholesky::new(dense).ok_or_else(|| {
                Error::Numerical("interior stiffness is not positive definite".into())
            })?)
        } else {
            InteriorSolver::Iterative {
                inv_diag: interior_stiffness
                    .diagonal()
                    .iter()
                    .map(|d| 1.0 / d)
                    .collect(),
            }
        };

        let measure = measure_weights(&graph).into_inner();
        Ok(Self {
            graph,
            renormalization,
            stiffness,
            measure,
            interior,
            interior_slot,
            interior_stiffness,
            solver,
        })
    }

    pub fn graph(&self) -> &PrefractalGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<PrefractalGraph> {
        &self.graph
    }

    /// `((N + 2) / N)^m`
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    /// `2N + 3`, the constant in `||u||_inf <= (2N + 3) ||u||`.
    pub fn embedding_constant(&self) -> f64 {
        2.0 * self.graph.n() as f64 + 3.0
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn interior_stiffness(&self) -> &CsrMatrix {
        &self.interior_stiffness
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_slot(&self, vertex: usize) -> Option<usize> {
        self.interior_slot[vertex]
    }

    pub fn energy(&self, u: &VertexField) -> Result<f64> {
        u.check_len(&self.graph)?;
        let u = u.values();
        let sum: f64 = self
            .graph
            .edges()
            .iter()
            .map(|&(i, j)| (u[i] - u[j]).powi(2))
            .sum();
        Ok(self.renormalization * sum)
    }

    pub fn bilinear(&self, u: &VertexField, v: &VertexField) -> Result<f64> {
        u.check_len(&self.graph)?;
        v.check_len(&self.graph)?;
        let (u, v) = (u.values(), v.values());
        let sum: f64 = self
            .graph
            .edges()
            .iter()
            .map(|&(i, j)| (u[i] - u[j]) * (v[i] - v[j]))
            .sum();
        Ok(self.renormalization * sum)
    }

    pub fn integrate(&self, u: &VertexField) -> Result<f64> {
        u.check_len(&self.graph)?;
        Ok(self
            .measure
            .iter()
            .zip(u.values())
            .map(|(w, x)| w * x)
            .sum())
    }

    pub fn norms(&self, u: &VertexField) -> Result<Norms> {
        let energy = self.energy(u)?.sqrt();
        let sup = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2_mu = self.integrate(&u.map(|v| v * v))?.sqrt();
        let dirichlet = self.graph.boundary().iter().all(|&b| u[b] == 0.0);
        Ok(Norms {
            energy,
            sup,
            l2_mu,
            embedding_holds: dirichlet.then(|| sup <= self.embedding_constant() * energy),
        })
    }

    /// Restriction of a full field to the interior degrees of freedom.
    pub fn restrict(&self, u: &VertexField) -> Result<Vec<f64>> {
        u.check_len(&self.graph)?;
        Ok(self.interior.iter().map(|&i| u[i]).collect())
    }

    /// Full field with zero boundary values.
    pub fn extend_by_zero(&self, interior: &[f64]) -> VertexField {
        assert_eq!(interior.len(), self.interior.len());
        let mut values = vec![0.0; self.graph.vertex_count()];
        for (&i, &x) in self.interior.iter().zip(interior) {
            values[i] = x;
        }
        VertexField::new(values)
    }

    pub fn require_dirichlet(&self, u: &VertexField) -> Result<()> {
        u.check_len(&self.graph)?;
        for &b in self.graph.boundary() {
            if u[b] != 0.0 {
                return Err(Error::NotDirichlet {
                    vertex: b,
                    value: u[b],
                });
            }
        }
        Ok(())
    }

    /// Interior-block energy `x^T K_II y` for Dirichlet fields given by their
    /// interior values.
    pub fn interior_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.interior_stiffness.quad_form(x, y)
    }

    pub fn interior_norm(&self, x: &[f64]) -> f64 {
        self.interior_inner(x, x).max(0.0).sqrt()
    }

    /// Solve `K_II p = rhs` on the interior.
    pub fn solve_interior(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.solver {
            InteriorSolver::Empty => {
                if rhs.is_empty() {
                    Ok(Vec::new())
                } else {
                    Err(Error::EmptyInterior)
                }
            }
            InteriorSolver::Dense(chol) => {
                let b = DVector::from_column_slice(rhs);
                Ok(chol.solve(&b).as_slice().to_vec())
            }
            InteriorSolver::Iterative { inv_diag } => {
                conjugate_gradient(&self.interior_stiffness, inv_diag, rhs)
            }
        }
    }

    pub fn dirichlet_laplacian(&self) -> Result<DirichletLaplacian> {
        if self.interior.is_empty() {
            return Err(Error::EmptyInterior);
        }
        let nv = self.graph.vertex_count();
        let triplets = self
            .interior
            .iter()
            .enumerate()
            .flat_map(|(k, &i)| {
                let w = self.measure[i];
                self.stiffness.row(i).map(move |(j, v)| (k, j, -v / w))
            })
            .collect();
        Ok(DirichletLaplacian {
            rows: self.interior.clone(),
            operator: CsrMatrix::from_triplets(self.interior.len(), nv, triplets),
        })
    }
}

fn conjugate_gradient(a: &CsrMatrix, inv_diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..(10 * n).max(100) {
        let ap = a.mul_vec(&p);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-14 * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(
        "conjugate gradient did not converge".into(),
    ))
}

/// Energy, sup and `L^2(mu)` norms of a field. `embedding_holds` is set for
/// Dirichlet fields only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub energy: f64,
    pub sup: f64,
    pub l2_mu: f64,
    pub embedding_holds: Option<bool>,
}

/// `L = -D^{-1} K` on interior rows, `D` the diagonal of measure weights.
#[derive(Debug, Clone)]
pub struct DirichletLaplacian {
    rows: Vec<usize>,
    operator: CsrMatrix,
}

impl DirichletLaplacian {
    /// Vertex index of each output row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    /// `Lu` on the interior vertices.
    pub fn apply(&self, u: &VertexField) -> Vec<f64> {
        self.operator.mul_vec(u.values())
    }
}

/// Values on `V_(m+1)` that agree with `u` on `V_m` and minimize the level
/// `m + 1` energy.
pub fn harmonic_extension(
    coarse: &PrefractalGraph,
    fine: &PrefractalGraph,
    u: &VertexField,
) -> Result<VertexField> {
    u.check_len(coarse)?;
    if fine.n() != coarse.n() || fine.level() != coarse.level() + 1 {
        return Err(Error::InvalidArgument(format!(
            "harmonic extension needs levels m -> m+1 with equal N, got (N={}, m={}) -> (N={}, m={})",
            coarse.n(),
            coarse.level(),
            fine.n(),
            fine.level()
        )));
    }
    let n = coarse.n();
    let weights = local_extension_weights(n)?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .collect();

    let mut out = vec![f64::NAN; fine.vertex_count()];
    for cell in coarse.cells() {
        let corners: Vec<&Vec<u64>> = cell.iter().map(|&i| &coarse.vertices()[i].coords).collect();
        let corner_values: Vec<f64> = cell.iter().map(|&i| u[i]).collect();
        for (c, &val) in corners.iter().zip(&corner_values) {
            let doubled: Vec<u64> = c.iter().map(|x| 2 * x).collect();
            let idx = fine.index_of(&doubled).ok_or_else(|| {
                Error::Numerical("coarse vertex missing from the finer level".into())
            })?;
            out[idx] = val;
        }
        for (row, &(j, k)) in pairs.iter().enumerate() {
            let mid: Vec<u64> = corners[j]
                .iter()
                .zip(corners[k])
                .map(|(a, b)| a + b)
                .collect();
            let idx = fine.index_of(&mid).ok_or_else(|| {
                Error::Numerical("cell midpoint missing from the finer level".into())
            })?;
            out[idx] = (0..n).map(|c| weights[(row, c)] * corner_values[c]).sum();
        }
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical(
            "harmonic extension left vertices unset".into(),
        ));
    }
    Ok(VertexField::new(out))
}

/// Midpoint values of a once-refined cell as a linear map of its corner
/// values; rows follow the pairs `(j, k)`, `j < k`, in lexicographic order.
fn local_extension_weights(n: usize) -> Result<DMatrix<f64>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .collect();
    let p = pairs.len();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DMatrix::<f64>::zeros(p, n);
    for (r, &(j, k)) in pairs.iter().enumerate() {
        a[(r, r)] = (2 * n - 2) as f64;
        b[(r, j)] = 1.0;
        b[(r, k)] = 1.0;
        for (s, &(x, y)) in pairs.iter().enumerate() {
            // neighbouring midpoints share exactly one endpoint
            if s != r && (x == j || x == k || y == j || y == k) {
                a[(r, s)] = -1.0;
            }
        }
    }
    let lu = a.lu();
    lu.solve(&b)
        .ok_or_else(|| Error::Numerical("singular local harmonic system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(n: usize, m: u32) -> DiscreteForm {
        DiscreteForm::new(Arc::new(PrefractalGraph::build(n, m).unwrap())).unwrap()
    }

    #[test]
    fn energy_examples() {
        let f = form(3, 0);
        assert_eq!(f.energy(&VertexField::constant(3, 7.0)).unwrap(), 0.0);
        // vertices in lexicographic order: e3, e2, e1
        let u = VertexField::new(vec![0.0, 0.0, 1.0]);
        assert_eq!(f.energy(&u).unwrap(), 2.0);
        assert!(matches!(
            f.energy(&VertexField::zeros(4)),
            Err(Error::GraphMismatch { .. })
        ));
    }

    #[test]
    fn stiffness_matches_edge_sum() {
        let f = form(3, 2);
        let u = VertexField::new((0..15).map(|i| (i as f64 * 0.37).sin()).collect());
        let via_k = f.stiffness().quad_form(u.values(), u.values());
        assert!((via_k - f.energy(&u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn measure_examples() {
        let g = PrefractalGraph::build(3, 1).unwrap();
        let w = measure_weights(&g);
        for i in 0..g.vertex_count() {
            let expect = if g.is_boundary(i) {
                1.0 / 9.0
            } else {
                2.0 / 9.0
            };
            assert!((w[i] - expect).abs() < 1e-15);
        }
        let g0 = PrefractalGraph::build(3, 0).unwrap();
        assert!(measure_weights(&g0)
            .values()
            .iter()
            .all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn integrate_one_cell_indicator() {
        // field equal to 1 on the vertices of the cell at corner e1 (level 1)
        let g = PrefractalGraph::build(3, 1).unwrap();
        let mut u = VertexField::zeros(6);
        for c in [[2, 0, 0], [1, 1, 0], [1, 0, 1]] {
            u.values_mut()[g.index_of(&c).unwrap()] = 1.0;
        }
        // 1/9 (corner) + 2/9 + 2/9 (two shared midpoints)
        assert!((integrate(&g, &u).unwrap() - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn extension_example_n3() {
        let g0 = PrefractalGraph::build(3, 0).unwrap();
        let g1 = PrefractalGraph::build(3, 1).unwrap();
        let mut u = VertexField::zeros(3);
        u.values_mut()[g0.index_of(&[1, 0, 0]).unwrap()] = 1.0;
        let ext = harmonic_extension(&g0, &g1, &u).unwrap();
        let at = |c: [u64; 3]| ext[g1.index_of(&c).unwrap()];
        assert!((at([1, 1, 0]) - 0.4).abs() < 1e-14);
        assert!((at([1, 0, 1]) - 0.4).abs() < 1e-14);
        assert!((at([0, 1, 1]) - 0.2).abs() < 1e-14);
        let e0 = form(3, 0).energy(&u).unwrap();
        let e1 = form(3, 1).energy(&ext).unwrap();
        assert!((e0 - e1).abs() < 1e-14);
    }

    #[test]
    fn extension_rejects_level_mismatch() {
        let g0 = PrefractalGraph::build(3, 0).unwrap();
        let g2 = PrefractalGraph::build(3, 2).unwrap();
        assert!(harmonic_extension(&g0, &g2, &VertexField::zeros(3)).is_err());
    }

    #[test]
    fn laplacian_empty_at_level_zero() {
        assert!(matches!(
            form(3, 0).dirichlet_laplacian(),
            Err(Error::EmptyInterior)
        ));
        assert!(matches!(
            form(3, 0).solve_interior(&[1.0]),
            Err(Error::EmptyInterior)
        ));
    }

    #[test]
    fn laplacian_kills_constants() {
        let f = form(3, 3);
        let l = f.dirichlet_laplacian().unwrap();
        let one = VertexField::constant(f.graph().vertex_count(), 1.0);
        assert!(l.apply(&one).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn iterative_solver_agrees_with_dense() {
        let f = form(3, 3);
        let rhs: Vec<f64> = (0..f.interior().len()).map(|i| (i as f64).cos()).collect();
        let dense = f.solve_interior(&rhs).unwrap();
        let inv_diag: Vec<f64> = f
            .interior_stiffness()
            .diagonal()
            .iter()
            .map(|d| 1.0 / d)
            .collect();
        let cg = conjugate_gradient(f.interior_stiffness(), &inv_diag, &rhs).unwrap();
        for (a, b) in dense.iter().zip(&cg) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn norms_of_zero() {
        let f = form(3, 2);
        let n = f.norms(&VertexField::zeros(15)).unwrap();
        assert_eq!((n.energy, n.sup, n.l2_mu), (0.0, 0.0, 0.0));
        assert_eq!(n.embedding_holds, Some(true));
    }
}
