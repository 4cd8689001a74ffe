//! Level-m Sierpinski prefractals in exact dyadic barycentric coordinates.
//!
//! A vertex of `V_m` is stored as `N` non-negative integers summing to `2^m`;
//! the point it denotes is `sum_i (c_i / 2^m) p_i`. The contraction
//! `S_i(x) = x/2 + p_i/2` maps numerators `c` at level `m - 1` to
//! `c + 2^(m-1) e_i` at level `m`, so every coincidence between IFS images is
//! an exact integer equality and no tolerance is needed for deduplication.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `|V_m|` accepted by [`PrefractalGraph::build`].
pub const DEFAULT_MAX_VERTICES: usize = 2_000_000;
/// Cap on `N^m * N^2`, the corner coordinates held while subdividing.
pub const MAX_CELL_ENTRIES: u128 = 20_000_000;

/// The regular unit simplex `p_1, ..., p_N` in `R^(N-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSpec {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
}

impl SimplexSpec {
    /// Regular simplex with unit edges, built by orthogonal extension: each
    /// new vertex sits above the centroid of the previous ones at the height
    /// that makes its distance to all of them equal to one.
    pub fn regular(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "simplex needs N >= 2 vertices, got {n}"
            )));
        }
        let dim = n - 1;
        let mut points = vec![vec![0.0; dim]];
        for k in 1..n {
            let mut centroid = vec![0.0; dim];
            for p in &points {
                for (c, x) in centroid.iter_mut().zip(p) {
                    *c += x / k as f64;
                }
            }
            // circumradius of the regular unit simplex on k vertices
            let circum_sq = (k as f64 - 1.0) / (2.0 * k as f64);
            centroid[k - 1] = (1.0 - circum_sq).sqrt();
            points.push(centroid);
        }
        Ok(Self { n, points })
    }

    pub fn dimension(&self) -> usize {
        self.n - 1
    }
}

/// A vertex of `V_level`: barycentric numerators over the denominator `2^level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaryVertex {
    pub level: u32,
    pub coords: Vec<u64>,
}

impl BaryVertex {
    pub fn denominator(&self) -> u64 {
        1u64 << self.level
    }

    /// Same point expressed at a finer level.
    pub fn at_level(&self, level: u32) -> Option<BaryVertex> {
        let shift = level.checked_sub(self.level)?;
        let coords = self
            .coords
            .iter()
            .map(|&c| c.checked_shl(shift).filter(|v| v >> shift == c))
            .collect::<Option<Vec<_>>>()?;
        Some(BaryVertex { level, coords })
    }

    /// Lowest-level representation of the same point.
    pub fn reduced(&self) -> BaryVertex {
        let mut v = self.clone();
        while v.level > 0 && v.coords.iter().all(|c| c % 2 == 0) {
            v.coords.iter_mut().for_each(|c| *c /= 2);
            v.level -= 1;
        }
        v
    }

    pub fn same_point(&self, other: &BaryVertex) -> bool {
        self.reduced() == other.reduced()
    }

    pub fn is_corner(&self) -> bool {
        self.coords.iter().filter(|&&c| c != 0).count() == 1
    }
}

/// The level-m prefractal graph with its cells and intrinsic boundary.
#[derive(Debug, Clone)]
pub struct PrefractalGraph {
    spec: SimplexSpec,
    level: u32,
    vertices: Vec<BaryVertex>,
    edges: Vec<(usize, usize)>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    incident_cells: Vec<u32>,
    index: HashMap<Vec<u64>, usize>,
}

/// `|V_m| = N + N (N^m - 1) / 2`, or `None` on overflow.
pub fn vertex_count(n: usize, level: u32) -> Option<u128> {
    let n = n as u128;
    let nm = n.checked_pow(level)?;
    Some(n + n * (nm - 1) / 2)
}

impl PrefractalGraph {
    pub fn build(n: usize, level: u32) -> Result<Self> {
        Self::build_with_limit(n, level, DEFAULT_MAX_VERTICES)
    }

    pub fn build_with_limit(n: usize, level: u32, max_vertices: usize) -> Result<Self> {
        let spec = SimplexSpec::regular(n)?;
        if level >= 63 {
            return Err(Error::SizeLimit {
                what: "dyadic denominator 2^m",
                needed: 1u128 << level.min(127),
                limit: 1u128 << 62,
            });
        }
        let needed = vertex_count(n, level).unwrap_or(u128::MAX);
        if needed > max_vertices as u128 {
            return Err(Error::SizeLimit {
                what: "prefractal vertices",
                needed,
                limit: max_vertices as u128,
            });
        }
        let entries = (n as u128)
            .checked_pow(level)
            .and_then(|c| c.checked_mul((n * n) as u128))
            .unwrap_or(u128::MAX);
        if entries > MAX_CELL_ENTRIES {
            return Err(Error::SizeLimit {
                what: "cell corner coordinates",
                needed: entries,
                limit: MAX_CELL_ENTRIES,
            });
        }

        // Subdivide cells level by level. Sub-cell k of a cell with corner
        // numerators c_1..c_N is {c_k + c_j}, i.e. the midpoints (p_k + p_j)/2
        // at the doubled denominator.
        let mut cells: Vec<Vec<Vec<u64>>> = vec![(0..n)
            .map(|i| {
                let mut c = vec![0u64; n];
                c[i] = 1;
                c
            })
            .collect()];
        for _ in 0..level {
            let mut next = Vec::with_capacity(cells.len() * n);
            for cell in &cells {
                for k in 0..n {
                    next.push(
                        (0..n)
                            .map(|j| cell[k].iter().zip(&cell[j]).map(|(a, b)| a + b).collect())
                            .collect(),
                    );
                }
            }
            cells = next;
        }

        let vertex_set: BTreeSet<&Vec<u64>> = cells.iter().flatten().collect();
        let vertices: Vec<BaryVertex> = vertex_set
            .into_iter()
            .map(|c| BaryVertex {
                level,
                coords: c.clone(),
            })
            .collect();
        let index: HashMap<Vec<u64>, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.coords.clone(), i))
            .collect();

        let cells: Vec<Vec<usize>> = cells
            .iter()
            .map(|cell| cell.iter().map(|c| index[c]).collect())
            .collect();

        let mut incident_cells = vec![0u32; vertices.len()];
        let mut edges = Vec::with_capacity(cells.len() * n * (n - 1) / 2);
        for cell in &cells {
            for (a, &i) in cell.iter().enumerate() {
                incident_cells[i] += 1;
                for &j in &cell[a + 1..] {
                    edges.push((i.min(j), i.max(j)));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let is_boundary: Vec<bool> = vertices.iter().map(BaryVertex::is_corner).collect();
        let boundary = (0..vertices.len()).filter(|&i| is_boundary[i]).collect();

        Ok(Self {
            spec,
            level,
            vertices,
            edges,
            cells,
            boundary,
            is_boundary,
            incident_cells,
            index,
        })
    }

    pub fn spec(&self) -> &SimplexSpec {
        &self.spec
    }

    /// Number of IFS maps (simplex vertices).
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[BaryVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.is_boundary[vertex]
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&i| !self.is_boundary[i])
    }

    pub fn interior_count(&self) -> usize {
        self.vertices.len() - self.boundary.len()
    }

    pub fn incident_cells(&self, vertex: usize) -> u32 {
        self.incident_cells[vertex]
    }

    pub fn index_of(&self, coords: &[u64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Index of a vertex given at any level, if the point belongs to `V_level`.
    pub fn locate(&self, vertex: &BaryVertex) -> Option<usize> {
        let v = vertex.reduced().at_level(self.level)?;
        self.index_of(&v.coords)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.vertices.len()
    }

    /// Cartesian position `sum_i (c_i / 2^m) p_i` of every vertex.
    pub fn embed_coordinates(&self) -> Vec<Vec<f64>> {
        let denom = (1u64 << self.level) as f64;
        let dim = self.spec.dimension();
        self.vertices
            .iter()
            .map(|v| {
                let mut x = vec![0.0; dim];
                for (c, p) in v.coords.iter().zip(&self.spec.points) {
                    if *c != 0 {
                        let w = *c as f64 / denom;
                        for (xi, pi) in x.iter_mut().zip(p) {
                            *xi += w * pi;
                        }
                    }
                }
                x
            })
            .collect()
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            format_version: 1,
            n: self.n(),
            level: self.level,
            denominator: 1u64 << self.level,
            simplex: self.spec.points.clone(),
            vertices: self.vertices.iter().map(|v| v.coords.clone()).collect(),
            coordinates: self.embed_coordinates(),
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
            cells: self.cells.clone(),
            boundary: self.boundary.clone(),
        }
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            n: self.n(),
            level: self.level,
            vertices: self.vertex_count(),
            edges: self.edges.len(),
            cells: self.cells.len(),
            boundary: self.boundary.clone(),
            interior: self.interior_count(),
        }
    }
}

/// JSON document emitted by `gasket build`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub format_version: u32,
    pub n: usize,
    pub level: u32,
    pub denominator: u64,
    pub simplex: Vec<Vec<f64>>,
    pub vertices: Vec<Vec<u64>>,
    pub coordinates: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub level: u32,
    pub vertices: usize,
    pub edges: usize,
    pub cells: usize,
    pub boundary: Vec<usize>,
    pub interior: usize,
}
