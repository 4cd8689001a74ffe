//! Semilinear Dirichlet problems on Sierpiński-gasket prefractals: graph
//! construction, energy forms, action functionals, critical point solvers
//! and the parametric convergence experiment.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assumptions;
pub mod error;
pub mod forms;
pub mod functions;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod problem;
pub mod quadrature;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use forms::{DiscreteForm, VertexField};
pub use functions::{Nonlinearity, ScalarFunction};
pub use geometry::PrefractalGraph;
pub use problem::{Bounds, ProblemInstance};
