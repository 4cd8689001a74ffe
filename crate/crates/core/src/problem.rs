//! Problem data of the semilinear Dirichlet problem
//!
//! ```text
//!   Δx + a x + g f(x) h(u) = 0  on V \ V_0,   x = 0 on V_0
//! ```
//!
//! and its action functional
//! `J(x) = ½‖x‖² − ½∫a x² dμ − ∫g F(x) h(u) dμ` on Dirichlet fields.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{DiscreteForm, VertexField};
use crate::functions::{Nonlinearity, ScalarFunction};
use crate::geometry::PrefractalGraph;

/// Scalar constants attached to the problem: `M`, `M₁`, `β`, `η`, the
/// bounds `g¹ ≤ g ≤ g²`, `h¹ ≤ h ≤ h²`, and `ε`, `c` from the growth condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub m: f64,
    pub m1: f64,
    pub beta: f64,
    pub eta: f64,
    pub g_lo: f64,
    pub g_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    pub epsilon: f64,
    pub c: f64,
}

/// Number of grid points on `[-M, M]` used when checking bounds on `h`.
pub const H_GRID: usize = 1001;

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    form: Arc<DiscreteForm>,
    a: VertexField,
    g: VertexField,
    u_data: VertexField,
    h: ScalarFunction,
    nonlinearity: Nonlinearity,
    bounds: Bounds,
    // interior caches: μ_i a_i and μ_i g_i h(u_i)
    mass_a: Vec<f64>,
    load: Vec<f64>,
}

/// Riesz representative `p` of `J'(x)` in the energy inner product.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub riesz: VertexField,
    pub dual_norm: f64,
    /// `J'(x)(φ_i)` for the nodal basis of each interior vertex.
    pub residual: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(
        form: Arc<DiscreteForm>,
        a: VertexField,
        g: VertexField,
        u_data: VertexField,
        h: ScalarFunction,
        nonlinearity: Nonlinearity,
        bounds: Bounds,
    ) -> Result<Self> {
        let graph = form.graph();
        for field in [&a, &g, &u_data] {
            field.check_len(graph)?;
            if !field.is_finite() {
                return Err(Error::InvalidArgument(
                    "coefficient fields must be finite".into(),
                ));
            }
        }
        if !(bounds.m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "M must be positive, got {}",
                bounds.m
            )));
        }
        for (i, &u) in u_data.values().iter().enumerate() {
            if u.abs() > bounds.m {
                return Err(Error::DomainViolation {
                    vertex: i,
                    value: u,
                    bound: bounds.m,
                });
            }
        }
        let mut defects = h.defects();
        defects.extend(nonlinearity.f.defects());
        if !defects.is_empty() {
            return Err(Error::Validation(defects));
        }
        let measure = form.measure();
        let mass_a = form.interior().iter().map(|&i| measure[i] * a[i]).collect();
        let load = form
            .interior()
            .iter()
            .map(|&i| measure[i] * g[i] * h.eval(u_data[i]))
            .collect();
        Ok(Self {
            form,
            a,
            g,
            u_data,
            h,
            nonlinearity,
            bounds,
            mass_a,
            load,
        })
    }

    /// `a = 0`, `g = h = 1`, `u = 0` and bounds inferred from the data.
    pub fn simple(form: Arc<DiscreteForm>, nonlinearity: Nonlinearity) -> Result<Self> {
        let nv = form.graph().vertex_count();
        let theta = nonlinearity.theta;
        let epsilon = ((theta - 2.0) / 2.0).clamp(f64::MIN_POSITIVE, 0.5);
        let bounds = Bounds {
            m: 1.0,
            m1: 1.0,
            beta: 1.0,
            eta: 0.0,
            g_lo: 1.0,
            g_hi: 1.0,
            h_lo: 1.0,
            h_hi: 1.0,
            epsilon,
            c: 0.5 - 1.0 / theta,
        };
        Self::new(
            form,
            VertexField::zeros(nv),
            VertexField::constant(nv, 1.0),
            VertexField::zeros(nv),
            ScalarFunction::constant(1.0),
            nonlinearity,
            bounds,
        )
    }

    pub fn form(&self) -> &DiscreteForm {
        &self.form
    }

    pub fn form_arc(&self) -> &Arc<DiscreteForm> {
        &self.form
    }

    pub fn graph(&self) -> &PrefractalGraph {
        self.form.graph()
    }

    pub fn a(&self) -> &VertexField {
        &self.a
    }

    pub fn g(&self) -> &VertexField {
        &self.g
    }

    pub fn u_data(&self) -> &VertexField {
        &self.u_data
    }

    pub fn h(&self) -> &ScalarFunction {
        &self.h
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Interior degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.form.interior().len()
    }

    pub fn with_g(&self, g: VertexField) -> Result<Self> {
        let mut bounds = self.bounds;
        let (lo, hi) = min_max(g.values());
        bounds.g_lo = lo;
        bounds.g_hi = hi;
        Self::new(
            self.form.clone(),
            self.a.clone(),
            g,
            self.u_data.clone(),
            self.h.clone(),
            self.nonlinearity.clone(),
            bounds,
        )
    }

    pub fn with_u_data(&self, u_data: VertexField) -> Result<Self> {
        Self::new(
            self.form.clone(),
            self.a.clone(),
            self.g.clone(),
            u_data,
            self.h.clone(),
            self.nonlinearity.clone(),
            self.bounds,
        )
    }

    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Result<Self> {
        Self::new(
            self.form.clone(),
            self.a.clone(),
            self.g.clone(),
            self.u_data.clone(),
            self.h.clone(),
            nonlinearity,
            self.bounds,
        )
    }

    pub fn with_bounds(&self, bounds: Bounds) -> Result<Self> {
        Self::new(
            self.form.clone(),
            self.a.clone(),
            self.g.clone(),
            self.u_data.clone(),
            self.h.clone(),
            self.nonlinearity.clone(),
            bounds,
        )
    }

    /// Violations of the scalar and vertexwise hypotheses that a problem
    /// configuration must satisfy before any computation: sign of `a`,
    /// the bounds on `g` and `h`, and the constraints tying `θ`, `ε`, `c`.
    pub fn validate(&self) -> Vec<String> {
        let b = &self.bounds;
        let theta = self.nonlinearity.theta;
        let mut out = Vec::new();
        if let Some((i, v)) = self.a.values().iter().enumerate().find(|(_, v)| **v > 0.0) {
            out.push(format!("A1 (a <= 0) violated: a = {v} at vertex {i}"));
        }
        if !(b.g_lo > 0.0) {
            out.push(format!("A2 requires g1 > 0, got {}", b.g_lo));
        }
        if let Some((i, v)) = self
            .g
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| **v < b.g_lo || **v > b.g_hi)
        {
            out.push(format!(
                "A2 (g1 <= g <= g2) violated: g = {v} at vertex {i} outside [{}, {}]",
                b.g_lo, b.g_hi
            ));
        }
        if !(b.h_lo > 0.0) {
            out.push(format!("A2 requires h1 > 0, got {}", b.h_lo));
        }
        for k in 0..H_GRID {
            let u = -b.m + 2.0 * b.m * k as f64 / (H_GRID - 1) as f64;
            let hv = self.h.eval(u);
            if hv < b.h_lo || hv > b.h_hi {
                out.push(format!(
                    "A2 (h1 <= h <= h2) violated: h({u}) = {hv} outside [{}, {}]",
                    b.h_lo, b.h_hi
                ));
                break;
            }
        }
        if !(b.epsilon > 0.0) {
            out.push(format!("A3 requires epsilon > 0, got {}", b.epsilon));
        }
        if !(theta > 2.0 + b.epsilon) {
            out.push(format!(
                "A3 (theta > 2 + epsilon) violated: theta = {theta}, epsilon = {}",
                b.epsilon
            ));
        }
        if !(b.c > 0.0) {
            out.push(format!("A3 requires c > 0, got {}", b.c));
        }
        if !(0.5 - 1.0 / theta >= b.c) {
            out.push(format!(
                "A3 (1/2 - 1/theta >= c) violated: theta = {theta}, c = {}",
                b.c
            ));
        }
        if !(b.m1 > 0.0) {
            out.push(format!("A4 requires M1 > 0, got {}", b.m1));
        }
        if !(b.beta >= 0.0) {
            out.push(format!("A4 requires beta >= 0, got {}", b.beta));
        }
        if !(b.eta >= 0.0) {
            out.push(format!("A5 requires eta >= 0, got {}", b.eta));
        }
        out
    }

    fn interior_of(&self, x: &VertexField) -> Result<Vec<f64>> {
        self.form.require_dirichlet(x)?;
        self.form.restrict(x)
    }

    pub fn action(&self, x: &VertexField) -> Result<f64> {
        Ok(self.action_interior(&self.interior_of(x)?))
    }

    pub fn action_interior(&self, x: &[f64]) -> f64 {
        let quad = 0.5 * self.form.interior_inner(x, x);
        let mut lower = 0.0;
        let mut nonlinear = 0.0;
        for (k, &xi) in x.iter().enumerate() {
            lower += self.mass_a[k] * xi * xi;
            nonlinear += self.load[k] * self.nonlinearity.big_f(xi);
        }
        quad - 0.5 * lower - nonlinear
    }

    /// `J'(x)(φ_i)` for each interior nodal basis field `φ_i`.
    pub fn residual_interior(&self, x: &[f64]) -> Vec<f64> {
        let kx = self.form.interior_stiffness().mul_vec(x);
        kx.iter()
            .zip(x)
            .enumerate()
            .map(|(k, (kx, &xi))| kx - self.mass_a[k] * xi - self.load[k] * self.nonlinearity.f(xi))
            .collect()
    }

    /// Riesz representative and dual norm for interior values.
    pub fn gradient_interior(&self, x: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let residual = self.residual_interior(x);
        let riesz = self.form.solve_interior(&residual)?;
        let dual_sq: f64 = riesz.iter().zip(&residual).map(|(p, r)| p * r).sum();
        Ok((riesz, dual_sq.max(0.0).sqrt(), residual))
    }

    pub fn gradient(&self, x: &VertexField) -> Result<Gradient> {
        let xi = self.interior_of(x)?;
        let (riesz, dual_norm, residual) = self.gradient_interior(&xi)?;
        Ok(Gradient {
            riesz: self.form.extend_by_zero(&riesz),
            dual_norm,
            residual,
        })
    }

    pub fn dual_norm(&self, x: &VertexField) -> Result<f64> {
        Ok(self.gradient(x)?.dual_norm)
    }

    /// `J'(x)(w) = 𝒲(x, w) − ∫a x w dμ − ∫g f(x) h(u) w dμ`, evaluated from
    /// the edge sum and the measure weights directly.
    pub fn directional_derivative(&self, x: &VertexField, w: &VertexField) -> Result<f64> {
        self.form.require_dirichlet(x)?;
        self.form.require_dirichlet(w)?;
        let bil = self.form.bilinear(x, w)?;
        let mu = self.form.measure();
        let mut rest = 0.0;
        for i in 0..x.len() {
            rest += mu[i]
                * w[i]
                * (self.a[i] * x[i]
                    + self.g[i] * self.nonlinearity.f(x[i]) * self.h.eval(self.u_data[i]));
        }
        Ok(bil - rest)
    }

    /// Dense interior Hessian `K_II − diag(μ a + μ g h f'(x))`.
    pub fn hessian_interior(&self, x: &[f64]) -> DMatrix<f64> {
        let mut hess = self.form.interior_stiffness().to_dense();
        for (k, &xi) in x.iter().enumerate() {
            hess[(k, k)] -= self.mass_a[k] + self.load[k] * self.nonlinearity.df(xi);
        }
        hess
    }

    pub fn zero_field(&self) -> VertexField {
        VertexField::zeros(self.graph().vertex_count())
    }

    pub fn to_field(&self, interior: &[f64]) -> VertexField {
        self.form.extend_by_zero(interior)
    }

    pub fn energy_norm_interior(&self, x: &[f64]) -> f64 {
        self.form.interior_norm(x)
    }

    pub fn energy_distance_interior(&self, x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.form.interior_norm(&d)
    }

    /// `μ_i g_i h(u_i)` on interior vertices.
    pub fn load_weights(&self) -> &[f64] {
        &self.load
    }

    /// `μ_i a_i` on interior vertices.
    pub fn mass_weights(&self) -> &[f64] {
        &self.mass_a
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(m: u32) -> Arc<DiscreteForm> {
        Arc::new(DiscreteForm::new(Arc::new(PrefractalGraph::build(3, m).unwrap())).unwrap())
    }

    #[test]
    fn action_at_zero_vanishes() {
        let p = ProblemInstance::simple(form(2), Nonlinearity::power(1.0, 4.0)).unwrap();
        assert_eq!(p.action(&p.zero_field()).unwrap(), 0.0);
        let grad = p.gradient(&p.zero_field()).unwrap();
        assert_eq!(grad.dual_norm, 0.0);
        assert!(grad.riesz.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn action_hand_evaluation_m1() {
        // a = 0, g = h = 1, f = v^3, x = 1 on the three midpoints.
        // energy: 6 boundary-midpoint edges with difference 1, scaled by 5/3.
        // F(1) = 1/4 on three vertices of weight 2/9 each.
        let p = ProblemInstance::simple(form(1), Nonlinearity::power(1.0, 4.0)).unwrap();
        let g = p.graph();
        let x = VertexField::new(
            (0..g.vertex_count())
                .map(|i| if g.is_boundary(i) { 0.0 } else { 1.0 })
                .collect(),
        );
        let expected = 0.5 * (5.0 / 3.0) * 6.0 - 3.0 * (2.0 / 9.0) * 0.25;
        assert!((p.action(&x).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 29.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn pure_quadratic_gradient_is_identity() {
        let p = ProblemInstance::simple(form(3), Nonlinearity::zero(4.0)).unwrap();
        let x = p.to_field(
            &(0..p.dofs())
                .map(|k| (k as f64 * 0.7).sin())
                .collect::<Vec<_>>(),
        );
        let grad = p.gradient(&x).unwrap();
        for (a, b) in grad.riesz.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let norm = p.form().energy(&x).unwrap().sqrt();
        assert!((grad.dual_norm - norm).abs() < 1e-12 * norm.max(1.0));
    }

    #[test]
    fn non_dirichlet_rejected() {
        let p = ProblemInstance::simple(form(1), Nonlinearity::power(1.0, 4.0)).unwrap();
        let x = VertexField::constant(6, 1.0);
        assert!(matches!(p.action(&x), Err(Error::NotDirichlet { .. })));
    }

    #[test]
    fn u_data_outside_domain_rejected() {
        let p = ProblemInstance::simple(form(1), Nonlinearity::power(1.0, 4.0)).unwrap();
        let mut u = VertexField::zeros(6);
        u.values_mut()[2] = 1.5;
        assert!(matches!(
            p.with_u_data(u),
            Err(Error::DomainViolation { vertex: 2, .. })
        ));
    }

    #[test]
    fn validation_names_hypotheses() {
        let p = ProblemInstance::simple(form(1), Nonlinearity::power(1.0, 4.0)).unwrap();
        assert!(p.validate().is_empty(), "{:?}", p.validate());
        let mut a = VertexField::zeros(6);
        a.values_mut()[3] = 1.0;
        let bad = ProblemInstance::new(
            p.form_arc().clone(),
            a,
            p.g().clone(),
            p.u_data().clone(),
            p.h().clone(),
            p.nonlinearity().clone(),
            *p.bounds(),
        )
        .unwrap();
        assert!(bad.validate().iter().any(|m| m.starts_with("A1")));
        let low_theta = p.with_nonlinearity(Nonlinearity::power(1.0, 1.5)).unwrap();
        assert!(low_theta
            .validate()
            .iter()
            .any(|m| m.contains("theta > 2 + epsilon")));
    }
}
