//! Sampled estimates of the sphere and ball infima of the action, the search
//! for a far point `x_*` with negative action, and the small-ray dip that
//! produces a negative ball infimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{descent, SolverOptions};
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::problem::ProblemInstance;

/// `M₁ / (2N + 3)`: any field in this energy ball has sup norm at most `M₁`.
pub fn default_radius(problem: &ProblemInstance) -> f64 {
    problem.bounds().m1 / problem.form().embedding_constant()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOptions {
    pub n_directions: usize,
    /// Ray parameters scanned (ascending) when looking for `x_*`.
    pub s_grid: Vec<f64>,
    /// Radii `r j / ball_steps` and `r 2^-j`, `j = 1..=ball_steps`, sampled on
    /// each direction for the ball infimum.
    pub ball_steps: usize,
    /// Descent steps used to sharpen the best sphere and ball samples; zero
    /// keeps the raw sampled minima.
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            n_directions: 64,
            s_grid: geometric_grid(1e-4, 1e4, 20),
            ball_steps: 16,
            refine_steps: 50,
            seed: 0,
        }
    }
}

/// `r j / steps` and `r 2^-j` for `j = 1..=steps`.
pub(crate) fn ball_radii(r: f64, steps: usize) -> impl Iterator<Item = f64> {
    let steps = steps.max(1);
    (1..=steps)
        .map(move |j| r * j as f64 / steps as f64)
        .chain((1..=steps).map(move |j| r * 0.5f64.powi(j as i32)))
}

pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryFlags {
    /// Sphere infimum above `max(J(0), J(x_*))`.
    pub pmpt2: bool,
    /// `x_*` found with `‖x_*‖ > r` and `J(x_*) < 0`.
    pub pmpt3: bool,
    /// Ball infimum below zero and sphere infimum above zero.
    pub dcpt2: bool,
}

/// Ray `s x` along the field equal to one on interior vertices:
/// `J(s x) ≤ ½ s² τ − α s` whenever `F(v) ≥ η |v|` on the range of `s x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallRayBound {
    pub tau: f64,
    pub alpha: f64,
    pub s_opt: f64,
    pub predicted: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub r: f64,
    pub n_directions: usize,
    pub sphere_inf_estimate: f64,
    pub sphere_witness: VertexField,
    pub ball_inf_estimate: f64,
    pub ball_witness: VertexField,
    pub x_star: Option<VertexField>,
    pub x_star_value: Option<f64>,
    pub x_star_norm: Option<f64>,
    pub small_ray: Option<SmallRayBound>,
    pub flags: GeometryFlags,
}

fn normalize(problem: &ProblemInstance, mut x: Vec<f64>) -> Vec<f64> {
    let n = problem.energy_norm_interior(&x);
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// Unit (energy norm) directions: the all-ones interior field, its negative,
/// then seeded random fields. Prefixes are nested in `n`.
pub fn unit_directions(problem: &ProblemInstance, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let dofs = problem.dofs();
    if dofs == 0 {
        return Err(Error::EmptyInterior);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let raw: Vec<f64> = match k {
            0 => vec![1.0; dofs],
            1 => vec![-1.0; dofs],
            _ => (0..dofs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        out.push(normalize(problem, raw));
    }
    Ok(out)
}

/// Candidate rays with `|x(y)| ≥ 1` at every interior vertex.
fn far_candidates(dofs: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..n)
        .map(|k| match k {
            0 => vec![1.0; dofs],
            1 => vec![-1.0; dofs],
            _ => (0..dofs)
                .map(|_| {
                    let mag = 1.0 + rng.gen::<f64>();
                    if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect(),
        })
        .collect()
}

fn refine_on_sphere(
    problem: &ProblemInstance,
    mut x: Vec<f64>,
    r: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let mut value = problem.action_interior(&x);
    for _ in 0..steps {
        let Ok((p, _, _)) = problem.gradient_interior(&x) else {
            break;
        };
        let radial = problem.form().interior_inner(&p, &x) / (r * r);
        let tangent: Vec<f64> = p.iter().zip(&x).map(|(p, x)| p - radial * x).collect();
        let tn = problem.energy_norm_interior(&tangent);
        if !(tn > 1e-14 * r) {
            break;
        }
        let mut t = 0.5 * r / tn;
        let mut moved = false;
        for _ in 0..30 {
            let y: Vec<f64> = x.iter().zip(&tangent).map(|(x, d)| x - t * d).collect();
            let y: Vec<f64> = normalize(problem, y).into_iter().map(|v| v * r).collect();
            let vy = problem.action_interior(&y);
            if vy < value {
                x = y;
                value = vy;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, value)
}

pub fn geometry_probe(
    problem: &ProblemInstance,
    r: f64,
    opts: &ProbeOptions,
) -> Result<GeometryReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "probe radius must be positive, got {r}"
        )));
    }
    if opts.n_directions < 16 {
        return Err(Error::InvalidArgument(format!(
            "geometry probe needs at least 16 directions, got {}",
            opts.n_directions
        )));
    }
    let dofs = problem.dofs();
    let directions = unit_directions(problem, opts.n_directions, opts.seed)?;

    let mut sphere = (f64::INFINITY, Vec::new());
    let mut ball = (0.0, vec![0.0; dofs]);
    for d in &directions {
        let on_sphere: Vec<f64> = d.iter().map(|v| v * r).collect();
        let v = problem.action_interior(&on_sphere);
        if v < sphere.0 {
            sphere = (v, on_sphere);
        }
        for s in ball_radii(r, opts.ball_steps) {
            let x: Vec<f64> = d.iter().map(|v| v * s).collect();
            let v = problem.action_interior(&x);
            if v < ball.0 {
                ball = (v, x);
            }
        }
    }
    if opts.refine_steps > 0 {
        let (x, v) = refine_on_sphere(problem, sphere.1.clone(), r, opts.refine_steps);
        if v < sphere.0 {
            sphere = (v, x);
        }
        let ball_opts = SolverOptions {
            max_iters: opts.refine_steps,
            ..Default::default()
        };
        if let Ok(res) =
            descent::minimize_in_ball_from(problem, r, &ball_opts, &problem.to_field(&ball.1))
        {
            if res.value < ball.0 {
                ball = (res.value, problem.form().restrict(&res.point)?);
            }
        }
    }
    // sphere samples are also ball samples
    if sphere.0 < ball.0 {
        ball = sphere.clone();
    }

    let mut x_star = None;
    'search: for cand in far_candidates(dofs, opts.n_directions, opts.seed) {
        for &s in &opts.s_grid {
            let x: Vec<f64> = cand.iter().map(|v| v * s).collect();
            let value = problem.action_interior(&x);
            let norm = problem.energy_norm_interior(&x);
            if value < 0.0 && norm > r {
                x_star = Some((x, value, norm));
                break 'search;
            }
        }
    }

    let small_ray = small_ray_bound(problem);
    let j_star = x_star.as_ref().map(|x| x.1);
    let flags = GeometryFlags {
        pmpt2: sphere.0 > j_star.unwrap_or(0.0).max(0.0),
        pmpt3: x_star.is_some(),
        dcpt2: ball.0 < 0.0 && 0.0 < sphere.0,
    };
    Ok(GeometryReport {
        r,
        n_directions: opts.n_directions,
        sphere_inf_estimate: sphere.0,
        sphere_witness: problem.to_field(&sphere.1),
        ball_inf_estimate: ball.0,
        ball_witness: problem.to_field(&ball.1),
        x_star_value: j_star,
        x_star_norm: x_star.as_ref().map(|x| x.2),
        x_star: x_star.map(|x| problem.to_field(&x.0)),
        small_ray,
        flags,
    })
}

fn small_ray_bound(problem: &ProblemInstance) -> Option<SmallRayBound> {
    let b = problem.bounds();
    if !(b.eta > 0.0) || problem.dofs() == 0 {
        return None;
    }
    let ones = vec![1.0; problem.dofs()];
    let mu: f64 = problem
        .form()
        .interior()
        .iter()
        .map(|&i| problem.form().measure()[i])
        .sum();
    let lower: f64 = problem.mass_weights().iter().sum();
    let tau = problem.form().interior_inner(&ones, &ones) - lower;
    let alpha = b.eta * b.g_lo * b.h_lo * mu;
    let s_opt = alpha / tau;
    let x: Vec<f64> = vec![s_opt; problem.dofs()];
    Some(SmallRayBound {
        tau,
        alpha,
        s_opt,
        predicted: 0.5 * s_opt * s_opt * tau - alpha * s_opt,
        actual: problem.action_interior(&x),
    })
}
