use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{random_ball_sample, uniform_convergence_estimate};
use super::ProblemSequence;
use crate::error::{Error, Result};
use crate::forms::VertexField;
use crate::solvers::{geometric_grid, geometry_probe, unit_directions, ProbeOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    /// The sampled quantity compared against `bound`.
    pub quantity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub pass: bool,
    pub sample: String,
    /// Per-index values for `n = 1..=n_max`, when the hypothesis has one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_n: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub n_max: usize,
    pub r: f64,
    pub x_star_norm: f64,
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn passes(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.entry(n).is_some_and(|e| e.pass))
    }

    pub fn mountain_pass_ready(&self) -> bool {
        self.passes(&["PMPT1", "PMPT2", "PMPT3"])
    }

    pub fn double_ready(&self) -> bool {
        self.passes(&["DCPT1", "DCPT2", "DCPT3"])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisOptions {
    pub probe: ProbeOptions,
    /// Random fields for the (C) and (∂C) estimates.
    pub sample_size: usize,
    /// Rays for the (BB) check reach out to this radius; defaults to
    /// `100 max(‖x_star‖, 1)`.
    pub bb_radius: Option<f64>,
    pub seed: u64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            probe: ProbeOptions::default(),
            sample_size: 32,
            bb_radius: None,
            seed: 0,
        }
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Sampled checks of the parametric hypotheses over `n = 1..=n_max`.
pub fn hypothesis_check(
    seq: &ProblemSequence,
    r: f64,
    x_star: &VertexField,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "r must be positive, got {r}"
        )));
    }
    let base = seq.base();
    let star_norm = base.form().energy(x_star)?.sqrt();
    base.form().require_dirichlet(x_star)?;
    if !(star_norm > r) {
        return Err(Error::InvalidArgument(format!(
            "x_star must lie outside the sphere: norm {star_norm} <= r = {r}"
        )));
    }
    let n_max = seq.n_max();
    let star = base.form().restrict(x_star)?;
    let zero = vec![0.0; base.dofs()];
    let bb_radius = opts.bb_radius.unwrap_or(100.0 * star_norm.max(1.0));
    let bb_dirs = unit_directions(base, opts.probe.n_directions, opts.seed)?;
    let bb_grid = geometric_grid(r.min(1.0), bb_radius, 10);

    struct PerN {
        at_zero: f64,
        at_star: f64,
        sphere: f64,
        ball: f64,
        bb_min: f64,
        bb_witness: Option<String>,
    }
    let per: Vec<PerN> = (1..=n_max)
        .into_par_iter()
        .map(|n| -> Result<PerN> {
            let p = seq.instance(n)?;
            let geo = geometry_probe(&p, r, &opts.probe)?;
            let mut bb_min = f64::INFINITY;
            let mut bb_witness = None;
            for (k, d) in bb_dirs.iter().enumerate() {
                let vals: Vec<f64> = bb_grid
                    .iter()
                    .map(|&s| p.action_interior(&d.iter().map(|v| v * s).collect::<Vec<_>>()))
                    .collect();
                bb_min = bb_min.min(min_of(&vals));
                let l = vals.len();
                if bb_witness.is_none() && l >= 2 && vals[l - 1] < 0.0 && vals[l - 1] < vals[l - 2]
                {
                    bb_witness = Some(format!(
                        "n = {n}, direction {k}: J decreasing to {} at radius {}",
                        vals[l - 1],
                        bb_grid[l - 1]
                    ));
                }
            }
            Ok(PerN {
                at_zero: p.action_interior(&zero),
                at_star: p.action_interior(&star),
                sphere: geo.sphere_inf_estimate,
                ball: geo.ball_inf_estimate,
                bb_min,
                bb_witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let at_zero: Vec<f64> = per.iter().map(|p| p.at_zero.abs()).collect();
    let at_star: Vec<f64> = per.iter().map(|p| p.at_star).collect();
    let sphere: Vec<f64> = per.iter().map(|p| p.sphere).collect();
    let ball: Vec<f64> = per.iter().map(|p| p.ball).collect();
    let probe_desc = format!(
        "{} directions (seed {}), {} ball radii, {} refinement steps, r = {r}",
        opts.probe.n_directions, opts.probe.seed, opts.probe.ball_steps, opts.probe.refine_steps
    );
    let mut entries = Vec::new();

    let bb_witnesses: Vec<String> = per.iter().filter_map(|p| p.bb_witness.clone()).collect();
    entries.push(HypothesisEntry {
        name: "BB".into(),
        quantity: min_of(&per.iter().map(|p| p.bb_min).collect::<Vec<_>>()),
        bound: None,
        pass: bb_witnesses.is_empty(),
        sample: format!(
            "{} rays (seed {}), radii geometric in [{}, {bb_radius}]; fails if J still decreases below zero at the outer radius",
            bb_dirs.len(),
            opts.seed,
            bb_grid[0]
        ),
        per_n: per.iter().map(|p| p.bb_min).collect(),
        witnesses: bb_witnesses,
    });

    let sample_radius = star_norm.max(r);
    let mut sample = random_ball_sample(base, sample_radius, opts.sample_size.max(1), opts.seed)?;
    sample.push(x_star.clone());
    let est = uniform_convergence_estimate(seq, &sample)?;
    let sample_desc = format!(
        "{} random fields in the ball of radius {sample_radius} (seed {}) plus x_star",
        opts.sample_size.max(1),
        opts.seed
    );
    for (name, values, monotone) in [
        (
            "C",
            est.rows
                .iter()
                .map(|r| r.sup_value_diff)
                .collect::<Vec<_>>(),
            est.monotone_value,
        ),
        (
            "dC",
            est.rows.iter().map(|r| r.sup_dual_diff).collect::<Vec<_>>(),
            est.monotone_dual,
        ),
    ] {
        let first = values[0];
        let last = *values.last().unwrap();
        let decays = values.iter().all(|v| *v == 0.0) || n_max < 2 || last <= 0.5 * first;
        entries.push(HypothesisEntry {
            name: name.into(),
            quantity: last,
            bound: Some(first),
            pass: monotone && decays,
            sample: sample_desc.clone(),
            per_n: values,
            witnesses: Vec::new(),
        });
    }

    let zero_max = max_of(&at_zero);
    for name in ["PMPT1", "DCPT1"] {
        entries.push(HypothesisEntry {
            name: name.into(),
            quantity: zero_max,
            bound: Some(0.0),
            pass: zero_max == 0.0,
            sample: "J_n(0) for every n".into(),
            per_n: at_zero.clone(),
            witnesses: Vec::new(),
        });
    }

    let sphere_inf = min_of(&sphere);
    entries.push(HypothesisEntry {
        name: "PMPT2".into(),
        quantity: sphere_inf,
        bound: Some(0.0),
        pass: sphere_inf > 0.0,
        sample: format!(
            "sphere infimum per n; margin eps = {}; {probe_desc}",
            0.5 * sphere_inf
        ),
        per_n: sphere.clone(),
        witnesses: sphere
            .iter()
            .enumerate()
            .filter(|(_, v)| !(**v > 0.0))
            .map(|(k, v)| format!("n = {}: sphere infimum {v}", k + 1))
            .collect(),
    });

    let star_sup = max_of(&at_star);
    for name in ["PMPT3", "DCPT3"] {
        entries.push(HypothesisEntry {
            name: name.into(),
            quantity: star_sup,
            bound: Some(0.0),
            pass: star_sup < 0.0 && star_norm > r,
            sample: format!("J_n(x_star) per n, |x_star| = {star_norm}"),
            per_n: at_star.clone(),
            witnesses: at_star
                .iter()
                .enumerate()
                .filter(|(_, v)| !(**v < 0.0))
                .map(|(k, v)| format!("n = {}: J_n(x_star) = {v}", k + 1))
                .collect(),
        });
    }

    let ball_sup = max_of(&ball);
    let ball_inf = min_of(&ball);
    let big_r = 2.0 * ball_inf.abs() + 1.0;
    entries.push(HypothesisEntry {
        name: "DCPT2".into(),
        quantity: ball_sup,
        bound: Some(0.0),
        pass: ball_sup < 0.0 && sphere_inf > 0.0 && ball_inf > -big_r,
        sample: format!("ball and sphere infima per n with R = {big_r}; {probe_desc}"),
        per_n: ball.clone(),
        witnesses: ball
            .iter()
            .zip(&sphere)
            .enumerate()
            .filter(|(_, (b, s))| !(**b < 0.0 && **s > 0.0))
            .map(|(k, (b, s))| format!("n = {}: ball infimum {b}, sphere infimum {s}", k + 1))
            .collect(),
    });

    let gaps: Vec<f64> = sphere.iter().zip(&ball).map(|(s, b)| s - b).collect();
    let gap_min = min_of(&gaps);
    entries.push(HypothesisEntry {
        name: "InfU".into(),
        quantity: gap_min,
        bound: Some(0.0),
        pass: gap_min > 0.0 && ball_inf > -big_r,
        sample: format!(
            "U = ball of radius {r}; sphere minus ball infimum per n, eps = {}, R = {big_r}; {probe_desc}",
            0.5 * gap_min
        ),
        per_n: gaps,
        witnesses: Vec::new(),
    });

    Ok(HypothesisReport {
        n_max,
        r,
        x_star_norm: star_norm,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::{build_sequence, Schedule};
    use super::*;
    use crate::forms::DiscreteForm;
    use crate::functions::Nonlinearity;
    use crate::geometry::PrefractalGraph;
    use crate::problem::ProblemInstance;

    fn seq(nl: Nonlinearity) -> ProblemSequence {
        let form = DiscreteForm::new(Arc::new(PrefractalGraph::build(3, 2).unwrap())).unwrap();
        let p = ProblemInstance::simple(Arc::new(form), nl).unwrap();
        build_sequence(p, Schedule::g_scale(1.0), 4).unwrap()
    }

    #[test]
    fn quadratic_passes_pmpt2_fails_pmpt3() {
        let s = seq(Nonlinearity::zero(4.0));
        let x_star = s.base().to_field(&vec![1.0; s.base().dofs()]);
        let rep = hypothesis_check(&s, 0.5, &x_star, &HypothesisOptions::default()).unwrap();
        assert!(rep.entry("PMPT1").unwrap().pass);
        assert!(rep.entry("PMPT2").unwrap().pass);
        assert!(!rep.entry("PMPT3").unwrap().pass);
        assert!(rep.entry("BB").unwrap().pass);
        assert!(!rep.entry("DCPT2").unwrap().pass);
    }

    #[test]
    fn cubic_passes_mountain_pass_geometry() {
        let s = seq(Nonlinearity::power(1.0, 4.0));
        let x_star = s.base().to_field(&vec![20.0; s.base().dofs()]);
        let rep = hypothesis_check(&s, 0.5, &x_star, &HypothesisOptions::default()).unwrap();
        assert!(rep.mountain_pass_ready(), "{:#?}", rep.entries);
        assert!(!rep.entry("BB").unwrap().pass);
        assert!(rep.entry("C").unwrap().pass);
    }

    #[test]
    fn x_star_inside_sphere_rejected() {
        let s = seq(Nonlinearity::power(1.0, 4.0));
        let x_star = s.base().to_field(&vec![0.01; s.base().dofs()]);
        assert!(hypothesis_check(&s, 0.5, &x_star, &HypothesisOptions::default()).is_err());
    }
}
