//! Sampled checks of the hypotheses A1-A5 on a problem instance.
//!
//! Every check is evaluated on a finite grid and reports "pass on grid", not
//! a proof. A failing entry always carries concrete witnesses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Nonlinearity;
use crate::problem::ProblemInstance;

/// Keep at most this many witnesses per hypothesis.
const MAX_WITNESSES: usize = 16;

/// Relative slack for comparisons that hold with equality for pure powers.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    /// Points per sampled interval (endpoints included).
    pub points: usize,
    /// A3 is sampled on `[-v_max, v_max]`.
    pub v_max: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self {
            points: 201,
            v_max: 10.0,
        }
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let n = points.max(2);
    (0..n).map(move |k| {
        // exact endpoints and exact zero for symmetric odd grids
        let t = k as f64 / (n - 1) as f64;
        if k == n - 1 {
            hi
        } else {
            let v = lo + (hi - lo) * t;
            if (2 * k + 1 == n) && lo == -hi {
                0.0
            } else {
                v
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unknown,
}

/// One violated inequality `lhs <relation> rhs` at a sampled input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub at: String,
    pub input: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub name: String,
    pub status: Status,
    pub checked: String,
    pub violations: usize,
    pub witnesses: Vec<Witness>,
}

impl AssumptionEntry {
    fn new(name: &str, checked: String) -> Self {
        Self {
            name: name.into(),
            status: Status::Pass,
            checked,
            violations: 0,
            witnesses: Vec::new(),
        }
    }

    fn violate(&mut self, w: Witness) {
        self.status = Status::Fail;
        self.violations += 1;
        self.witnesses.push(w);
    }

    fn finish(mut self) -> Self {
        // smallest |input| first so the most informative witnesses survive truncation
        self.witnesses.sort_by(|a, b| {
            a.input
                .abs()
                .total_cmp(&b.input.abs())
                .then(a.input.total_cmp(&b.input))
        });
        self.witnesses.truncate(MAX_WITNESSES);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub sampling: SamplingGrid,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, name: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn status(&self, name: &str) -> Status {
        self.entry(name).map_or(Status::Unknown, |e| e.status)
    }

    pub fn all_pass(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.status(n) == Status::Pass)
    }
}

fn witness(at: String, input: f64, lhs: f64, rhs: f64, relation: &str) -> Witness {
    Witness {
        at,
        input,
        lhs,
        rhs,
        relation: relation.into(),
    }
}

pub fn check_assumptions(problem: &ProblemInstance, sampling: SamplingGrid) -> AssumptionReport {
    let b = *problem.bounds();
    let nl = problem.nonlinearity();
    let theta = nl.theta;
    let n = problem.graph().n() as f64;
    let k = sampling.points;

    let mut a1 = AssumptionEntry::new("A1", "a(y) <= 0 at every vertex".into());
    for (i, &v) in problem.a().values().iter().enumerate() {
        if v > 0.0 {
            a1.violate(witness(format!("vertex {i}"), i as f64, v, 0.0, "a <= 0"));
        }
    }

    let mut a2 = AssumptionEntry::new(
        "A2",
        format!("g1 <= g <= g2 at every vertex; h1 <= h(u) <= h2 on {k} points of [-M, M]"),
    );
    if !(b.g_lo > 0.0) {
        a2.violate(witness("g1".into(), b.g_lo, b.g_lo, 0.0, "g1 > 0"));
    }
    if !(b.h_lo > 0.0) {
        a2.violate(witness("h1".into(), b.h_lo, b.h_lo, 0.0, "h1 > 0"));
    }
    for (i, &v) in problem.g().values().iter().enumerate() {
        if v < b.g_lo {
            a2.violate(witness(
                format!("vertex {i}"),
                i as f64,
                b.g_lo,
                v,
                "g1 <= g",
            ));
        }
        if v > b.g_hi {
            a2.violate(witness(
                format!("vertex {i}"),
                i as f64,
                v,
                b.g_hi,
                "g <= g2",
            ));
        }
    }
    for u in grid(-b.m, b.m, k) {
        let hv = problem.h().eval(u);
        if hv < b.h_lo {
            a2.violate(witness(format!("u = {u}"), u, b.h_lo, hv, "h1 <= h(u)"));
        }
        if hv > b.h_hi {
            a2.violate(witness(format!("u = {u}"), u, hv, b.h_hi, "h(u) <= h2"));
        }
    }

    let mut a3 = AssumptionEntry::new(
        "A3",
        format!(
            "0 < theta F(v) <= v f(v) on {k} points of [-{0}, {0}] excluding 0; theta > 2 + eps; 1/2 - 1/theta >= c",
            sampling.v_max
        ),
    );
    if !(b.epsilon > 0.0) {
        a3.violate(witness(
            "epsilon".into(),
            b.epsilon,
            b.epsilon,
            0.0,
            "eps > 0",
        ));
    }
    if !(theta > 2.0 + b.epsilon) {
        a3.violate(witness(
            "theta".into(),
            theta,
            theta,
            2.0 + b.epsilon,
            "theta > 2 + eps",
        ));
    }
    if !(0.5 - 1.0 / theta >= b.c && b.c > 0.0) {
        a3.violate(witness(
            "c".into(),
            b.c,
            0.5 - 1.0 / theta,
            b.c,
            "1/2 - 1/theta >= c > 0",
        ));
    }
    for v in grid(-sampling.v_max, sampling.v_max, k) {
        if v == 0.0 {
            continue;
        }
        let tf = theta * nl.big_f(v);
        let vf = v * nl.f(v);
        if !(tf > 0.0) {
            a3.violate(witness(format!("v = {v}"), v, 0.0, tf, "0 < theta F(v)"));
        } else if tf > vf + ROUNDING * vf.abs() {
            a3.violate(witness(
                format!("v = {v}"),
                v,
                tf,
                vf,
                "theta F(v) <= v f(v)",
            ));
        }
    }

    let a4_rhs = b.m1 / (2.0 * (b.beta + 1.0) * (2.0 * n + 3.0).powi(2));
    let mut a4 = AssumptionEntry::new(
        "A4",
        format!("max |g f(v) h(u)| over vertices, {k} points of |v| <= M1 and of |u| <= M, against M1 / (2 (beta + 1) (2N + 3)^2)"),
    );
    let g_max = problem
        .g()
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let (f_max, v_at) = grid(-b.m1, b.m1, k)
        .map(|v| (nl.f(v).abs(), v))
        .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let h_max = grid(-b.m, b.m, k).fold(0.0f64, |m, u| m.max(problem.h().eval(u).abs()));
    let lhs = g_max * f_max * h_max;
    if lhs > a4_rhs {
        a4.violate(witness(
            format!("v = {v_at}"),
            v_at,
            lhs,
            a4_rhs,
            "max |g f h| <= bound",
        ));
    }

    let mut a5 = AssumptionEntry::new(
        "A5",
        format!("F(v) >= eta |v| on {k} points of [-1, 1]; eta > 0"),
    );
    if !(b.eta > 0.0) {
        a5.violate(witness("eta".into(), b.eta, b.eta, 0.0, "eta > 0"));
    }
    for v in grid(-1.0, 1.0, k) {
        let fv = nl.big_f(v);
        if fv < b.eta * v.abs() {
            a5.violate(witness(
                format!("v = {v}"),
                v,
                fv,
                b.eta * v.abs(),
                "F(v) >= eta |v|",
            ));
        }
    }

    AssumptionReport {
        sampling,
        entries: [a1, a2, a3, a4, a5]
            .into_iter()
            .map(AssumptionEntry::finish)
            .collect(),
    }
}

/// Constants with `F(v) >= b1 |v|^theta - b2` at every sample of `[-v_max, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub b1: f64,
    pub b2: f64,
}

impl GrowthEstimate {
    pub fn holds_on(&self, nl: &Nonlinearity, v_max: f64, points: usize) -> bool {
        grid(-v_max, v_max, points).all(|v| {
            nl.big_f(v)
                >= self.b1 * v.abs().powf(nl.theta) - self.b2 - 1e-12 * (1.0 + nl.big_f(v).abs())
        })
    }
}

pub fn growth_estimate(nl: &Nonlinearity, v_max: f64, points: usize) -> Result<GrowthEstimate> {
    if !(v_max >= 1.0) || !v_max.is_finite() || points < 3 {
        return Err(Error::InvalidArgument(format!(
            "growth estimate needs v_max >= 1 and at least 3 points, got v_max = {v_max}, points = {points}"
        )));
    }
    let theta = nl.theta;
    let samples: Vec<f64> = grid(-v_max, v_max, points).collect();
    let b1 = samples
        .iter()
        .filter(|v| v.abs() >= 1.0)
        .map(|&v| nl.big_f(v) / v.abs().powf(theta))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let b2 = samples
        .iter()
        .filter(|v| v.abs() <= 1.0)
        .map(|&v| b1 * v.abs().powf(theta) - nl.big_f(v))
        .fold(0.0f64, f64::max);
    Ok(GrowthEstimate { b1, b2 })
}
