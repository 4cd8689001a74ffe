//! Registry of scalar functions used for the nonlinearity `f` and the
//! composition `h`, each with its derivative and its primitive from zero.

use serde::{Deserialize, Serialize};

use crate::quadrature;

/// Absolute tolerance for primitives computed by quadrature.
pub const PRIMITIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFunction {
    Constant {
        value: f64,
    },
    /// `sum_k coeffs[k] v^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `scale |v|^(exponent - 2) v`
    ScaledPower {
        scale: f64,
        exponent: f64,
    },
    /// `clamp(slope v + intercept, lo, hi)`
    ClampedAffine {
        slope: f64,
        intercept: f64,
        lo: f64,
        hi: f64,
    },
    /// `eta tanh(v / width)`, a smoothed `eta sign(v)`.
    RegularizedSign {
        eta: f64,
        width: f64,
    },
    Sum {
        terms: Vec<ScalarFunction>,
    },
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl ScalarFunction {
    pub fn power(scale: f64, exponent: f64) -> Self {
        Self::ScaledPower { scale, exponent }
    }

    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * v + c),
            Self::ScaledPower { scale, exponent } => {
                if v == 0.0 {
                    0.0
                } else {
                    scale * v.abs().powf(exponent - 2.0) * v
                }
            }
            Self::ClampedAffine {
                slope,
                intercept,
                lo,
                hi,
            } => (slope * v + intercept).clamp(*lo, *hi),
            Self::RegularizedSign { eta, width } => eta * (v / width).tanh(),
            Self::Sum { terms } => terms.iter().map(|t| t.eval(v)).sum(),
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * v + k as f64 * c),
            Self::ScaledPower { scale, exponent } => {
                if v == 0.0 {
                    if *exponent == 2.0 {
                        *scale
                    } else {
                        0.0
                    }
                } else {
                    scale * (exponent - 1.0) * v.abs().powf(exponent - 2.0)
                }
            }
            Self::ClampedAffine {
                slope,
                intercept,
                lo,
                hi,
            } => {
                let y = slope * v + intercept;
                if y > *lo && y < *hi {
                    *slope
                } else {
                    0.0
                }
            }
            Self::RegularizedSign { eta, width } => {
                let c = (v / width).cosh();
                eta / (width * c * c)
            }
            Self::Sum { terms } => terms.iter().map(|t| t.derivative(v)).sum(),
        }
    }

    /// `int_0^v` of the function, in closed form.
    pub fn primitive(&self, v: f64) -> f64 {
        match self {
            Self::Constant { value } => value * v,
            Self::Polynomial { coeffs } => {
                coeffs
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * v + c / (k as f64 + 1.0))
                    * v
            }
            Self::ScaledPower { scale, exponent } => scale * v.abs().powf(*exponent) / exponent,
            Self::ClampedAffine {
                slope,
                intercept,
                lo,
                hi,
            } => {
                let (a, b) = (v.min(0.0), v.max(0.0));
                let mut knots = vec![a, b];
                if *slope != 0.0 {
                    for t in [(lo - intercept) / slope, (hi - intercept) / slope] {
                        if t > a && t < b {
                            knots.push(t);
                        }
                    }
                }
                knots.sort_by(f64::total_cmp);
                // the integrand is affine between consecutive knots
                let area: f64 = knots
                    .windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1])))
                    .sum();
                if v < 0.0 {
                    -area
                } else {
                    area
                }
            }
            Self::RegularizedSign { eta, width } => eta * width * ln_cosh(v / width),
            Self::Sum { terms } => terms.iter().map(|t| t.primitive(v)).sum(),
        }
    }

    pub fn is_finite_params(&self) -> bool {
        match self {
            Self::Constant { value } => value.is_finite(),
            Self::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            Self::ScaledPower { scale, exponent } => scale.is_finite() && exponent.is_finite(),
            Self::ClampedAffine {
                slope,
                intercept,
                lo,
                hi,
            } => [slope, intercept, lo, hi].iter().all(|x| x.is_finite()),
            Self::RegularizedSign { eta, width } => eta.is_finite() && width.is_finite(),
            Self::Sum { terms } => terms.iter().all(Self::is_finite_params),
        }
    }

    /// Structural problems that make the function ill-defined or discontinuous.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.is_finite_params() {
            out.push("function parameters must be finite".to_string());
        }
        match self {
            Self::ScaledPower { exponent, .. } if *exponent <= 1.0 => out.push(format!(
                "scaled_power exponent must exceed 1, got {exponent}"
            )),
            Self::ClampedAffine { lo, hi, .. } if lo > hi => out.push(format!(
                "clamped_affine needs lo <= hi, got lo={lo}, hi={hi}"
            )),
            Self::RegularizedSign { width, .. } if *width <= 0.0 => out.push(format!(
                "regularized_sign width must be positive, got {width}"
            )),
            Self::Sum { terms } => terms.iter().for_each(|t| out.extend(t.defects())),
            _ => {}
        }
        out
    }

    /// Whether `f(-v) = -f(v)` holds structurally.
    pub fn is_odd(&self) -> bool {
        match self {
            Self::Constant { value } => *value == 0.0,
            Self::Polynomial { coeffs } => coeffs.iter().step_by(2).all(|c| *c == 0.0),
            Self::ScaledPower { .. } | Self::RegularizedSign { .. } => true,
            Self::ClampedAffine {
                intercept, lo, hi, ..
            } => *intercept == 0.0 && *lo == -*hi,
            Self::Sum { terms } => terms.iter().all(Self::is_odd),
        }
    }
}

/// The nonlinearity `f`, its primitive `F(v) = int_0^v f` and the exponent
/// `theta` of the Ambrosetti-Rabinowitz type condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub f: ScalarFunction,
    pub theta: f64,
    /// Compute `F` by adaptive quadrature instead of the closed form.
    #[serde(default)]
    pub quadrature: bool,
}

impl Nonlinearity {
    pub fn new(f: ScalarFunction, theta: f64) -> Self {
        Self {
            f,
            theta,
            quadrature: false,
        }
    }

    /// `f(v) = scale |v|^(theta - 2) v`, `F(v) = scale |v|^theta / theta`.
    pub fn power(scale: f64, theta: f64) -> Self {
        Self::new(ScalarFunction::power(scale, theta), theta)
    }

    pub fn zero(theta: f64) -> Self {
        Self::new(ScalarFunction::constant(0.0), theta)
    }

    pub fn with_quadrature(mut self, on: bool) -> Self {
        self.quadrature = on;
        self
    }

    pub fn f(&self, v: f64) -> f64 {
        self.f.eval(v)
    }

    pub fn df(&self, v: f64) -> f64 {
        self.f.derivative(v)
    }

    pub fn big_f(&self, v: f64) -> f64 {
        if self.quadrature {
            quadrature::integrate(|t| self.f.eval(t), 0.0, v, PRIMITIVE_TOL).0
        } else {
            self.f.primitive(v)
        }
    }

    pub fn closed_form(&self) -> bool {
        !self.quadrature
    }
}
