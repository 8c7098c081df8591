//! Parametric diffusion coefficients on `D = (0, 1)`.
//!
//! Both families share the truncated sine basis
//! `a_j(x) = c0 / j^2 * sin(j pi x)` for `1 <= j <= s` (and `a_j = 0` beyond
//! `s`):
//!
//! * [`Family::Affine`]: `a(x, y) = a0 + sum_j y_j a_j(x)`.
//! * [`Family::LogNormal`]: `a(x, y) = a_star + exp(sum_j Phi^{-1}(y_j + 1/2) a_j(x))`.
//!
//! Parameters live in `[-1/2, 1/2]^s`.

mod normal;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normal::inverse_normal_cdf;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("invalid coefficient model: {0}")]
    InvalidModel(String),
    #[error("parameter y[{index}] = {value} lies outside [-1/2, 1/2]")]
    ParameterOutOfRange { index: usize, value: f64 },
    #[error("parameter point has dimension {got}, model needs at least {need}")]
    DimensionMismatch { got: usize, need: usize },
    #[error("evaluation point x = {0} lies outside [0, 1]")]
    OutsideDomain(f64),
    #[error(
        "coefficient is non-positive ({value}) at x = {x}; the model violates uniform coercivity"
    )]
    NonPositive { x: f64, value: f64 },
    #[error("inverse normal CDF is undefined at u = {0}")]
    QuantileDomain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Affine,
    LogNormal,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Affine => f.write_str("affine"),
            Family::LogNormal => f.write_str("lognormal"),
        }
    }
}

/// Plain serialisable description of a model; validated into a
/// [`CoefficientModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub family: Family,
    #[serde(default = "default_a0")]
    pub a0: f64,
    pub c0: f64,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default)]
    pub a_star: f64,
}

fn default_a0() -> f64 {
    1.0
}

fn default_s() -> usize {
    100
}

/// Immutable, validated coefficient model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientSpec", into = "CoefficientSpec")]
pub struct CoefficientModel {
    family: Family,
    a0: f64,
    c0: f64,
    s: usize,
    a_star: f64,
}

impl TryFrom<CoefficientSpec> for CoefficientModel {
    type Error = CoefficientError;

    fn try_from(spec: CoefficientSpec) -> Result<Self, Self::Error> {
        let invalid = |msg: String| Err(CoefficientError::InvalidModel(msg));
        if spec.s < 1 {
            return invalid("stochastic dimension s must be at least 1".into());
        }
        if !(spec.a0.is_finite() && spec.a0 > 0.0) {
            return invalid(format!("a0 must be positive, got {}", spec.a0));
        }
        if !(spec.c0.is_finite() && spec.c0 >= 0.0) {
            return invalid(format!("c0 must be non-negative, got {}", spec.c0));
        }
        if !(spec.a_star.is_finite() && spec.a_star >= 0.0) {
            return invalid(format!("a_star must be non-negative, got {}", spec.a_star));
        }
        Ok(Self {
            family: spec.family,
            a0: spec.a0,
            c0: spec.c0,
            s: spec.s,
            a_star: spec.a_star,
        })
    }
}

impl From<CoefficientModel> for CoefficientSpec {
    fn from(m: CoefficientModel) -> Self {
        Self {
            family: m.family,
            a0: m.a0,
            c0: m.c0,
            s: m.s,
            a_star: m.a_star,
        }
    }
}

/// Upper end of the coefficient range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBound {
    Finite(f64),
    Unbounded,
}

impl UpperBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            UpperBound::Finite(v) => Some(v),
            UpperBound::Unbounded => None,
        }
    }
}

/// Analytic range `a_min <= a(x, y) <= a_max` over `D x U`.
///
/// For the affine family these come from the triangle inequality
/// `|sum y_j a_j| <= c0/2 sum 1/j^2` and are not sharp: the sine terms never
/// all peak at the same `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub min: f64,
    pub max: UpperBound,
}

impl CoefficientBounds {
    /// `0 < a_min` and `a_max < inf`, i.e. the model is uniformly elliptic
    /// and bounded.
    pub fn is_uniform(&self) -> bool {
        self.min > 0.0 && matches!(self.max, UpperBound::Finite(_))
    }
}

impl CoefficientModel {
    pub fn new(spec: CoefficientSpec) -> Result<Self, CoefficientError> {
        Self::try_from(spec)
    }

    pub fn affine(a0: f64, c0: f64, s: usize) -> Result<Self, CoefficientError> {
        Self::new(CoefficientSpec {
            family: Family::Affine,
            a0,
            c0,
            s,
            a_star: 0.0,
        })
    }

    pub fn log_normal(a_star: f64, c0: f64, s: usize) -> Result<Self, CoefficientError> {
        Self::new(CoefficientSpec {
            family: Family::LogNormal,
            a0: 1.0,
            c0,
            s,
            a_star,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn dimension(&self) -> usize {
        self.s
    }

    pub fn a_star(&self) -> f64 {
        self.a_star
    }

    pub fn spec(&self) -> CoefficientSpec {
        (*self).into()
    }

    /// Basis function `a_j(x)` for `j >= 1`.
    #[inline]
    pub fn term(&self, j: usize, x: f64) -> f64 {
        if j == 0 || j > self.s {
            return 0.0;
        }
        let jf = j as f64;
        self.c0 / (jf * jf) * (jf * PI * x).sin()
    }

    /// `||a_j||_{L^inf(0,1)}`: `c0 / j^2` inside the truncation, zero beyond.
    pub fn term_sup_norm(&self, j: usize) -> f64 {
        if j == 0 || j > self.s {
            return 0.0;
        }
        let jf = j as f64;
        self.c0 / (jf * jf)
    }

    /// `sum_{j=1}^{s} ||a_j||^p`.
    pub fn summability(&self, p: f64) -> f64 {
        (1..=self.s).map(|j| self.term_sup_norm(j).powf(p)).sum()
    }

    pub fn bounds(&self) -> CoefficientBounds {
        match self.family {
            Family::Affine => {
                let spread = 0.5 * self.summability(1.0);
                CoefficientBounds {
                    min: self.a0 - spread,
                    max: UpperBound::Finite(self.a0 + spread),
                }
            }
            Family::LogNormal => CoefficientBounds {
                min: self.a_star,
                max: UpperBound::Unbounded,
            },
        }
    }

    /// Per-parameter weights that multiply the basis in the exponent or the
    /// affine sum: `y_j` itself for the affine family, `Phi^{-1}(y_j + 1/2)`
    /// for the log-normal family.
    pub fn parameter_weights(&self, y: &ParameterPoint) -> Result<Vec<f64>, CoefficientError> {
        let ys = y.truncated(self.s)?;
        match self.family {
            Family::Affine => Ok(ys.to_vec()),
            Family::LogNormal => ys.iter().map(|&v| inverse_normal_cdf(v + 0.5)).collect(),
        }
    }

    /// Maps the basis sum `sum_j w_j a_j(x)` to the coefficient value.
    #[inline]
    pub fn combine(&self, basis_sum: f64) -> f64 {
        match self.family {
            Family::Affine => self.a0 + basis_sum,
            Family::LogNormal => self.a_star + basis_sum.exp(),
        }
    }

    /// Evaluates `a(x, y)`.
    pub fn evaluate(&self, x: f64, y: &ParameterPoint) -> Result<f64, CoefficientError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CoefficientError::OutsideDomain(x));
        }
        let weights = self.parameter_weights(y)?;
        let sum: f64 = weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.term(k + 1, x))
            .sum();
        let value = self.combine(sum);
        if self.family == Family::Affine && value <= 0.0 {
            return Err(CoefficientError::NonPositive { x, value });
        }
        Ok(value)
    }
}

/// A point `y` of the parameter domain `[-1/2, 1/2]^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self, CoefficientError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.abs() <= 0.5)) {
            return Err(CoefficientError::ParameterOutOfRange { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(s: usize) -> Self {
        Self(vec![0.0; s])
    }

    pub fn filled(s: usize, value: f64) -> Result<Self, CoefficientError> {
        Self::new(vec![value; s])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `max_j |y_j - other_j|` over the common prefix.
    pub fn sup_distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn truncated(&self, s: usize) -> Result<&[f64], CoefficientError> {
        if self.0.len() < s {
            return Err(CoefficientError::DimensionMismatch {
                got: self.0.len(),
                need: s,
            });
        }
        Ok(&self.0[..s])
    }
}

impl TryFrom<Vec<f64>> for ParameterPoint {
    type Error = CoefficientError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<ParameterPoint> for Vec<f64> {
    fn from(p: ParameterPoint) -> Self {
        p.0
    }
}
