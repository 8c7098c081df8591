//! Computable consequences of the eigenvalue bounds: brackets, the
//! sufficient gap condition, Lipschitz constants and the power-law fit
//! used on survey output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficient::{CoefficientModel, Family, ParameterPoint};
use crate::discretization::{
    assemble_mass, DiscretizationError, QuadratureRule, StiffnessAssembler, UniformMesh,
};
use crate::eigensolve::{
    continuum_laplacian_eigenvalue, discrete_laplacian_eigenvalue,
    smallest_eigenvalues_with_fallback, EigenError, ToleranceSpec,
};
use crate::qmc::SplitMix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("coefficient is unbounded above; the bound-based diagnostics do not apply")]
    Unbounded,
    #[error("coefficient is not uniformly coercive (a_min = {a_min})")]
    NonCoercive { a_min: f64 },
    #[error("summability exponent p = {0} must lie in (1/2, 1)")]
    ExponentOutOfRange(f64),
    #[error("invalid bracket input: {0}")]
    InvalidBracketInput(String),
    #[error("power-law fit needs at least 2 usable points with distinct N, got {usable} ({filtered} filtered)")]
    InsufficientPoints { usable: usize, filtered: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

fn uniform_bounds(model: &CoefficientModel) -> Result<(f64, f64), AnalysisError> {
    let b = model.bounds();
    let a_max = b.max.finite().ok_or(AnalysisError::Unbounded)?;
    if b.min <= 0.0 {
        return Err(AnalysisError::NonCoercive { a_min: b.min });
    }
    Ok((b.min, a_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCondition {
    /// `a_min / a_max`.
    pub ratio: f64,
    /// `chi_1 / chi_2`.
    pub threshold: f64,
    pub holds: bool,
    /// `a_min chi_2 - a_max chi_1`, present exactly when the condition holds.
    pub floor: Option<f64>,
}

/// Checks `a_min / a_max > chi_1 / chi_2`, which forces
/// `lambda_2 - lambda_1 >= a_min chi_2 - a_max chi_1 > 0` for every `y`.
pub fn gap_condition_report(
    model: &CoefficientModel,
    chi1: f64,
    chi2: f64,
) -> Result<GapCondition, AnalysisError> {
    let (a_min, a_max) = uniform_bounds(model)?;
    let ratio = a_min / a_max;
    let threshold = chi1 / chi2;
    let holds = ratio > threshold;
    Ok(GapCondition {
        ratio,
        threshold,
        holds,
        floor: holds.then_some(a_min * chi2 - a_max * chi1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// `[a_min chi_k, a_max chi_k]` for each `chi_k`.
pub fn eigenvalue_brackets(
    a_min: f64,
    a_max: f64,
    chi: &[f64],
) -> Result<Vec<Interval>, AnalysisError> {
    if !(a_min > 0.0 && a_min <= a_max) {
        return Err(AnalysisError::InvalidBracketInput(format!(
            "need 0 < a_min <= a_max, got a_min = {a_min}, a_max = {a_max}"
        )));
    }
    if chi.iter().any(|c| !(*c > 0.0)) || chi.windows(2).any(|w| w[1] < w[0]) {
        return Err(AnalysisError::InvalidBracketInput(
            "chi must be positive and ascending".into(),
        ));
    }
    Ok(chi
        .iter()
        .map(|c| Interval {
            lo: a_min * c,
            hi: a_max * c,
        })
        .collect())
}

/// Lipschitz constant of `lambda_k` in the reparametrised variable
/// `y~_j = alpha_j y_j`, with `alpha_j = ||a_j||^eps + 1/j`, `eps = 1 - p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub p: f64,
    pub k: usize,
    pub epsilon: f64,
    /// Exponent with `alpha` in `l^q`.
    pub q: f64,
    /// `a_max^2 chi_k^2 / (a_min^2 chi_1)`.
    pub prefactor: f64,
    /// `sum_j ||a_j|| / alpha_j`.
    pub weighted_sum: f64,
    pub c_tilde: f64,
    pub alpha_preview: Vec<f64>,
}

const ALPHA_PREVIEW: usize = 5;

pub fn reparametrisation_sequence(model: &CoefficientModel, epsilon: f64) -> Vec<f64> {
    (1..=model.dimension())
        .map(|j| model.term_sup_norm(j).powf(epsilon) + 1.0 / j as f64)
        .collect()
}

pub fn lipschitz_report(
    model: &CoefficientModel,
    p: f64,
    k: usize,
    chi1: f64,
    chik: f64,
) -> Result<LipschitzReport, AnalysisError> {
    if !(p > 0.5 && p < 1.0) {
        return Err(AnalysisError::ExponentOutOfRange(p));
    }
    let (a_min, a_max) = uniform_bounds(model)?;
    let epsilon = 1.0 - p;
    let q = p / epsilon;
    let alpha = reparametrisation_sequence(model, epsilon);
    let weighted_sum: f64 = alpha
        .iter()
        .enumerate()
        .map(|(i, a)| model.term_sup_norm(i + 1) / a)
        .sum();
    let prefactor = (a_max * a_max * chik * chik) / (a_min * a_min * chi1);
    Ok(LipschitzReport {
        p,
        k,
        epsilon,
        q,
        prefactor,
        weighted_sum,
        c_tilde: prefactor * weighted_sum,
        alpha_preview: alpha.into_iter().take(ALPHA_PREVIEW).collect(),
    })
}

/// Least-squares fit of `d = alpha N^-beta` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared residuals in log space.
    pub residual_ss: f64,
    pub used: usize,
    /// Points dropped for non-positive `d` (or `N`).
    pub filtered: usize,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.alpha * n.powf(-self.beta)
    }
}

pub fn power_law_fit(points: &[(f64, f64)]) -> Result<PowerLawFit, AnalysisError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, d)| *n > 0.0 && *d > 0.0 && n.is_finite() && d.is_finite())
        .map(|(n, d)| (n.ln(), d.ln()))
        .collect();
    let filtered = points.len() - logs.len();
    let insufficient = AnalysisError::InsufficientPoints {
        usable: logs.len(),
        filtered,
    };
    if logs.len() < 2 {
        return Err(insufficient);
    }
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(insufficient);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual_ss = logs
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        alpha: intercept.exp(),
        beta: -slope,
        residual_ss,
        used: logs.len(),
        filtered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    /// Largest observed `|lambda_1(y) - lambda_1(y')| / ||y - y'||_inf`.
    pub max_ratio: f64,
    /// `a_max^2 (chi_1^h)^2 / (a_min^2 chi_1^h) sum_j ||a_j||`.
    pub bound: f64,
    pub pairs: usize,
}

/// Samples random parameter pairs and compares the observed Lipschitz
/// quotient of `lambda_1` against the a-priori bound with discrete
/// Laplacian eigenvalues. Pairs with `y = y'` are skipped.
pub fn empirical_lipschitz_check(
    model: &CoefficientModel,
    mesh: &UniformMesh,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzCheck, AnalysisError> {
    let (a_min, a_max) = uniform_bounds(model)?;
    let chi1 = discrete_laplacian_eigenvalue(mesh, 1)?;
    let bound = (a_max * a_max * chi1 * chi1) / (a_min * a_min * chi1) * model.summability(1.0);

    let assembler = StiffnessAssembler::new(*mesh, *model, QuadratureRule::Gauss2)?;
    let mass = assemble_mass(mesh);
    let tol = ToleranceSpec::default();
    let s = model.dimension();
    let mut rng = SplitMix64::new(seed);
    let mut draw = || ParameterPoint::new((0..s).map(|_| rng.next_f64() - 0.5).collect());
    let lambda1 = |y: &ParameterPoint| -> Result<f64, AnalysisError> {
        let (a, nodal) = assembler.assemble(y)?;
        let hint = (
            nodal.lo * chi1 * (1.0 - 1e-6),
            nodal.hi * chi1 * (1.0 + 1e-6),
        );
        let (r, _) = smallest_eigenvalues_with_fallback(&a, &mass, 1, hint, &tol)?;
        Ok(r.values[0])
    };

    let mut max_ratio = 0.0f64;
    let mut used = 0;
    for _ in 0..pairs {
        let y = draw().expect("uniform draws lie in [-1/2, 1/2)");
        let y2 = draw().expect("uniform draws lie in [-1/2, 1/2)");
        let dist = y.sup_distance(&y2);
        if dist == 0.0 {
            continue;
        }
        let ratio = (lambda1(&y)? - lambda1(&y2)?).abs() / dist;
        max_ratio = max_ratio.max(ratio);
        used += 1;
    }
    Ok(LipschitzCheck {
        max_ratio,
        bound,
        pairs: used,
    })
}

/// Everything computable about a configuration without sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub family: Family,
    pub a_min: f64,
    /// `None` when the coefficient is unbounded above.
    pub a_max: Option<f64>,
    pub chi_continuum: [f64; 2],
    pub chi_discrete: [f64; 2],
    /// `chi_1^{-1/2}`, the Poincare constant of `(0, 1)`.
    pub poincare_constant: f64,
    pub brackets_continuum: Option<Vec<Interval>>,
    pub brackets_discrete: Option<Vec<Interval>>,
    pub condition_continuum: Option<GapCondition>,
    pub condition_discrete: Option<GapCondition>,
    /// Continuum verdict; `None` when inapplicable.
    pub condition_holds: Option<bool>,
    pub gap_floor: Option<f64>,
    /// `p -> sum_j ||a_j||^p`.
    pub summability: BTreeMap<String, f64>,
    /// `k -> C~_Lip` with continuum `chi`.
    pub lipschitz: BTreeMap<String, f64>,
    pub lipschitz_detail: Vec<LipschitzReport>,
    pub epsilon: Option<f64>,
    pub q: Option<f64>,
    pub alpha_preview: Vec<f64>,
    pub notes: Vec<String>,
}

pub fn theory_report(
    model: &CoefficientModel,
    mesh: &UniformMesh,
    p: f64,
    summability_exponents: &[f64],
) -> Result<TheoryReport, AnalysisError> {
    let chi_c = [
        continuum_laplacian_eigenvalue(1),
        continuum_laplacian_eigenvalue(2),
    ];
    let chi_h = [
        discrete_laplacian_eigenvalue(mesh, 1)?,
        discrete_laplacian_eigenvalue(mesh, 2)?,
    ];
    let bounds = model.bounds();
    let summability = summability_exponents
        .iter()
        .map(|&e| (format!("{e}"), model.summability(e)))
        .collect();
    let mut notes: Vec<String> = Vec::new();

    let mut report = TheoryReport {
        family: model.family(),
        a_min: bounds.min,
        a_max: bounds.max.finite(),
        chi_continuum: chi_c,
        chi_discrete: chi_h,
        poincare_constant: chi_c[0].powf(-0.5),
        brackets_continuum: None,
        brackets_discrete: None,
        condition_continuum: None,
        condition_discrete: None,
        condition_holds: None,
        gap_floor: None,
        summability,
        lipschitz: BTreeMap::new(),
        lipschitz_detail: Vec::new(),
        epsilon: None,
        q: None,
        alpha_preview: Vec::new(),
        notes: Vec::new(),
    };

    match uniform_bounds(model) {
        Ok((a_min, a_max)) => {
            report.brackets_continuum = Some(eigenvalue_brackets(a_min, a_max, &chi_c)?);
            report.brackets_discrete = Some(eigenvalue_brackets(a_min, a_max, &chi_h)?);
            let cc = gap_condition_report(model, chi_c[0], chi_c[1])?;
            report.condition_holds = Some(cc.holds);
            report.gap_floor = cc.floor;
            report.condition_continuum = Some(cc);
            report.condition_discrete = Some(gap_condition_report(model, chi_h[0], chi_h[1])?);
            for k in 1..=2 {
                let r = lipschitz_report(model, p, k, chi_c[0], chi_c[k - 1])?;
                report.lipschitz.insert(k.to_string(), r.c_tilde);
                report.epsilon = Some(r.epsilon);
                report.q = Some(r.q);
                report.alpha_preview = r.alpha_preview.clone();
                report.lipschitz_detail.push(r);
            }
            if model.family() == Family::Affine {
                notes.push(
                    "a_min and a_max come from the triangle inequality and are not sharp".into(),
                );
            }
        }
        Err(AnalysisError::Unbounded) => {
            notes.push(
                "coefficient is unbounded above: brackets, gap condition and Lipschitz constants are inapplicable"
                    .into(),
            );
        }
        Err(AnalysisError::NonCoercive { a_min }) => {
            notes.push(format!(
                "a_min = {a_min} is not positive: the model is not uniformly coercive"
            ));
        }
        Err(e) => return Err(e),
    }
    report.notes = notes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn affine(c0: f64, s: usize) -> CoefficientModel {
        CoefficientModel::affine(1.0, c0, s).unwrap()
    }

    #[test]
    fn condition_holds_for_half_amplitude() {
        let g = gap_condition_report(&affine(0.5, 100), PI * PI, 4.0 * PI * PI).unwrap();
        assert!(g.holds);
        assert!((g.ratio - 0.419_702_370_354_156_4).abs() < 1e-12);
        assert!((g.floor.unwrap() - 9.438_007_832_049_257).abs() < 1e-9);
    }

    #[test]
    fn condition_fails_for_unit_amplitude() {
        let g = gap_condition_report(&affine(1.0, 100), PI * PI, 4.0 * PI * PI).unwrap();
        assert!(!g.holds);
        assert!(g.floor.is_none());
        assert!((g.ratio - 0.1004).abs() < 1e-4);
    }

    #[test]
    fn condition_for_constant_coefficient() {
        let g = gap_condition_report(&affine(0.0, 100), PI * PI, 4.0 * PI * PI).unwrap();
        assert!(g.holds);
        assert!((g.floor.unwrap() - 3.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn condition_rejects_lognormal() {
        let m = CoefficientModel::log_normal(0.18, 1.0, 100).unwrap();
        assert_eq!(
            gap_condition_report(&m, 1.0, 4.0),
            Err(AnalysisError::Unbounded)
        );
    }

    #[test]
    fn brackets() {
        let b = eigenvalue_brackets(0.182_508_049_907_553_87, 1.817_491_950_092_446, &[PI * PI])
            .unwrap();
        assert!((b[0].lo - 1.801).abs() < 1e-3);
        assert!((b[0].hi - 17.94).abs() < 1e-2);
        let b = eigenvalue_brackets(1.0, 1.0, &[2.0, 3.0]).unwrap();
        assert_eq!((b[1].lo, b[1].hi), (3.0, 3.0));
        assert!(eigenvalue_brackets(0.0, 1.0, &[1.0]).is_err());
        assert!(eigenvalue_brackets(1.0, 2.0, &[3.0, 1.0]).is_err());
    }

    #[test]
    fn lipschitz_single_term_limit() {
        let r = lipschitz_report(&affine(1.0, 1), 0.500_001, 1, PI * PI, PI * PI).unwrap();
        assert!((r.alpha_preview[0] - 2.0).abs() < 1e-12);
        assert!((r.weighted_sum - 0.5).abs() < 1e-12);
        assert!((r.c_tilde - 9.0 * PI * PI * 0.5).abs() < 1e-9);
        assert!((r.c_tilde - 44.41).abs() < 1e-2);
    }

    #[test]
    fn lipschitz_constant_coefficient_is_zero() {
        let r = lipschitz_report(&affine(0.0, 100), 0.75, 2, PI * PI, 4.0 * PI * PI).unwrap();
        assert_eq!(r.c_tilde, 0.0);
    }

    #[test]
    fn lipschitz_input_validation() {
        assert_eq!(
            lipschitz_report(&affine(1.0, 10), 0.5, 1, 1.0, 1.0),
            Err(AnalysisError::ExponentOutOfRange(0.5))
        );
        assert!(lipschitz_report(&affine(1.0, 10), 1.0, 1, 1.0, 1.0).is_err());
        assert!(matches!(
            lipschitz_report(&affine(1.3, 100), 0.75, 1, 1.0, 1.0),
            Err(AnalysisError::NonCoercive { .. })
        ));
    }

    #[test]
    fn fit_exact_power_law() {
        let pts: Vec<_> = [2.0f64, 4.0, 8.0]
            .iter()
            .map(|&n| (n, 3.0 * n.powf(-0.5)))
            .collect();
        let f = power_law_fit(&pts).unwrap();
        assert!((f.alpha - 3.0).abs() < 1e-10);
        assert!((f.beta - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fit_flat_data() {
        let f = power_law_fit(&[(1.0, 5.0), (2.0, 5.0)]).unwrap();
        assert!(f.beta.abs() < 1e-15);
        assert!((f.alpha - 5.0).abs() < 1e-14);
    }

    #[test]
    fn fit_filters_and_errors() {
        let f = power_law_fit(&[(1.0, 4.0), (2.0, 2.0), (4.0, 0.0)]).unwrap();
        assert_eq!((f.used, f.filtered), (2, 1));
        assert!((f.beta - 1.0).abs() < 1e-12);
        assert_eq!(
            power_law_fit(&[(1.0, 1.0), (2.0, 0.0)]),
            Err(AnalysisError::InsufficientPoints {
                usable: 1,
                filtered: 1
            })
        );
        assert!(power_law_fit(&[(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn theory_report_lognormal_is_partial() {
        let m = CoefficientModel::log_normal(0.0, 1.0, 100).unwrap();
        let mesh = UniformMesh::new(64).unwrap();
        let r = theory_report(&m, &mesh, 0.75, &[0.5, 1.0]).unwrap();
        assert_eq!(r.condition_holds, None);
        assert!(r.brackets_continuum.is_none());
        assert!(r.lipschitz.is_empty());
        assert_eq!(r.a_max, None);
        assert_eq!(r.summability.len(), 2);
    }

    #[test]
    fn theory_report_affine() {
        let mesh = UniformMesh::new(64).unwrap();
        let r = theory_report(&affine(0.5, 100), &mesh, 0.75, &[1.0]).unwrap();
        assert_eq!(r.condition_holds, Some(true));
        assert!((r.gap_floor.unwrap() - 9.44).abs() < 5e-3);
        let disc = r.condition_discrete.unwrap();
        assert!((disc.floor.unwrap() - 9.453_969_671_969_972).abs() < 1e-9);
        assert_eq!(r.lipschitz.len(), 2);
        assert!(r.lipschitz["2"] > r.lipschitz["1"]);
        assert_eq!(r.epsilon, Some(0.25));
        assert_eq!(r.q, Some(3.0));
    }
}
