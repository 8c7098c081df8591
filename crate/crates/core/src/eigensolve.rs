//! Smallest eigenvalues of symmetric tridiagonal pencils `A u = lambda M u`
//! with `M` positive definite.
//!
//! Eigenvalues are located by bisection on the Sylvester inertia of
//! `A - sigma M`; eigenvectors, when needed, by shifted inverse iteration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{TridiagonalSymmetric, UniformMesh};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("pencil size mismatch: A is {a}x{a}, M is {m}x{m}")]
    SizeMismatch { a: usize, m: usize },
    #[error("requested {requested} eigenvalues of a {size}x{size} pencil")]
    TooMany { requested: usize, size: usize },
    #[error(
        "bracket [{lo}, {hi}] holds eigenvalues {count_lo}..{count_hi}, need the first {needed}"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        count_lo: usize,
        count_hi: usize,
        needed: usize,
    },
    #[error("exact zero pivot at sigma = {sigma} persisted after {retries} nudges")]
    ZeroPivot { sigma: f64, retries: usize },
    #[error("bisection for eigenvalue {index} did not converge in {iterations} steps")]
    NoConvergence { index: usize, iterations: usize },
    #[error("inverse iteration stagnated after {iterations} steps (residual {residual:e}); eigenvalue may be clustered")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("inverse iteration reached {iterations} steps with residual {residual:e}")]
    InverseIterationLimit { iterations: usize, residual: f64 },
    #[error("eigenvalue index {k} outside 1..={max}")]
    IndexOutOfRange { k: usize, max: usize },
    #[error("mass matrix is not provably positive definite")]
    IndefiniteMass,
}

/// Stopping rules for the eigensolver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_bisections: usize,
    /// Eigenvector residual target, relative to `||A||_inf`.
    pub residual_factor: f64,
    pub max_inverse_iterations: usize,
    pub stagnation_window: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_bisections: 200,
            residual_factor: 1e-8,
            max_inverse_iterations: 50,
            stagnation_window: 10,
        }
    }
}

impl ToleranceSpec {
    fn width_target(&self, midpoint: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * midpoint.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Bisection steps spent on each eigenvalue.
    pub iterations: Vec<usize>,
    /// Two consecutive eigenvalues are closer than the bisection tolerance.
    pub clustered: bool,
    /// `M`-normalised eigenvectors, when requested.
    pub vectors: Option<Vec<Vec<f64>>>,
    /// `||A u - lambda M u||_2 / ||u||_M` per eigenpair, when requested.
    pub residuals: Option<Vec<f64>>,
}

/// Relative downward nudge for a shift that hits an exact zero pivot.
const NUDGE: f64 = 4.0 * f64::EPSILON;
const MAX_NUDGES: usize = 3;

fn check_sizes(a: &TridiagonalSymmetric, m: &TridiagonalSymmetric) -> Result<(), EigenError> {
    if a.len() != m.len() {
        return Err(EigenError::SizeMismatch {
            a: a.len(),
            m: m.len(),
        });
    }
    Ok(())
}

/// Negative-pivot count of the `LDL^T` factorisation of `A - sigma M`, or
/// `None` on an exact zero pivot.
fn negative_pivots(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    sigma: f64,
) -> Option<usize> {
    let (ad, ao) = (a.diag(), a.off());
    let (md, mo) = (m.diag(), m.off());
    let mut count = 0;
    let mut d = ad[0] - sigma * md[0];
    if d == 0.0 {
        return None;
    }
    if d < 0.0 {
        count += 1;
    }
    for i in 1..ad.len() {
        let s = ao[i - 1] - sigma * mo[i - 1];
        d = (ad[i] - sigma * md[i]) - s * s / d;
        if d == 0.0 {
            return None;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    Some(count)
}

/// Size of one downward nudge: `4 eps` relative to the larger of `|sigma|`
/// and the pencil's diagonal scale `max_i |a_ii| / m_ii`. Relative to
/// `|sigma|` alone the step can vanish in `a_ii - sigma m_ii`.
fn nudge_step(a: &TridiagonalSymmetric, m: &TridiagonalSymmetric, sigma: f64) -> f64 {
    let diagonal_scale = a
        .diag()
        .iter()
        .zip(m.diag())
        .map(|(x, y)| x.abs() / y.abs())
        .fold(0.0f64, f64::max);
    NUDGE * sigma.abs().max(diagonal_scale).max(f64::MIN_POSITIVE)
}

/// Counts the eigenvalues of `(A, M)` strictly below `sigma`.
///
/// On an exact zero pivot the shift is moved down by `4 eps` times the
/// pencil scale (at most three times) and the count retried, so a shift
/// sitting exactly on an eigenvalue still counts only the eigenvalues
/// strictly below it, reproducibly on every platform.
pub fn inertia(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    sigma: f64,
) -> Result<usize, EigenError> {
    check_sizes(a, m)?;
    inertia_unchecked(a, m, sigma)
}

fn inertia_unchecked(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    sigma: f64,
) -> Result<usize, EigenError> {
    if let Some(c) = negative_pivots(a, m, sigma) {
        return Ok(c);
    }
    let step = nudge_step(a, m, sigma);
    for k in 1..=MAX_NUDGES {
        if let Some(c) = negative_pivots(a, m, sigma - k as f64 * step) {
            return Ok(c);
        }
    }
    Err(EigenError::ZeroPivot {
        sigma,
        retries: MAX_NUDGES,
    })
}

/// Enclosure of the pencil spectrum from Gershgorin discs of `A` and `M`.
///
/// Uses `lambda = v'Av / v'Mv` with `v'Av` in `[a_lo, a_hi] |v|^2` and
/// `v'Mv` in `[m_lo, m_hi] |v|^2`. Fails if `m_lo <= 0`.
pub fn pencil_bounds(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
) -> Result<(f64, f64), EigenError> {
    check_sizes(a, m)?;
    let (a_lo, a_hi) = a.gershgorin();
    let (m_lo, m_hi) = m.gershgorin();
    if !(m_lo > 0.0) {
        return Err(EigenError::IndefiniteMass);
    }
    let lo = if a_lo >= 0.0 {
        a_lo / m_hi
    } else {
        a_lo / m_lo
    };
    let hi = if a_hi >= 0.0 {
        a_hi / m_lo
    } else {
        a_hi / m_hi
    };
    // Widen slightly so neither end is an eigenvalue.
    let pad = 1e-8
        * (hi - lo)
            .abs()
            .max(lo.abs())
            .max(hi.abs())
            .max(f64::MIN_POSITIVE);
    Ok((lo - pad, hi + pad))
}

/// The `k` smallest eigenvalues of `(A, M)` by bisection inside `bracket`.
///
/// The bracket must have no eigenvalue below its lower end and at least
/// `k` below its upper end.
pub fn smallest_eigenvalues(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    k: usize,
    bracket: (f64, f64),
    tol: &ToleranceSpec,
) -> Result<EigenResult, EigenError> {
    check_sizes(a, m)?;
    if k == 0 || k > a.len() {
        return Err(EigenError::TooMany {
            requested: k,
            size: a.len(),
        });
    }
    let (lo, hi) = bracket;
    let count_lo = inertia_unchecked(a, m, lo)?;
    let count_hi = inertia_unchecked(a, m, hi)?;
    if !(lo < hi) || count_lo != 0 || count_hi < k {
        return Err(EigenError::Bracket {
            lo,
            hi,
            count_lo,
            count_hi,
            needed: k,
        });
    }

    let mut lower = vec![lo; k];
    let mut upper = vec![hi; k];
    let mut iterations = vec![0usize; k];
    for i in 0..k {
        if i > 0 {
            lower[i] = lower[i].max(lower[i - 1]);
        }
        loop {
            let mid = 0.5 * (lower[i] + upper[i]);
            if upper[i] - lower[i] <= tol.width_target(mid) || mid <= lower[i] || mid >= upper[i] {
                break;
            }
            if iterations[i] >= tol.max_bisections {
                return Err(EigenError::NoConvergence {
                    index: i + 1,
                    iterations: iterations[i],
                });
            }
            iterations[i] += 1;
            let below = inertia_unchecked(a, m, mid)?;
            // Every count refines all remaining intervals at once.
            for j in i..k {
                if below > j {
                    upper[j] = upper[j].min(mid);
                } else {
                    lower[j] = lower[j].max(mid);
                }
            }
        }
    }
    let mut values: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    // Coincident eigenvalues can leave midpoints a rounding step out of order.
    for i in 1..k {
        values[i] = values[i].max(values[i - 1]);
    }
    let clustered = values
        .windows(2)
        .any(|w| w[1] - w[0] <= tol.width_target(w[1]));
    Ok(EigenResult {
        values,
        iterations,
        clustered,
        vectors: None,
        residuals: None,
    })
}

/// [`smallest_eigenvalues`] with a Gershgorin fallback when `hint` turns
/// out not to enclose the wanted eigenvalues. The flag reports whether the
/// fallback was used.
pub fn smallest_eigenvalues_with_fallback(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    k: usize,
    hint: (f64, f64),
    tol: &ToleranceSpec,
) -> Result<(EigenResult, bool), EigenError> {
    match smallest_eigenvalues(a, m, k, hint, tol) {
        Ok(r) => Ok((r, false)),
        Err(EigenError::Bracket { .. }) => {
            let wide = pencil_bounds(a, m)?;
            smallest_eigenvalues(a, m, k, wide, tol).map(|r| (r, true))
        }
        Err(e) => Err(e),
    }
}

/// LU factorisation with partial pivoting of a general tridiagonal matrix
/// (the `?gttrf` scheme: one extra super-diagonal from row swaps).
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Factors `A - sigma M`; exact zero pivots are replaced by
    /// `eps * ||A - sigma M||`, which is what makes a shift at an
    /// eigenvalue usable for inverse iteration.
    fn shifted(a: &TridiagonalSymmetric, m: &TridiagonalSymmetric, sigma: f64) -> Self {
        let n = a.len();
        let mut d: Vec<f64> = a
            .diag()
            .iter()
            .zip(m.diag())
            .map(|(x, y)| x - sigma * y)
            .collect();
        let off: Vec<f64> = a
            .off()
            .iter()
            .zip(m.off())
            .map(|(x, y)| x - sigma * y)
            .collect();
        let mut dl = off.clone();
        let mut du = off;
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        let scale = d
            .iter()
            .chain(&dl)
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;

        for i in 0..n.saturating_sub(1) {
            if d[i] == 0.0 && dl[i] == 0.0 {
                d[i] = tiny;
            }
            if d[i].abs() >= dl[i].abs() {
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn m_norm(m: &TridiagonalSymmetric, v: &[f64]) -> f64 {
    m.quadratic_form(v).max(0.0).sqrt()
}

fn residual_norm(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    lambda: f64,
    u: &[f64],
) -> f64 {
    let au = a.matvec(u);
    let mu = m.matvec(u);
    au.iter()
        .zip(&mu)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvector {
    /// `M`-normalised, first non-zero component positive.
    pub vector: Vec<f64>,
    /// `||A u - lambda_hat M u||_2`.
    pub residual: f64,
    pub iterations: usize,
}

/// Shifted inverse iteration for the eigenvector closest to `lambda_hat`.
///
/// Stops once the residual drops below `residual_factor * ||A||_inf`.
pub fn inverse_iteration(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    lambda_hat: f64,
    tol: &ToleranceSpec,
) -> Result<Eigenvector, EigenError> {
    check_sizes(a, m)?;
    let n = a.len();
    let target = tol.residual_factor * a.norm_inf();

    // Deterministic start with no special symmetry, so it is never
    // M-orthogonal to a sine mode.
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut u: Vec<f64> = (0..n)
        .map(|i| 0.5 + ((i + 1) as f64 * GOLDEN).fract())
        .collect();
    let norm = m_norm(m, &u);
    u.iter_mut().for_each(|v| *v /= norm);

    let lu = TridiagonalLu::shifted(a, m, lambda_hat);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    loop {
        let residual = residual_norm(a, m, lambda_hat, &u);
        if residual <= target {
            fix_sign(&mut u);
            return Ok(Eigenvector {
                vector: u,
                residual,
                iterations,
            });
        }
        if residual < best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tol.stagnation_window {
                return Err(EigenError::Stagnation {
                    iterations,
                    residual,
                });
            }
        }
        if iterations >= tol.max_inverse_iterations {
            return Err(EigenError::InverseIterationLimit {
                iterations,
                residual,
            });
        }
        let mut w = m.matvec(&u);
        lu.solve(&mut w);
        let norm = m_norm(m, &w);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EigenError::Stagnation {
                iterations,
                residual,
            });
        }
        u = w.into_iter().map(|v| v / norm).collect();
        iterations += 1;
    }
}

fn fix_sign(u: &mut [f64]) {
    if let Some(first) = u.iter().find(|v| **v != 0.0) {
        if *first < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Eigenvalues by bisection, then eigenvectors by inverse iteration.
pub fn smallest_eigenpairs(
    a: &TridiagonalSymmetric,
    m: &TridiagonalSymmetric,
    k: usize,
    bracket: (f64, f64),
    tol: &ToleranceSpec,
) -> Result<EigenResult, EigenError> {
    let mut result = smallest_eigenvalues(a, m, k, bracket, tol)?;
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &lambda in &result.values {
        let ev = inverse_iteration(a, m, lambda, tol)?;
        residuals.push(ev.residual / m_norm(m, &ev.vector));
        vectors.push(ev.vector);
    }
    result.vectors = Some(vectors);
    result.residuals = Some(residuals);
    Ok(result)
}

/// `k`-th eigenvalue of the P1 Dirichlet Laplacian pencil on a uniform
/// mesh: `(6 / h^2) (1 - cos(k pi h)) / (2 + cos(k pi h))`.
pub fn discrete_laplacian_eigenvalue(mesh: &UniformMesh, k: usize) -> Result<f64, EigenError> {
    let max = mesh.dof();
    if k == 0 || k > max {
        return Err(EigenError::IndexOutOfRange { k, max });
    }
    let h = mesh.h();
    let c = (k as f64 * PI * h).cos();
    Ok(6.0 / (h * h) * (1.0 - c) / (2.0 + c))
}

/// `k`-th Dirichlet Laplacian eigenvalue on `(0, 1)`: `(k pi)^2`.
pub fn continuum_laplacian_eigenvalue(k: usize) -> f64 {
    let t = k as f64 * PI;
    t * t
}
