//! P1 finite elements on a uniform mesh of `(0, 1)` with homogeneous
//! Dirichlet conditions.
//!
//! Boundary nodes are eliminated, so an `n`-cell mesh yields `n - 1`
//! unknowns and both the stiffness and mass matrices are symmetric
//! tridiagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficient::{CoefficientError, CoefficientModel, Family, ParameterPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("mesh needs at least 2 cells, got {0}")]
    InvalidMesh(usize),
    #[error("tridiagonal shape mismatch: {diag} diagonal entries, {off} off-diagonal entries")]
    Shape { diag: usize, off: usize },
    #[error("affine model is not uniformly coercive (a_min = {a_min})")]
    NonCoerciveModel { a_min: f64 },
    #[error("coefficient is {value} at quadrature node x = {x}; realisation is not coercive")]
    Coercivity { x: f64, value: f64 },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// Uniform mesh of `(0, 1)` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UniformMesh {
    n: usize,
}

impl UniformMesh {
    pub fn new(cells: usize) -> Result<Self, DiscretizationError> {
        if cells < 2 {
            return Err(DiscretizationError::InvalidMesh(cells));
        }
        Ok(Self { n: cells })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of interior nodes (degrees of freedom).
    pub fn dof(&self) -> usize {
        self.n - 1
    }

    /// Coordinate of node `i` for `0 <= i <= n`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }
}

/// Symmetric tridiagonal matrix stored as its diagonal and first
/// off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalSymmetric {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl TridiagonalSymmetric {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, DiscretizationError> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(DiscretizationError::Shape {
                diag: diag.len(),
                off: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![1.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| d * factor).collect(),
            off: self.off.iter().map(|o| o * factor).collect(),
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(v.len(), n, "vector length must match matrix size");
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `v^T A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.len(), "vector length must match matrix size");
        let d: f64 = self.diag.iter().zip(v).map(|(d, x)| d * x * x).sum();
        let o: f64 = self
            .off
            .iter()
            .zip(v.windows(2))
            .map(|(o, w)| o * w[0] * w[1])
            .sum();
        d + 2.0 * o
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut row = self.diag[i].abs();
                if i > 0 {
                    row += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    row += self.off[i].abs();
                }
                row
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Dense row-major copy, mainly for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            out[i][i] = self.diag[i];
            if i + 1 < n {
                out[i][i + 1] = self.off[i];
                out[i + 1][i] = self.off[i];
            }
        }
        out
    }
}

/// Element quadrature rule on the reference interval `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Midpoint,
    #[default]
    Gauss2,
    Gauss3,
}

impl QuadratureRule {
    /// Nodes and weights on `[0, 1]`; weights sum to one.
    pub fn reference(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            QuadratureRule::Midpoint => (vec![0.5], vec![1.0]),
            QuadratureRule::Gauss2 => {
                let d = 0.5 / 3f64.sqrt();
                (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
            }
            QuadratureRule::Gauss3 => {
                let d = 0.5 * 0.6f64.sqrt();
                (
                    vec![0.5 - d, 0.5, 0.5 + d],
                    vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                )
            }
        }
    }

    pub fn points(&self) -> usize {
        self.reference().0.len()
    }
}

/// Interior-node P1 mass matrix: `2h/3` on the diagonal, `h/6` off it.
pub fn assemble_mass(mesh: &UniformMesh) -> TridiagonalSymmetric {
    let h = mesh.h();
    let m = mesh.dof();
    TridiagonalSymmetric {
        diag: vec![2.0 * h / 3.0; m],
        off: vec![h / 6.0; m - 1],
    }
}

/// Interior-node stiffness matrix from per-element coefficient averages:
/// `diag_i = (abar_i + abar_{i+1}) / h`, `off_i = -abar_{i+1} / h`.
pub fn stiffness_from_element_averages(
    mesh: &UniformMesh,
    averages: &[f64],
) -> TridiagonalSymmetric {
    assert_eq!(averages.len(), mesh.cells(), "one average per element");
    let inv_h = mesh.cells() as f64;
    let m = mesh.dof();
    let diag = (0..m)
        .map(|i| (averages[i] + averages[i + 1]) * inv_h)
        .collect();
    let off = (0..m - 1).map(|i| -averages[i + 1] * inv_h).collect();
    TridiagonalSymmetric { diag, off }
}

/// Stiffness of the constant coefficient `a = 1` (the discrete Dirichlet
/// Laplacian in weak form).
pub fn laplacian_stiffness(mesh: &UniformMesh) -> TridiagonalSymmetric {
    stiffness_from_element_averages(mesh, &vec![1.0; mesh.cells()])
}

/// Coefficient values at every quadrature node of a realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalCoefficient {
    /// Values laid out element by element, `rule.points()` per element.
    pub values: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

/// Precomputed quadrature nodes and basis values for repeated assembly on
/// one mesh. Building it once per survey removes all trigonometric work
/// from the per-sample path.
#[derive(Debug, Clone)]
pub struct StiffnessAssembler {
    mesh: UniformMesh,
    model: CoefficientModel,
    weights: Vec<f64>,
    nodes: Vec<f64>,
    // basis[node * s + (j - 1)] = a_j(x_node)
    basis: Vec<f64>,
}

impl StiffnessAssembler {
    /// Fails for affine models whose analytic lower bound is not positive.
    pub fn new(
        mesh: UniformMesh,
        model: CoefficientModel,
        rule: QuadratureRule,
    ) -> Result<Self, DiscretizationError> {
        if model.family() == Family::Affine {
            let a_min = model.bounds().min;
            if a_min <= 0.0 {
                return Err(DiscretizationError::NonCoerciveModel { a_min });
            }
        }
        let (ref_nodes, weights) = rule.reference();
        let h = mesh.h();
        let nodes: Vec<f64> = (0..mesh.cells())
            .flat_map(|e| {
                let left = mesh.node(e);
                ref_nodes.iter().map(move |t| left + t * h)
            })
            .collect();
        let s = model.dimension();
        let mut basis = Vec::with_capacity(nodes.len() * s);
        for &x in &nodes {
            basis.extend((1..=s).map(|j| model.term(j, x)));
        }
        Ok(Self {
            mesh,
            model,
            weights,
            nodes,
            basis,
        })
    }

    pub fn mesh(&self) -> &UniformMesh {
        &self.mesh
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn quadrature_nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Evaluates the coefficient at every quadrature node, failing on the
    /// first non-positive (or non-finite) value.
    pub fn nodal_coefficient(
        &self,
        y: &ParameterPoint,
    ) -> Result<NodalCoefficient, DiscretizationError> {
        let w = self.model.parameter_weights(y)?;
        let s = w.len();
        let mut values = Vec::with_capacity(self.nodes.len());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (q, &x) in self.nodes.iter().enumerate() {
            let row = &self.basis[q * s..(q + 1) * s];
            let sum: f64 = row.iter().zip(&w).map(|(b, wj)| b * wj).sum();
            let value = self.model.combine(sum);
            if !(value > 0.0 && value.is_finite()) {
                return Err(DiscretizationError::Coercivity { x, value });
            }
            lo = lo.min(value);
            hi = hi.max(value);
            values.push(value);
        }
        Ok(NodalCoefficient { values, lo, hi })
    }

    pub fn element_averages(&self, nodal: &NodalCoefficient) -> Vec<f64> {
        nodal
            .values
            .chunks_exact(self.weights.len())
            .map(|c| c.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
            .collect()
    }

    /// Assembles `A(y)` and returns it with the realised coefficient range
    /// over the quadrature nodes.
    pub fn assemble(
        &self,
        y: &ParameterPoint,
    ) -> Result<(TridiagonalSymmetric, NodalCoefficient), DiscretizationError> {
        let nodal = self.nodal_coefficient(y)?;
        let averages = self.element_averages(&nodal);
        Ok((
            stiffness_from_element_averages(&self.mesh, &averages),
            nodal,
        ))
    }
}

pub fn assemble_stiffness(
    mesh: &UniformMesh,
    model: &CoefficientModel,
    y: &ParameterPoint,
    rule: QuadratureRule,
) -> Result<TridiagonalSymmetric, DiscretizationError> {
    StiffnessAssembler::new(*mesh, *model, rule)?
        .assemble(y)
        .map(|(a, _)| a)
}

/// Minimum and maximum of `a(., y)` over all quadrature nodes.
pub fn coefficient_range_on_quadrature(
    mesh: &UniformMesh,
    model: &CoefficientModel,
    y: &ParameterPoint,
    rule: QuadratureRule,
) -> Result<(f64, f64), DiscretizationError> {
    let nodal = StiffnessAssembler::new(*mesh, *model, rule)?.nodal_coefficient(y)?;
    Ok((nodal.lo, nodal.hi))
}
