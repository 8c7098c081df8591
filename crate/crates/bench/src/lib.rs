//! Shared fixtures for the kernel benchmarks.

use specgap::qmc::DEFAULT_KOROBOV_MULTIPLIER;
use specgap::survey::GapSampler;
pub use specgap::{
    assemble_mass, korobov_vector, CoefficientModel, LatticeSequence, ParameterPoint,
    QuadratureRule, ShiftSpec, TridiagonalSymmetric, UniformMesh,
};
use specgap::{StiffnessAssembler, ToleranceSpec};

/// Dimension of the truncated parameter space in every fixture.
pub const DIMENSION: usize = 100;

/// Everything needed to evaluate one gap on an `n`-cell mesh.
pub struct Fixture {
    pub mesh: UniformMesh,
    pub model: CoefficientModel,
    pub tol: ToleranceSpec,
    pub assembler: StiffnessAssembler,
    pub sampler: GapSampler,
    pub lattice: LatticeSequence,
    pub y: ParameterPoint,
    pub stiffness: TridiagonalSymmetric,
    pub mass: TridiagonalSymmetric,
}

impl Fixture {
    /// Affine coefficient with `c0 = 1` and a seeded 2^16-point lattice.
    pub fn affine(cells: usize) -> Self {
        Self::build(
            cells,
            CoefficientModel::affine(1.0, 1.0, DIMENSION).expect("valid model"),
        )
    }

    /// Lognormal coefficient with `a_* = 0.18`, `c0 = 1`.
    pub fn log_normal(cells: usize) -> Self {
        Self::build(
            cells,
            CoefficientModel::log_normal(0.18, 1.0, DIMENSION).expect("valid model"),
        )
    }

    fn build(cells: usize, model: CoefficientModel) -> Self {
        let mesh = UniformMesh::new(cells).expect("valid mesh");
        let tol = ToleranceSpec::default();
        let z = korobov_vector(DEFAULT_KOROBOV_MULTIPLIER, DIMENSION, 16);
        let lattice = LatticeSequence::new(z, 16, ShiftSpec::Seeded(1)).expect("valid lattice");
        let y = lattice.lattice_point(12_345).expect("index in range");
        let assembler =
            StiffnessAssembler::new(mesh, model, QuadratureRule::Gauss2).expect("coercive model");
        let (stiffness, _) = assembler.assemble(&y).expect("finite coefficient");
        let sampler =
            GapSampler::new(model, mesh, QuadratureRule::Gauss2, tol).expect("valid sampler");
        Self {
            mass: assemble_mass(&mesh),
            mesh,
            model,
            tol,
            assembler,
            sampler,
            lattice,
            y,
            stiffness,
        }
    }

    /// A bracket containing the two smallest eigenvalues at `self.y`.
    pub fn bracket(&self) -> (f64, f64) {
        specgap::eigensolve::pencil_bounds(&self.stiffness, &self.mass).expect("matching sizes")
    }
}
