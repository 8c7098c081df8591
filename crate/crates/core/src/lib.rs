//! Spectral-gap surveys for a one-dimensional elliptic eigenproblem with a
//! parametrised random coefficient.
//!
//! The pipeline is: a [`CoefficientModel`] evaluated at a lattice point
//! ([`LatticeSequence`]), assembled into P1 finite-element matrices
//! ([`StiffnessAssembler`]), solved for the two smallest generalised
//! eigenvalues by Sturm-count bisection ([`smallest_eigenvalues`]), and
//! reduced to prefix minima of the gap ([`run_survey`]). [`analysis`] holds
//! the a priori bounds the survey is checked against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coefficient;
pub mod discretization;
pub mod eigensolve;
pub mod qmc;
pub mod survey;

pub use analysis::{
    eigenvalue_brackets, gap_condition_report, power_law_fit, theory_report, AnalysisError,
    GapCondition, Interval, PowerLawFit, TheoryReport,
};
pub use coefficient::{
    inverse_normal_cdf, CoefficientBounds, CoefficientError, CoefficientModel, CoefficientSpec,
    Family, ParameterPoint, UpperBound,
};
pub use discretization::{
    assemble_mass, DiscretizationError, QuadratureRule, StiffnessAssembler, TridiagonalSymmetric,
    UniformMesh,
};
pub use eigensolve::{
    continuum_laplacian_eigenvalue, discrete_laplacian_eigenvalue, inertia, inverse_iteration,
    smallest_eigenvalues, EigenError, EigenResult, ToleranceSpec,
};
pub use qmc::{
    korobov_vector, parse_generating_vector, LatticeSequence, QmcError, ShiftSpec, SplitMix64,
};
pub use survey::{
    read_levels_csv, run_survey, sample_gap, write_levels_csv, FailPolicy, GapSample, LevelRecord,
    SurveyConfig, SurveyError, SurveyOptions, SurveyResult,
};
