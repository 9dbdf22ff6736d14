//! Legendre-Galerkin spectral solver for the degenerate nonlocal parabolic
//! equation of diffusive energy balance models.
//!
//! The spatial discretization expands the solution in even Legendre
//! polynomials on (0, 1), which diagonalize the degenerate diffusion operator.
//! Time stepping uses a two-step theta scheme whose nonlinear coefficients are
//! extrapolated from the two previous levels, so every step is linear. Memory
//! terms are discretized by product integration on the lag grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basis;
pub mod error;
pub mod kernels;
pub mod problem;
pub mod solver;

pub use analysis::{
    eoc, l2_error, modal_oracle_error, spatial_study, temporal_study, ConvergenceReport, Eoc,
    ModalDiscrepancy, SpatialStudy, StudyKind, StudyRow, TemporalStudy,
};
pub use basis::{
    basis_eval, eigenvalue, gauss_rule, l2_norm, project, synthesize, BasisSpec, BasisTable,
    Derivative, QuadratureRule, SpectralCoeffs,
};
pub use error::{Error, Result};
pub use kernels::{
    apply_memory, kernel_eval, kernel_integral, rectangle_weights, trapezoid_weights, KernelSpec,
    LagWeights, MemoryRule,
};
pub use problem::{
    canonical_case, to_transformed, untransform, CaseId, Diffusivity, PhysicalModel, ProblemSpec,
};
pub use solver::{
    assemble_load, assemble_stiffness, extrapolate, initialize, solve, CorrectorForm,
    HistoryBuffer, SchemeConfig, Solver, StiffnessMatrix, Trajectory,
};
