//! ADMM for standard-form semidefinite programs, with the local analysis
//! tooling around it: linearized operators, an iterative-elimination PSD
//! projection, and strict-complementarity / nondegeneracy / rate diagnostics.
//!
//! The problem pair is
//!
//! ```text
//!   min <C, X>  s.t.  A X = b, X ⪰ 0
//!   max bᵀy     s.t.  A*y + S = C, S ⪰ 0
//! ```
//!
//! and the solver iterates on `Z = X − σS`.

pub mod admm;
pub mod diagnostics;
pub mod error;
pub mod error_bound;
pub mod linalg;
pub mod linearization;
pub mod problem;
pub mod sdpa;

pub use admm::{
    residuals, solve, solve_with, step_fixed_point, step_three, z_difference_identity, AdmmMap,
    Init, IterationRecord, Residuals, SolveOutput, SolverConfig, SolverState, Status,
};
pub use diagnostics::{
    analyze_run, backward_error_terms, face_projections, nd_check, rank_trace, rate_fit,
    rate_fit_range, refine_limit, sc_check, tail_window, BackwardErrorTerms,
    ComplementarityReport, FaceNorms, FaceSplit, NondegeneracyReport, RateFit, RunAnalysis,
};
pub use error::{Result, SdpError};
pub use error_bound::{
    eb_scan, eb_scan_family, eliminate_step, first_sylvester_deviation, run_elimination, EbReport,
    EliminationState,
};
pub use linalg::{eig_sym, psd_project, skew_exp, smat, svec, sylvester_solve, SpectralDecomp, SymMat};
pub use linearization::{
    apply_m, apply_m_adjoint, apply_m_tilde, build_directional, build_omega,
    directional_derivative, energy_m, energy_m_tilde, fix_basis, op_norm_m,
    op_norm_m_minus_fix, psi_residual, rho_nd_estimate, DirectionalStructure, FixSubspace,
    OmegaStructure,
};
pub use problem::{
    generate_maxcut, generate_planted, ConstraintKernel, Degeneracy, PlantedCertificate,
    PlantedSpec, SdpProblem,
};
