//! Block-model parameterizations, sampling, and the finite-matrix theory.

pub mod law;
pub mod model;
pub mod theory;

pub use law::{LawFamily, ParamLaw};
pub use model::{
    sample_rpsbm, sample_rpsbm_batch, sample_rpsbm_detailed, sample_sbm, sample_sbm_batch,
    ParamDraw, RpsbmModel, SbmParams,
};
pub use theory::{
    build_theory_matrices, eigenfunction_values, expected_eigenvalue, first_order_check,
    limiting_covariance, predict_eig_law_moments, EigLawMoments, ExpectationOptions,
    FirstOrderError, TheoryMatrices, DEFAULT_LAW_DRAWS,
};
