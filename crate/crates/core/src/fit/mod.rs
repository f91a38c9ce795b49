//! Moment-matching and kernel-mixture fits of random-parameter block models.

pub mod beta;
pub mod critical;
pub mod kde;
pub mod nonparametric;
pub mod parametric;

pub use beta::fit_beta_product;
pub use critical::{
    critical_sample_size, er_estimate, first_violation, run_er_mixture_pipeline, CriticalResult,
    CurveTable, ErEstimate, ErMixtureSpec, ErPipelineResult,
};
pub use kde::{silverman_bandwidth, Bandwidth, BandwidthRule};
pub use nonparametric::{
    fit_nonparametric, fit_nonparametric_spectra, sample_mixture, sample_mixture_detailed,
    GraphMixture, NonparametricOptions,
};
pub use parametric::{fit_parametric, Feasibility, FitOptions, FitResult, JMoments};
