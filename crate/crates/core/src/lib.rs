pub mod contacts;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod rng;
pub mod sbm;
pub mod spectral;

pub use error::{Error, Result};
pub use fit::{fit_nonparametric, fit_parametric, FitOptions, FitResult, GraphMixture};
pub use geometry::{cluster_by_community_count, detect_geometry, extremal_count, GeometryEstimate};
pub use graph::Graph;
pub use moments::{
    classify_regimes, compute_moments, frechet_total_variance, Regime, RegimeReport, SampleMoments,
};
pub use rng::GraphSeed;
pub use sbm::{LawFamily, ParamLaw, RpsbmModel, SbmParams};
pub use spectral::{dist_truncated, full_spectrum, spectrum, SpectralSignature};
