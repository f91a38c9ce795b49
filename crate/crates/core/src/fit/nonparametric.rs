use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::moments::{moments_from_spectra, CorpusSpectra};
use crate::rng::{GraphSeed, Stream};
use crate::sbm::law::{LawFamily, ParamLaw};
use crate::sbm::model::{sample_rpsbm, validate_geometry, RpsbmModel};

use super::kde::{silverman_bandwidth, Bandwidth, BandwidthRule};
use super::parametric::{canonical_scale, cross_ratio};

/// Equal-weight mixture of RPSBMs, one component per corpus graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMixture {
    pub components: Vec<RpsbmModel>,
    pub weights: Vec<f64>,
    /// fallback[k][i]: coordinate i of component k was reduced to a point
    /// mass because H_ii - 2λ_i/(n s_i) <= 0.
    pub fallback: Vec<Vec<bool>>,
    pub bandwidth: Bandwidth,
    pub warnings: Vec<String>,
}

impl GraphMixture {
    pub fn uniform(components: Vec<RpsbmModel>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture has no components".into()));
        }
        let k = components.len();
        let c = components[0].c();
        Ok(GraphMixture {
            weights: vec![1.0 / k as f64; k],
            fallback: vec![vec![false; c]; k],
            bandwidth: Bandwidth::diagonal(&vec![0.0; c])?,
            components,
            warnings: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Empty("mixture has no components".into()));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::InvalidParams(
                "one weight per component required".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParams(format!(
                "mixture weights sum to {total}"
            )));
        }
        self.components.iter().try_for_each(RpsbmModel::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonparametricOptions {
    pub rule: BandwidthRule,
    /// Kernel family in graph space; uniform or truncated Gaussian.
    pub kernel: LawFamily,
    /// Per-graph geometry vectors; 1/c everywhere when absent.
    pub geometries: Option<Vec<Vec<f64>>>,
    /// Center each kernel at (λ_i - 1)/(n ω s_i) instead of λ_i/(n ω s_i),
    /// removing the O(1) upward bias of top eigenvalues.
    #[serde(default)]
    pub unit_shift: bool,
}

impl Default for NonparametricOptions {
    fn default() -> Self {
        NonparametricOptions {
            rule: BandwidthRule::Silverman,
            kernel: LawFamily::Uniform,
            geometries: None,
            unit_shift: false,
        }
    }
}

pub fn fit_nonparametric(
    corpus: &[Graph],
    c: usize,
    opts: &NonparametricOptions,
) -> Result<GraphMixture> {
    fit_nonparametric_spectra(&CorpusSpectra::compute(corpus, c)?, opts)
}

/// Graph-space kernel mixture: every corpus graph becomes an RPSBM whose
/// eigenvalue law has mean λ^(k) and covariance H.
pub fn fit_nonparametric_spectra(
    cs: &CorpusSpectra,
    opts: &NonparametricOptions,
) -> Result<GraphMixture> {
    let big_n = cs.len();
    if big_n == 0 {
        return Err(Error::Empty("corpus has no graphs".into()));
    }
    let c = cs.spectra[0].len();
    let n = cs.n as f64;
    if !matches!(opts.kernel, LawFamily::Uniform | LawFamily::TruncGaussian) {
        return Err(Error::InvalidArgument(
            "graph-space kernel must be uniform or trunc_gaussian".into(),
        ));
    }
    if let Some(geo) = &opts.geometries {
        if geo.len() != big_n {
            return Err(Error::InvalidArgument(format!(
                "{} geometries for {big_n} graphs",
                geo.len()
            )));
        }
        for s in geo {
            if s.len() != c {
                return Err(Error::InvalidArgument(format!(
                    "geometry of length {} for c = {c}",
                    s.len()
                )));
            }
            validate_geometry(s)?;
        }
    }

    let bandwidth = match &opts.rule {
        BandwidthRule::Silverman => {
            let m = moments_from_spectra(cs)?;
            let sigma: Vec<f64> = (0..c).map(|i| m.cov[i][i].max(0.0).sqrt()).collect();
            silverman_bandwidth(big_n, &sigma)?
        }
        BandwidthRule::Fixed { h } => Bandwidth::diagonal(&vec![*h; c])?,
        BandwidthRule::Explicit { bandwidth } => {
            if bandwidth.dim() != c {
                return Err(Error::InvalidArgument(
                    "bandwidth dimension differs from c".into(),
                ));
            }
            bandwidth.clone()
        }
    };
    let h = bandwidth.diag();
    let mut warnings = Vec::new();
    if bandwidth.degenerate {
        warnings.push("bandwidth has zero entries; those coordinates are point masses".into());
    }
    let off_diag = (0..c).any(|i| (0..c).any(|j| i != j && bandwidth.h[i][j] != 0.0));
    if off_diag {
        warnings.push("off-diagonal bandwidth entries are ignored by product kernels".into());
    }

    let uniform_s = vec![1.0 / c as f64; c];
    let mut components = Vec::with_capacity(big_n);
    let mut fallback = Vec::with_capacity(big_n);
    for k in 0..big_n {
        let lam = &cs.spectra[k];
        let omega = cs.densities[k];
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument(format!("graph {k} has no edges")));
        }
        let s = opts.geometries.as_ref().map_or(&uniform_s, |g| &g[k]);
        let shift = if opts.unit_shift { 1.0 } else { 0.0 };
        let mean: Vec<f64> = (0..c)
            .map(|i| (lam[i] - shift).max(0.0) / (n * omega * s[i]))
            .collect();
        let mut flags = vec![false; c];
        let mut spread = vec![0.0; c];
        for i in 0..c {
            let excess = h[i] - 2.0 * lam[i] / (n * s[i]);
            if excess > 0.0 {
                spread[i] = excess / (n * n * omega * omega * s[i] * s[i]);
            } else {
                flags[i] = true;
            }
        }
        let law = match opts.kernel {
            LawFamily::TruncGaussian => ParamLaw::TruncGaussian {
                mean: mean.clone(),
                sd: spread.iter().map(|v| v.sqrt()).collect(),
            },
            _ => ParamLaw::Uniform {
                center: mean.clone(),
                width: spread.iter().map(|v| (12.0 * v).sqrt()).collect(),
            },
        };
        let mut local = Vec::new();
        let (_, epsilon) = cross_ratio(&mean, s, 1.0, &mut local);
        let (omega, law, _) = canonical_scale(omega, law, &mean, &mut local)?;
        warnings.extend(
            local
                .into_iter()
                .filter(|w| !w.starts_with("rescaled"))
                .map(|w| format!("graph {k}: {w}")),
        );
        components.push(RpsbmModel {
            omega,
            law,
            epsilon,
            s: s.clone(),
        });
        fallback.push(flags);
    }
    let count = fallback.iter().flatten().filter(|&&f| f).count();
    if count > 0 {
        warnings.push(format!(
            "{count} coordinate(s) fell back to point masses (local over-smoothing)"
        ));
    }
    Ok(GraphMixture {
        weights: vec![1.0 / big_n as f64; big_n],
        components,
        fallback,
        bandwidth,
        warnings,
    })
}

/// Ancestral sampling: pick a component uniformly by weight, then sample it.
/// Returns the graphs and the chosen component indices.
pub fn sample_mixture_detailed(
    mix: &GraphMixture,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<Graph>, Vec<usize>)> {
    use rayon::prelude::*;
    mix.validate()?;
    let out: Vec<(Graph, usize)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let gs = GraphSeed::new(seed, k as u64);
            let which = choose_component(&mix.weights, gs);
            Ok((sample_rpsbm(&mix.components[which], n, gs)?, which))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().unzip())
}

pub fn sample_mixture(mix: &GraphMixture, n: usize, count: usize, seed: u64) -> Result<Vec<Graph>> {
    sample_mixture_detailed(mix, n, count, seed).map(|(g, _)| g)
}

fn choose_component(weights: &[f64], gs: GraphSeed) -> usize {
    if weights.len() == 1 {
        return 0;
    }
    let u: f64 = gs.stream(Stream::Component).gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
