use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{spectrum, SpectralSignature};

/// Corpus statistics of the truncated spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    /// λ̄, arithmetic mean of the top-c spectra.
    pub mean_spectrum: Vec<f64>,
    /// Σ̂ with divisor N - 1 (zero when N = 1).
    pub cov: Vec<Vec<f64>>,
    /// ρ̄, mean edge density.
    pub mean_density: f64,
    pub n_graphs: usize,
    pub n: usize,
    pub c: usize,
    /// Set when N = 1 and the covariance is not estimable.
    pub degenerate: bool,
    /// Coordinate-wise minimum and maximum over the corpus.
    pub min_spectrum: Vec<f64>,
    pub max_spectrum: Vec<f64>,
}

/// Spectrum and density of every corpus member, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpectra {
    pub n: usize,
    pub spectra: Vec<Vec<f64>>,
    pub densities: Vec<f64>,
}

impl CorpusSpectra {
    pub fn compute(corpus: &[Graph], c: usize) -> Result<Self> {
        let first = corpus
            .first()
            .ok_or_else(|| Error::Empty("corpus has no graphs".into()))?;
        let n = first.n();
        if let Some(g) = corpus.iter().find(|g| g.n() != n) {
            return Err(Error::MixedGraphSizes(n, g.n()));
        }
        let rows: Vec<(SpectralSignature, f64)> = corpus
            .par_iter()
            .map(|g| Ok((spectrum(g, c)?, g.density()?)))
            .collect::<Result<_>>()?;
        let (spectra, densities) = rows.into_iter().map(|(s, d)| (s.values, d)).unzip();
        Ok(CorpusSpectra {
            n,
            spectra,
            densities,
        })
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }
}

pub fn compute_moments(corpus: &[Graph], c: usize) -> Result<SampleMoments> {
    moments_from_spectra(&CorpusSpectra::compute(corpus, c)?)
}

pub fn moments_from_spectra(cs: &CorpusSpectra) -> Result<SampleMoments> {
    let big_n = cs.len();
    if big_n == 0 {
        return Err(Error::Empty("corpus has no graphs".into()));
    }
    let c = cs.spectra[0].len();
    if cs.spectra.iter().any(|s| s.len() != c) || cs.densities.len() != big_n {
        return Err(Error::InvalidArgument("ragged corpus spectra".into()));
    }
    let nf = big_n as f64;
    let mean = shifted_mean(&cs.spectra);
    let mut cov = vec![vec![0.0; c]; c];
    if big_n > 1 {
        for s in &cs.spectra {
            for i in 0..c {
                let di = s[i] - mean[i];
                for j in i..c {
                    cov[i][j] += di * (s[j] - mean[j]);
                }
            }
        }
        for i in 0..c {
            for j in i..c {
                cov[i][j] /= nf - 1.0;
                cov[j][i] = cov[i][j];
            }
        }
    }
    let fold = |init: f64, f: fn(f64, f64) -> f64| -> Vec<f64> {
        (0..c)
            .map(|i| cs.spectra.iter().map(|s| s[i]).fold(init, f))
            .collect()
    };
    Ok(SampleMoments {
        mean_spectrum: mean,
        cov,
        mean_density: cs.densities.iter().sum::<f64>() / nf,
        n_graphs: big_n,
        n: cs.n,
        c,
        degenerate: big_n == 1,
        min_spectrum: fold(f64::INFINITY, f64::min),
        max_spectrum: fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Coordinate means computed around the first row, so a constant column
/// reproduces its value exactly.
fn shifted_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let nf = rows.len() as f64;
    let base = &rows[0];
    (0..base.len())
        .map(|i| base[i] + rows.iter().map(|r| r[i] - base[i]).sum::<f64>() / nf)
        .collect()
}

/// Sample total Fréchet variance with the mean spectrum as proxy Fréchet mean:
/// (1/(N-1)) Σ_k ||λ^(k) - λ̄||².
pub fn frechet_total_variance(corpus: &[Graph], c: usize) -> Result<f64> {
    frechet_total_variance_of(&CorpusSpectra::compute(corpus, c)?.spectra)
}

pub fn frechet_total_variance_of(spectra: &[Vec<f64>]) -> Result<f64> {
    let big_n = spectra.len();
    if big_n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Fréchet variance needs N >= 2, got {big_n}"
        )));
    }
    let nf = big_n as f64;
    let mean = shifted_mean(spectra);
    let ss: f64 = spectra
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum();
    Ok(ss / (nf - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Small,
    Medium,
    Large,
}

/// Default cut between the medium and large variance regimes.
pub const DEFAULT_LARGE_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regimes: Vec<Regime>,
    /// Σ̂_ii - 2 λ̄_i / (n s_i).
    pub diagnostic: Vec<f64>,
    /// 2 λ̄_i / (n s_i Σ̂_ii); infinite when Σ̂_ii = 0.
    pub ratio: Vec<f64>,
}

impl RegimeReport {
    pub fn small_indices(&self) -> Vec<usize> {
        (0..self.regimes.len())
            .filter(|&i| self.regimes[i] == Regime::Small)
            .collect()
    }
}

pub fn classify_regimes(m: &SampleMoments, s: &[f64], large_ratio: f64) -> Result<RegimeReport> {
    classify_values(&m.mean_spectrum, &m.cov, m.n, s, large_ratio)
}

pub(crate) fn classify_values(
    mean: &[f64],
    cov: &[Vec<f64>],
    n: usize,
    s: &[f64],
    large_ratio: f64,
) -> Result<RegimeReport> {
    let c = mean.len();
    if s.len() != c {
        return Err(Error::InvalidArgument(format!(
            "geometry of length {} for c = {c}",
            s.len()
        )));
    }
    let mut report = RegimeReport {
        regimes: vec![],
        diagnostic: vec![],
        ratio: vec![],
    };
    for i in 0..c {
        let inherent = 2.0 * mean[i] / (n as f64 * s[i]);
        let var = cov[i][i];
        let diagnostic = var - inherent;
        let ratio = if var == 0.0 {
            if inherent == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            inherent / var
        };
        let regime = if diagnostic < 0.0 {
            Regime::Small
        } else if ratio < large_ratio {
            Regime::Large
        } else {
            Regime::Medium
        };
        report.regimes.push(regime);
        report.diagnostic.push(diagnostic);
        report.ratio.push(ratio);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(spectra: Vec<Vec<f64>>) -> CorpusSpectra {
        let k = spectra.len();
        CorpusSpectra {
            n: 10,
            spectra,
            densities: vec![0.5; k],
        }
    }

    #[test]
    fn two_graph_hand_example() {
        let m = moments_from_spectra(&cs(vec![vec![1.0], vec![3.0]])).unwrap();
        assert_eq!(m.mean_spectrum, vec![2.0]);
        assert_eq!(m.cov, vec![vec![2.0]]);
        assert_eq!(
            frechet_total_variance_of(&[vec![1.0], vec![3.0]]).unwrap(),
            2.0
        );
    }

    #[test]
    fn identical_corpus() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let corpus = vec![g.clone(), g.clone(), g.clone()];
        let m = compute_moments(&corpus, 2).unwrap();
        assert_eq!(m.cov, vec![vec![0.0; 2]; 2]);
        assert_eq!(m.mean_spectrum, spectrum(&g, 2).unwrap().values);
        assert_eq!(frechet_total_variance(&corpus, 2).unwrap(), 0.0);
    }

    #[test]
    fn single_graph_is_degenerate() {
        let m = moments_from_spectra(&cs(vec![vec![4.0, 1.0]])).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.cov, vec![vec![0.0; 2]; 2]);
        assert!(frechet_total_variance_of(&[vec![4.0]]).is_err());
    }

    #[test]
    fn mixed_sizes_rejected() {
        let corpus = vec![Graph::empty(4).unwrap(), Graph::empty(5).unwrap()];
        assert!(matches!(
            compute_moments(&corpus, 1),
            Err(Error::MixedGraphSizes(4, 5))
        ));
    }

    #[test]
    fn regime_examples() {
        let r = classify_values(&[133.9401], &[vec![25.3956]], 1000, &[0.5], 0.1).unwrap();
        assert!((r.diagnostic[0] - 24.8599).abs() < 1e-3);
        assert_eq!(r.regimes[0], Regime::Large);

        let r = classify_values(&[10.0], &[vec![0.0]], 100, &[1.0], 0.1).unwrap();
        assert_eq!(r.regimes[0], Regime::Small);

        // Σ̂ exactly equal to the inherent variance.
        let r = classify_values(&[25.0], &[vec![0.5]], 100, &[1.0], 0.1).unwrap();
        assert_eq!(r.diagnostic[0], 0.0);
        assert_eq!(r.ratio[0], 1.0);
        assert_eq!(r.regimes[0], Regime::Medium);
    }
}
