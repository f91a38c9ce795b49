//! Erdős–Rényi mixture pipeline and the critical corpus size at which the
//! kernel mixture's second-moment equation stops being solvable.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, GraphSeed, Stream};
use crate::sbm::model::{sample_sbm, SbmParams};
use crate::spectral::spectrum;

use super::kde::{gaussian_mixture_curve, grid_for, silverman_scalar};

pub const CURVE_POINTS: usize = 2048;
pub const CURVE_SPREAD: f64 = 6.0;

/// Equal-weight mixture of G(n, ω p_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErMixtureSpec {
    pub n: usize,
    pub omega: f64,
    pub p: Vec<f64>,
}

impl ErMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams("ER mixture needs n >= 2".into()));
        }
        if self.p.is_empty() {
            return Err(Error::InvalidParams("ER mixture has no components".into()));
        }
        for &p in &self.p {
            SbmParams::erdos_renyi(self.omega, p)?;
        }
        Ok(())
    }

    /// Oracle variance of λ_1 under the mixture: mean of 2p_j plus the
    /// spread of the centers nωp_j.
    pub fn oracle_variance(&self) -> f64 {
        let k = self.p.len() as f64;
        let inherent = self.p.iter().map(|p| 2.0 * p).sum::<f64>() / k;
        let centers: Vec<f64> = self
            .p
            .iter()
            .map(|p| self.n as f64 * self.omega * p)
            .collect();
        let m = centers.iter().sum::<f64>() / k;
        inherent + centers.iter().map(|c| c * c).sum::<f64>() / k - m * m
    }

    /// Graph `index` of the stream keyed by `seed`: the component is chosen
    /// uniformly, then an ER graph is drawn.
    pub fn sample(&self, seed: u64, index: u64) -> Result<Graph> {
        let gs = GraphSeed::new(seed, index);
        let which = if self.p.len() == 1 {
            0
        } else {
            gs.stream(Stream::Component).gen_range(0..self.p.len())
        };
        sample_sbm(
            &SbmParams::erdos_renyi(self.omega, self.p[which])?,
            self.n,
            gs,
        )
    }
}

/// λ_1, density, and the implied p^(k) = (λ_1 - 1)/(n ρ) of one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErEstimate {
    pub lambda1: f64,
    pub density: f64,
    pub p: f64,
}

pub fn er_estimate(g: &Graph) -> Result<ErEstimate> {
    let lambda1 = spectrum(g, 1)?.values[0];
    let density = g.density()?;
    let p = if density > 0.0 {
        (lambda1 - 1.0) / (g.n() as f64 * density)
    } else {
        0.0
    };
    Ok(ErEstimate {
        lambda1,
        density,
        p,
    })
}

/// Sampled density curves on a shared uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub z: Vec<f64>,
    pub f_true: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub f_silverman: Vec<f64>,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,f_true,f_hat,f_silverman\n");
        for k in 0..self.z.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.z[k], self.f_true[k], self.f_hat[k], self.f_silverman[k]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErPipelineResult {
    pub estimates: Vec<ErEstimate>,
    pub sigma2_oracle: f64,
    pub h_n: f64,
    pub curves: CurveTable,
}

/// Draws `count` graphs from the mixture and builds the oracle curve, the
/// graph-space kernel mixture curve and the Silverman KDE curve.
pub fn run_er_mixture_pipeline(
    spec: &ErMixtureSpec,
    count: usize,
    seed: u64,
) -> Result<ErPipelineResult> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "pipeline needs at least one graph".into(),
        ));
    }
    let estimates: Vec<ErEstimate> = (0..count as u64)
        .into_par_iter()
        .map(|k| er_estimate(&spec.sample(seed, k)?))
        .collect::<Result<_>>()?;
    Ok(er_curves(spec, estimates))
}

pub fn er_curves(spec: &ErMixtureSpec, estimates: Vec<ErEstimate>) -> ErPipelineResult {
    let n = spec.n as f64;
    let sigma2_oracle = spec.oracle_variance();
    let h_n = silverman_scalar(estimates.len(), sigma2_oracle.sqrt());
    let truth: Vec<(f64, f64)> = spec
        .p
        .iter()
        .map(|&p| (n * spec.omega * p + 1.0, (2.0 * p).sqrt()))
        .collect();
    let center = |e: &ErEstimate| n * e.density * e.p + 1.0;
    let hat: Vec<(f64, f64)> = estimates
        .iter()
        .map(|e| (center(e), (2.0 * e.p.max(0.0)).sqrt()))
        .collect();
    let silver: Vec<(f64, f64)> = estimates.iter().map(|e| (center(e), h_n.sqrt())).collect();
    let all: Vec<(f64, f64)> = truth.iter().chain(&hat).chain(&silver).copied().collect();
    let z = grid_for(&all, CURVE_SPREAD, CURVE_POINTS);
    let curves = CurveTable {
        f_true: gaussian_mixture_curve(&z, &truth),
        f_hat: gaussian_mixture_curve(&z, &hat),
        f_silverman: gaussian_mixture_curve(&z, &silver),
        z,
    };
    ErPipelineResult {
        estimates,
        sigma2_oracle,
        h_n,
        curves,
    }
}

/// Smallest N (1-based) such that some positive p^(k), k ≤ N, has
/// 2 p^(k) ≥ h(N).
pub fn first_violation<I, H>(p_values: I, h: H) -> Option<usize>
where
    I: IntoIterator<Item = f64>,
    H: Fn(usize) -> f64,
{
    let mut max_p = 0.0f64;
    for (k, p) in p_values.into_iter().enumerate() {
        max_p = max_p.max(p);
        let big_n = k + 1;
        if max_p > 0.0 && 2.0 * max_p >= h(big_n) {
            return Some(big_n);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    /// First violation per repetition.
    pub per_repetition: Vec<usize>,
    pub mean: f64,
    /// `mean` rounded to the nearest count.
    pub n_crit: usize,
    pub sigma2_oracle: f64,
}

/// Monte-Carlo critical corpus size: each repetition grows a corpus one
/// graph at a time until max_k 2p^(k) ≥ h_N, with h_N from Silverman's rule
/// on the oracle variance.
pub fn critical_sample_size(
    spec: &ErMixtureSpec,
    n_max: usize,
    repetitions: usize,
    seed: u64,
) -> Result<CriticalResult> {
    spec.validate()?;
    if repetitions == 0 || n_max == 0 {
        return Err(Error::InvalidArgument(
            "need at least one repetition and N_max >= 1".into(),
        ));
    }
    let sigma = spec.oracle_variance().sqrt();
    let per: Vec<Option<usize>> = (0..repetitions as u64)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(seed, r);
            let mut err = None;
            let ps = (0..n_max as u64).map_while(|k| {
                match spec.sample(rep_seed, k).and_then(|g| er_estimate(&g)) {
                    Ok(e) => Some(e.p),
                    Err(e) => {
                        err = Some(e);
                        None
                    }
                }
            });
            let hit = first_violation(ps, |big_n| silverman_scalar(big_n, sigma));
            match err {
                Some(e) => Err(e),
                None => Ok(hit),
            }
        })
        .collect::<Result<_>>()?;
    if per.iter().any(Option::is_none) {
        return Err(Error::NeverViolated(n_max));
    }
    let per_repetition: Vec<usize> = per.into_iter().flatten().collect();
    let mean = per_repetition.iter().sum::<usize>() as f64 / repetitions as f64;
    Ok(CriticalResult {
        per_repetition,
        mean,
        n_crit: mean.round() as usize,
        sigma2_oracle: sigma * sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::kde::trapezoid;

    #[test]
    fn oracle_variance_of_the_two_component_example() {
        let spec = ErMixtureSpec {
            n: 1000,
            omega: 2.0 / 1000f64.sqrt(),
            p: vec![0.75, 0.85],
        };
        // 1.6 + (nω · 0.05)² = 1.6 + 10.
        assert!((spec.oracle_variance() - 11.6).abs() < 1e-10);
    }

    #[test]
    fn first_violation_rules() {
        let h = |n: usize| 10.0 / n as f64;
        assert_eq!(first_violation([1.0, 1.0, 1.0, 1.0, 1.0, 1.0], h), Some(5));
        assert_eq!(first_violation([0.0; 50], |_| 0.0), None);
        // A large early draw triggers sooner.
        assert_eq!(first_violation([1.0, 2.6, 1.0], h), Some(2));
        // Doubling p never delays the violation.
        let ps = [0.3, 0.5, 0.4, 0.45, 0.6, 0.2, 0.55];
        let h5 = |n: usize| 5.0 / n as f64;
        let base = first_violation(ps, h5).unwrap();
        let doubled = first_violation(ps.iter().map(|p| 2.0 * p), h5).unwrap();
        assert!(doubled < base);
    }

    #[test]
    fn zero_density_component_never_violates() {
        let spec = ErMixtureSpec {
            n: 50,
            omega: 0.5,
            p: vec![0.0],
        };
        assert!(matches!(
            critical_sample_size(&spec, 30, 2, 1),
            Err(Error::NeverViolated(30))
        ));
    }

    #[test]
    fn single_graph_pipeline() {
        let spec = ErMixtureSpec {
            n: 200,
            omega: 0.3,
            p: vec![0.5, 0.6],
        };
        let out = run_er_mixture_pipeline(&spec, 1, 3).unwrap();
        let e = out.estimates[0];
        // The kernel mixture center reproduces λ_1 of the only graph.
        let peak = out
            .curves
            .f_hat
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let step = out.curves.z[1] - out.curves.z[0];
        assert!((out.curves.z[peak] - e.lambda1).abs() <= step);
        for f in [
            &out.curves.f_true,
            &out.curves.f_hat,
            &out.curves.f_silverman,
        ] {
            assert!((trapezoid(&out.curves.z, f) - 1.0).abs() < 1e-3);
        }
        assert!(out
            .curves
            .to_csv()
            .starts_with("z,f_true,f_hat,f_silverman\n"));
    }
}
