//! Bandwidths and one-dimensional Gaussian density curves on uniform grids.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use crate::error::{Error, Result};

/// Kernel covariance H in spectrum space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub h: Vec<Vec<f64>>,
    /// Set when some diagonal entry is zero.
    pub degenerate: bool,
}

impl Bandwidth {
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        if let Some(i) = (0..d.len()).find(|&i| !(d[i] >= 0.0 && d[i].is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth entry {i} is {}",
                d[i]
            )));
        }
        let c = d.len();
        let mut h = vec![vec![0.0; c]; c];
        for i in 0..c {
            h[i][i] = d[i];
        }
        Ok(Bandwidth {
            h,
            degenerate: d.iter().any(|&x| x == 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.h[i][i]).collect()
    }
}

/// How the per-graph kernel covariance is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Silverman with σ_i from the corpus sample covariance.
    Silverman,
    /// The same H_ii = h for every coordinate.
    Fixed {
        h: f64,
    },
    Explicit {
        bandwidth: Bandwidth,
    },
}

/// Silverman's rule of thumb, h = ((4/3)^{1/5} N^{-1/5} σ)², per coordinate.
pub fn silverman_bandwidth(count: usize, sigma: &[f64]) -> Result<Bandwidth> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "Silverman bandwidth needs N >= 1".into(),
        ));
    }
    Bandwidth::diagonal(
        &sigma
            .iter()
            .map(|&s| silverman_scalar(count, s))
            .collect::<Vec<_>>(),
    )
}

pub fn silverman_scalar(count: usize, sigma: f64) -> f64 {
    let root = (4.0f64 / 3.0).powf(0.2) * (count as f64).powf(-0.2) * sigma;
    root * root
}

/// Uniform grid of `points` values on [lo, hi].
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 || hi <= lo {
        return vec![lo; points.max(1)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| lo + step * k as f64).collect()
}

/// Grid covering every (mean, sd) component to ±`spread` max sd.
pub fn grid_for(components: &[(f64, f64)], spread: f64, points: usize) -> Vec<f64> {
    let sd = components.iter().map(|c| c.1).fold(0.0, f64::max);
    let lo = components.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - spread * sd;
    let hi = components
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max)
        + spread * sd;
    uniform_grid(lo, hi, points)
}

/// Equal-weight Gaussian mixture density on `grid`. Components with sd = 0
/// are skipped, since they carry no density.
pub fn gaussian_mixture_curve(grid: &[f64], components: &[(f64, f64)]) -> Vec<f64> {
    let live: Vec<Normal> = components
        .iter()
        .filter(|c| c.1 > 0.0)
        .map(|&(m, s)| Normal::new(m, s).expect("positive sd"))
        .collect();
    let w = 1.0 / components.len().max(1) as f64;
    grid.iter()
        .map(|&z| w * live.iter().map(|d| d.pdf(z)).sum::<f64>())
        .collect()
}

/// Gaussian KDE of `points` with standard deviation `h_sd`.
pub fn gaussian_kde_curve(grid: &[f64], points: &[f64], h_sd: f64) -> Vec<f64> {
    let comps: Vec<(f64, f64)> = points.iter().map(|&x| (x, h_sd)).collect();
    gaussian_mixture_curve(grid, &comps)
}

pub fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// L1 distance between two curves on a shared grid, each first normalized to
/// unit trapezoid mass.
pub fn l1_normalized(grid: &[f64], f: &[f64], g: &[f64]) -> Result<f64> {
    let (mf, mg) = (trapezoid(grid, f), trapezoid(grid, g));
    if !(mf > 0.0 && mg > 0.0) {
        return Err(Error::InvalidArgument("curve with zero mass".into()));
    }
    let diff: Vec<f64> = f
        .iter()
        .zip(g)
        .map(|(a, b)| (a / mf - b / mg).abs())
        .collect();
    Ok(trapezoid(grid, &diff))
}

/// Per-coordinate sample standard deviation, divisor N - 1.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silverman_examples() {
        let b = silverman_bandwidth(32, &[1.0]).unwrap();
        let expect = (4.0f64 / 3.0).powf(0.4) / 32f64.powf(0.4);
        assert!((b.h[0][0] - expect).abs() < 1e-15);
        assert!((b.h[0][0] - 0.2805).abs() < 5e-5);
        assert!(!b.degenerate);
        assert!(silverman_bandwidth(10, &[0.0]).unwrap().degenerate);
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let h = silverman_scalar(n, 2.0);
            assert!(h < prev);
            prev = h;
        }
        assert!(silverman_bandwidth(0, &[1.0]).is_err());
    }

    #[test]
    fn curves_integrate_to_one() {
        let comps = [(3.0, 0.5), (5.0, 1.2)];
        let grid = grid_for(&comps, 6.0, 2048);
        let f = gaussian_mixture_curve(&grid, &comps);
        assert!((trapezoid(&grid, &f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn l1_of_identical_and_disjoint() {
        let grid = uniform_grid(-20.0, 20.0, 4001);
        let f = gaussian_kde_curve(&grid, &[0.0], 1.0);
        let g = gaussian_kde_curve(&grid, &[12.0], 1.0);
        assert!(l1_normalized(&grid, &f, &f).unwrap() < 1e-15);
        assert!((l1_normalized(&grid, &f, &g).unwrap() - 2.0).abs() < 1e-6);
    }
}
