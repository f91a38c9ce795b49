//! Finite-dimensional theory for block models: the c×c matrices M and Mf,
//! the eigenvalue correction matrix B*, limiting eigenvalue covariances, and
//! predicted moments of the top eigenvalues under a random-parameter model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::GraphSeed;

use super::model::{RpsbmModel, SbmParams};

#[derive(Debug, Clone)]
pub struct TheoryMatrices {
    /// M_ii = s_i p_i, M_ij = sqrt(s_i s_j) q.
    pub m: DMatrix<f64>,
    /// Mf_ii = p_i, Mf_ij = q.
    pub mf: DMatrix<f64>,
    /// Eigenvalues of M, non-increasing.
    pub nu: Vec<f64>,
    /// Orthonormal eigenvectors of M as columns, matched to `nu`.
    pub v: DMatrix<f64>,
}

pub fn build_theory_matrices(params: &SbmParams) -> Result<TheoryMatrices> {
    params.validate()?;
    let c = params.c();
    let s = &params.s;
    let m = DMatrix::from_fn(c, c, |i, j| {
        if i == j {
            s[i] * params.p[i]
        } else {
            (s[i] * s[j]).sqrt() * params.q
        }
    });
    let mf = DMatrix::from_fn(c, c, |i, j| if i == j { params.p[i] } else { params.q });
    let eig = linalg::sym_eigen_desc(m.clone());
    if eig.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenSolver("non-finite eigenvalue of M".into()));
    }
    let mut v = eig.vectors;
    linalg::fix_signs(&mut v);
    Ok(TheoryMatrices {
        m,
        mf,
        nu: eig.values,
        v,
    })
}

/// Values of the kernel operator's eigenfunctions on each block:
/// entry (k, i) is r_k on block i, equal to V[i, k] / sqrt(s_i).
pub fn eigenfunction_values(tm: &TheoryMatrices, s: &[f64]) -> Result<DMatrix<f64>> {
    let c = tm.nu.len();
    if s.len() != c {
        return Err(Error::InvalidArgument(format!(
            "geometry of length {} for c = {c}",
            s.len()
        )));
    }
    Ok(DMatrix::from_fn(c, c, |k, i| tm.v[(i, k)] / s[i].sqrt()))
}

/// Cov(Z_i, Z_j) = 2 (v_i ∘ v_j)ᵀ Mf (v_i ∘ v_j).
pub fn limiting_covariance(params: &SbmParams) -> Result<DMatrix<f64>> {
    let tm = build_theory_matrices(params)?;
    Ok(covariance_from(&tm))
}

pub(crate) fn covariance_from(tm: &TheoryMatrices) -> DMatrix<f64> {
    let c = tm.nu.len();
    let mut cov = DMatrix::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            let w = tm.v.column(i).component_mul(&tm.v.column(j));
            let val = 2.0 * w.dot(&(&tm.mf * &w));
            cov[(i, j)] = val;
            cov[(j, i)] = val;
        }
    }
    cov
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationOptions {
    /// Include the O(1) correction matrix; without it E[λ_i] = n ω ν_i.
    pub include_correction: bool,
}

impl Default for ExpectationOptions {
    fn default() -> Self {
        ExpectationOptions {
            include_correction: true,
        }
    }
}

/// Predicted mean of the i-th largest eigenvalue (zero-based `i`).
///
/// Builds B*_i = diag(n ω ν_j) + B2(i), where
/// B2(i)_jl = ν_i⁻² sqrt(ν_j ν_l) Σ_k ν_k Σ_m s_m^{-1/2} v_j(m) v_l(m) v_k(m) Σ_w sqrt(s_w) v_k(w),
/// and returns the i-th largest eigenvalue of B*_i.
pub fn expected_eigenvalue(
    params: &SbmParams,
    n: usize,
    i: usize,
    opts: ExpectationOptions,
) -> Result<f64> {
    let tm = build_theory_matrices(params)?;
    expected_from(&tm, params, n, i, opts)
}

pub(crate) fn expected_from(
    tm: &TheoryMatrices,
    params: &SbmParams,
    n: usize,
    i: usize,
    opts: ExpectationOptions,
) -> Result<f64> {
    let c = tm.nu.len();
    if i >= c {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue index {i} out of range for c = {c}"
        )));
    }
    let nu = &tm.nu;
    if nu[i] <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "ν_{} = {} is not positive",
            i + 1,
            nu[i]
        )));
    }
    let scale = n as f64 * params.omega;
    let mut b = DMatrix::from_fn(c, c, |j, l| if j == l { nu[j] * scale } else { 0.0 });
    if opts.include_correction {
        if let Some(j) = (0..c).find(|&j| nu[j] < 0.0) {
            return Err(Error::InvalidParams(format!(
                "M is indefinite (ν_{} = {}); correction undefined",
                j + 1,
                nu[j]
            )));
        }
        let s = &params.s;
        let v = &tm.v;
        // t_k = Σ_w sqrt(s_w) v_k(w); g_m = Σ_k ν_k v_k(m) t_k.
        let t: Vec<f64> = (0..c)
            .map(|k| (0..c).map(|w| s[w].sqrt() * v[(w, k)]).sum())
            .collect();
        let g: Vec<f64> = (0..c)
            .map(|m| (0..c).map(|k| nu[k] * v[(m, k)] * t[k]).sum())
            .collect();
        let pre = 1.0 / (nu[i] * nu[i]);
        for j in 0..c {
            for l in j..c {
                let inner: f64 = (0..c)
                    .map(|m| v[(m, j)] * v[(m, l)] * g[m] / s[m].sqrt())
                    .sum();
                let val = pre * (nu[j] * nu[l]).sqrt() * inner;
                b[(j, l)] += val;
                if l != j {
                    b[(l, j)] += val;
                }
            }
        }
    }
    Ok(linalg::sym_eigenvalues_desc(b)[i])
}

/// Errors of the first-order expansions, per eigenvalue index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderError {
    /// Block matched to the eigenvalue (largest eigenvector weight).
    pub block: usize,
    /// |E[λ_i] / (n ω s_b) - p_b|.
    pub mean_error: f64,
    /// |Cov(Z_i, Z_i) - 2 p_b|.
    pub cov_error: f64,
}

pub fn first_order_check(
    params: &SbmParams,
    n: usize,
    opts: ExpectationOptions,
) -> Result<Vec<FirstOrderError>> {
    let tm = build_theory_matrices(params)?;
    let cov = covariance_from(&tm);
    let c = params.c();
    (0..c)
        .map(|i| {
            let block = (0..c)
                .max_by(|&a, &b| tm.v[(a, i)].abs().total_cmp(&tm.v[(b, i)].abs()))
                .unwrap();
            let e = expected_from(&tm, params, n, i, opts)?;
            let denom = n as f64 * params.omega * params.s[block];
            Ok(FirstOrderError {
                block,
                mean_error: (e / denom - params.p[block]).abs(),
                cov_error: (cov[(i, i)] - 2.0 * params.p[block]).abs(),
            })
        })
        .collect()
}

/// Predicted mean and covariance of the top-c eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigLawMoments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

pub const DEFAULT_LAW_DRAWS: usize = 2000;

/// Law of total expectation and covariance over draws of J: the conditional
/// mean is `expected_eigenvalue`, the conditional covariance ω·Cov(Z).
pub fn predict_eig_law_moments(
    model: &RpsbmModel,
    n: usize,
    draws: usize,
    seed: u64,
    opts: ExpectationOptions,
) -> Result<EigLawMoments> {
    model.validate()?;
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be at least 1".into()));
    }
    let c = model.c();
    let draws = if model.law.variance().iter().all(|&v| v == 0.0) {
        1
    } else {
        draws
    };
    let mut means = Vec::with_capacity(draws);
    let mut cond_cov = DMatrix::<f64>::zeros(c, c);
    for d in 0..draws {
        let draw = model.draw_params(GraphSeed::new(seed, d as u64))?;
        let params = model.params_for(&draw);
        let tm = build_theory_matrices(&params)?;
        let m: Vec<f64> = (0..c)
            .map(|i| expected_from(&tm, &params, n, i, opts))
            .collect::<Result<_>>()?;
        means.push(m);
        cond_cov += covariance_from(&tm) * model.omega;
    }
    let dn = draws as f64;
    let mean: Vec<f64> = (0..c)
        .map(|i| means.iter().map(|m| m[i]).sum::<f64>() / dn)
        .collect();
    let mut cov = cond_cov / dn;
    for m in &means {
        for i in 0..c {
            for j in 0..c {
                cov[(i, j)] += (m[i] - mean[i]) * (m[j] - mean[j]) / dn;
            }
        }
    }
    let cov = (0..c)
        .map(|i| (0..c).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect())
        .collect();
    Ok(EigLawMoments { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::law::ParamLaw;

    fn params(p: &[f64], q: f64) -> SbmParams {
        let c = p.len();
        SbmParams::new(1.0, vec![1.0 / c as f64; c], p.to_vec(), q).unwrap()
    }

    #[test]
    fn matrices_examples() {
        let tm = build_theory_matrices(&params(&[0.8, 0.6], 0.0)).unwrap();
        assert!((tm.nu[0] - 0.4).abs() < 1e-15 && (tm.nu[1] - 0.3).abs() < 1e-15);

        let tm = build_theory_matrices(&SbmParams::erdos_renyi(1.0, 0.7).unwrap()).unwrap();
        assert!((tm.nu[0] - 0.7).abs() < 1e-15);

        // Closed form for [[0.4, 0.05], [0.05, 0.3]].
        let tm = build_theory_matrices(&params(&[0.8, 0.6], 0.1)).unwrap();
        let (tr, det) = (0.7, 0.4 * 0.3 - 0.05 * 0.05);
        let disc = (tr * tr / 4.0 - det as f64).sqrt();
        assert!((tm.nu[0] - (tr / 2.0 + disc)).abs() < 1e-14);
        assert!((tm.nu[1] - (tr / 2.0 - disc)).abs() < 1e-14);
        assert!((tm.nu[0] - 0.4207).abs() < 5e-5 && (tm.nu[1] - 0.2793).abs() < 5e-5);
    }

    #[test]
    fn eigenfunction_examples() {
        let p = params(&[0.8, 0.6], 0.0);
        let tm = build_theory_matrices(&p).unwrap();
        let r = eigenfunction_values(&tm, &p.s).unwrap();
        assert!((r[(0, 0)] - 2f64.sqrt()).abs() < 1e-14 && r[(0, 1)].abs() < 1e-14);

        let er = SbmParams::erdos_renyi(0.3, 0.5).unwrap();
        let r = eigenfunction_values(&build_theory_matrices(&er).unwrap(), &er.s).unwrap();
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_examples() {
        let er = SbmParams::erdos_renyi(1.0, 0.75).unwrap();
        assert!((limiting_covariance(&er).unwrap()[(0, 0)] - 1.5).abs() < 1e-15);

        let cov = limiting_covariance(&params(&[0.8, 0.6], 0.0)).unwrap();
        assert!((cov[(0, 0)] - 1.6).abs() < 1e-15);
        assert!((cov[(1, 1)] - 1.2).abs() < 1e-15);
        assert_eq!(cov[(0, 1)], 0.0);
    }

    #[test]
    fn expected_eigenvalue_er_is_n_omega_p_plus_one() {
        let omega = 2.0 / 1000f64.sqrt();
        let er = SbmParams::erdos_renyi(omega, 0.75).unwrap();
        let e = expected_eigenvalue(&er, 1000, 0, ExpectationOptions::default()).unwrap();
        let direct = 1000.0 * omega * 0.75 + 1.0;
        assert!((e - direct).abs() < 1e-12);
        assert!((e - 48.4342).abs() < 5e-5);
        for (n, omega, p) in [(10, 1.0, 0.3), (5000, 0.01, 0.9), (77, 0.5, 1.0)] {
            let er = SbmParams::erdos_renyi(omega, p).unwrap();
            let e = expected_eigenvalue(&er, n, 0, ExpectationOptions::default()).unwrap();
            assert!((e - (n as f64 * omega * p + 1.0)).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn expected_eigenvalue_refuses_nonpositive_nu() {
        // p = [0.1, 0.1], q = 0.5 gives ν_2 = 0.05 - 0.25 < 0.
        let p = params(&[0.1, 0.1], 0.5);
        assert!(expected_eigenvalue(&p, 100, 1, ExpectationOptions::default()).is_err());
        let p = params(&[0.5, 0.0], 0.0);
        assert!(expected_eigenvalue(&p, 100, 1, ExpectationOptions::default()).is_err());
    }

    #[test]
    fn leading_term_for_disjoint_blocks() {
        let p = SbmParams::new(0.3, vec![0.5, 0.5], vec![0.8, 0.6], 0.0).unwrap();
        let n = 1000;
        let no_corr = ExpectationOptions {
            include_correction: false,
        };
        for i in 0..2 {
            let e = expected_eigenvalue(&p, n, i, no_corr).unwrap();
            assert!((e - n as f64 * 0.3 * 0.5 * p.p[i]).abs() < 1e-10);
            // The correction is O(1) on top.
            let full = expected_eigenvalue(&p, n, i, ExpectationOptions::default()).unwrap();
            assert!((full - e - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn first_order_zero_at_epsilon_zero() {
        let p = SbmParams::new(0.4, vec![0.3, 0.7], vec![0.9, 0.5], 0.0).unwrap();
        let errs = first_order_check(
            &p,
            500,
            ExpectationOptions {
                include_correction: false,
            },
        )
        .unwrap();
        for e in errs {
            assert!(e.mean_error < 1e-14);
            assert_eq!(e.cov_error, 0.0);
        }
    }

    #[test]
    fn dirac_law_prediction() {
        let model = RpsbmModel {
            omega: 0.2,
            law: ParamLaw::Dirac {
                center: vec![0.8, 0.5],
            },
            epsilon: 0.05,
            s: vec![0.5, 0.5],
        };
        let pred =
            predict_eig_law_moments(&model, 800, 50, 1, ExpectationOptions::default()).unwrap();
        let params = SbmParams::new(0.2, vec![0.5, 0.5], vec![0.8, 0.5], 0.025).unwrap();
        let cov = limiting_covariance(&params).unwrap();
        for i in 0..2 {
            let e = expected_eigenvalue(&params, 800, i, ExpectationOptions::default()).unwrap();
            assert!((pred.mean[i] - e).abs() < 1e-12);
            for j in 0..2 {
                assert!((pred.cov[i][j] - 0.2 * cov[(i, j)]).abs() < 1e-14);
            }
        }
        let zero_width = RpsbmModel {
            law: ParamLaw::Uniform {
                center: vec![0.8, 0.5],
                width: vec![0.0, 0.0],
            },
            ..model.clone()
        };
        let z = predict_eig_law_moments(&zero_width, 800, 50, 1, ExpectationOptions::default())
            .unwrap();
        for i in 0..2 {
            assert!((z.mean[i] - pred.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_law_variance_decomposition() {
        let (n, omega) = (1000usize, 0.25);
        let model = RpsbmModel {
            omega,
            law: ParamLaw::Uniform {
                center: vec![0.8, 0.5],
                width: vec![0.2, 0.1],
            },
            epsilon: 0.0,
            s: vec![0.5, 0.5],
        };
        let draws = 4000;
        let pred =
            predict_eig_law_moments(&model, n, draws, 3, ExpectationOptions::default()).unwrap();
        for (i, (c, w)) in [(0.8, 0.2), (0.5, 0.1)].into_iter().enumerate() {
            let scale = n as f64 * omega * 0.5;
            let between = scale * scale * w * w / 12.0;
            let expect = between + omega * 2.0 * c;
            // The between-draw part is a sample variance of `draws` uniforms.
            let se = between * (0.8f64 / draws as f64).sqrt();
            assert!(
                (pred.cov[i][i] - expect).abs() < 4.0 * se,
                "{i}: {} vs {expect}",
                pred.cov[i][i]
            );
        }
    }
}
