use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{classify_regimes, RegimeReport, SampleMoments, DEFAULT_LARGE_RATIO};
use crate::sbm::law::{LawFamily, ParamLaw};
use crate::sbm::model::{validate_geometry, RpsbmModel};

use super::beta::fit_beta_product;

pub const EPSILON_MAX: f64 = 0.2;
pub const EPSILON_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// ω = omega_scale · ρ̄.
    pub omega_scale: f64,
    /// Drop the 2λ̄_i/(n³ω²s_i³) term from the variance of J.
    pub large_regime_simplification: bool,
    /// Medium/large cut for the regime report.
    pub large_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            omega_scale: 1.0,
            large_regime_simplification: false,
            large_ratio: DEFAULT_LARGE_RATIO,
        }
    }
}

/// Mean vector and covariance matrix of J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JMoments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// E_J[P_i] ∈ [0, 1] at the requested ω.
    pub geometric: Vec<bool>,
    /// Σ̂_ii ≥ 2λ̄_i/(n s_i), i.e. not in the small-variance regime.
    pub variance: Vec<bool>,
    pub regimes: RegimeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted model, rescaled if needed so that the law lives in [0, 1].
    pub model: RpsbmModel,
    /// Moments of J at the requested ω (`omega_fit`).
    #[serde(rename = "moments_J")]
    pub moments_j: JMoments,
    pub omega_fit: f64,
    /// Factor k applied as (ω, P) ↦ (kω, P/k) to reach the returned model.
    pub rescale: f64,
    /// ε before clamping to [0, EPSILON_MAX].
    pub epsilon_raw: f64,
    pub feasibility: Feasibility,
    pub warnings: Vec<String>,
}

/// Moment-matching fit of an RPSBM with a law from `family`.
pub fn fit_parametric(
    m: &SampleMoments,
    family: LawFamily,
    s_override: Option<&[f64]>,
    opts: FitOptions,
) -> Result<FitResult> {
    if m.n_graphs < 2 {
        return Err(Error::InvalidArgument(format!(
            "parametric fit needs at least 2 graphs, got {}",
            m.n_graphs
        )));
    }
    let c = m.c;
    let s: Vec<f64> = match s_override {
        Some(s) => s.to_vec(),
        None => vec![1.0 / c as f64; c],
    };
    if s.len() != c {
        return Err(Error::InvalidArgument(format!(
            "geometry of length {} for c = {c}",
            s.len()
        )));
    }
    validate_geometry(&s)?;
    if !(opts.omega_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "omega scale must be positive".into(),
        ));
    }

    let regimes = classify_regimes(m, &s, opts.large_ratio)?;
    let small = regimes.small_indices();
    if family != LawFamily::Dirac && !small.is_empty() {
        return Err(Error::SmallRegime {
            indices: small,
            report: regimes,
        });
    }

    let omega = opts.omega_scale * m.mean_density;
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(
            "corpus has zero mean density".into(),
        ));
    }
    let n = m.n as f64;
    let mean: Vec<f64> = (0..c)
        .map(|i| m.mean_spectrum[i] / (n * omega * s[i]))
        .collect();
    let mut cov = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            cov[i][j] = m.cov[i][j] / (n * n * omega * omega * s[i] * s[j]);
        }
        if !opts.large_regime_simplification {
            cov[i][i] -= 2.0 * m.mean_spectrum[i] / (n * n * n * omega * omega * s[i].powi(3));
        }
    }

    let mut warnings = Vec::new();
    let (epsilon_raw, epsilon) = cross_ratio(&mean, &s, 1.0 / opts.omega_scale, &mut warnings);

    let var: Vec<f64> = (0..c).map(|i| cov[i][i]).collect();
    let law = match family {
        LawFamily::Dirac => ParamLaw::Dirac {
            center: mean.clone(),
        },
        LawFamily::Uniform => ParamLaw::Uniform {
            center: mean.clone(),
            width: var.iter().map(|v| (12.0 * v.max(0.0)).sqrt()).collect(),
        },
        LawFamily::TruncGaussian => ParamLaw::TruncGaussian {
            mean: mean.clone(),
            sd: var.iter().map(|v| v.max(0.0).sqrt()).collect(),
        },
        LawFamily::Beta => {
            let a: Vec<f64> = (0..c)
                .map(|i| m.min_spectrum[i] / (n * omega * s[i]))
                .collect();
            let b: Vec<f64> = (0..c)
                .map(|i| m.max_spectrum[i] / (n * omega * s[i]))
                .collect();
            beta_with_degenerate(&mean, &var, &a, &b, &mut warnings)?
        }
    };

    let (model_omega, model_law, rescale) = canonical_scale(omega, law, &mean, &mut warnings)?;
    let model = RpsbmModel {
        omega: model_omega,
        law: model_law,
        epsilon,
        s: s.clone(),
    };
    model.validate()?;

    let feasibility = Feasibility {
        geometric: mean.iter().map(|e| (0.0..=1.0).contains(e)).collect(),
        variance: (0..c).map(|i| !small.contains(&i)).collect(),
        regimes,
    };
    Ok(FitResult {
        model,
        moments_j: JMoments { mean, cov },
        omega_fit: omega,
        rescale,
        epsilon_raw,
        feasibility,
        warnings,
    })
}

/// ε from the density constraint Σ s_i² E_i + q (1 - Σ s_i²) = target with
/// q = ε min E. `target` is ρ̄/ω. Returns (raw, clamped).
pub(crate) fn cross_ratio(
    mean: &[f64],
    s: &[f64],
    target: f64,
    warnings: &mut Vec<String>,
) -> (f64, f64) {
    let s2: f64 = s.iter().map(|x| x * x).sum();
    let off = 1.0 - s2;
    let within: f64 = mean.iter().zip(s).map(|(e, si)| e * si * si).sum();
    let emin = mean.iter().copied().fold(f64::INFINITY, f64::min);
    if off <= 1e-15 || emin <= 0.0 {
        if s.len() == 1 {
            warnings
                .push("single community: no cross density to estimate, epsilon set to 0".into());
        } else {
            warnings.push("cross-density ratio undefined, epsilon set to 0".into());
        }
        return (0.0, 0.0);
    }
    let raw = (target - within) / (emin * off);
    let clamped = raw.clamp(0.0, EPSILON_MAX);
    if raw < 0.0 {
        warnings.push(format!(
            "epsilon estimate {raw:.4} is negative, clamped to 0"
        ));
    } else if raw > EPSILON_MAX {
        warnings.push(format!(
            "epsilon estimate {raw:.4} exceeds {EPSILON_MAX}, clamped"
        ));
    } else if raw > EPSILON_WARN {
        warnings.push(format!(
            "epsilon estimate {raw:.4} is large; expansions assume it is small"
        ));
    }
    (raw, clamped)
}

fn beta_with_degenerate(
    mean: &[f64],
    var: &[f64],
    a: &[f64],
    b: &[f64],
    warnings: &mut Vec<String>,
) -> Result<ParamLaw> {
    let c = mean.len();
    let live: Vec<usize> = (0..c).filter(|&i| var[i] > 0.0 && a[i] < b[i]).collect();
    let sub = |v: &[f64]| live.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let fitted =
        fit_beta_product(&sub(mean), &sub(var), &sub(a), &sub(b)).map_err(|e| match e {
            Error::BetaVariance { index } => Error::BetaVariance { index: live[index] },
            other => other,
        })?;
    let ParamLaw::Beta {
        a: fa,
        b: fb,
        alpha: fal,
        beta: fbe,
    } = fitted
    else {
        unreachable!("fit_beta_product returns a beta law")
    };
    let (mut la, mut lb, mut al, mut be) =
        (mean.to_vec(), mean.to_vec(), vec![1.0; c], vec![1.0; c]);
    for (slot, &i) in live.iter().enumerate() {
        la[i] = fa[slot];
        lb[i] = fb[slot];
        al[i] = fal[slot];
        be[i] = fbe[slot];
    }
    for i in (0..c).filter(|i| !live.contains(i)) {
        warnings.push(format!(
            "coordinate {i} has zero variance; beta degenerates to a point mass"
        ));
    }
    Ok(ParamLaw::Beta {
        a: la,
        b: lb,
        alpha: al,
        beta: be,
    })
}

/// Applies the scale equivalence (ω, P) ↦ (kω, P/k) with the smallest k ≥ 1
/// that puts the law's support inside [0, 1]. If that would push ω above 1,
/// settles for ω = 1 provided the means fit, and warns that draws will be
/// clamped. Errors when even the means cannot be brought into [0, 1].
pub(crate) fn canonical_scale(
    omega: f64,
    law: ParamLaw,
    mean: &[f64],
    warnings: &mut Vec<String>,
) -> Result<(f64, ParamLaw, f64)> {
    let negative: Vec<usize> = (0..mean.len()).filter(|&i| mean[i] < 0.0).collect();
    if !negative.is_empty() {
        let values = negative.iter().map(|&i| mean[i]).collect();
        return Err(Error::GeometryInfeasible {
            indices: negative,
            values,
        });
    }
    let (lo, hi) = law.support();
    let upper = hi.iter().copied().fold(1.0, f64::max);
    let k = if omega * upper <= 1.0 {
        upper
    } else {
        let top_mean = mean.iter().copied().fold(0.0, f64::max);
        if omega * top_mean > 1.0 {
            let indices: Vec<usize> = (0..mean.len()).filter(|&i| omega * mean[i] > 1.0).collect();
            let values = indices.iter().map(|&i| omega * mean[i]).collect();
            return Err(Error::GeometryInfeasible { indices, values });
        }
        warnings.push(
            "law support exceeds the largest admissible scale; draws above 1 are clamped".into(),
        );
        1.0 / omega
    };
    if lo.iter().any(|&x| x < 0.0) {
        warnings.push("law support extends below 0; such draws are clamped".into());
    }
    if k > 1.0 {
        warnings.push(format!(
            "rescaled omega by {k:.6} so that the law lies in [0, 1]"
        ));
        Ok((omega * k, law.scaled_down(k), k))
    } else {
        Ok((omega, law, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Regime;

    fn moments(mean: Vec<f64>, cov: Vec<Vec<f64>>, rho: f64, n: usize) -> SampleMoments {
        let c = mean.len();
        SampleMoments {
            min_spectrum: mean.iter().map(|m| m * 0.9).collect(),
            max_spectrum: mean.iter().map(|m| m * 1.1).collect(),
            mean_spectrum: mean,
            cov,
            mean_density: rho,
            n_graphs: 10,
            n,
            c,
            degenerate: false,
        }
    }

    #[test]
    fn single_block_arithmetic() {
        // n = 100, ω = ρ̄ = 1, λ̄ = 50, Σ̂ large enough to be feasible.
        let m = moments(vec![50.0], vec![vec![4.0]], 1.0, 100);
        let fit = fit_parametric(&m, LawFamily::Uniform, None, FitOptions::default()).unwrap();
        assert_eq!(fit.moments_j.mean, vec![0.5]);
        assert_eq!(fit.model.epsilon, 0.0);
        assert!(fit.warnings.iter().any(|w| w.contains("single community")));
        // Var_J = 4/100² - 2·50/100³ = 3e-4.
        assert!((fit.moments_j.cov[0][0] - 3e-4).abs() < 1e-15);
    }

    #[test]
    fn epsilon_step_example() {
        let mut w = Vec::new();
        let (raw, clamped) = cross_ratio(&[1.0, 1.0], &[0.5, 0.5], 1.0, &mut w);
        assert_eq!(raw, 1.0);
        assert_eq!(clamped, EPSILON_MAX);
        assert!(!w.is_empty());
    }

    #[test]
    fn small_regime_is_an_error_with_report() {
        let m = moments(
            vec![50.0, 30.0],
            vec![vec![0.1, 0.0], vec![0.0, 9.0]],
            0.5,
            100,
        );
        match fit_parametric(&m, LawFamily::Uniform, None, FitOptions::default()) {
            Err(Error::SmallRegime { indices, report }) => {
                assert_eq!(indices, vec![0]);
                assert_eq!(report.regimes[0], Regime::Small);
            }
            other => panic!("expected small-regime error, got {other:?}"),
        }
    }

    #[test]
    fn dirac_zero_variance_returns_step_seven_means() {
        let m = moments(vec![30.0, 20.0], vec![vec![0.0; 2]; 2], 0.4, 200);
        let fit = fit_parametric(&m, LawFamily::Dirac, None, FitOptions::default()).unwrap();
        let expect: Vec<f64> = [30.0, 20.0]
            .iter()
            .map(|l| l / (200.0 * 0.4 * 0.5))
            .collect();
        assert_eq!(fit.moments_j.mean, expect);
        assert_eq!(fit.feasibility.variance, vec![false, false]);
    }

    #[test]
    fn infeasible_geometry() {
        // λ̄ beyond n s: no ω ≤ 1 brings the mean below 1.
        let m = moments(
            vec![80.0, 10.0],
            vec![vec![50.0, 0.0], vec![0.0, 5.0]],
            0.2,
            100,
        );
        assert!(matches!(
            fit_parametric(&m, LawFamily::Uniform, None, FitOptions::default()),
            Err(Error::GeometryInfeasible { .. })
        ));
    }

    #[test]
    fn scale_invariance_of_products() {
        let m = moments(
            vec![130.0, 90.0],
            vec![vec![25.0, 0.3], vec![0.3, 5.5]],
            0.12,
            1000,
        );
        let reference: Vec<f64> = {
            let f = fit_parametric(&m, LawFamily::Uniform, None, FitOptions::default()).unwrap();
            f.moments_j.mean.iter().map(|e| e * f.omega_fit).collect()
        };
        for scale in [0.5, 2.0, 3.7] {
            let opts = FitOptions {
                omega_scale: scale,
                ..Default::default()
            };
            let f = fit_parametric(&m, LawFamily::Uniform, None, opts).unwrap();
            for i in 0..2 {
                let a = f.moments_j.mean[i] * f.omega_fit;
                let b = f.model.law.mean()[i] * f.model.omega;
                assert!((a - reference[i]).abs() <= 1e-12 * reference[i]);
                assert!((b - reference[i]).abs() <= 1e-12 * reference[i]);
            }
        }
    }
}
