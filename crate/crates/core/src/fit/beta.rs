use crate::error::{Error, Result};
use crate::sbm::law::ParamLaw;

/// Shifted-beta law on [a_i, b_i] per coordinate with the given mean and
/// variance, by inverting the standardized moments.
pub fn fit_beta_product(mean: &[f64], var: &[f64], a: &[f64], b: &[f64]) -> Result<ParamLaw> {
    let c = mean.len();
    if var.len() != c || a.len() != c || b.len() != c {
        return Err(Error::InvalidArgument(
            "beta inputs differ in length".into(),
        ));
    }
    let mut alpha = Vec::with_capacity(c);
    let mut beta = Vec::with_capacity(c);
    for i in 0..c {
        let range = b[i] - a[i];
        if !(range > 0.0) || !(a[i] < mean[i] && mean[i] < b[i]) {
            return Err(Error::InvalidArgument(format!(
                "beta mean {} not strictly inside [{}, {}] on coordinate {i}",
                mean[i], a[i], b[i]
            )));
        }
        if !(var[i] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta variance must be positive on coordinate {i}"
            )));
        }
        let m = (mean[i] - a[i]) / range;
        let v = var[i] / (range * range);
        let common = m * (1.0 - m) / v - 1.0;
        if common <= 0.0 {
            return Err(Error::BetaVariance { index: i });
        }
        alpha.push(m * common);
        beta.push((1.0 - m) * common);
    }
    Ok(ParamLaw::Beta {
        a: a.to_vec(),
        b: b.to_vec(),
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_example() {
        let law = fit_beta_product(&[0.5], &[0.05], &[0.0], &[1.0]).unwrap();
        let ParamLaw::Beta { alpha, beta, .. } = law else {
            unreachable!()
        };
        assert!((alpha[0] - 2.0).abs() < 1e-12 && (beta[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_much_variance_near_edge() {
        assert!(matches!(
            fit_beta_product(&[0.01], &[0.05], &[0.0], &[1.0]),
            Err(Error::BetaVariance { index: 0 })
        ));
        assert!(fit_beta_product(&[0.0], &[0.05], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn sampled_moments_round_trip() {
        let (mean, var) = ([0.62, 0.3], [0.002, 0.0005]);
        let law = fit_beta_product(&mean, &var, &[0.5, 0.25], &[0.75, 0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 100_000;
        let draws: Vec<Vec<f64>> = (0..m).map(|_| law.draw(&mut rng)).collect();
        for i in 0..2 {
            let xs: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            let mu = xs.iter().sum::<f64>() / m as f64;
            let s2 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1) as f64;
            assert!((mu - mean[i]).abs() < 4.0 * (var[i] / m as f64).sqrt());
            // Var of the sample variance is below 2σ⁴/(m-1) + κ/m; 5% is ≫ 4 SE here.
            assert!((s2 / var[i] - 1.0).abs() < 0.05);
        }
    }
}
