use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Law J of the within-community densities. Every variant is a product of
/// independent one-dimensional laws, one per community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamLaw {
    Dirac {
        center: Vec<f64>,
    },
    /// Uniform on [center - width/2, center + width/2] per coordinate.
    Uniform {
        center: Vec<f64>,
        width: Vec<f64>,
    },
    /// a + (b - a) · Beta(alpha, beta) per coordinate.
    Beta {
        a: Vec<f64>,
        b: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    },
    /// Normal(mean, sd) conditioned on [0, 1] per coordinate.
    TruncGaussian {
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
}

/// Family selector used by the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    Dirac,
    Uniform,
    Beta,
    TruncGaussian,
}

impl ParamLaw {
    pub fn dim(&self) -> usize {
        match self {
            ParamLaw::Dirac { center } => center.len(),
            ParamLaw::Uniform { center, .. } => center.len(),
            ParamLaw::Beta { a, .. } => a.len(),
            ParamLaw::TruncGaussian { mean, .. } => mean.len(),
        }
    }

    pub fn family(&self) -> LawFamily {
        match self {
            ParamLaw::Dirac { .. } => LawFamily::Dirac,
            ParamLaw::Uniform { .. } => LawFamily::Uniform,
            ParamLaw::Beta { .. } => LawFamily::Beta,
            ParamLaw::TruncGaussian { .. } => LawFamily::TruncGaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.dim();
        if c == 0 {
            return Err(Error::InvalidParams("law has no coordinates".into()));
        }
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ParamLaw::Dirac { center } => {
                if !finite(center) {
                    return bad("non-finite Dirac center".into());
                }
            }
            ParamLaw::Uniform { center, width } => {
                if width.len() != c || !finite(center) || !finite(width) {
                    return bad("uniform law needs finite center and width of equal length".into());
                }
                if let Some(i) = (0..c).find(|&i| width[i] < 0.0) {
                    return bad(format!("negative width on coordinate {i}"));
                }
            }
            ParamLaw::Beta { a, b, alpha, beta } => {
                if b.len() != c || alpha.len() != c || beta.len() != c {
                    return bad("beta law fields differ in length".into());
                }
                for i in 0..c {
                    if !(a[i].is_finite() && b[i].is_finite() && a[i] <= b[i]) {
                        return bad(format!("beta range [a, b] invalid on coordinate {i}"));
                    }
                    if !(alpha[i] > 0.0
                        && beta[i] > 0.0
                        && alpha[i].is_finite()
                        && beta[i].is_finite())
                    {
                        return bad(format!("beta shapes must be positive on coordinate {i}"));
                    }
                }
            }
            ParamLaw::TruncGaussian { mean, sd } => {
                if sd.len() != c || !finite(mean) || !finite(sd) {
                    return bad(
                        "truncated Gaussian needs finite mean and sd of equal length".into(),
                    );
                }
                if let Some(i) = (0..c).find(|&i| sd[i] < 0.0) {
                    return bad(format!("negative sd on coordinate {i}"));
                }
            }
        }
        // Support must meet [0, 1] somewhere.
        let (lo, hi) = self.support();
        if let Some(i) = (0..c).find(|&i| hi[i] < 0.0 || lo[i] > 1.0) {
            return Err(Error::InvalidParams(format!(
                "support of coordinate {i} is [{}, {}], disjoint from [0, 1]",
                lo[i], hi[i]
            )));
        }
        Ok(())
    }

    /// Per-coordinate support before clamping. The truncated Gaussian reports
    /// its truncation interval.
    pub fn support(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ParamLaw::Dirac { center } => (center.clone(), center.clone()),
            ParamLaw::Uniform { center, width } => (
                center.iter().zip(width).map(|(c, w)| c - w / 2.0).collect(),
                center.iter().zip(width).map(|(c, w)| c + w / 2.0).collect(),
            ),
            ParamLaw::Beta { a, b, .. } => (a.clone(), b.clone()),
            ParamLaw::TruncGaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(&m, &s)| if s == 0.0 { (m, m) } else { (0.0, 1.0) })
                .unzip(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            ParamLaw::Dirac { center } => center.clone(),
            ParamLaw::Uniform { center, .. } => center.clone(),
            ParamLaw::Beta { a, b, alpha, beta } => (0..a.len())
                .map(|i| a[i] + (b[i] - a[i]) * alpha[i] / (alpha[i] + beta[i]))
                .collect(),
            ParamLaw::TruncGaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(&m, &s)| trunc_normal_moments(m, s).0)
                .collect(),
        }
    }

    pub fn variance(&self) -> Vec<f64> {
        match self {
            ParamLaw::Dirac { center } => vec![0.0; center.len()],
            ParamLaw::Uniform { width, .. } => width.iter().map(|w| w * w / 12.0).collect(),
            ParamLaw::Beta { a, b, alpha, beta } => (0..a.len())
                .map(|i| {
                    let (al, be) = (alpha[i], beta[i]);
                    let r = b[i] - a[i];
                    r * r * al * be / ((al + be) * (al + be) * (al + be + 1.0))
                })
                .collect(),
            ParamLaw::TruncGaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(&m, &s)| trunc_normal_moments(m, s).1)
                .collect(),
        }
    }

    /// One raw draw; values may leave [0, 1] for uniform and beta laws whose
    /// support does. Callers clamp.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ParamLaw::Dirac { center } => center.clone(),
            ParamLaw::Uniform { center, width } => center
                .iter()
                .zip(width)
                .map(|(&c, &w)| {
                    if w == 0.0 {
                        c
                    } else {
                        c + w * (rng.gen::<f64>() - 0.5)
                    }
                })
                .collect(),
            ParamLaw::Beta { a, b, alpha, beta } => (0..a.len())
                .map(|i| {
                    if a[i] == b[i] {
                        return a[i];
                    }
                    let x = Beta::new(alpha[i], beta[i])
                        .expect("validated shapes")
                        .sample(rng);
                    a[i] + (b[i] - a[i]) * x
                })
                .collect(),
            ParamLaw::TruncGaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(&m, &s)| trunc_normal_draw(m, s, rng.gen::<f64>()))
                .collect(),
        }
    }

    /// The law of P / k, for the scale equivalence (ω, P) ↦ (kω, P/k).
    pub fn scaled_down(&self, k: f64) -> ParamLaw {
        let d = |v: &[f64]| v.iter().map(|x| x / k).collect::<Vec<_>>();
        match self {
            ParamLaw::Dirac { center } => ParamLaw::Dirac { center: d(center) },
            ParamLaw::Uniform { center, width } => ParamLaw::Uniform {
                center: d(center),
                width: d(width),
            },
            ParamLaw::Beta { a, b, alpha, beta } => ParamLaw::Beta {
                a: d(a),
                b: d(b),
                alpha: alpha.clone(),
                beta: beta.clone(),
            },
            // Truncation at 1 does not commute with scaling; only the
            // untruncated parameters are rescaled.
            ParamLaw::TruncGaussian { mean, sd } => ParamLaw::TruncGaussian {
                mean: d(mean),
                sd: d(sd),
            },
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Mean and variance of Normal(m, s) conditioned on [0, 1].
pub fn trunc_normal_moments(m: f64, s: f64) -> (f64, f64) {
    if s == 0.0 {
        return (m.clamp(0.0, 1.0), 0.0);
    }
    let z = std_normal();
    let (al, be) = ((0.0 - m) / s, (1.0 - m) / s);
    let mass = z.cdf(be) - z.cdf(al);
    if mass < 1e-300 {
        let edge = if m > 1.0 { 1.0 } else { 0.0 };
        return (edge, 0.0);
    }
    let (pa, pb) = (z.pdf(al), z.pdf(be));
    let shift = (pa - pb) / mass;
    let mean = m + s * shift;
    let var = s * s * (1.0 + (al * pa - be * pb) / mass - shift * shift);
    (mean, var.max(0.0))
}

/// Inverse-CDF draw from Normal(m, s) conditioned on [0, 1], driven by `u` in [0, 1).
pub fn trunc_normal_draw(m: f64, s: f64, u: f64) -> f64 {
    if s == 0.0 {
        return m.clamp(0.0, 1.0);
    }
    let z = std_normal();
    let (fa, fb) = (z.cdf((0.0 - m) / s), z.cdf((1.0 - m) / s));
    if fb - fa < 1e-300 {
        return if m > 1.0 { 1.0 } else { 0.0 };
    }
    let target = (fa + u * (fb - fa)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    (m + s * z.inverse_cdf(target)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_draws_stay_in_support() {
        let law = ParamLaw::Uniform {
            center: vec![0.85],
            width: vec![0.1],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let p = law.draw(&mut rng)[0];
            assert!((0.8..=0.9).contains(&p));
        }
    }

    #[test]
    fn degenerate_beta_is_dirac() {
        let law = ParamLaw::Beta {
            a: vec![0.4],
            b: vec![0.4],
            alpha: vec![2.0],
            beta: vec![3.0],
        };
        law.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(law.draw(&mut rng), vec![0.4]);
        assert_eq!(law.mean(), vec![0.4]);
        assert_eq!(law.variance(), vec![0.0]);
    }

    #[test]
    fn trunc_normal_moments_match_monte_carlo() {
        let (m, s) = (0.9, 0.2);
        let (mean, var) = trunc_normal_moments(m, s);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| trunc_normal_draw(m, s, rng.gen())).collect();
        let em = xs.iter().sum::<f64>() / n as f64;
        let ev = xs.iter().map(|x| (x - em) * (x - em)).sum::<f64>() / (n - 1) as f64;
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!((em - mean).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((ev - var).abs() / var < 0.02);
    }

    #[test]
    fn disjoint_support_rejected() {
        let law = ParamLaw::Uniform {
            center: vec![1.5],
            width: vec![0.1],
        };
        assert!(law.validate().is_err());
        let law = ParamLaw::Dirac { center: vec![-0.1] };
        assert!(law.validate().is_err());
    }

    #[test]
    fn json_schema_uses_kind_tag() {
        let law = ParamLaw::Uniform {
            center: vec![0.5],
            width: vec![0.1],
        };
        let s = serde_json::to_string(&law).unwrap();
        assert_eq!(s, r#"{"kind":"uniform","center":[0.5],"width":[0.1]}"#);
        let back: ParamLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, law);
    }
}
