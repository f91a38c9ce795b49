//! End-to-end replication scenarios: corpus generation, fitting, resampling
//! and the resulting error tables and density curves.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::contacts::{window_contacts, ContactStream, WindowSpec};
use crate::error::{Error, Result};
use crate::fit::kde::{gaussian_kde_curve, grid_for, l1_normalized, sample_sd, silverman_scalar};
use crate::fit::{
    critical_sample_size, fit_nonparametric_spectra, fit_parametric, run_er_mixture_pipeline,
    sample_mixture, ErMixtureSpec, FitOptions, GraphMixture, NonparametricOptions,
};
use crate::geometry::{cluster_estimates, detect_geometry};
use crate::graph::Graph;
use crate::moments::{moments_from_spectra, CorpusSpectra, SampleMoments};
use crate::rng::derive_seed;
use crate::sbm::law::{LawFamily, ParamLaw};
use crate::sbm::model::{sample_rpsbm_batch, RpsbmModel};

pub const CURVE_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum Scenario {
    Recoverability(RecoverabilityParams),
    MixtureBeta(MixtureBetaParams),
    CriticalN(CriticalParams),
    Contacts(ContactsParams),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Recoverability(_) => "recoverability",
            Scenario::MixtureBeta(_) => "mixture-beta",
            Scenario::CriticalN(_) => "critical-n",
            Scenario::Contacts(_) => "contacts",
        }
    }

    /// Default parameters of a scenario by name. The contacts scenario has no
    /// default input file.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "recoverability" => Ok(Scenario::Recoverability(RecoverabilityParams::default())),
            "mixture-beta" => Ok(Scenario::MixtureBeta(MixtureBetaParams::default())),
            "critical-n" => Ok(Scenario::CriticalN(CriticalParams::default())),
            "contacts" => Err(Error::InvalidArgument(
                "the contacts scenario needs a config with a contact file".into(),
            )),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario {other:?}"
            ))),
        }
    }
}

fn default_omega() -> f64 {
    10.0 / 1000f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverabilityParams {
    pub n: usize,
    pub count: usize,
    pub omega: f64,
    pub epsilon: f64,
    pub s: Vec<f64>,
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub resample: usize,
}

impl Default for RecoverabilityParams {
    fn default() -> Self {
        RecoverabilityParams {
            n: 1000,
            count: 50,
            omega: default_omega(),
            epsilon: 0.05,
            s: vec![0.5, 0.5],
            center: vec![0.85, 0.575],
            width: vec![0.1, 0.05],
            resample: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureBetaParams {
    pub n: usize,
    pub count: usize,
    pub omega: f64,
    /// Cross density of every component, before the ω factor.
    pub q: f64,
    pub s: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub resample: usize,
}

impl Default for MixtureBetaParams {
    fn default() -> Self {
        MixtureBetaParams {
            n: 1000,
            count: 200,
            omega: default_omega(),
            q: 0.05,
            s: vec![0.5, 0.5],
            components: vec![
                vec![0.9, 0.5],
                vec![0.9, 0.3],
                vec![0.6, 0.5],
                vec![0.6, 0.3],
            ],
            resample: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticalParams {
    pub mixture: ErMixtureSpec,
    pub n_max: usize,
    pub repetitions: usize,
    /// Corpus size of the density-curve run.
    pub curve_count: usize,
}

impl Default for CriticalParams {
    fn default() -> Self {
        CriticalParams {
            mixture: ErMixtureSpec {
                n: 1000,
                omega: 2.0 / 1000f64.sqrt(),
                p: vec![0.75, 0.85],
            },
            n_max: 1000,
            repetitions: 5,
            curve_count: 125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactsParams {
    pub path: PathBuf,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Graphs drawn from the fitted mixture; defaults to the cluster size.
    #[serde(default)]
    pub resample: Option<usize>,
    /// Kernel centers at (λ - 1)/(n ω s); see `NonparametricOptions`.
    #[serde(default)]
    pub unit_shift: bool,
}

fn default_window() -> f64 {
    2700.0
}

fn default_step() -> f64 {
    20.0
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidArgument(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match &self.scenario {
            Scenario::Recoverability(p) => {
                positive("count", p.count)?;
                positive("resample", p.resample)?;
                if p.center.len() != p.s.len() || p.width.len() != p.s.len() {
                    return Err(Error::InvalidArgument(
                        "center, width and s must have equal lengths".into(),
                    ));
                }
                p.model()?.validate()
            }
            Scenario::MixtureBeta(p) => {
                positive("count", p.count)?;
                positive("resample", p.resample)?;
                p.mixture()?.validate()
            }
            Scenario::CriticalN(p) => {
                positive("curve_count", p.curve_count)?;
                positive("repetitions", p.repetitions)?;
                positive("n_max", p.n_max)?;
                p.mixture.validate()
            }
            Scenario::Contacts(p) => {
                if !p.path.is_file() {
                    return Err(Error::InvalidArgument(format!(
                        "contact file {} not found",
                        p.path.display()
                    )));
                }
                if !(p.window > 0.0 && p.step > 0.0) {
                    return Err(Error::InvalidArgument(
                        "window and step must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

impl RecoverabilityParams {
    pub fn model(&self) -> Result<RpsbmModel> {
        let law = ParamLaw::Uniform {
            center: self.center.clone(),
            width: self.width.clone(),
        };
        law.validate()?;
        Ok(RpsbmModel {
            omega: self.omega,
            law,
            epsilon: self.epsilon,
            s: self.s.clone(),
        })
    }
}

impl MixtureBetaParams {
    pub fn mixture(&self) -> Result<GraphMixture> {
        let components = self
            .components
            .iter()
            .map(|p| {
                let min = p.iter().copied().fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(Error::InvalidParams(
                        "mixture densities must be positive".into(),
                    ));
                }
                Ok(RpsbmModel {
                    omega: self.omega,
                    law: ParamLaw::Dirac { center: p.clone() },
                    epsilon: self.q / min,
                    s: self.s.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GraphMixture::uniform(components)
    }
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub quantity: String,
    pub component: usize,
    pub truth: f64,
    pub estimate: f64,
    pub rel_error: f64,
}

impl ErrorRow {
    pub fn new(quantity: &str, component: usize, truth: f64, estimate: f64) -> Self {
        ErrorRow {
            quantity: quantity.into(),
            component,
            truth,
            estimate,
            rel_error: rel_error(estimate, truth),
        }
    }
}

pub fn rel_error(estimate: f64, truth: f64) -> f64 {
    if truth == 0.0 {
        estimate.abs()
    } else {
        ((estimate - truth) / truth).abs()
    }
}

pub fn error_table_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::from("quantity,component,truth,estimate,rel_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.quantity,
            r.component + 1,
            r.truth,
            r.estimate,
            r.rel_error
        ));
    }
    out
}

/// Rows comparing λ̄ and diag Σ̂ of a resampled corpus to the original.
pub fn moment_rows(original: &SampleMoments, resampled: &SampleMoments) -> Vec<ErrorRow> {
    let c = original.c;
    let mut rows: Vec<ErrorRow> = (0..c)
        .map(|i| {
            ErrorRow::new(
                "mean_spectrum",
                i,
                original.mean_spectrum[i],
                resampled.mean_spectrum[i],
            )
        })
        .collect();
    rows.extend(
        (0..c).map(|i| ErrorRow::new("cov_diag", i, original.cov[i][i], resampled.cov[i][i])),
    );
    rows
}

/// Gaussian KDE curves of one eigenvalue coordinate in two corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeComparison {
    pub component: usize,
    pub z: Vec<f64>,
    pub f_corpus: Vec<f64>,
    pub f_resampled: Vec<f64>,
    /// L1 distance of the unit-mass normalized curves.
    pub l1: f64,
}

/// Per-coordinate KDE curves with Silverman bandwidths on a shared grid.
pub fn compare_spectra_kde(
    corpus: &[Vec<f64>],
    resampled: &[Vec<f64>],
) -> Result<Vec<KdeComparison>> {
    let c = corpus.first().map_or(0, Vec::len);
    if c == 0 || resampled.first().map_or(0, Vec::len) != c {
        return Err(Error::InvalidArgument(
            "spectra sets must be non-empty with equal c".into(),
        ));
    }
    (0..c)
        .map(|i| {
            let a: Vec<f64> = corpus.iter().map(|r| r[i]).collect();
            let b: Vec<f64> = resampled.iter().map(|r| r[i]).collect();
            let ha = bandwidth_sd(&a);
            let hb = bandwidth_sd(&b);
            let comps: Vec<(f64, f64)> = a
                .iter()
                .map(|&x| (x, ha))
                .chain(b.iter().map(|&x| (x, hb)))
                .collect();
            let z = grid_for(&comps, 4.0, CURVE_POINTS);
            let f_corpus = gaussian_kde_curve(&z, &a, ha);
            let f_resampled = gaussian_kde_curve(&z, &b, hb);
            let l1 = l1_normalized(&z, &f_corpus, &f_resampled)?;
            Ok(KdeComparison {
                component: i,
                z,
                f_corpus,
                f_resampled,
                l1,
            })
        })
        .collect()
}

fn bandwidth_sd(xs: &[f64]) -> f64 {
    let h = silverman_scalar(xs.len(), sample_sd(xs)).sqrt();
    // A constant sample still needs a visible bump.
    if h > 0.0 {
        h
    } else {
        1e-3 * xs[0].abs().max(1.0)
    }
}

pub fn kde_csv(curves: &[KdeComparison]) -> String {
    let mut out = String::from("component,z,f_corpus,f_resampled\n");
    for cmp in curves {
        for k in 0..cmp.z.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                cmp.component + 1,
                cmp.z[k],
                cmp.f_corpus[k],
                cmp.f_resampled[k]
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverabilityReport {
    pub truth: RpsbmModel,
    pub fitted: RpsbmModel,
    /// ω̂ times the fitted centers and widths; invariant under rescaling.
    pub scaled_center: Vec<f64>,
    pub scaled_width: Vec<f64>,
    pub corpus: SampleMoments,
    pub resampled: SampleMoments,
    pub errors: Vec<ErrorRow>,
    pub warnings: Vec<String>,
}

pub fn run_recoverability(
    p: &RecoverabilityParams,
    seed: u64,
) -> Result<(RecoverabilityReport, Vec<KdeComparison>)> {
    let truth = p.model()?;
    let c = truth.c();
    let (corpus, _) = sample_rpsbm_batch(&truth, p.n, p.count, derive_seed(seed, 0))?;
    let cs = CorpusSpectra::compute(&corpus, c)?;
    let m = moments_from_spectra(&cs)?;
    let fit = fit_parametric(&m, LawFamily::Uniform, Some(&p.s), FitOptions::default())?;
    let (resampled, _) = sample_rpsbm_batch(&fit.model, p.n, p.resample, derive_seed(seed, 1))?;
    let rs = CorpusSpectra::compute(&resampled, c)?;
    let rm = moments_from_spectra(&rs)?;

    let (scaled_center, scaled_width) = match &fit.model.law {
        ParamLaw::Uniform { center, width } => (
            center
                .iter()
                .map(|x| x * fit.model.omega)
                .collect::<Vec<_>>(),
            width
                .iter()
                .map(|x| x * fit.model.omega)
                .collect::<Vec<_>>(),
        ),
        _ => unreachable!("uniform fit returns a uniform law"),
    };
    let mut errors = Vec::new();
    for i in 0..c {
        errors.push(ErrorRow::new(
            "omega_center",
            i,
            p.omega * p.center[i],
            scaled_center[i],
        ));
    }
    for i in 0..c {
        errors.push(ErrorRow::new(
            "omega_width",
            i,
            p.omega * p.width[i],
            scaled_width[i],
        ));
    }
    errors.push(ErrorRow::new("epsilon", 0, p.epsilon, fit.model.epsilon));
    errors.extend(moment_rows(&m, &rm));
    let curves = compare_spectra_kde(&cs.spectra, &rs.spectra)?;
    Ok((
        RecoverabilityReport {
            truth,
            fitted: fit.model,
            scaled_center,
            scaled_width,
            corpus: m,
            resampled: rm,
            errors,
            warnings: fit.warnings,
        },
        curves,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureBetaReport {
    pub fitted: RpsbmModel,
    /// Sample correlation of λ_1 and λ_2 in the corpus.
    pub correlation: f64,
    /// Corpus members drawn from each mixture component.
    pub component_counts: Vec<usize>,
    pub corpus: SampleMoments,
    pub resampled: SampleMoments,
    pub errors: Vec<ErrorRow>,
    pub warnings: Vec<String>,
}

pub fn run_mixture_beta(
    p: &MixtureBetaParams,
    seed: u64,
) -> Result<(MixtureBetaReport, Vec<KdeComparison>)> {
    let mix = p.mixture()?;
    let c = p.s.len();
    let (corpus, chosen) =
        crate::fit::sample_mixture_detailed(&mix, p.n, p.count, derive_seed(seed, 0))?;
    let cs = CorpusSpectra::compute(&corpus, c)?;
    let m = moments_from_spectra(&cs)?;
    let fit = fit_parametric(&m, LawFamily::Beta, Some(&p.s), FitOptions::default())?;
    let (resampled, _) = sample_rpsbm_batch(&fit.model, p.n, p.resample, derive_seed(seed, 1))?;
    let rs = CorpusSpectra::compute(&resampled, c)?;
    let rm = moments_from_spectra(&rs)?;
    let correlation = if c >= 2 {
        correlation(&m.cov, 0, 1)
    } else {
        0.0
    };
    let mut component_counts = vec![0; mix.components.len()];
    for k in chosen {
        component_counts[k] += 1;
    }
    let curves = compare_spectra_kde(&cs.spectra, &rs.spectra)?;
    Ok((
        MixtureBetaReport {
            fitted: fit.model,
            correlation,
            component_counts,
            errors: moment_rows(&m, &rm),
            corpus: m,
            resampled: rm,
            warnings: fit.warnings,
        },
        curves,
    ))
}

pub fn correlation(cov: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let d = (cov[i][i] * cov[j][j]).sqrt();
    if d > 0.0 {
        cov[i][j] / d
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub per_repetition: Vec<usize>,
    pub mean: f64,
    pub n_crit: usize,
    pub sigma2_oracle: f64,
    pub curve_count: usize,
    pub h_n: f64,
}

pub fn run_critical(p: &CriticalParams, seed: u64) -> Result<(CriticalReport, String)> {
    let crit = critical_sample_size(&p.mixture, p.n_max, p.repetitions, derive_seed(seed, 0))?;
    let pipeline = run_er_mixture_pipeline(&p.mixture, p.curve_count, derive_seed(seed, 1))?;
    Ok((
        CriticalReport {
            per_repetition: crit.per_repetition,
            mean: crit.mean,
            n_crit: crit.n_crit,
            sigma2_oracle: crit.sigma2_oracle,
            curve_count: p.curve_count,
            h_n: pipeline.h_n,
        },
        pipeline.curves.to_csv(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactsReport {
    pub graphs: usize,
    pub nodes: usize,
    pub community_counts: Vec<usize>,
    pub clusters: Vec<crate::geometry::CountCluster>,
    /// Community count of the cluster that was fitted.
    pub fitted_count: usize,
    pub resampled: usize,
    pub l1: Vec<f64>,
    pub fallback_coordinates: usize,
    pub warnings: Vec<String>,
}

/// Windows the stream, estimates per-graph geometry, fits the kernel mixture
/// on the largest community-count cluster and resamples from it.
pub fn run_contacts(p: &ContactsParams, seed: u64) -> Result<(ContactsReport, Vec<KdeComparison>)> {
    let stream = ContactStream::parse(BufReader::new(File::open(&p.path)?))?;
    let mut warnings = stream.warnings.clone();
    let graphs = window_contacts(&stream, WindowSpec::new(p.window, p.step))?;
    if graphs.is_empty() {
        return Err(Error::Empty(
            "no complete window in the contact stream".into(),
        ));
    }
    let estimates = graphs
        .iter()
        .map(detect_geometry)
        .collect::<Result<Vec<_>>>()?;
    let clusters = cluster_estimates(&estimates);
    let biggest = clusters
        .iter()
        .max_by(|a, b| {
            a.members
                .len()
                .cmp(&b.members.len())
                .then(b.community_count.cmp(&a.community_count))
        })
        .expect("at least one cluster");
    let c = biggest.community_count;
    let members: Vec<Graph> = biggest.members.iter().map(|&k| graphs[k].clone()).collect();
    let kept: Vec<Graph> = members.into_iter().filter(|g| g.edge_count() > 0).collect();
    if kept.is_empty() {
        return Err(Error::Empty(
            "largest cluster has no graph with edges".into(),
        ));
    }
    let geometries: Vec<Vec<f64>> = biggest
        .members
        .iter()
        .filter(|&&k| graphs[k].edge_count() > 0)
        .map(|&k| estimates[k].s.clone())
        .collect();
    let cs = CorpusSpectra::compute(&kept, c)?;
    let opts = NonparametricOptions {
        geometries: Some(geometries),
        unit_shift: p.unit_shift,
        ..Default::default()
    };
    let mix = fit_nonparametric_spectra(&cs, &opts)?;
    warnings.extend(mix.warnings.iter().cloned());
    let count = p.resample.unwrap_or(kept.len());
    let resampled = sample_mixture(&mix, cs.n, count, derive_seed(seed, 0))?;
    let rs = CorpusSpectra::compute(&resampled, c)?;
    let curves = compare_spectra_kde(&cs.spectra, &rs.spectra)?;
    Ok((
        ContactsReport {
            graphs: graphs.len(),
            nodes: stream.node_count(),
            community_counts: estimates.iter().map(|e| e.community_count).collect(),
            clusters: clusters.clone(),
            fitted_count: c,
            resampled: count,
            l1: curves.iter().map(|k| k.l1).collect(),
            fallback_coordinates: mix.fallback.iter().flatten().filter(|&&f| f).count(),
            warnings,
        },
        curves,
    ))
}

/// Report plus named CSV files of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub scenario: &'static str,
    pub report: Value,
    pub files: Vec<(String, String)>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let seed = cfg.seed;
    let (report, files) = match &cfg.scenario {
        Scenario::Recoverability(p) => {
            let (r, curves) = run_recoverability(p, seed)?;
            let files = vec![
                ("errors.csv".into(), error_table_csv(&r.errors)),
                ("curves.csv".into(), kde_csv(&curves)),
            ];
            (serde_json::to_value(r)?, files)
        }
        Scenario::MixtureBeta(p) => {
            let (r, curves) = run_mixture_beta(p, seed)?;
            let files = vec![
                ("errors.csv".into(), error_table_csv(&r.errors)),
                ("curves.csv".into(), kde_csv(&curves)),
            ];
            (serde_json::to_value(r)?, files)
        }
        Scenario::CriticalN(p) => {
            let (r, curves) = run_critical(p, seed)?;
            (
                serde_json::to_value(r)?,
                vec![("curves.csv".into(), curves)],
            )
        }
        Scenario::Contacts(p) => {
            let (r, curves) = run_contacts(p, seed)?;
            (
                serde_json::to_value(r)?,
                vec![("curves.csv".into(), kde_csv(&curves))],
            )
        }
    };
    Ok(ExperimentOutput {
        scenario: cfg.scenario.name(),
        report,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 7, "scenario": "recoverability", "count": 10}"#)
                .unwrap();
        assert_eq!(cfg.seed, 7);
        match &cfg.scenario {
            Scenario::Recoverability(p) => {
                assert_eq!(p.count, 10);
                assert_eq!(p.n, 1000);
            }
            other => panic!("{other:?}"),
        }
        assert!(cfg.validate().is_ok());
        let missing: ExperimentConfig = serde_json::from_str(
            r#"{"seed": 1, "scenario": "contacts", "path": "/nonexistent/file"}"#,
        )
        .unwrap();
        assert!(missing.validate().is_err());
        assert!(Scenario::by_name("bogus").is_err());
    }

    #[test]
    fn small_recoverability_run_has_all_columns() {
        let p = RecoverabilityParams {
            n: 200,
            count: 8,
            resample: 8,
            ..Default::default()
        };
        let (r, curves) = run_recoverability(&p, 3).unwrap();
        let csv = error_table_csv(&r.errors);
        for q in [
            "omega_center",
            "omega_width",
            "epsilon",
            "mean_spectrum",
            "cov_diag",
        ] {
            assert!(csv.contains(q), "{q}");
        }
        assert_eq!(curves.len(), 2);
        assert!(curves.iter().all(|k| k.l1 >= 0.0 && k.l1 <= 2.0 + 1e-9));
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = vec![vec![1.0, 2.0], vec![1.5, 2.5], vec![0.7, 1.9]];
        let cmp = compare_spectra_kde(&a, &a).unwrap();
        assert!(cmp.iter().all(|k| k.l1 < 1e-12));
    }
}
