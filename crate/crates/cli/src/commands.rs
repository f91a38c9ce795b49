use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use specsbm::contacts::{window_contacts, ContactStream, WindowSpec};
use specsbm::experiments::{run_experiment, ExperimentConfig, Scenario};
use specsbm::fit::kde::BandwidthRule;
use specsbm::fit::{
    critical_sample_size, fit_nonparametric_spectra, run_er_mixture_pipeline, sample_mixture,
    ErMixtureSpec, NonparametricOptions,
};
use specsbm::geometry::{cluster_estimates, detect_geometry_with, GeometryEstimate, GeometryOptions};
use specsbm::io::{from_framed_json, graph_file_name, read_corpus, spectra_csv, to_framed_json, ModelSpec};
use specsbm::moments::{
    classify_regimes, frechet_total_variance_of, moments_from_spectra, CorpusSpectra, DEFAULT_LARGE_RATIO,
};
use specsbm::{fit_parametric, FitOptions, Graph, LawFamily};

use crate::manifest::{config_digest, read_manifest, sha256_hex, FileDigest, Manifest, Outputs, MANIFEST_NAME};
use crate::{Cli, Command, Common, Family, Kernel};

/// 2 for infeasible fits, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .any(|e| e.downcast_ref::<specsbm::Error>().is_some_and(specsbm::Error::is_infeasible));
    if infeasible {
        2
    } else {
        1
    }
}

/// Settings read from `--config` by the fitting and diagnostic commands.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
struct FitConfig {
    omega_scale: f64,
    large_regime_simplification: bool,
    large_ratio: f64,
    /// Geometry detection penalty factor.
    beta: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            omega_scale: 1.0,
            large_regime_simplification: false,
            large_ratio: DEFAULT_LARGE_RATIO,
            beta: None,
        }
    }
}

impl FitConfig {
    fn options(&self) -> FitOptions {
        FitOptions {
            omega_scale: self.omega_scale,
            large_regime_simplification: self.large_regime_simplification,
            large_ratio: self.large_ratio,
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_framed_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fit_config(common: &Common) -> Result<FitConfig> {
    common.config.as_deref().map_or(Ok(FitConfig::default()), read_json)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn load_spectra(corpus: &Path, c: usize) -> Result<(Vec<Graph>, CorpusSpectra)> {
    let graphs = read_corpus(corpus).with_context(|| format!("loading corpus {}", corpus.display()))?;
    let cs = CorpusSpectra::compute(&graphs, c)?;
    Ok((graphs, cs))
}

fn geometry_of(graphs: &[Graph], beta: Option<f64>) -> Result<Vec<GeometryEstimate>> {
    graphs
        .iter()
        .map(|g| detect_geometry_with(g, GeometryOptions { beta }).map_err(Into::into))
        .collect()
}

/// Mean geometry of the graphs detected with exactly c communities.
fn mean_geometry(estimates: &[GeometryEstimate], c: usize) -> Result<Vec<f64>> {
    let matching: Vec<&GeometryEstimate> = estimates.iter().filter(|e| e.community_count == c).collect();
    ensure!(!matching.is_empty(), "no corpus graph was detected with {c} communities");
    let mut s: Vec<f64> = (0..c)
        .map(|i| matching.iter().map(|e| e.s[i]).sum::<f64>() / matching.len() as f64)
        .collect();
    let total: f64 = s.iter().sum();
    s.iter_mut().for_each(|x| *x /= total);
    Ok(s)
}

fn write_graphs(out: &mut Outputs, graphs: &[Graph]) -> Result<()> {
    for (k, g) in graphs.iter().enumerate() {
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf)?;
        out.write(&graph_file_name(k), &buf)?;
    }
    Ok(())
}

fn parse_bandwidth(text: &str) -> Result<BandwidthRule> {
    if text == "silverman" {
        return Ok(BandwidthRule::Silverman);
    }
    if let Some(h) = text.strip_prefix("fixed:") {
        let h: f64 = h.parse().with_context(|| format!("bad bandwidth value {h:?}"))?;
        ensure!(h >= 0.0 && h.is_finite(), "bandwidth must be a finite non-negative number");
        return Ok(BandwidthRule::Fixed { h });
    }
    bail!("bandwidth must be `silverman` or `fixed:<h>`, got {text:?}")
}

struct Run {
    seed: u64,
    outputs: Outputs,
}

fn name_and_common(command: &Command) -> (&'static str, &Common) {
    match command {
        Command::Sample { common, .. } => ("sample", common),
        Command::Spectra { common, .. } => ("spectra", common),
        Command::Moments { common, .. } => ("moments", common),
        Command::Fit { common, .. } => ("fit", common),
        Command::FitNp { common, .. } => ("fit-np", common),
        Command::Regimes { common, .. } => ("regimes", common),
        Command::Geometry { common, .. } => ("geometry", common),
        Command::CriticalN { common, .. } => ("critical-n", common),
        Command::Contacts { common, .. } => ("contacts", common),
        Command::Replicate { common, .. } => ("replicate", common),
        Command::Replay { common, .. } => ("replay", common),
    }
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Replay { manifest, common } = &cli.command {
        return replay(manifest, common);
    }
    let (name, common) = name_and_common(&cli.command);
    let common = common.clone();
    let config = common.config.as_deref().map(config_digest).transpose()?;
    let done = execute(cli.command, &common)?;
    let manifest = Manifest {
        format: 1,
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: name.to_string(),
        argv,
        cwd: std::env::current_dir()?,
        seed: done.seed,
        config,
        outputs: done.outputs.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(done.outputs.dir.join(MANIFEST_NAME), text)?;
    Ok(())
}

fn execute(command: Command, common: &Common) -> Result<Run> {
    let seed = common.seed.unwrap_or(0);
    let mut out = Outputs::new(&common.out)?;
    match command {
        Command::Sample { model, n, count, .. } => {
            let spec: ModelSpec = read_json(&model)?;
            spec.validate()?;
            let (graphs, clamped) = spec.sample(n, count, seed)?;
            if clamped > 0 {
                eprintln!("warning: {clamped} parameter coordinate(s) clamped to [0, 1]");
            }
            write_graphs(&mut out, &graphs)?;
            println!("wrote {count} graph(s) to {}", out.dir.display());
        }
        Command::Spectra { corpus, c, .. } => {
            let (_, cs) = load_spectra(&corpus, c)?;
            out.write("spectra.csv", spectra_csv(&cs).as_bytes())?;
            println!("wrote spectra of {} graph(s)", cs.len());
        }
        Command::Moments { corpus, c, .. } => {
            let (_, cs) = load_spectra(&corpus, c)?;
            let moments = moments_from_spectra(&cs)?;
            let frechet = if cs.len() >= 2 { Some(frechet_total_variance_of(&cs.spectra)?) } else { None };
            #[derive(Serialize)]
            struct Report<'a> {
                moments: &'a specsbm::SampleMoments,
                frechet_total_variance: Option<f64>,
            }
            let report = Report { moments: &moments, frechet_total_variance: frechet };
            out.write("moments.json", to_framed_json(&report)?.as_bytes())?;
            println!("mean spectrum {:?}", moments.mean_spectrum);
        }
        Command::Fit { corpus, c, family, s, s_from_geometry, .. } => {
            let cfg = fit_config(common)?;
            let (graphs, cs) = load_spectra(&corpus, c)?;
            let s = if s_from_geometry {
                Some(mean_geometry(&geometry_of(&graphs, cfg.beta)?, c)?)
            } else {
                s
            };
            let family = match family {
                Family::Dirac => LawFamily::Dirac,
                Family::Uniform => LawFamily::Uniform,
                Family::Beta => LawFamily::Beta,
                Family::Gauss => LawFamily::TruncGaussian,
            };
            let moments = moments_from_spectra(&cs)?;
            match fit_parametric(&moments, family, s.as_deref(), cfg.options()) {
                Ok(fit) => {
                    warn_all(&fit.warnings);
                    out.write("fit.json", to_framed_json(&fit)?.as_bytes())?;
                    println!("fitted omega {} law {:?}", fit.model.omega, fit.model.law);
                }
                Err(err @ specsbm::Error::SmallRegime { .. }) => {
                    if let specsbm::Error::SmallRegime { report, .. } = &err {
                        let text = to_framed_json(report)?;
                        fs::write(out.dir.join("regimes.json"), &text)?;
                        eprintln!("{text}");
                    }
                    return Err(err.into());
                }
                Err(err) => return Err(err.into()),
            }
        }
        Command::FitNp { corpus, c, bandwidth, kernel, s_from_geometry, unit_shift, resample, .. } => {
            let cfg = fit_config(common)?;
            let (graphs, cs) = load_spectra(&corpus, c)?;
            let geometries = if s_from_geometry {
                let uniform = vec![1.0 / c as f64; c];
                let estimates = geometry_of(&graphs, cfg.beta)?;
                let mismatched = estimates.iter().filter(|e| e.community_count != c).count();
                if mismatched > 0 {
                    eprintln!("warning: {mismatched} graph(s) not detected with {c} communities use s = 1/c");
                }
                Some(
                    estimates
                        .into_iter()
                        .map(|e| if e.community_count == c { e.s } else { uniform.clone() })
                        .collect(),
                )
            } else {
                None
            };
            let opts = NonparametricOptions {
                rule: parse_bandwidth(&bandwidth)?,
                kernel: match kernel {
                    Kernel::Uniform => LawFamily::Uniform,
                    Kernel::Gauss => LawFamily::TruncGaussian,
                },
                geometries,
                unit_shift,
            };
            let mix = fit_nonparametric_spectra(&cs, &opts)?;
            warn_all(&mix.warnings);
            out.write("mixture.json", to_framed_json(&mix)?.as_bytes())?;
            if let Some(count) = resample {
                let graphs = sample_mixture(&mix, cs.n, count, seed)?;
                let rs = CorpusSpectra::compute(&graphs, c)?;
                out.write("resampled_spectra.csv", spectra_csv(&rs).as_bytes())?;
            }
            println!("fitted a {}-component mixture", mix.components.len());
        }
        Command::Regimes { corpus, c, s, .. } => {
            let cfg = fit_config(common)?;
            let (_, cs) = load_spectra(&corpus, c)?;
            let s = s.unwrap_or_else(|| vec![1.0 / c as f64; c]);
            let report = classify_regimes(&moments_from_spectra(&cs)?, &s, cfg.large_ratio)?;
            out.write("regimes.json", to_framed_json(&report)?.as_bytes())?;
            println!("regimes {:?}", report.regimes);
        }
        Command::Geometry { corpus, beta, with_order, .. } => {
            let cfg = fit_config(common)?;
            let graphs = read_corpus(&corpus)?;
            let mut estimates = geometry_of(&graphs, beta.or(cfg.beta))?;
            if !with_order {
                estimates.iter_mut().for_each(|e| e.order.clear());
            }
            let clusters = cluster_estimates(&estimates);
            #[derive(Serialize)]
            struct Report<'a> {
                graphs: &'a [GeometryEstimate],
                clusters: &'a [specsbm::geometry::CountCluster],
            }
            let report = Report { graphs: &estimates, clusters: &clusters };
            out.write("geometry.json", to_framed_json(&report)?.as_bytes())?;
            for cl in &clusters {
                println!("{} communities: {} graph(s)", cl.community_count, cl.members.len());
            }
        }
        Command::CriticalN { spec, n_max, repetitions, curve_count, .. } => {
            let spec: ErMixtureSpec = read_json(&spec)?;
            let crit = critical_sample_size(&spec, n_max, repetitions, seed)?;
            let pipeline = run_er_mixture_pipeline(&spec, curve_count, seed.wrapping_add(1))?;
            #[derive(Serialize)]
            struct Report<'a> {
                critical: &'a specsbm::fit::CriticalResult,
                curve_count: usize,
                h_n: f64,
                estimates: &'a [specsbm::fit::ErEstimate],
            }
            let report = Report {
                critical: &crit,
                curve_count,
                h_n: pipeline.h_n,
                estimates: &pipeline.estimates,
            };
            out.write("critical.json", to_framed_json(&report)?.as_bytes())?;
            out.write("curves.csv", pipeline.curves.to_csv().as_bytes())?;
            println!("N_crit {} (mean {:.2})", crit.n_crit, crit.mean);
        }
        Command::Contacts { input, window, step, origin, .. } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let stream = ContactStream::parse(BufReader::new(file))?;
            warn_all(&stream.warnings);
            let spec = WindowSpec { window, step, origin };
            let graphs = window_contacts(&stream, spec)?;
            write_graphs(&mut out, &graphs)?;
            #[derive(Serialize)]
            struct Report<'a> {
                window: WindowSpec,
                graphs: usize,
                records: usize,
                node_ids: &'a [u64],
            }
            let report = Report {
                window: spec,
                graphs: graphs.len(),
                records: stream.records.len(),
                node_ids: &stream.node_ids,
            };
            out.write("contacts.json", to_framed_json(&report)?.as_bytes())?;
            println!("wrote {} window graph(s) over {} nodes", graphs.len(), stream.node_count());
        }
        Command::Replicate { scenario, .. } => {
            let mut cfg: ExperimentConfig = match &common.config {
                Some(path) => read_json(path)?,
                None => ExperimentConfig { seed, scenario: Scenario::by_name(&scenario)? },
            };
            ensure!(
                cfg.scenario.name() == scenario,
                "config describes scenario {:?}, not {scenario:?}",
                cfg.scenario.name()
            );
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let result = run_experiment(&cfg)?;
            out.write("report.json", to_framed_json(&result.report)?.as_bytes())?;
            for (name, body) in &result.files {
                out.write(name, body.as_bytes())?;
            }
            println!("{} finished; outputs in {}", result.scenario, out.dir.display());
            return Ok(Run { seed: cfg.seed, outputs: out });
        }
        Command::Replay { .. } => unreachable!("handled before dispatch"),
    }
    Ok(Run { seed, outputs: out })
}

/// Re-runs a manifest's command (into `--out` when given) and checks that
/// every recorded output is reproduced byte for byte.
fn replay(path: &Path, common: &Common) -> Result<()> {
    let m = read_manifest(path)?;
    if let Some(seed) = common.seed {
        ensure!(seed == m.seed, "--seed {seed} differs from the recorded seed {}", m.seed);
    }
    if let Some(recorded) = &m.config {
        let current = config_digest(common.config.as_deref().unwrap_or(Path::new(&recorded.path)))?;
        ensure!(current.sha256 == recorded.sha256, "config {} changed since the recorded run", current.path);
    }
    let mut argv = m.argv.clone();
    if let Some(cfg) = &common.config {
        set_flag(&mut argv, "--config", &fs::canonicalize(cfg)?.display().to_string());
    }
    // Without --out the outputs are rewritten next to the manifest.
    let target = if common.out != Path::new(".") {
        fs::create_dir_all(&common.out)?;
        fs::canonicalize(&common.out)?
    } else {
        fs::canonicalize(path)?.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    set_flag(&mut argv, "--out", &target.display().to_string());
    let back = std::env::current_dir()?;
    std::env::set_current_dir(&m.cwd).with_context(|| format!("entering {}", m.cwd.display()))?;
    let cli = <Cli as clap::Parser>::try_parse_from(&argv).map_err(|e| anyhow!("recorded arguments: {e}"));
    // The original manifest is left untouched; only the outputs are rewritten.
    let result = cli.and_then(|cli| {
        ensure!(!matches!(cli.command, Command::Replay { .. }), "manifest records a replay");
        let common = name_and_common(&cli.command).1.clone();
        execute(cli.command, &common).map(|_| ())
    });
    std::env::set_current_dir(back)?;
    result?;
    let mut mismatched = Vec::new();
    for FileDigest { path, sha256 } in &m.outputs {
        let bytes = fs::read(target.join(path)).with_context(|| format!("reading replayed {path}"))?;
        if &sha256_hex(&bytes) != sha256 {
            mismatched.push(path.clone());
        }
    }
    ensure!(mismatched.is_empty(), "replayed outputs differ: {}", mismatched.join(", "));
    println!("replay reproduced {} output(s) byte for byte", m.outputs.len());
    Ok(())
}

fn set_flag(argv: &mut Vec<String>, flag: &str, value: &str) {
    let prefix = format!("{flag}=");
    if let Some(k) = argv.iter().position(|a| a == flag) {
        if k + 1 < argv.len() {
            argv[k + 1] = value.to_string();
            return;
        }
    }
    if let Some(k) = argv.iter().position(|a| a.starts_with(&prefix)) {
        argv[k] = format!("{prefix}{value}");
        return;
    }
    argv.push(flag.to_string());
    argv.push(value.to_string());
}
