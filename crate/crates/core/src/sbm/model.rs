use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{GraphSeed, Stream};

use super::law::ParamLaw;

const SUM_TOL: f64 = 1e-12;

/// Fixed block-model parameters: edge (i, j) appears with probability
/// ω·p_b if both endpoints sit in block b, ω·q otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub omega: f64,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub q: f64,
}

pub(crate) fn validate_geometry(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidParams("geometry vector is empty".into()));
    }
    if s.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "community sizes must be positive: {s:?}"
        )));
    }
    let total: f64 = s.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParams(format!(
            "community sizes sum to {total}, not 1"
        )));
    }
    Ok(())
}

fn validate_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "omega {omega} outside (0, 1]"
        )));
    }
    Ok(())
}

impl SbmParams {
    pub fn new(omega: f64, s: Vec<f64>, p: Vec<f64>, q: f64) -> Result<Self> {
        let params = SbmParams { omega, s, p, q };
        params.validate()?;
        Ok(params)
    }

    /// Single-block model.
    pub fn erdos_renyi(omega: f64, p: f64) -> Result<Self> {
        Self::new(omega, vec![1.0], vec![p], 0.0)
    }

    pub fn c(&self) -> usize {
        self.s.len()
    }

    /// Densities may be 0 here (empty blocks are legal to sample from); the
    /// theory routines reject models whose eigenstructure degenerates.
    pub fn validate(&self) -> Result<()> {
        validate_omega(self.omega)?;
        validate_geometry(&self.s)?;
        if self.p.len() != self.s.len() {
            return Err(Error::InvalidParams(format!(
                "{} densities for {} communities",
                self.p.len(),
                self.s.len()
            )));
        }
        if self
            .p
            .iter()
            .chain([&self.q])
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            return Err(Error::InvalidParams("densities must lie in [0, 1]".into()));
        }
        let top = self.p.iter().copied().fold(self.q, f64::max);
        if self.omega * top > 1.0 {
            return Err(Error::InvalidParams(format!(
                "edge probability {} exceeds 1",
                self.omega * top
            )));
        }
        Ok(())
    }

    /// Block containing position x under the cumulative-s partition.
    pub fn block_of(&self, x: f64) -> usize {
        let mut acc = 0.0;
        for (b, &sb) in self.s.iter().enumerate() {
            acc += sb;
            if x < acc {
                return b;
            }
        }
        self.s.len() - 1
    }

    /// Kernel f(x, y): p_b on diagonal block b, q across blocks.
    pub fn canonical_kernel_value(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (self.block_of(x), self.block_of(y));
        if a == b {
            self.p[a]
        } else {
            self.q
        }
    }

    /// Block label of each node i, placed at x = i/n.
    pub fn node_blocks(&self, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.block_of(i as f64 / n as f64)).collect()
    }
}

/// Samples one graph. Pair (i, j) is an edge iff its counter-based uniform
/// falls below ω·f(i/n, j/n).
pub fn sample_sbm(params: &SbmParams, n: usize, seed: GraphSeed) -> Result<Graph> {
    params.validate()?;
    if n < params.c() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} is smaller than the {} communities",
            params.c()
        )));
    }
    let c = params.c();
    let prob: Vec<f64> = (0..c * c)
        .map(|k| {
            let (a, b) = (k / c, k % c);
            params.omega * if a == b { params.p[a] } else { params.q }
        })
        .collect();
    let blocks = params.node_blocks(n);
    let u = seed.pairs();
    let mut edges = Vec::new();
    let mut counter = 0u64;
    for i in 0..n {
        let row = &prob[blocks[i] * c..(blocks[i] + 1) * c];
        for j in (i + 1)..n {
            if u.uniform(counter) < row[blocks[j]] {
                edges.push((i as u32, j as u32));
            }
            counter += 1;
        }
    }
    Ok(Graph::from_sorted_unique(n, edges))
}

/// `count` graphs, graph k seeded by (seed, k).
pub fn sample_sbm_batch(
    params: &SbmParams,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Graph>> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_sbm(params, n, GraphSeed::new(seed, k as u64)))
        .collect()
}

/// Block model whose within-community densities are drawn from `law` for
/// each graph, with cross density ε·min(p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpsbmModel {
    pub omega: f64,
    pub law: ParamLaw,
    pub epsilon: f64,
    pub s: Vec<f64>,
}

/// One parameter draw of an RPSBM.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDraw {
    pub p: Vec<f64>,
    pub q: f64,
    /// Coordinates of the raw draw that fell outside [0, 1].
    pub clamped: usize,
}

impl RpsbmModel {
    pub fn c(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self) -> Result<()> {
        validate_omega(self.omega)?;
        validate_geometry(&self.s)?;
        self.law.validate()?;
        if self.law.dim() != self.s.len() {
            return Err(Error::InvalidParams(format!(
                "law has {} coordinates for {} communities",
                self.law.dim(),
                self.s.len()
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon {} must be >= 0",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Draws p from the law (clamped to [0, 1]) and sets q = ε·min(p).
    pub fn draw_params(&self, seed: GraphSeed) -> Result<ParamDraw> {
        let mut rng = seed.stream(Stream::Params);
        let raw = self.law.draw(&mut rng);
        let mut clamped = 0;
        let p: Vec<f64> = raw
            .into_iter()
            .map(|x| {
                if (0.0..=1.0).contains(&x) {
                    x
                } else {
                    clamped += 1;
                    x.clamp(0.0, 1.0)
                }
            })
            .collect();
        let pmin = p.iter().copied().fold(f64::INFINITY, f64::min);
        let q = self.epsilon * pmin;
        if q > 1.0 {
            return Err(Error::InvalidParams(format!("cross density {q} exceeds 1")));
        }
        Ok(ParamDraw { p, q, clamped })
    }

    /// Fixed parameters for one draw.
    pub fn params_for(&self, draw: &ParamDraw) -> SbmParams {
        SbmParams {
            omega: self.omega,
            s: self.s.clone(),
            p: draw.p.clone(),
            q: draw.q,
        }
    }
}

pub fn sample_rpsbm_detailed(
    model: &RpsbmModel,
    n: usize,
    seed: GraphSeed,
) -> Result<(Graph, ParamDraw)> {
    model.validate()?;
    let draw = model.draw_params(seed)?;
    let g = sample_sbm(&model.params_for(&draw), n, seed)?;
    Ok((g, draw))
}

pub fn sample_rpsbm(model: &RpsbmModel, n: usize, seed: GraphSeed) -> Result<Graph> {
    sample_rpsbm_detailed(model, n, seed).map(|(g, _)| g)
}

/// Batch of RPSBM graphs together with the number of clamped coordinates.
pub fn sample_rpsbm_batch(
    model: &RpsbmModel,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<Graph>, usize)> {
    let out: Vec<(Graph, ParamDraw)> = (0..count)
        .into_par_iter()
        .map(|k| sample_rpsbm_detailed(model, n, GraphSeed::new(seed, k as u64)))
        .collect::<Result<_>>()?;
    let clamped = out.iter().map(|(_, d)| d.clamped).sum();
    Ok((out.into_iter().map(|(g, _)| g).collect(), clamped))
}
