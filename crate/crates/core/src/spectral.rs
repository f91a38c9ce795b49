use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{self, EigenPairs, KrylovOptions};

/// Graphs up to this size are decomposed densely when many pairs are needed.
pub const DENSE_LIMIT: usize = 2048;
/// Below this size even a short truncated spectrum uses the dense solver.
pub const SMALL_DENSE: usize = 256;

/// Leading adjacency eigenvalues of one graph, non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSignature {
    pub values: Vec<f64>,
    pub c: usize,
    pub n: usize,
}

impl SpectralSignature {
    pub fn new(values: Vec<f64>, n: usize) -> Result<Self> {
        if values.is_empty() || values.len() > n {
            return Err(Error::TruncationOutOfRange { c: values.len(), n });
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "spectral values must be non-increasing".into(),
            ));
        }
        Ok(SpectralSignature {
            c: values.len(),
            values,
            n,
        })
    }
}

fn use_dense(n: usize, k: usize) -> bool {
    n <= SMALL_DENSE || (n <= DENSE_LIMIT && 4 * k > n)
}

/// The `c` algebraically largest adjacency eigenvalues.
pub fn spectrum(g: &Graph, c: usize) -> Result<SpectralSignature> {
    let n = g.n();
    if c == 0 || c > n {
        return Err(Error::TruncationOutOfRange { c, n });
    }
    let mut values = if use_dense(n, c) {
        let mut all = linalg::sym_eigenvalues_desc(g.adjacency());
        all.truncate(c);
        all
    } else {
        linalg::top_eigenpairs(n, c, |x, y| g.mul_vec(x, y), KrylovOptions::default())?.values
    };
    clean(&mut values, n);
    Ok(SpectralSignature { values, c, n })
}

/// All n eigenvalues.
pub fn full_spectrum(g: &Graph) -> SpectralSignature {
    let n = g.n();
    let mut values = linalg::sym_eigenvalues_desc(g.adjacency());
    clean(&mut values, n);
    SpectralSignature { values, c: n, n }
}

fn clean(values: &mut [f64], n: usize) {
    let bound = (n as f64 - 1.0).max(0.0);
    for v in values.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
    // Solver output is sorted already; this only guards against rounding swaps.
    values.sort_by(|a, b| b.total_cmp(a));
}

/// Spectra of a corpus, computed in parallel, in corpus order.
pub fn corpus_spectra(corpus: &[Graph], c: usize) -> Result<Vec<SpectralSignature>> {
    corpus.par_iter().map(|g| spectrum(g, c)).collect()
}

/// Truncated adjacency-spectral pseudometric: Euclidean distance between
/// two signatures of equal truncation order.
pub fn dist_truncated(a: &SpectralSignature, b: &SpectralSignature) -> Result<f64> {
    if a.c != b.c {
        return Err(Error::MismatchedTruncation(a.c, b.c));
    }
    dist_values(&a.values, &b.values)
}

/// Euclidean distance between two equal-length value vectors.
pub fn dist_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedTruncation(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Top `k` eigenpairs with unit eigenvectors, sign-normalized.
pub fn top_pairs(g: &Graph, k: usize) -> Result<EigenPairs> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::TruncationOutOfRange { c: k, n });
    }
    let mut pairs = if n <= DENSE_LIMIT {
        let mut all = linalg::sym_eigen_desc(g.adjacency());
        all.values.truncate(k);
        all.vectors = all.vectors.columns(0, k).into_owned();
        all
    } else {
        linalg::top_eigenpairs(n, k, |x, y| g.mul_vec(x, y), KrylovOptions::default())?
    };
    linalg::fix_signs(&mut pairs.vectors);
    Ok(pairs)
}

/// Algebraically smallest adjacency eigenvalue.
pub fn smallest_eigenvalue(g: &Graph) -> Result<f64> {
    let n = g.n();
    if n <= DENSE_LIMIT {
        return Ok(*full_spectrum(g).values.last().unwrap());
    }
    let neg = linalg::top_eigenpairs(
        n,
        1,
        |x, y| {
            g.mul_vec(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        KrylovOptions::default(),
    )?;
    Ok(-neg.values[0])
}
