//! Symmetric eigensolvers: a dense wrapper around nalgebra and a block Krylov
//! solver with full reorthogonalization for a few extremal pairs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Eigenpairs sorted by non-increasing eigenvalue; `vectors` holds columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Full decomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(m: DMatrix<f64>) -> EigenPairs {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let (vals, vecs) = if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|x| x.is_finite()) {
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        jacobi_eigen(m)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let values = order.iter().map(|&k| vals[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &vecs.column(src));
    }
    EigenPairs { values, vectors }
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        v = jacobi_eigen(m).0.iter().copied().collect();
    }
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Cyclic Jacobi rotations. Slow but robust; nalgebra's implicit QR can
/// return NaN on very sparse matrices with long runs of tiny off-diagonals.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Flips each column so that its largest-magnitude entry is positive
/// (first such entry on ties). Makes eigenvector output reproducible.
pub fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best + 1e-12 {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Converged when ||A y - θ y|| <= tol · max(1, |θ_max|).
    pub tol: f64,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-10,
            max_basis: 240,
            max_restarts: 60,
            seed: 0x6b72_796c,
        }
    }
}

/// The `k` algebraically largest eigenpairs of the symmetric operator `apply`
/// (y = A x) on R^n, by block Krylov iteration with Rayleigh-Ritz extraction.
///
/// The block is wider than `k`, so eigenvalues repeated up to the block width
/// are resolved.
pub fn top_eigenpairs<F>(n: usize, k: usize, apply: F, opts: KrylovOptions) -> Result<EigenPairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} pairs from dimension {n}"
        )));
    }
    let block = (k + 2).min(n);
    let max_basis = opts.max_basis.max(3 * block + k).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut aq: Vec<Vec<f64>> = Vec::new();
    let mut pending: Vec<Vec<f64>> = (0..block).map(|_| random_vec(n, &mut rng)).collect();
    let mut restarts = 0;

    loop {
        // Orthonormalize the pending block against the basis and itself.
        let mut added = 0;
        for v in pending.drain(..) {
            if q.len() == n {
                break;
            }
            if let Some(u) = orthonormalize(v, &q) {
                let mut au = vec![0.0; n];
                apply(&u, &mut au);
                q.push(u);
                aq.push(au);
                added += 1;
            }
        }
        if added == 0 && q.len() < n && q.len() < k {
            // Invariant subspace smaller than k: seed fresh directions.
            pending = (0..block).map(|_| random_vec(n, &mut rng)).collect();
            continue;
        }

        let m = q.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&q[i], &aq[j]) + dot(&q[j], &aq[i])));
        let small = sym_eigen_desc(h);
        let take = k.min(m);
        let scale = small.values[0]
            .abs()
            .max(small.values[m - 1].abs())
            .max(1.0);

        let mut ritz_vecs = Vec::with_capacity(take);
        let mut worst = 0.0f64;
        for c in 0..take {
            let z = small.vectors.column(c);
            let theta = small.values[c];
            let mut y = vec![0.0; n];
            let mut r = vec![0.0; n];
            for (b, &zb) in z.iter().enumerate() {
                axpy(zb, &q[b], &mut y);
                axpy(zb, &aq[b], &mut r);
            }
            axpy(-theta, &y, &mut r);
            worst = worst.max(norm(&r));
            ritz_vecs.push(y);
        }

        let invariant = added == 0;
        if take == k && (worst <= opts.tol * scale || m == n || invariant) {
            let mut vectors = DMatrix::zeros(n, k);
            for (c, y) in ritz_vecs.iter().enumerate() {
                vectors.set_column(c, &DVector::from_column_slice(y));
            }
            return Ok(EigenPairs {
                values: small.values[..k].to_vec(),
                vectors,
            });
        }

        if m + block > max_basis {
            if restarts == opts.max_restarts {
                return Err(Error::EigenSolver(format!(
                    "residual {worst:.3e} after {restarts} restarts"
                )));
            }
            restarts += 1;
            // Thick restart: keep the leading half of the Ritz space and continue
            // from the residuals of the wanted pairs.
            let keep = (max_basis / 2).max(k + block).min(m);
            let mut new_q = Vec::with_capacity(keep);
            let mut new_aq = Vec::with_capacity(keep);
            let mut residuals = Vec::with_capacity(block);
            for c in 0..keep {
                let z = small.vectors.column(c);
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for (b, &zb) in z.iter().enumerate() {
                    axpy(zb, &q[b], &mut y);
                    axpy(zb, &aq[b], &mut ay);
                }
                if c < block {
                    let mut r = ay.clone();
                    axpy(-small.values[c], &y, &mut r);
                    residuals.push(r);
                }
                new_q.push(y);
                new_aq.push(ay);
            }
            pending = residuals;
            q = new_q;
            aq = new_aq;
        } else {
            pending = aq[m - added..].to_vec();
        }
    }
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
}

/// Two passes of classical Gram-Schmidt; `None` if `v` is (numerically) in
/// the span of `basis`.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = norm(&v);
    if start == 0.0 || !start.is_finite() {
        return None;
    }
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, &v)).collect();
        for (b, c) in basis.iter().zip(coeffs) {
            axpy(-c, b, &mut v);
        }
    }
    let nv = norm(&v);
    if nv <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    Some(v)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            let r = m * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        }
    }

    #[test]
    fn sparse_path_has_finite_spectrum() {
        // A path on nodes 0-11-12 padded with isolated nodes.
        let mut m = DMatrix::zeros(20, 20);
        for (a, b) in [(0, 11), (11, 12)] {
            m[(a, b)] = 1.0;
            m[(b, a)] = 1.0;
        }
        let v = sym_eigenvalues_desc(m.clone());
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-12 && (v[19] + 2f64.sqrt()).abs() < 1e-12);
        assert!(v[1..19].iter().all(|x| x.abs() < 1e-12));
        let e = sym_eigen_desc(m.clone());
        let r = &m * &e.vectors - &e.vectors * DMatrix::from_diagonal(&DVector::from_vec(e.values.clone()));
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn dense_sorted_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[0.4, 0.05, 0.05, 0.3]);
        let e = sym_eigen_desc(m.clone());
        assert!(e.values[0] > e.values[1]);
        for c in 0..2 {
            let v = e.vectors.column(c);
            let r = &m * v - v * e.values[c];
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn krylov_matches_dense_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 150;
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        m = &m + m.transpose();
        let dense = sym_eigenvalues_desc(m.clone());
        let top = top_eigenpairs(n, 4, dense_apply(&m), KrylovOptions::default()).unwrap();
        for c in 0..4 {
            assert!(
                (top.values[c] - dense[c]).abs() < 1e-9,
                "{c}: {} vs {}",
                top.values[c],
                dense[c]
            );
        }
    }

    #[test]
    fn krylov_resolves_repeated_eigenvalue() {
        // diag(5, 5, 3, 1, 1, ...) rotated by nothing: multiplicity two at the top.
        let n = 40;
        let mut d = vec![1.0; n];
        d[0] = 5.0;
        d[1] = 5.0;
        d[2] = 3.0;
        let m = DMatrix::from_diagonal(&DVector::from_vec(d));
        let top = top_eigenpairs(n, 3, dense_apply(&m), KrylovOptions::default()).unwrap();
        assert!((top.values[0] - 5.0).abs() < 1e-10);
        assert!((top.values[1] - 5.0).abs() < 1e-10);
        assert!((top.values[2] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn krylov_zero_operator() {
        let top = top_eigenpairs(10, 3, |_, y| y.fill(0.0), KrylovOptions::default()).unwrap();
        assert_eq!(top.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn sign_fix_is_idempotent_under_flip() {
        let mut a = DMatrix::from_row_slice(3, 1, &[0.2, -0.9, 0.1]);
        let mut b = -a.clone();
        fix_signs(&mut a);
        fix_signs(&mut b);
        assert_eq!(a, b);
        assert!(a[(1, 0)] > 0.0);
    }
}
