//! Rank-r SVD by randomized subspace iteration with Rayleigh–Ritz extraction.
//!
//! The sketch width is `r + OVERSAMPLE` (capped at the smaller dimension).
//! At least `MIN_PASSES` power passes run; after that the iteration continues
//! until the Ritz triplets satisfy both residual equations to
//! `RESIDUAL_TOL · ‖M‖_F`, or gives up after `MAX_PASSES`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dot, sum_squares, DenseMatrix};
use crate::error::{Error, Result};

const OVERSAMPLE: usize = 10;
const MIN_PASSES: usize = 4;
const MAX_PASSES: usize = 500;
const RESIDUAL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `n1 × r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `n2 × r`, orthonormal columns.
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U·diag(σ)·Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.u
            .scale_columns(&self.sigma)
            .matmul_t(&self.v)
            .expect("factor shapes agree")
    }
}

pub fn truncated_svd(m: &DenseMatrix, r: usize, seed: u64) -> Result<TruncatedSvd> {
    let (n1, n2) = m.shape();
    let max_rank = n1.min(n2);
    if r == 0 || r > max_rank {
        return Err(Error::InvalidRank { rank: r, max: max_rank });
    }
    let width = (r + OVERSAMPLE).min(max_rank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = gaussian(n2, width, &mut rng);
    let mut q = orthonormalize_columns(&m.matmul(&omega)?, &mut rng);

    let scale = m.frobenius();
    let tol = RESIDUAL_TOL * scale;
    let mut residual = f64::INFINITY;
    for pass in 0..=MAX_PASSES {
        if pass >= MIN_PASSES {
            let candidate = rayleigh_ritz(m, &q, r, &mut rng)?;
            residual = triplet_residual(m, &candidate)?;
            if residual <= tol {
                return Ok(candidate);
            }
        }
        let z = orthonormalize_columns(&m.t_matmul(&q)?, &mut rng);
        q = orthonormalize_columns(&m.matmul(&z)?, &mut rng);
    }
    Err(Error::ConvergenceFailure { iterations: MAX_PASSES, residual: residual / scale.max(f64::MIN_POSITIVE) })
}

/// Projects `m` onto span(Q) and takes the SVD of the small projected matrix.
fn rayleigh_ritz(m: &DenseMatrix, q: &DenseMatrix, r: usize, rng: &mut ChaCha8Rng) -> Result<TruncatedSvd> {
    let b = q.t_matmul(m)?;
    let small = thin_svd_with(&b, rng);
    let u = q.matmul(&small.u.leading_columns(r))?;
    Ok(TruncatedSvd {
        u,
        sigma: small.sigma[..r].to_vec(),
        v: small.v.leading_columns(r),
    })
}

/// `max(‖MV − UΣ‖_F, ‖MᵀU − VΣ‖_F)`.
fn triplet_residual(m: &DenseMatrix, t: &TruncatedSvd) -> Result<f64> {
    let right = m.matmul(&t.v)?.distance(&t.u.scale_columns(&t.sigma))?;
    let left = m.t_matmul(&t.u)?.distance(&t.v.scale_columns(&t.sigma))?;
    Ok(right.max(left))
}

/// Thin SVD of a small dense matrix with `rows ≤ cols` by one-sided
/// (Hestenes) Jacobi rotations applied to its rows. Returns `rows` triplets.
pub fn thin_svd(b: &DenseMatrix) -> TruncatedSvd {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    thin_svd_with(b, &mut rng)
}

fn thin_svd_with(b: &DenseMatrix, rng: &mut ChaCha8Rng) -> TruncatedSvd {
    let (l, n) = b.shape();
    assert!(l <= n, "thin_svd expects a wide matrix");
    let mut c = b.clone();
    // accumulated rotations: C = G·B
    let mut g = DenseMatrix::identity(l);
    let eps = f64::EPSILON * l as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..l {
            for q in p + 1..l {
                let alpha = sum_squares(c.row(p));
                let beta = sum_squares(c.row(q));
                let gamma = dot(c.row(p), c.row(q));
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_rows(&mut c, p, q, cs, sn);
                rotate_rows(&mut g, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..l).map(|i| (i, sum_squares(c.row(i)).sqrt())).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let sigma_max = order.first().map_or(0.0, |o| o.1);

    let mut u = DenseMatrix::zeros(l, l);
    let mut vt = DenseMatrix::zeros(l, n);
    let mut sigma = Vec::with_capacity(l);
    let mut degenerate = Vec::new();
    for (k, &(i, s)) in order.iter().enumerate() {
        // column k of Ub is row i of G
        for (a, &gv) in g.row(i).iter().enumerate() {
            u[(a, k)] = gv;
        }
        if s > 0.0 && s > sigma_max * 1e-300 {
            for (dst, &src) in vt.row_mut(k).iter_mut().zip(c.row(i)) {
                *dst = src / s;
            }
        } else {
            degenerate.push(k);
        }
        sigma.push(s);
    }
    // zero singular values: any unit vector orthogonal to the rest will do
    for k in degenerate {
        let mut v: Vec<f64>;
        loop {
            v = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            for _ in 0..2 {
                for j in 0..l {
                    if j == k || (sigma[j] == 0.0 && j > k) {
                        continue;
                    }
                    let proj = dot(&v, vt.row(j));
                    for (x, &y) in v.iter_mut().zip(vt.row(j)) {
                        *x -= proj * y;
                    }
                }
            }
            let nv = sum_squares(&v).sqrt();
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                break;
            }
        }
        vt.row_mut(k).copy_from_slice(&v);
    }
    TruncatedSvd { u, sigma, v: vt.transpose() }
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, cs: f64, sn: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = cs * x - sn * y;
        *b = sn * x + cs * y;
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = StandardNormal.sample(rng);
    }
    m
}

/// Orthonormal basis for the columns of `a` (`n × l`, `l ≤ n`) by modified
/// Gram–Schmidt with re-orthogonalization. Columns that vanish are replaced
/// by random directions so the result always has `l` orthonormal columns.
pub fn orthonormalize_columns(a: &DenseMatrix, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let (n, l) = a.shape();
    assert!(l <= n, "cannot fit {l} orthonormal columns in dimension {n}");
    let mut t = a.transpose();
    for i in 0..l {
        let mut attempts = 0;
        loop {
            let before = sum_squares(t.row(i)).sqrt();
            for _ in 0..2 {
                for j in 0..i {
                    let proj = dot(t.row(i), t.row(j));
                    let (head, tail) = t.as_mut_slice().split_at_mut(i * n);
                    let qj = &head[j * n..(j + 1) * n];
                    for (x, &y) in tail[..n].iter_mut().zip(qj) {
                        *x -= proj * y;
                    }
                }
            }
            let after = sum_squares(t.row(i)).sqrt();
            if after > 0.0 && after > 1e-10 * before && after.is_finite() {
                t.row_mut(i).iter_mut().for_each(|x| *x /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "failed to complete an orthonormal basis");
            for x in t.row_mut(i) {
                *x = StandardNormal.sample(rng);
            }
        }
    }
    t.transpose()
}
