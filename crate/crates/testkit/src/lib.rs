//! Slow, obviously-correct references for checking the fast kernels. Nothing
//! here depends on the `lrpca` crate.

pub type Dense = Vec<Vec<f64>>;

/// `(U, σ, V)` with `σ` sorted in decreasing order.
pub struct Svd {
    pub u: Dense,
    pub sigma: Vec<f64>,
    pub v: Dense,
}

fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Two-sided (Kogbetliantz) Jacobi SVD. Rectangular inputs are zero-padded
/// to a square; the returned factors are square of the padded size.
pub fn jacobi_svd(a: &Dense) -> Svd {
    let rows = a.len();
    let cols = a[0].len();
    let n = rows.max(cols);
    let mut m: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i < rows && j < cols { a[i][j] } else { 0.0 }).collect())
        .collect();
    let mut u = identity(n);
    let mut v = identity(n);
    let scale: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let (app, apq, aqp, aqq) = (m[p][p], m[p][q], m[q][p], m[q][q]);
                if apq.abs().max(aqp.abs()) <= 1e-300 {
                    continue;
                }
                off += apq * apq + aqp * aqp;
                // left rotation making the 2×2 block symmetric
                let theta = (apq - aqp).atan2(app + aqq);
                let (c1, s1) = (theta.cos(), theta.sin());
                let b_pp = c1 * app - s1 * aqp;
                let b_pq = c1 * apq - s1 * aqq;
                let b_qq = s1 * apq + c1 * aqq;
                // symmetric Jacobi rotation diagonalizing it
                let phi = 0.5 * (2.0 * b_pq).atan2(b_qq - b_pp);
                let (c2, s2) = (phi.cos(), phi.sin());
                // left = G·J, right = J
                let (lc_pp, lc_pq, lc_qp, lc_qq) = (
                    c1 * c2 - s1 * s2,
                    c1 * s2 + s1 * c2,
                    -s1 * c2 - c1 * s2,
                    c1 * c2 - s1 * s2,
                );
                for row in m.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c2 * x - s2 * y;
                    row[q] = s2 * x + c2 * y;
                }
                for j in 0..n {
                    let (x, y) = (m[p][j], m[q][j]);
                    m[p][j] = lc_pp * x + lc_qp * y;
                    m[q][j] = lc_pq * x + lc_qq * y;
                }
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = lc_pp * x + lc_qp * y;
                    row[q] = lc_pq * x + lc_qq * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c2 * x - s2 * y;
                    row[q] = s2 * x + c2 * y;
                }
            }
        }
        if off.sqrt() <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if m[i][i] < 0.0 {
            m[i][i] = -m[i][i];
            for row in u.iter_mut() {
                row[i] = -row[i];
            }
        }
    }
    order.sort_by(|&a, &b| m[b][b].total_cmp(&m[a][a]));
    let pick = |x: &Dense| -> Dense { x.iter().map(|row| order.iter().map(|&k| row[k]).collect()).collect() };
    Svd { sigma: order.iter().map(|&k| m[k][k]).collect(), u: pick(&u), v: pick(&v) }
}

/// Best rank-`r` approximation of `a` from [`jacobi_svd`].
pub fn best_rank(a: &Dense, r: usize) -> Dense {
    let svd = jacobi_svd(a);
    let (rows, cols) = (a.len(), a[0].len());
    (0..rows)
        .map(|i| (0..cols).map(|j| (0..r).map(|k| svd.u[i][k] * svd.sigma[k] * svd.v[j][k]).sum()).collect())
        .collect()
}

/// Keeps `m[i][j]` when its magnitude is at least the `⌊α̃·cols⌋`-th largest
/// in its row and the `⌊α̃·rows⌋`-th largest in its column, found by fully
/// sorting every row and column.
pub fn brute_sparsify(m: &Dense, alpha_tilde: f64) -> Dense {
    let rows = m.len();
    let cols = m[0].len();
    let k_row = (alpha_tilde * cols as f64).floor() as usize;
    let k_col = (alpha_tilde * rows as f64).floor() as usize;
    if k_row == 0 || k_col == 0 {
        return vec![vec![0.0; cols]; rows];
    }
    let kth = |mut v: Vec<f64>, k: usize| {
        v.sort_by(|a, b| b.total_cmp(a));
        v[k - 1]
    };
    let row_cut: Vec<f64> = m.iter().map(|r| kth(r.iter().map(|x| x.abs()).collect(), k_row)).collect();
    let col_cut: Vec<f64> = (0..cols).map(|j| kth(m.iter().map(|r| r[j].abs()).collect(), k_col)).collect();
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let a = m[i][j].abs();
                    if a >= row_cut[i] && a >= col_cut[j] {
                        m[i][j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn frobenius_distance(a: &Dense, b: &Dense) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}
