use super::DenseMatrix;
use crate::error::{Error, Result};

/// Relative pivot floor below which the Gram matrix is treated as singular.
const PIVOT_FLOOR: f64 = 1e-14;

/// Returns `W = V·G⁻¹` for a symmetric positive definite `G`, using a
/// diagonally pivoted Cholesky factorization `PᵀGP = CCᵀ`. The inverse is
/// never formed.
pub fn gram_solve(v: &DenseMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    let r = g.rows();
    if g.cols() != r || v.cols() != r {
        return Err(Error::InvalidDimensions(format!(
            "gram_solve: V is {}x{}, G is {}x{}",
            v.rows(),
            v.cols(),
            g.rows(),
            g.cols()
        )));
    }
    let chol = PivotedCholesky::factor(g)?;
    let mut out = DenseMatrix::zeros(v.rows(), r);
    let mut work = vec![0.0; r];
    for i in 0..v.rows() {
        // G symmetric: (W·G)_i = G·w_i, so each row is an independent solve.
        chol.solve_into(v.row(i), &mut work, out.row_mut(i));
    }
    Ok(out)
}

struct PivotedCholesky {
    n: usize,
    /// Lower-triangular factor of the permuted matrix, row-major.
    lower: Vec<f64>,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
}

impl PivotedCholesky {
    fn factor(g: &DenseMatrix) -> Result<Self> {
        let n = g.rows();
        let mut a = g.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(f64::NEG_INFINITY, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return Err(Error::SingularGram { pivot: max_diag.max(0.0) });
        }
        let floor = PIVOT_FLOOR * max_diag;
        for k in 0..n {
            // pick the largest remaining diagonal
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + i]))
                .fold((k, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
            if !(pivot > floor) {
                return Err(Error::SingularGram { pivot });
            }
            if p != k {
                swap_sym(&mut a, n, k, p);
                perm.swap(k, p);
            }
            let d = a[k * n + k].sqrt();
            a[k * n + k] = d;
            for i in k + 1..n {
                a[i * n + k] /= d;
            }
            // full trailing block, so later symmetric swaps see current values
            for i in k + 1..n {
                let lik = a[i * n + k];
                for j in k + 1..n {
                    a[i * n + j] -= lik * a[j * n + k];
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, lower: a, perm })
    }

    /// Solves `G x = b`, writing `x` into `out`.
    fn solve_into(&self, b: &[f64], work: &mut [f64], out: &mut [f64]) {
        let n = self.n;
        let c = &self.lower;
        for k in 0..n {
            let mut s = b[self.perm[k]];
            for j in 0..k {
                s -= c[k * n + j] * work[j];
            }
            work[k] = s / c[k * n + k];
        }
        for k in (0..n).rev() {
            let mut s = work[k];
            for j in k + 1..n {
                s -= c[j * n + k] * work[j];
            }
            work[k] = s / c[k * n + k];
        }
        for k in 0..n {
            out[self.perm[k]] = work[k];
        }
    }
}

/// Symmetric row+column swap of indices `k` and `p`.
fn swap_sym(a: &mut [f64], n: usize, k: usize, p: usize) {
    for j in 0..n {
        a.swap(k * n + j, p * n + j);
    }
    for i in 0..n {
        a.swap(i * n + k, i * n + p);
    }
}
