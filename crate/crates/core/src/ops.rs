//! Entrywise outlier operators and support bookkeeping.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::par;

/// Index set `{(i, j)}` of a matrix of the given shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    shape: (usize, usize),
    indices: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn new(shape: (usize, usize)) -> Self {
        Self { shape, indices: BTreeSet::new() }
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.shape.0 || j >= self.shape.1 {
            return Err(Error::InvalidInput(format!(
                "index ({i}, {j}) outside {}x{}",
                self.shape.0, self.shape.1
            )));
        }
        Ok(self.indices.insert((i, j)))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.indices.contains(&(i, j))
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.shape == other.shape && self.indices.is_subset(&other.indices)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.indices.iter()
    }
}

/// Entrywise `sign(m)·max(0, |m| − ζ)`.
pub fn soft_threshold(m: &DenseMatrix, zeta: f64) -> Result<DenseMatrix> {
    check_threshold(zeta)?;
    Ok(m.map(|v| shrink(v, zeta)))
}

pub(crate) fn check_threshold(zeta: f64) -> Result<()> {
    if !(zeta >= 0.0) || !zeta.is_finite() {
        return Err(Error::InvalidThreshold(zeta));
    }
    Ok(())
}

#[inline]
pub(crate) fn shrink(v: f64, zeta: f64) -> f64 {
    let mag = v.abs() - zeta;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// Keeps entry `(i, j)` iff its magnitude is at least the `⌊α̃·cols⌋`-th
/// largest in row `i` and at least the `⌊α̃·rows⌋`-th largest in column `j`.
/// Ties at a cutoff are all kept; a keep-count of zero zeroes everything.
pub fn sparsify_top_fraction(m: &DenseMatrix, alpha_tilde: f64) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&alpha_tilde) {
        return Err(Error::InvalidFraction(alpha_tilde));
    }
    let (rows, cols) = m.shape();
    let k_row = (alpha_tilde * cols as f64).floor() as usize;
    let k_col = (alpha_tilde * rows as f64).floor() as usize;
    if k_row == 0 || k_col == 0 {
        return Ok(DenseMatrix::zeros(rows, cols));
    }

    let row_cut: Vec<f64> = par::map_indexed(rows, |i| kth_largest_magnitude(m.row(i).iter().copied(), k_row));
    let col_cut: Vec<f64> = par::map_indexed(cols, |j| {
        kth_largest_magnitude((0..rows).map(|i| m[(i, j)]), k_col)
    });

    let mut out = m.clone();
    for i in 0..rows {
        let rc = row_cut[i];
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            let a = v.abs();
            if !(a >= rc && a >= col_cut[j]) {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// `k`-th largest magnitude (1-based), `k ≥ 1`.
fn kth_largest_magnitude(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut mags: Vec<f64> = values.map(f64::abs).collect();
    let idx = k - 1;
    let (_, kth, _) = mags.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
    *kth
}

/// Positions with `|m_ij| > tol`.
pub fn support_of(m: &DenseMatrix, tol: f64) -> SupportSet {
    let mut s = SupportSet::new(m.shape());
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if v.abs() > tol {
                s.indices.insert((i, j));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        let m = DenseMatrix::from_rows(&[[3.0, -0.5], [1.0, -2.0]]);
        let s = soft_threshold(&m, 1.0).unwrap();
        assert_eq!(s, DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, -1.0]]));
        assert_eq!(soft_threshold(&m, 0.0).unwrap(), m);
        assert_eq!(soft_threshold(&m, 3.0).unwrap(), DenseMatrix::zeros(2, 2));
        assert!(matches!(soft_threshold(&m, -0.1), Err(Error::InvalidThreshold(_))));
        assert!(matches!(soft_threshold(&m, f64::NAN), Err(Error::InvalidThreshold(_))));
    }

    #[test]
    fn sparsify_examples() {
        let m = DenseMatrix::from_rows(&[[3.0, 1.0], [2.0, 4.0]]);
        assert_eq!(
            sparsify_top_fraction(&m, 0.5).unwrap(),
            DenseMatrix::from_rows(&[[3.0, 0.0], [0.0, 4.0]])
        );
        assert_eq!(sparsify_top_fraction(&m, 1.0).unwrap(), m);
        assert_eq!(sparsify_top_fraction(&m, 0.0).unwrap(), DenseMatrix::zeros(2, 2));
        assert!(matches!(sparsify_top_fraction(&m, 1.5), Err(Error::InvalidFraction(_))));
        assert!(matches!(sparsify_top_fraction(&m, -0.1), Err(Error::InvalidFraction(_))));
    }

    #[test]
    fn sparsify_keeps_ties_at_cutoff() {
        let m = DenseMatrix::from_rows(&[[2.0, -2.0, 1.0, 0.5], [2.0, 2.0, 2.0, 2.0]]);
        // k_row = 2, k_col = 1
        let out = sparsify_top_fraction(&m, 0.5).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[[2.0, -2.0, 0.0, 0.0], [2.0, 2.0, 2.0, 2.0]]));
    }

    #[test]
    fn support_examples() {
        assert!(support_of(&DenseMatrix::zeros(3, 3), 0.0).is_empty());
        let m = DenseMatrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]);
        let s = support_of(&m, 0.0);
        assert_eq!(s.len(), 1);
        assert!(s.contains(0, 1));
        assert!(support_of(&m, m.max_abs()).is_empty());
    }

    #[test]
    fn support_set_bounds_and_subsets() {
        let mut a = SupportSet::new((2, 2));
        assert!(a.insert(1, 1).unwrap());
        assert!(!a.insert(1, 1).unwrap());
        assert!(a.insert(2, 0).is_err());
        let mut b = a.clone();
        b.insert(0, 0).unwrap();
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
    }
}
