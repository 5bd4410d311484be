use std::str::FromStr;

use super::{dot, sum_squares, DenseMatrix};
use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Frobenius norm.
    Fro,
    /// Largest entry magnitude.
    Inf,
    /// Largest row ℓ2 norm.
    TwoInf,
    /// Largest row ℓ1 norm.
    OneInf,
    /// Largest singular value.
    Spectral,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fro" => Ok(Self::Fro),
            "inf" => Ok(Self::Inf),
            "two_inf" => Ok(Self::TwoInf),
            "one_inf" => Ok(Self::OneInf),
            "spectral" => Ok(Self::Spectral),
            other => Err(Error::ParseError(format!("unknown norm kind `{other}`"))),
        }
    }
}

pub fn matrix_norm(m: &DenseMatrix, kind: NormKind) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidDimensions("norm of an empty matrix".into()));
    }
    Ok(match kind {
        NormKind::Fro => m.frobenius(),
        NormKind::Inf => m.max_abs(),
        NormKind::TwoInf => (0..m.rows())
            .map(|i| sum_squares(m.row(i)).sqrt())
            .fold(0.0, f64::max),
        NormKind::OneInf => (0..m.rows())
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Spectral => spectral_norm(m),
    })
}

/// Power iteration on `MᵀM`, stopped when the estimate changes by less than
/// `POWER_TOL` relative.
fn spectral_norm(m: &DenseMatrix) -> f64 {
    let n = m.cols();
    // fixed pseudo-random start so the iteration is deterministic but not
    // orthogonal to structured singular vectors
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect();
    let nv = sum_squares(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut sigma = 0.0;
    let mut mv = vec![0.0; m.rows()];
    for _ in 0..POWER_MAX_ITERS {
        for (i, out) in mv.iter_mut().enumerate() {
            *out = dot(m.row(i), &v);
        }
        let new_sigma = sum_squares(&mv).sqrt();
        if new_sigma == 0.0 {
            return 0.0;
        }
        let mut w = vec![0.0; n];
        for (i, &a) in mv.iter().enumerate() {
            for (wj, &mij) in w.iter_mut().zip(m.row(i)) {
                *wj += a * mij;
            }
        }
        let nw = sum_squares(&w).sqrt();
        if nw == 0.0 {
            return new_sigma;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let converged = (new_sigma - sigma).abs() <= POWER_TOL * new_sigma;
        sigma = new_sigma;
        if converged {
            break;
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let m = DenseMatrix::from_rows(&[[3.0, -4.0]]);
        assert_eq!(matrix_norm(&m, NormKind::Fro).unwrap(), 5.0);
        assert_eq!(matrix_norm(&m, NormKind::Inf).unwrap(), 4.0);
        let m = DenseMatrix::from_rows(&[[3.0, 4.0], [0.0, 1.0]]);
        assert_eq!(matrix_norm(&m, NormKind::TwoInf).unwrap(), 5.0);
        assert_eq!(matrix_norm(&m, NormKind::OneInf).unwrap(), 7.0);
    }

    #[test]
    fn spectral_of_diagonal() {
        let m = DenseMatrix::from_diag(&[1.0, -7.0, 3.0]);
        let s = matrix_norm(&m, NormKind::Spectral).unwrap();
        assert!((s - 7.0).abs() < 1e-8);
        assert_eq!(matrix_norm(&DenseMatrix::zeros(3, 3), NormKind::Spectral).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_rejected() {
        let m = DenseMatrix::zeros(0, 0);
        assert!(matches!(matrix_norm(&m, NormKind::Fro), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("two_inf".parse::<NormKind>().unwrap(), NormKind::TwoInf);
        assert!("nuclear".parse::<NormKind>().is_err());
    }
}
