//! Synthetic RPCA instances `Y = X⋆ + S⋆` and the benchmark harnesses built
//! on them.

pub mod bench;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;

/// Ground-truth bundle for training and benchmarks.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub y: DenseMatrix,
    pub x_star: DenseMatrix,
    pub s_star: DenseMatrix,
    pub r: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl ProblemInstance {
    /// Assembles an instance from its parts, setting `Y = X⋆ + S⋆`.
    pub fn from_parts(x_star: DenseMatrix, s_star: DenseMatrix, r: usize, alpha: f64, seed: u64) -> Result<Self> {
        let y = x_star.add(&s_star)?;
        Ok(Self { y, x_star, s_star, r, alpha, seed })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.y.shape()
    }
}

/// How outlier positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierPattern {
    /// `⌊α·n1·n2⌋` positions uniformly without replacement over the matrix.
    Global,
    /// Union of `⌊α·n⌋` random permutation patterns (square only), so every
    /// row and column has at most `⌊α·n⌋` outliers.
    RowColumn,
}

/// Gaussian factors with variance `1/max(n1, n2)`, globally sampled outlier
/// positions, magnitudes uniform on `[−m, m]` with `m` the realized mean
/// `|X⋆_ij|`.
pub fn gen_instance(n1: usize, n2: usize, r: usize, alpha: f64, seed: u64) -> Result<ProblemInstance> {
    gen_instance_with(n1, n2, r, alpha, seed, OutlierPattern::Global)
}

pub fn gen_instance_with(
    n1: usize,
    n2: usize,
    r: usize,
    alpha: f64,
    seed: u64,
    pattern: OutlierPattern,
) -> Result<ProblemInstance> {
    let max = n1.min(n2);
    if r == 0 || r > max {
        return Err(Error::InvalidRank { rank: r, max });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidFraction(alpha));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n1.max(n2) as f64;
    let normal = Normal::new(0.0, (1.0 / n).sqrt()).expect("positive variance");
    let l = DenseMatrix::from_fn(n1, r, |_, _| normal.sample(&mut rng));
    let rf = DenseMatrix::from_fn(n2, r, |_, _| normal.sample(&mut rng));
    let x_star = l.matmul_t(&rf)?;
    let bound = x_star.as_slice().iter().map(|v| v.abs()).sum::<f64>() / (n1 * n2) as f64;

    let mut s_star = DenseMatrix::zeros(n1, n2);
    let positions: Vec<usize> = match pattern {
        OutlierPattern::Global => {
            let count = (alpha * (n1 * n2) as f64).floor() as usize;
            let mut idx = sample(&mut rng, n1 * n2, count).into_vec();
            idx.sort_unstable();
            idx
        }
        OutlierPattern::RowColumn => row_column_positions(n1, n2, alpha, &mut rng)?,
    };
    for p in positions {
        let mut v = 0.0;
        // an exact zero draw would silently lose an outlier
        while v == 0.0 && bound > 0.0 {
            v = rng.gen_range(-bound..=bound);
        }
        s_star.as_mut_slice()[p] = v;
    }
    ProblemInstance::from_parts(x_star, s_star, r, alpha, seed)
}

fn row_column_positions(n1: usize, n2: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n1 != n2 {
        return Err(Error::InvalidInput("row/column outlier pattern needs a square matrix".into()));
    }
    let n = n1;
    let per_line = (alpha * n as f64).floor() as usize;
    let mut taken = vec![false; n * n];
    for _ in 0..per_line {
        let perm = sample(rng, n, n).into_vec();
        for (i, &j) in perm.iter().enumerate() {
            taken[i * n + j] = true;
        }
    }
    Ok(taken.iter().enumerate().filter(|(_, t)| **t).map(|(p, _)| p).collect())
}

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Producer of training instances.
pub trait InstanceSource {
    fn next_instance(&mut self) -> Result<ProblemInstance>;
}

/// Fresh synthetic instances with seeds `derive_seed(seed, 0), derive_seed(seed, 1), …`.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub alpha: f64,
    pub seed: u64,
    counter: u64,
}

impl SyntheticSource {
    pub fn new(n1: usize, n2: usize, r: usize, alpha: f64, seed: u64) -> Self {
        Self { n1, n2, r, alpha, seed, counter: 0 }
    }

    /// The first `count` instances this source would produce, generated
    /// without advancing it.
    pub fn batch(&self, count: usize) -> Result<Vec<ProblemInstance>> {
        let mut copy = self.clone();
        (0..count).map(|_| copy.next_instance()).collect()
    }
}

impl InstanceSource for SyntheticSource {
    fn next_instance(&mut self) -> Result<ProblemInstance> {
        let seed = derive_seed(self.seed, self.counter);
        self.counter += 1;
        gen_instance(self.n1, self.n2, self.r, self.alpha, seed)
    }
}

/// Cycles through a fixed list of instances.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    instances: Vec<ProblemInstance>,
    next: usize,
}

impl DatasetSource {
    pub fn new(instances: Vec<ProblemInstance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        Ok(Self { instances, next: 0 })
    }
}

impl InstanceSource for DatasetSource {
    fn next_instance(&mut self) -> Result<ProblemInstance> {
        let inst = self.instances[self.next % self.instances.len()].clone();
        self.next += 1;
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::support_of;

    #[test]
    fn outlier_free_instance() {
        let inst = gen_instance(20, 30, 3, 0.0, 5).unwrap();
        assert_eq!(inst.s_star.count_nonzero(), 0);
        assert_eq!(inst.y, inst.x_star);
    }

    #[test]
    fn deterministic() {
        let a = gen_instance(40, 40, 2, 0.2, 9).unwrap();
        let b = gen_instance(40, 40, 2, 0.2, 9).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.s_star, b.s_star);
        let c = gen_instance(40, 40, 2, 0.2, 10).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn counts_and_bounds() {
        let inst = gen_instance(200, 200, 5, 0.1, 1).unwrap();
        assert_eq!(inst.s_star.count_nonzero(), 4000);
        let mean_abs = inst.x_star.as_slice().iter().map(|v| v.abs()).sum::<f64>() / 40000.0;
        assert!(inst.s_star.max_abs() <= mean_abs);
        assert_eq!(inst.y, inst.x_star.add(&inst.s_star).unwrap());
    }

    #[test]
    fn factor_variance_matches() {
        // Recover L⋆ entries by replaying the generator's first draws.
        let n = 600;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, (1.0 / n as f64).sqrt()).unwrap();
        let draws: Vec<f64> = (0..n * 5).map(|_| normal.sample(&mut rng)).collect();
        let var = draws.iter().map(|v| v * v).sum::<f64>() / draws.len() as f64;
        assert!((var * n as f64 - 1.0).abs() < 0.1);
        // and the generator consumes the stream the same way
        let inst = gen_instance(n, n, 5, 0.0, 4).unwrap();
        let l = DenseMatrix::new(n, 5, draws).unwrap();
        let r_draws: Vec<f64> = (0..n * 5).map(|_| normal.sample(&mut rng)).collect();
        let r = DenseMatrix::new(n, 5, r_draws).unwrap();
        assert_eq!(l.matmul_t(&r).unwrap(), inst.x_star);
    }

    #[test]
    fn row_column_pattern_bounds_each_line() {
        let inst = gen_instance_with(50, 50, 2, 0.1, 3, OutlierPattern::RowColumn).unwrap();
        let supp = support_of(&inst.s_star, 0.0);
        let mut rows = [0; 50];
        let mut cols = [0; 50];
        for &(i, j) in supp.iter() {
            rows[i] += 1;
            cols[j] += 1;
        }
        assert!(rows.iter().chain(&cols).all(|c| *c <= 5));
        assert!(gen_instance_with(5, 6, 1, 0.1, 0, OutlierPattern::RowColumn).is_err());
    }

    #[test]
    fn validation() {
        assert!(matches!(gen_instance(10, 10, 11, 0.1, 0), Err(Error::InvalidRank { .. })));
        assert!(matches!(gen_instance(10, 10, 2, 1.5, 0), Err(Error::InvalidFraction(_))));
    }

    #[test]
    fn sources() {
        let mut s = SyntheticSource::new(10, 10, 1, 0.1, 77);
        let batch = s.batch(2).unwrap();
        let first = s.next_instance().unwrap();
        assert_eq!(first.y, batch[0].y);
        let mut d = DatasetSource::new(batch.clone()).unwrap();
        d.next_instance().unwrap();
        d.next_instance().unwrap();
        assert_eq!(d.next_instance().unwrap().y, batch[0].y);
        assert!(DatasetSource::new(vec![]).is_err());
    }
}
