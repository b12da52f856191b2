use rand::seq::index;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

use super::matrix::Matrix;
use crate::{Error, Result};

/// Seeded generator backed by PCG-XSL-RR 128/64 (`rand_pcg::Pcg64`).
///
/// The stream is a pure function of the seed and is identical on every
/// platform, which keeps key samples and query selections reproducible.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Pcg64,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            seed,
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Derives an independent generator whose seed is drawn from this one.
    pub fn fork(&mut self) -> Rng {
        Rng::seed_from_u64(self.next_u64())
    }
}

/// `rows × cols` matrix of standard-normal draws.
pub fn randn_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for x in m.data_mut() {
        *x = rng.normal();
    }
    m
}

/// `k` distinct indices from `0..n`, sorted ascending.
pub fn sample_without_replacement(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::contract(
            "sample_without_replacement",
            format!("need 1 <= k <= n, got k={k}, n={n}"),
        ));
    }
    let mut picked = index::sample(&mut rng.inner, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = randn_matrix(7, 5, &mut Rng::seed_from_u64(42));
        let b = randn_matrix(7, 5, &mut Rng::seed_from_u64(42));
        assert_eq!(a.data(), b.data());
        let c = randn_matrix(7, 5, &mut Rng::seed_from_u64(43));
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn shape_and_finiteness() {
        let m = randn_matrix(2, 3, &mut Rng::seed_from_u64(1));
        assert_eq!(m.shape(), (2, 3));
        assert!(m.is_finite());
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::seed_from_u64(2024);
        let m = randn_matrix(1000, 100, &mut rng);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = Rng::seed_from_u64(0);
        assert_eq!(
            sample_without_replacement(5, 5, &mut rng).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(sample_without_replacement(1, 1, &mut rng).unwrap(), vec![0]);
        assert!(sample_without_replacement(3, 4, &mut rng).is_err());
        assert!(sample_without_replacement(3, 0, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic_distinct_and_sorted() {
        let a = sample_without_replacement(100, 10, &mut Rng::seed_from_u64(9)).unwrap();
        let b = sample_without_replacement(100, 10, &mut Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&i| i < 100));
    }
}
