use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Seeded ChaCha8 stream. [`SeededRng::substream`] gives independent,
/// index-keyed streams from one seed so batched work is order independent.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream `index` of `seed`; distinct indices never overlap.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        SeededRng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }

    /// Exponential with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        let e: f64 = Exp1.sample(&mut self.inner);
        mean * e
    }

    /// Zero-mean Laplace with scale `b`.
    pub fn laplace(&mut self, b: f64) -> f64 {
        let e = self.exponential(b);
        if self.inner.random::<bool>() {
            e
        } else {
            -e
        }
    }

    /// Poisson draw by inversion; fine for the small means used here.
    pub fn poisson(&mut self, mean: f64) -> usize {
        let u = self.uniform();
        let mut k = 0usize;
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        while u >= cdf && k < 10_000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = SeededRng::substream(7, 0);
        let mut b = SeededRng::substream(7, 1);
        let xa: alloc::vec::Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: alloc::vec::Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn moments() {
        let mut r = SeededRng::new(1);
        let n = 200_000;
        let (mut s, mut s2, mut su, mut sp) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = r.normal();
            s += x;
            s2 += x * x;
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            su += u;
            sp += r.poisson(3.0) as f64;
        }
        let n = n as f64;
        assert!((s / n).abs() < 0.01);
        assert!((s2 / n - 1.0).abs() < 0.01);
        assert!((su / n - 0.5).abs() < 0.005);
        assert!((sp / n - 3.0).abs() < 0.02);
    }
}
