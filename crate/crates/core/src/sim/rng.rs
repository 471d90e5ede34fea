//! Portable seeded random numbers.
//!
//! Every stream is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed by
//! `seed_from_u64(seed)` (PCG32 key expansion, as defined by `rand_core`) and
//! selected with `set_stream(stream)`. Derived quantities avoid library
//! distribution code so they can be reproduced from the raw `u64` words alone:
//!
//! * uniform `[0, 1)`: `(next_u64 >> 11) * 2^-53`
//! * standard normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`, one
//!   value per pair of uniforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream identifiers used by the crate.
pub mod streams {
    pub const AGENTS: u64 = 1;
    pub const RETRY: u64 = 2;
    pub const PERTURB: u64 = 16;
}

#[derive(Debug, Clone)]
pub struct DetRng(ChaCha8Rng);

impl DetRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.uniform() * n as f64) as u64).min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = DetRng::new(42, 1);
        let mut b = DetRng::new(42, 1);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_are_independent() {
        let mut a = DetRng::new(42, 1);
        let mut b = DetRng::new(42, 2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform_and_gaussian_moments() {
        let mut rng = DetRng::new(7, 0);
        let n = 200_000;
        let (mut su, mut sg, mut sg2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            su += u;
            let g = rng.gaussian();
            sg += g;
            sg2 += g * g;
        }
        let n = n as f64;
        assert!((su / n - 0.5).abs() < 0.005);
        assert!((sg / n).abs() < 0.01);
        assert!((sg2 / n - 1.0).abs() < 0.01);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = DetRng::new(3, 0);
        assert!((0..1000).all(|_| rng.below(7) < 7));
    }
}
