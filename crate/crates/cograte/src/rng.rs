//! Counter-based random number streams.
//!
//! Every Monte Carlo draw in the crate comes from a small SplitMix64-style
//! generator keyed by `(seed, counter)`. Keying each frame (or trial) by its
//! index makes replications reproducible and order-independent: frame t
//! consumes the same randomness no matter which frames ran before it or on
//! which thread.

/// SplitMix64 output mixing (Stafford variant 13).
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

/// Random stream for one frame (or one trial), keyed by `(seed, counter)`.
#[derive(Debug, Clone)]
pub struct FrameRng {
    state: u64,
}

impl FrameRng {
    /// Open the stream for the given key. Distinct `(seed, counter)` pairs
    /// yield statistically independent streams.
    pub fn new(seed: u64, counter: u64) -> Self {
        let state = mix(seed ^ mix(counter.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)));
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in the half-open interval [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open-closed interval (0, 1].
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Pair of independent standard normal draws (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_pos();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    /// Exponential draw with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * self.uniform_pos().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_order_independent() {
        let a: Vec<u64> = (0..8).map(|i| FrameRng::new(42, i).next_u64()).collect();
        let b: Vec<u64> = (0..8).rev().map(|i| FrameRng::new(42, i).next_u64()).collect();
        let b_rev: Vec<u64> = b.into_iter().rev().collect();
        assert_eq!(a, b_rev);
        assert_ne!(
            FrameRng::new(42, 0).next_u64(),
            FrameRng::new(43, 0).next_u64()
        );
    }

    #[test]
    fn uniform_moments() {
        let mut rng = FrameRng::new(7, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sum2 += u * u;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.005, "var {var}");
    }

    #[test]
    fn normal_and_exponential_moments() {
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let n = 100_000;
        for i in 0..n {
            let (z0, z1) = FrameRng::new(11, i).normal_pair();
            sum += z0 + z1;
            sum2 += z0 * z0 + z1 * z1;
        }
        let m = sum / (2 * n) as f64;
        let v = sum2 / (2 * n) as f64 - m * m;
        assert!(m.abs() < 0.01, "normal mean {m}");
        assert!((v - 1.0).abs() < 0.02, "normal var {v}");

        let mut rng = FrameRng::new(13, 99);
        let mean = (0..n).map(|_| rng.exponential(2.0)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.03, "exp mean {mean}");
    }
}
