//! Seeded, splittable random number streams.
//!
//! A `RngStream` is addressed by (seed, stream_id). Equal addresses reproduce
//! byte-identical draw sequences; distinct stream ids give statistically
//! independent streams, which is how Monte Carlo replications are keyed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A sibling stream under the same seed.
    pub fn with_stream(self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Draws `count` standard normal variates.
    pub fn draw_std_normal(&self, count: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..count).map(|_| rng.sample(StandardNormal)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_reproduce() {
        let a = RngStream::new(7, 0).draw_std_normal(100);
        let b = RngStream::new(7, 0).draw_std_normal(100);
        assert_eq!(a, b);
    }

    #[test]
    fn law_of_large_numbers() {
        let x = RngStream::new(7, 0).draw_std_normal(100_000);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let x = RngStream::new(7, 0).draw_std_normal(100_000);
        let y = RngStream::new(7, 1).draw_std_normal(100_000);
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / n;
        let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / n;
        let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / n;
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.02, "correlation {r}");
    }
}
