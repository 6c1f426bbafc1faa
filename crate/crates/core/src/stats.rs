//! Seeded Monte-Carlo plumbing and a few Gaussian helpers.
//!
//! Sampling is split into fixed-size chunks. Chunk `i` draws from a ChaCha
//! stream keyed by `(seed, i)` and per-chunk moments are merged in chunk
//! order, so estimates are bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type McRng = ChaCha8Rng;

pub const CHUNK_SIZE: u64 = 1 << 14;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `P(X > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chunk_rng(seed: u64, chunk: u64) -> McRng {
    let mut rng = McRng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let nb = other.count as f64;
        let na = self.count as f64;
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self, seed: u64) -> EstimateWithError {
        EstimateWithError {
            mean: self.mean,
            stderr: self.stderr(),
            samples: self.count,
            seed,
        }
    }
}

/// A Monte-Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl EstimateWithError {
    /// Deterministic value (zero standard error).
    pub fn exact(value: f64) -> Self {
        EstimateWithError {
            mean: value,
            stderr: 0.0,
            samples: 0,
            seed: 0,
        }
    }

    /// `(self - target) / stderr`; zero when both the gap and the stderr vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr
    }
}

/// Two-sided comparison outcome shared by the validation checks.
///
/// Serializes as `{"lhs", "rhs", "pass", "seed", "samples"}`; `seed` and
/// `samples` are `null` for deterministic checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
}

/// `sqrt(a^2 + b^2)` for independent standard errors.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

pub fn require_samples(samples: u64) -> Result<()> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    Ok(())
}

/// Runs `samples` draws of a `width`-wide observation and returns one
/// [`Moments`] per column. `draw` writes one observation into its slice.
pub fn monte_carlo<F>(samples: u64, seed: u64, width: usize, draw: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut McRng, &mut [f64]) -> Result<()> + Sync,
{
    monte_carlo_with(samples, seed, width, || (), |_, rng, out| draw(rng, out))
}

/// Like [`monte_carlo`], with a per-chunk scratch value built by `init`.
pub fn monte_carlo_with<S, I, F>(
    samples: u64,
    seed: u64,
    width: usize,
    init: I,
    draw: F,
) -> Result<Vec<Moments>>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut McRng, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let per_chunk: Vec<Result<Vec<Moments>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let mut scratch = init();
            let n = CHUNK_SIZE.min(samples - chunk * CHUNK_SIZE);
            let mut acc = vec![Moments::default(); width];
            let mut obs = vec![0.0; width];
            for _ in 0..n {
                draw(&mut scratch, &mut rng, &mut obs)?;
                for (m, &v) in acc.iter_mut().zip(&obs) {
                    m.push(v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for chunk in per_chunk {
        for (t, m) in total.iter_mut().zip(chunk?) {
            t.merge(&m);
        }
    }
    Ok(total)
}

/// Scalar convenience wrapper around [`monte_carlo`].
pub fn monte_carlo_scalar<F>(samples: u64, seed: u64, draw: F) -> Result<EstimateWithError>
where
    F: Fn(&mut McRng) -> Result<f64> + Sync,
{
    require_samples(samples)?;
    let m = monte_carlo(samples, seed, 1, |rng, out| {
        out[0] = draw(rng)?;
        Ok(())
    })?;
    Ok(m[0].estimate(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_abs_diff_eq!(m.mean, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance(), var, epsilon = 1e-10);

        let (a, b) = xs.split_at(313);
        let mut ma = Moments::default();
        let mut mb = Moments::default();
        a.iter().for_each(|&x| ma.push(x));
        b.iter().for_each(|&x| mb.push(x));
        ma.merge(&mb);
        assert_abs_diff_eq!(ma.mean, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(ma.variance(), var, epsilon = 1e-10);
    }

    #[test]
    fn constant_stream_is_exact() {
        let est = monte_carlo_scalar(100_000, 3, |_| Ok(0.1)).unwrap();
        assert_eq!(est.mean, 0.1);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let run =
            || monte_carlo_scalar(100_000, 11, |rng| Ok(standard_normal(rng).powi(2))).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
        assert!(a.within(1.0, 4.0));
    }

    #[test]
    fn normal_helpers() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_pdf(0.0), INV_SQRT_2PI, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.0) + normal_sf(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.96), 0.975_002_104_851_78, epsilon = 1e-12);
    }
}
