//! The Ornstein–Uhlenbeck operator `T_rho f(x) = E[f(rho x + sqrt(1 - rho^2) Y)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, HermiteExpansion};
use crate::stats::{self, derive_seed, fill_standard_normal, CheckReport, EstimateWithError};

/// A correlation parameter `rho` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    /// Rejects `rho` outside `[0, 1]` (and NaN) instead of clamping.
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid("rho", format!("{rho} is outside [0, 1]")));
        }
        Ok(NoiseLevel(rho))
    }

    pub fn rho(self) -> f64 {
        self.0
    }

    /// `sqrt(1 - rho^2)`.
    pub fn complement(self) -> f64 {
        (1.0 - self.0 * self.0).max(0.0).sqrt()
    }
}

impl TryFrom<f64> for NoiseLevel {
    type Error = Error;
    fn try_from(rho: f64) -> Result<Self> {
        NoiseLevel::new(rho)
    }
}

impl From<NoiseLevel> for f64 {
    fn from(r: NoiseLevel) -> f64 {
        r.0
    }
}

/// Multiplies each coefficient `c_alpha` by `rho^|alpha|`.
pub fn apply_to_expansion(p: &HermiteExpansion, rho: NoiseLevel) -> HermiteExpansion {
    let r = rho.rho();
    if r == 1.0 {
        return p.clone();
    }
    p.map_coefficients(|alpha, c| c * r.powi(alpha.degree() as i32))
}

/// Monte-Carlo estimate of `T_rho f(x)`.
pub fn apply_pointwise_mc<F>(
    f: F,
    rho: NoiseLevel,
    x: &[f64],
    samples: u64,
    seed: u64,
) -> Result<EstimateWithError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    stats::require_samples(samples)?;
    let n = x.len();
    let r = rho.rho();
    let s = rho.complement();
    if s == 0.0 {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                point: x.to_vec(),
                value,
            });
        }
        return Ok(EstimateWithError {
            mean: value,
            stderr: 0.0,
            samples,
            seed,
        });
    }
    let moments = stats::monte_carlo_with(
        samples,
        seed,
        1,
        || (vec![0.0; n], vec![0.0; n]),
        |(y, z), rng, out| {
            fill_standard_normal(rng, y);
            for ((zi, &yi), &xi) in z.iter_mut().zip(y.iter()).zip(x) {
                *zi = r * xi + s * yi;
            }
            let value = f(z);
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    point: z.clone(),
                    value,
                });
            }
            out[0] = value;
            Ok(())
        },
    )?;
    Ok(moments[0].estimate(seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPoint {
    pub x: f64,
    pub estimate: EstimateWithError,
    pub target: f64,
    pub deviation: f64,
    pub z: f64,
}

/// Comparison of `T_rho H_k` estimated by Monte Carlo against `rho^k H_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    pub k: usize,
    pub rho: f64,
    pub points: Vec<EigenPoint>,
    pub max_abs_deviation: f64,
    pub max_z: f64,
    /// `sum z_i / sqrt(#points)`.
    pub pooled_z: f64,
    pub pass: bool,
    pub seed: u64,
    pub samples: u64,
}

/// Grid point `i` uses the seed `derive_seed(seed, i)`.
pub fn eigen_check(
    k: usize,
    rho: NoiseLevel,
    grid: &[f64],
    samples: u64,
    seed: u64,
) -> Result<EigenReport> {
    let factor = rho.rho().powi(k as i32);
    let mut points = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let estimate = apply_pointwise_mc(
            |y: &[f64]| hermite_eval(k, y[0]),
            rho,
            &[x],
            samples,
            derive_seed(seed, i as u64),
        )?;
        let target = factor * hermite_eval(k, x);
        points.push(EigenPoint {
            x,
            estimate,
            target,
            deviation: (estimate.mean - target).abs(),
            z: estimate.z_score(target),
        });
    }
    let max_abs_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let max_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    let pooled_z = if points.is_empty() {
        0.0
    } else {
        points.iter().map(|p| p.z).sum::<f64>() / (points.len() as f64).sqrt()
    };
    Ok(EigenReport {
        k,
        rho: rho.rho(),
        points,
        max_abs_deviation,
        max_z,
        pooled_z,
        pass: max_z <= 4.0,
        seed,
        samples,
    })
}

/// `||T_rho p - Pi_d T_rho p||^2 <= rho^(2d+2) ||p||^2`.
pub fn tail_bound_check(p: &HermiteExpansion, rho: NoiseLevel, d: usize) -> CheckReport {
    let smoothed = apply_to_expansion(p, rho);
    let lhs: f64 = smoothed
        .iter()
        .filter(|(a, _)| a.degree() > d)
        .map(|(_, c)| c * c)
        .sum();
    let norm = p.l2_norm();
    let rhs = rho.rho().powi(2 * d as i32 + 2) * norm * norm;
    CheckReport {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-12,
        seed: None,
        samples: None,
    }
}
