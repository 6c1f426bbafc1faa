//! Hermite truncations `Pi_d sign` of the one-dimensional sign function and
//! the asymptotic facts used to bound `||sign - Pi_d sign||_1`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, hermite_table, hermite_zero, HermiteExpansion};
use crate::integrate::{integrate_pieces, DEFAULT_MAX_INTERVALS};
use crate::stats::{normal_pdf, normal_sf};

/// Gaussian-weighted integrals stop here; the tail beyond carries < 1e-30 mass.
pub const GAUSSIAN_CUTOFF: f64 = 12.0;

/// Below this `|t|`, `H_d(t) / t` is replaced by its two-term Taylor expansion.
pub const TAYLOR_CUTOFF: f64 = 1e-4;

/// `C_1` in `int_0^tau |H_d(t)|/t dt <= C_1 d^(1/4) tau e^(tau^2/4)`, fitted once
/// at `d = 101` over `tau in [1, d^(1/6)]` (see [`fit_small_t_constant`]) and frozen.
pub const SMALL_T_CONSTANT: f64 = 0.1827;

/// `<sign, H_k> = sqrt(2/(k pi)) H_{k-1}(0)` for odd `k`, zero otherwise.
pub fn sign_coefficient(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        return 0.0;
    }
    (2.0 / (k as f64 * PI)).sqrt() * hermite_zero(k - 1)
}

fn require_odd(d: usize) -> Result<()> {
    if d.is_multiple_of(2) {
        return Err(Error::invalid(
            "d",
            format!("{d} must be odd (use {})", d.max(1) - 1),
        ));
    }
    Ok(())
}

/// `<sign, H_k>` by adaptive quadrature split at the jump,
/// `int_{-12}^{12} sign(x) H_k(x) phi(x) dx`.
pub fn sign_coefficient_quadrature(k: usize) -> Result<f64> {
    let mut breaks = oscillation_breaks(k, -GAUSSIAN_CUTOFF, 0.0);
    breaks.extend(
        oscillation_breaks(k, 0.0, GAUSSIAN_CUTOFF)
            .into_iter()
            .skip(1),
    );
    let sign = |x: f64| if x >= 0.0 { 1.0 } else { -1.0 };
    Ok(integrate_pieces(
        |x| sign(x) * hermite_eval(k, x) * normal_pdf(x),
        &breaks,
        1e-13,
        DEFAULT_MAX_INTERVALS,
    )?
    .value)
}

/// Odd-degree truncation `Pi_d sign = sum_{odd k <= d} <sign, H_k> H_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTruncation {
    degree: usize,
    /// `coefficients[i]` belongs to `k = 2i + 1`.
    coefficients: Vec<f64>,
}

/// Builds `Pi_d sign`; `d` must be odd.
pub fn truncation(d: usize) -> Result<SignTruncation> {
    require_odd(d)?;
    // Running H_{k-1}(0) avoids recomputing the product for every k.
    let mut h0 = 1.0;
    let mut coefficients = Vec::with_capacity(d / 2 + 1);
    for k in (1..=d).step_by(2) {
        if k > 1 {
            h0 = -h0 * (((k - 2) as f64) / ((k - 1) as f64)).sqrt();
        }
        coefficients.push((2.0 / (k as f64 * PI)).sqrt() * h0);
    }
    Ok(SignTruncation {
        degree: d,
        coefficients,
    })
}

impl SignTruncation {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `<sign, H_k>` as stored (zero for even `k` or `k > d`).
    pub fn coefficient(&self, k: usize) -> f64 {
        if k.is_multiple_of(2) || k > self.degree {
            0.0
        } else {
            self.coefficients[k / 2]
        }
    }

    /// Pairs `(k, <sign, H_k>)` for odd `k <= d`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| (2 * i + 1, c))
    }

    /// `sum_k <sign, H_k>^2`.
    pub fn parseval_sum(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `1 - sum_k <sign, H_k>^2 = ||sign - Pi_d sign||_2^2`.
    pub fn parseval_residual(&self) -> f64 {
        1.0 - self.parseval_sum()
    }

    pub fn to_expansion(&self) -> HermiteExpansion {
        HermiteExpansion::univariate(self.iter().map(|(k, c)| (k as u32, c)))
    }
}

/// `Pi_d sign(x)` from the coefficients, in one upward recurrence pass.
pub fn truncation_eval_direct(t: &SignTruncation, x: f64) -> f64 {
    let mut prev = 1.0;
    let mut cur = x;
    let mut sum = t.coefficients[0] * cur;
    for j in 1..t.degree {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if (j + 1) % 2 == 1 {
            sum += t.coefficients[j.div_ceil(2)] * cur;
        }
    }
    sum
}

/// `H_d(t) / t`, with the removable singularity at 0 handled by
/// `sqrt(d) H_{d-1}(0) + sqrt(d(d-1)(d-2)) H_{d-3}(0) t^2 / 6` for odd `d`.
fn hermite_over_t(d: usize, t: f64) -> f64 {
    if t.abs() < TAYLOR_CUTOFF {
        let df = d as f64;
        let first = df.sqrt() * hermite_zero(d - 1);
        let second = if d >= 3 {
            (df * (df - 1.0) * (df - 2.0)).sqrt() * hermite_zero(d - 3) / 6.0
        } else {
            0.0
        };
        first + second * t * t
    } else {
        hermite_eval(d, t) / t
    }
}

/// Splits `[a, b]` into pieces about half an oscillation of `H_d` long.
fn oscillation_breaks(d: usize, a: f64, b: f64) -> Vec<f64> {
    let step = FRAC_PI_2 / (d as f64).sqrt().max(1.0);
    let pieces = (((b - a) / step).ceil() as usize).max(1);
    (0..=pieces)
        .map(|i| a + (b - a) * i as f64 / pieces as f64)
        .collect()
}

/// `Pi_d sign(x) = sqrt(2d/pi) H_{d-1}(0) int_0^x H_d(t)/t dt` for odd `d`, `x >= 0`,
/// to absolute tolerance `tol`.
pub fn truncation_eval_integral(d: usize, x: f64, tol: f64) -> Result<f64> {
    require_odd(d)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::invalid(
            "x",
            format!("{x} must be finite and non-negative"),
        ));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let prefactor = (2.0 * d as f64 / PI).sqrt() * hermite_zero(d - 1);
    let breaks = oscillation_breaks(d, 0.0, x);
    let r = integrate_pieces(
        |t| hermite_over_t(d, t),
        &breaks,
        tol / prefactor.abs(),
        DEFAULT_MAX_INTERVALS,
    )?;
    Ok(prefactor * r.value)
}

/// `||sign - Pi_d sign||_1 = 2 int_0^inf |1 - Pi_d sign(x)| phi(x) dx`,
/// integrated on `[0, 12]` to absolute error `1e-7`.
pub fn truncation_l1_error(d: usize) -> Result<f64> {
    let t = truncation(d)?;
    let breaks = oscillation_breaks(d, 0.0, GAUSSIAN_CUTOFF);
    let r = integrate_pieces(
        |x| (1.0 - truncation_eval_direct(&t, x)).abs() * normal_pdf(x),
        &breaks,
        0.5e-7,
        DEFAULT_MAX_INTERVALS,
    )?;
    Ok(2.0 * r.value)
}

/// One row of the `sign-study` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignStudyRow {
    pub d: usize,
    pub l1_error: f64,
    pub parseval_residual: f64,
}

pub fn sign_study_row(d: usize) -> Result<SignStudyRow> {
    Ok(SignStudyRow {
        d,
        l1_error: truncation_l1_error(d)?,
        parseval_residual: truncation(d)?.parseval_residual(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `r_d(x) = H_d(x) e^(-x^2/4) (pi d / 2)^(1/4) - sin((1 - d) pi/2 + sqrt(d) x)`
/// with the envelope `max(|x|^3/sqrt(d), |x|/sqrt(d), x^2/d, 1/d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderSample {
    pub degree: usize,
    pub x: f64,
    pub r: f64,
    pub bound: f64,
}

/// `sin((1 - d) pi/2 + y)` with the multiple of `pi/2` reduced exactly.
fn shifted_sine(d: usize, y: f64) -> f64 {
    if d % 2 == 1 {
        let s = y.sin();
        if ((d - 1) / 2).is_multiple_of(2) {
            s
        } else {
            -s
        }
    } else {
        let c = y.cos();
        if (d / 2).is_multiple_of(2) {
            c
        } else {
            -c
        }
    }
}

pub fn plancherel_rotach_remainder(d: usize, x: f64) -> Result<RemainderSample> {
    let df = d as f64;
    if d == 0 || x.is_nan() || x.abs() > df.sqrt() {
        return Err(Error::invalid(
            "x",
            format!("|{x}| must be at most sqrt(d) with d >= 1"),
        ));
    }
    let scaled = hermite_eval(d, x) * (-x * x / 4.0).exp() * (PI * df / 2.0).powf(0.25);
    let r = scaled - shifted_sine(d, df.sqrt() * x);
    let ax = x.abs();
    let bound = (ax.powi(3) / df.sqrt())
        .max(ax / df.sqrt())
        .max(x * x / df)
        .max(1.0 / df);
    Ok(RemainderSample {
        degree: d,
        x,
        r,
        bound,
    })
}

/// `|H_d(0)| (pi/2)^(1/4) d^(1/4)`, which tends to 1 for even `d`.
pub fn hermite_zero_scaled(d: usize) -> f64 {
    hermite_zero(d).abs() * FRAC_PI_2.powf(0.25) * (d as f64).powf(0.25)
}

/// `|H_d(t)| e^(-t^2/4) d^(1/4)`.
pub fn hermite_envelope(d: usize, t: f64) -> f64 {
    hermite_eval(d, t).abs() * (-t * t / 4.0).exp() * (d as f64).powf(0.25)
}

/// `|sum_{k<d} H_k(x) H_k(0) - sqrt(d) (H_d(x) H_{d-1}(0) - H_{d-1}(x) H_d(0)) / x|`.
pub fn christoffel_darboux_residual(d: usize, x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    if x.is_nan() || x.abs() <= 1e-6 {
        return Err(Error::invalid("x", format!("|{x}| must exceed 1e-6")));
    }
    let hx = hermite_table(d, x);
    let sum: f64 = (0..d).map(|k| hx[k] * hermite_zero(k)).sum();
    let closed =
        (d as f64).sqrt() * (hx[d] * hermite_zero(d - 1) - hx[d - 1] * hermite_zero(d)) / x;
    Ok((sum - closed).abs())
}

/// `Si(z) = int_0^z sin(t)/t dt`: power series for `z <= 4`, adaptive quadrature beyond.
pub fn sine_integral(z: f64, tol: f64) -> Result<f64> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::invalid(
            "z",
            format!("{z} must be finite and non-negative"),
        ));
    }
    if z <= 4.0 {
        Ok(sine_integral_series(z))
    } else {
        sine_integral_quadrature(z, tol)
    }
}

/// `sum_n (-1)^n z^(2n+1) / ((2n+1) (2n+1)!)`, accurate to rounding for `z <= 4`.
pub fn sine_integral_series(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    let z2 = z * z;
    let mut n = 0usize;
    loop {
        let a = (2 * n + 1) as f64;
        // term_n = (-1)^n z^(2n+1) / (2n+1)!
        term *= -z2 / ((a + 1.0) * (a + 2.0));
        n += 1;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            return sum;
        }
    }
}

/// Adaptive quadrature of `sin(t)/t` with breaks at multiples of `pi`.
pub fn sine_integral_quadrature(z: f64, tol: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let whole = (z / PI).floor() as usize;
    let mut breaks: Vec<f64> = (0..=whole).map(|k| k as f64 * PI).collect();
    if *breaks.last().expect("non-empty") < z {
        breaks.push(z);
    }
    let sinc = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
    Ok(integrate_pieces(sinc, &breaks, tol, DEFAULT_MAX_INTERVALS)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineIntegralRow {
    pub z: f64,
    pub si: f64,
    /// `|1 - (2/pi) Si(z)|`.
    pub gap: f64,
    /// `gap / min(1, 1/z)`.
    pub ratio: f64,
}

/// Evaluates `|1 - (2/pi) Si(z)| <= C min(1, 1/z)` over `zs` and reports the
/// smallest admissible `C` (the largest ratio).
pub fn sine_integral_constant(zs: &[f64], tol: f64) -> Result<(f64, Vec<SineIntegralRow>)> {
    let rows = zs
        .iter()
        .map(|&z| {
            let si = sine_integral(z, tol)?;
            let gap = (1.0 - si / FRAC_PI_2).abs();
            Ok(SineIntegralRow {
                z,
                si,
                gap,
                ratio: gap / 1f64.min(1.0 / z),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((c, rows))
}

/// `int_0^tau |H_d(t)|/t dt`.
pub fn small_t_integral(d: usize, tau: f64) -> Result<f64> {
    require_odd(d)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(
            "tau",
            format!("{tau} must be finite and non-negative"),
        ));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let breaks = oscillation_breaks(d, 0.0, tau);
    Ok(integrate_pieces(
        |t| hermite_over_t(d, t).abs(),
        &breaks,
        1e-10,
        DEFAULT_MAX_INTERVALS,
    )?
    .value)
}

/// `int_tau^inf int_tau^x |H_d(t)|/t dt dphi(x) = int_tau^inf |H_d(t)|/t P(X > t) dt`.
pub fn large_t_integral(d: usize, tau: f64) -> Result<f64> {
    require_odd(d)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(
            "tau",
            format!("{tau} must be finite and non-negative"),
        ));
    }
    if tau >= GAUSSIAN_CUTOFF {
        return Ok(0.0);
    }
    let breaks = oscillation_breaks(d, tau, GAUSSIAN_CUTOFF);
    Ok(integrate_pieces(
        |t| hermite_over_t(d, t).abs() * normal_sf(t),
        &breaks,
        1e-12,
        DEFAULT_MAX_INTERVALS,
    )?
    .value)
}

/// Largest `small_t_integral(d, tau) / (d^(1/4) tau e^(tau^2/4))` over
/// 41 equally spaced `tau` in `[1, d^(1/6)]`.
pub fn fit_small_t_constant(d: usize) -> Result<f64> {
    let top = (d as f64).powf(1.0 / 6.0);
    (0..=40)
        .map(|j| {
            let tau = 1.0 + (top - 1.0) * j as f64 / 40.0;
            Ok(small_t_integral(d, tau)? / small_t_scale(d, tau))
        })
        .try_fold(0.0f64, |m, r: Result<f64>| Ok(m.max(r?)))
}

fn small_t_scale(d: usize, tau: f64) -> f64 {
    (d as f64).powf(0.25) * tau * (tau * tau / 4.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub d: usize,
    pub tau: f64,
    pub small_t: f64,
    /// `C_1 d^(1/4) tau e^(tau^2/4)`; `None` when `tau > d^(1/6)`.
    pub small_t_bound: Option<f64>,
    pub small_t_pass: Option<bool>,
    pub large_t: f64,
    /// `e^(-tau^2/4)`.
    pub large_t_bound: f64,
    pub large_t_pass: bool,
    pub c1: f64,
}

pub fn appendix_integral_checks(d: usize, tau: f64) -> Result<AppendixReport> {
    let small_t = small_t_integral(d, tau)?;
    let large_t = large_t_integral(d, tau)?;
    let small_t_bound =
        (tau <= (d as f64).powf(1.0 / 6.0)).then(|| SMALL_T_CONSTANT * small_t_scale(d, tau));
    let large_t_bound = (-tau * tau / 4.0).exp();
    Ok(AppendixReport {
        d,
        tau,
        small_t,
        small_t_bound,
        small_t_pass: small_t_bound.map(|b| small_t <= b),
        large_t,
        large_t_bound,
        large_t_pass: large_t <= large_t_bound,
        c1: SMALL_T_CONSTANT,
    })
}
