//! Correlation functions and limit variances of fBm variation statistics,
//! plus the `Lambda_2` functional behind the ratio estimator.
//!
//! Infinite series are summed term by term until the terms fall below
//! [`SeriesPolicy::tolerance`]. The one slowly decaying series
//! ([`sigma_star_first`], terms of order `j^{4H-4}`) gets an asymptotic tail
//! estimate once direct summation stops.

use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::numeric::{abs_pow, KahanSum};
use crate::rng::{rng_from_seed, standard_normals};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPolicy {
    pub tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_terms: 10_000_000 }
    }
}

impl SeriesPolicy {
    pub fn new(tolerance: f64, max_terms: usize) -> Result<Self> {
        if !(tolerance > 0.0) || max_terms == 0 {
            return Err(FgdError::InvalidParameter(format!(
                "series policy needs tolerance > 0 and max_terms > 0, got {tolerance}, {max_terms}"
            )));
        }
        Ok(Self { tolerance, max_terms })
    }
}

/// Direct summation window used before the asymptotic tail takes over.
const DIRECT_TERMS_WITH_TAIL: usize = 1 << 17;

/// Terms are only tested against the tolerance after this lag, so isolated
/// zeros of the correlation functions near the origin do not stop the sum.
const MIN_TERMS: usize = 8;

fn c2(h: f64) -> f64 {
    4.0 - 2f64.powf(2.0 * h)
}

/// Correlation of unit-step first-order fBm increments at lag `j`.
pub fn rho_first(j: i64, h: f64) -> f64 {
    let two_h = 2.0 * h;
    let j = j as f64;
    -0.5 * (-abs_pow(j - 1.0, two_h) + 2.0 * abs_pow(j, two_h) - abs_pow(j + 1.0, two_h))
}

/// Correlation of second-order fBm increments at lag `j`.
pub fn rho_second(j: i64, h: f64) -> f64 {
    let p = |x: f64| abs_pow(x, 2.0 * h);
    let j = j as f64;
    (-6.0 * p(j) - (p(j - 2.0) + p(j + 2.0)) + 4.0 * (p(j - 1.0) + p(j + 1.0))) / (2.0 * c2(h))
}

/// Correlation between second differences at step 2 and step 1.
pub fn rho_tilde(j: i64, h: f64) -> f64 {
    let p = |x: f64| abs_pow(x, 2.0 * h);
    let j = j as f64;
    let num = -p(j - 2.0) + 2.0 * p(j - 1.0) + p(j) - 4.0 * p(j + 1.0) + p(j + 2.0) + 2.0 * p(j + 3.0)
        - p(j + 4.0);
    num / (2.0 * c2(h) * 2f64.powf(h))
}

/// Cross-scale correlation `rho_{b,c}(x)` of second differences with steps
/// `b` and `c`.
pub fn rho_bc(x: i64, b: i64, c: i64, h: f64) -> f64 {
    let p = |v: i64| abs_pow(v as f64, 2.0 * h);
    let bracket = -p(x) + 2.0 * p(x - b) - p(x - 2 * b) + 2.0 * p(x + c) - 4.0 * p(x + c - b)
        + 2.0 * p(x + c - 2 * b)
        - p(x + 2 * c)
        + 2.0 * p(x + 2 * c - b)
        - p(x + 2 * c - 2 * b);
    ((b * c) as f64).powf(-h) * bracket / (2.0 * c2(h))
}

/// Sum of `term(j)` for `j = 1, 2, ...`. Returns the sum and whether it hit
/// `limit` before the terms dropped below the tolerance.
fn one_sided<F: Fn(i64) -> f64>(term: F, tolerance: f64, limit: usize) -> (f64, usize, bool) {
    let mut acc = KahanSum::new();
    let mut small_run = 0;
    for j in 1..=limit {
        let t = term(j as i64);
        acc.add(t);
        if j >= MIN_TERMS && t.abs() < tolerance {
            small_run += 1;
            if small_run >= 2 {
                return (acc.value(), j, false);
            }
        } else {
            small_run = 0;
        }
    }
    (acc.value(), limit, true)
}

/// Sum of `term(j)` over all integers, truncated symmetrically.
fn two_sided<F: Fn(i64) -> f64>(term: F, tolerance: f64, limit: usize) -> f64 {
    let (pos, _, _) = one_sided(&term, tolerance, limit);
    let (neg, _, _) = one_sided(|j| term(-j), tolerance, limit);
    term(0) + pos + neg
}

/// `sigma^2(H) = 2 (1 + 2 sum_{j>=1} rho_H(j)^2)`.
pub fn sigma_sq(h: f64, policy: SeriesPolicy) -> Result<f64> {
    check_open_unit(h)?;
    let (s, _, _) = one_sided(|j| rho_second(j, h).powi(2), policy.tolerance, policy.max_terms);
    Ok(2.0 * (1.0 + 2.0 * s))
}

/// `sigma_*^2(H) = 2 (1 + 2 sum_{j>=1} rhohat_H(j)^2)`, finite for `H < 3/4`.
pub fn sigma_star_first(h: f64, policy: SeriesPolicy) -> Result<f64> {
    check_open_unit(h)?;
    if h >= 0.75 {
        return Err(FgdError::InvalidHurst(h));
    }
    let limit = policy.max_terms.min(DIRECT_TERMS_WITH_TAIL);
    let (s, last, truncated) = one_sided(|j| rho_first(j, h).powi(2), policy.tolerance, limit);
    let tail = if truncated { rho_first_sq_tail(h, last) } else { 0.0 };
    Ok(2.0 * (1.0 + 2.0 * (s + tail)))
}

/// Asymptotic `sum_{j > last} rhohat_H(j)^2`.
///
/// `rhohat_H(j) = a j^{2H-2} + b j^{2H-4} + O(j^{2H-6})` with
/// `a = H(2H-1)` and `b = binom(2H, 4)`; the power sums are Hurwitz zeta
/// values evaluated by Euler–Maclaurin.
fn rho_first_sq_tail(h: f64, last: usize) -> f64 {
    let two_h = 2.0 * h;
    let a = h * (two_h - 1.0);
    let b = two_h * (two_h - 1.0) * (two_h - 2.0) * (two_h - 3.0) / 24.0;
    let start = last as f64 + 1.0;
    a * a * hurwitz_tail(4.0 - 2.0 * two_h, start) + 2.0 * a * b * hurwitz_tail(6.0 - 2.0 * two_h, start)
}

/// `sum_{j >= start} j^{-s}` for `s > 1` and large `start`.
fn hurwitz_tail(s: f64, start: f64) -> f64 {
    start.powf(1.0 - s) / (s - 1.0) + 0.5 * start.powf(-s) + s / 12.0 * start.powf(-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * start.powf(-s - 3.0)
}

/// `sigma_{1,2}(H) = sum_{j in Z} rhotilde_H(j)^2`.
pub fn sigma12(h: f64, policy: SeriesPolicy) -> Result<f64> {
    check_open_unit(h)?;
    Ok(two_sided(|j| rho_tilde(j, h).powi(2), policy.tolerance, policy.max_terms))
}

/// Limit variance of `2 ln 2 sqrt(n) (Hhat^{(1)} - H)`:
/// `3/2 sigma^2(H) - 2 sigma_{1,2}(H)`.
pub fn limit_var_h1(h: f64, policy: SeriesPolicy) -> Result<f64> {
    Ok(1.5 * sigma_sq(h, policy)? - 2.0 * sigma12(h, policy)?)
}

/// Hermite coefficient `c_{2p,2} = prod_{i<p} (2 - 2i) / (2p)!`.
pub fn hermite_coefficient(p: u32) -> f64 {
    let mut num = 1.0;
    for i in 0..p {
        num *= 2.0 - 2.0 * i as f64;
    }
    let mut fact = 1.0;
    for k in 1..=2 * p {
        fact *= k as f64;
    }
    num / fact
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Highest Hermite order checked when collapsing the `rho_2` series.
const HERMITE_ORDERS: u32 = 10;

/// `rho_2(k_i, k_j)`.
///
/// Only `p = 1` contributes because `c_{2p,2} = 0` for every `p >= 2`; the
/// coefficients are evaluated and the vanishing is asserted.
pub fn rho2(ki: usize, kj: usize, h: f64, policy: SeriesPolicy) -> Result<f64> {
    check_open_unit(h)?;
    if ki == 0 || kj == 0 {
        return Err(FgdError::InvalidParameter("scales must be positive".into()));
    }
    let (bi, bj) = (ki as i64, kj as i64);
    let mut total = 0.0;
    for p in 1..=HERMITE_ORDERS {
        let c = hermite_coefficient(p);
        if p >= 2 {
            assert_eq!(c, 0.0, "c_(2p,2) must vanish for p >= 2");
            continue;
        }
        let power = 2 * p as i32;
        let mut inner = 0.0;
        for s in 0..bi {
            inner += two_sided(
                |r| rho_bc(bi * r + bj * s, bi, bj, h).powi(power),
                policy.tolerance,
                policy.max_terms,
            );
        }
        total += c * c * factorial(2 * p) * inner;
    }
    Ok(total / ((ki * kj) as f64).sqrt())
}

/// `sigma^2_{2,l}(k, d) = sum_i sum_j d_i d_j rho_2(k_i, k_j)`.
pub fn sigma2_l(ks: &[usize], d: &[f64], h: f64, policy: SeriesPolicy) -> Result<f64> {
    if ks.len() != d.len() || ks.is_empty() {
        return Err(FgdError::InvalidParameter("scales and coefficients must have equal nonzero length".into()));
    }
    let mut total = 0.0;
    for (i, &ki) in ks.iter().enumerate() {
        for (j, &kj) in ks.iter().enumerate() {
            total += d[i] * d[j] * rho2(ki, kj, h, policy)?;
        }
    }
    Ok(total)
}

/// Coefficients `d_i = z_i / (2 sqrt(r_i))` for the `h3` limit variance.
pub fn h3_variance_coefficients(ratios: &[usize], z: &[f64]) -> Vec<f64> {
    ratios.iter().zip(z).map(|(&r, &zi)| 0.5 * zi / (r as f64).sqrt()).collect()
}

/// `Lambda_2(H) ~ 0.5174 + 0.1468 H`.
pub fn lambda2_affine(h: f64) -> f64 {
    crate::hurst::LAMBDA2_INTERCEPT + crate::hurst::LAMBDA2_SLOPE * h
}

/// `|a + b| / (|a| + |b|)`, 1 when both vanish.
#[inline]
pub fn psi(a: f64, b: f64) -> f64 {
    let den = a.abs() + b.abs();
    if den == 0.0 {
        1.0
    } else {
        (a + b).abs() / den
    }
}

/// Monte Carlo `E psi(a, b)` for standard normals with correlation `corr`.
pub fn lambda2_mc_correlated(corr: f64, replicates: usize, seed: u64) -> Result<f64> {
    if replicates == 0 {
        return Err(FgdError::TooFewSamples { got: 0, needed: 1 });
    }
    if !(-1.0..=1.0).contains(&corr) {
        return Err(FgdError::InvalidParameter(format!("correlation {corr} outside [-1, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let comp = (1.0 - corr * corr).max(0.0).sqrt();
    let mut acc = KahanSum::new();
    const CHUNK: usize = 1 << 14;
    let mut left = replicates;
    while left > 0 {
        let take = left.min(CHUNK);
        let z = standard_normals(&mut rng, 2 * take);
        for pair in z.chunks_exact(2) {
            let a = pair[0];
            let b = corr * a + comp * pair[1];
            acc.add(psi(a, b));
        }
        left -= take;
    }
    Ok(acc.value() / replicates as f64)
}

/// Monte Carlo `Lambda_2(H)`: second increments of fBm at adjacent nodes
/// have correlation `rho_H(1)`.
pub fn lambda2_mc(h: f64, replicates: usize, seed: u64) -> Result<f64> {
    check_open_unit(h)?;
    lambda2_mc_correlated(rho_second(1, h), replicates, seed)
}

fn check_open_unit(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(FgdError::InvalidHurst(h))
    }
}
