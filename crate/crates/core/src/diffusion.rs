//! Diffusion-coefficient estimators.
//!
//! Each estimator takes the Hurst estimate as an argument so any
//! `(sigma_i, H_j)` pairing can be formed by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::hurst::{check_schedule_paths, weights, RatioSchedule};
use crate::numeric::compensated_sum;
use crate::variation::{normalized_variation, variation_constant, Order};

fn check_h(h: f64) -> Result<f64> {
    if h > 0.0 && h < 1.0 {
        Ok(h)
    } else {
        Err(FgdError::InvalidHurst(h))
    }
}

fn check_horizon(t: f64) -> Result<f64> {
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(FgdError::InvalidGrid(format!("horizon must be positive, got {t}")))
    }
}

fn increments(values: &[f64]) -> Result<usize> {
    match values.len() {
        0 | 1 => Err(FgdError::PathTooShort { nodes: values.len(), needed: 2 }),
        len => Ok(len - 1),
    }
}

/// `n^{2H-1} T^{-2H} V^{(1)}_{n,T}`.
pub fn sigma2_1(values: &[f64], h_est: f64, horizon: f64) -> Result<f64> {
    let h = check_h(h_est)?;
    let t = check_horizon(horizon)?;
    let n = increments(values)? as f64;
    Ok(n.powf(2.0 * h - 1.0) * t.powf(-2.0 * h) * normalized_variation(values, Order::First)?)
}

/// `n^{2H-1} T^{-2H} / (4 - 2^{2H}) V^{(2)}_{n,T}`.
pub fn sigma2_2(values: &[f64], h_est: f64, horizon: f64) -> Result<f64> {
    let h = check_h(h_est)?;
    let t = check_horizon(horizon)?;
    let n = increments(values)? as f64;
    let v2 = normalized_variation(values, Order::Second)?;
    Ok(n.powf(2.0 * h - 1.0) * t.powf(-2.0 * h) / variation_constant(h, Order::Second) * v2)
}

/// `sum (Delta X_k)^2 / ((T/n)^{2H} sum X_{k-1}^2)`.
pub fn sigma2_3(values: &[f64], h_est: f64, horizon: f64) -> Result<f64> {
    let h = check_h(h_est)?;
    let t = check_horizon(horizon)?;
    let n = increments(values)?;
    let num = compensated_sum(values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])));
    let den = compensated_sum(values[..n].iter().map(|x| x * x));
    if den <= 0.0 {
        return Err(FgdError::ZeroVariation);
    }
    Ok(num / ((t / n as f64).powf(2.0 * h) * den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma4 {
    /// Estimate on the `sigma` scale.
    pub sigma: f64,
    pub sigma_sq: f64,
    /// The intercept `B`.
    pub intercept: f64,
}

/// `exp(B) / (4 - 2^{2H})` with
/// `B = 1/2 mean_i ln(V_i / (n_i - 1)) + H mean_i ln n_i`.
pub fn sigma4_from_variations(variations: &[f64], sizes: &[usize], h3_est: f64) -> Result<Sigma4> {
    let h = check_h(h3_est)?;
    if variations.len() != sizes.len() || sizes.is_empty() {
        return Err(FgdError::GridMismatch("one variation per grid size required".into()));
    }
    let l = sizes.len() as f64;
    let mut mean_log_v = 0.0;
    for (&v, &n) in variations.iter().zip(sizes) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(FgdError::ZeroVariation);
        }
        mean_log_v += (v / (n as f64 - 1.0)).ln();
    }
    mean_log_v /= l;
    let mean_log_n = sizes.iter().map(|&n| (n as f64).ln()).sum::<f64>() / l;
    let intercept = 0.5 * mean_log_v + h * mean_log_n;
    let sigma = intercept.exp() / variation_constant(h, Order::Second);
    Ok(Sigma4 { sigma, sigma_sq: sigma * sigma, intercept })
}

/// `paths[i]` is the path on `schedule.sizes()[i]` increments.
pub fn sigma4(paths: &[&[f64]], schedule: &RatioSchedule, h3_est: f64) -> Result<Sigma4> {
    let sizes = schedule.sizes();
    check_schedule_paths(paths, &sizes)?;
    weights(schedule)?;
    let variations = paths
        .iter()
        .map(|p| normalized_variation(p, Order::Second))
        .collect::<Result<Vec<_>>>()?;
    sigma4_from_variations(&variations, &sizes, h3_est)
}
