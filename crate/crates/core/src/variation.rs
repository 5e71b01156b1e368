//! Increments and variation statistics of discretely observed paths.
//!
//! All functions work on the raw node values `X_0, ..., X_m` of a uniform
//! grid. Sums use compensated accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::fgn::FbmPath;
use crate::numeric::{compensated_sum, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn from_int(order: u8) -> Result<Self> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(FgdError::InvalidParameter(format!("increment order must be 1 or 2, got {order}"))),
        }
    }

    fn min_nodes(self) -> usize {
        match self {
            Order::First => 2,
            Order::Second => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeq {
    pub order: Order,
    pub values: Vec<f64>,
}

fn ensure_nodes(values: &[f64], needed: usize) -> Result<()> {
    if values.len() < needed {
        Err(FgdError::PathTooShort { nodes: values.len(), needed })
    } else {
        Ok(())
    }
}

/// Order-1 increments `X_k - X_{k-1}` (`k = 1..m`) or order-2 increments
/// `X_{k+1} - 2 X_k + X_{k-1}` (`k = 1..m-1`).
pub fn delta(values: &[f64], order: Order) -> Result<IncrementSeq> {
    ensure_nodes(values, order.min_nodes())?;
    let values = match order {
        Order::First => values.windows(2).map(|w| w[1] - w[0]).collect(),
        Order::Second => values.windows(3).map(second_difference).collect(),
    };
    Ok(IncrementSeq { order, values })
}

#[inline]
fn second_difference(w: &[f64]) -> f64 {
    w[2] - 2.0 * w[1] + w[0]
}

/// `V^{(i)} = sum_k (Delta^{(i)} X_k / X_{k-1})^2`.
pub fn normalized_variation(values: &[f64], order: Order) -> Result<f64> {
    ensure_nodes(values, order.min_nodes())?;
    let sum = match order {
        Order::First => compensated_sum(values.windows(2).map(|w| {
            let r = (w[1] - w[0]) / w[0];
            r * r
        })),
        Order::Second => compensated_sum(values.windows(3).map(|w| {
            let r = second_difference(w) / w[0];
            r * r
        })),
    };
    Ok(sum)
}

/// Sum of squared raw increments (no normalization by the path level).
pub fn squared_increment_sum(values: &[f64], order: Order) -> Result<f64> {
    Ok(compensated_sum(delta(values, order)?.values.iter().map(|d| d * d)))
}

/// `W_{n,k}`: sum of squared fine-grid second differences in the window of
/// half-width `k_n` fine steps centred on coarse node `k`.
///
/// `fine` must have `m = n * k_n` increments; valid `k` are `1..=n-1`.
pub fn w_statistic(fine: &[f64], n: usize, k: usize) -> Result<f64> {
    let (k_n, _) = fine_layout(fine, n)?;
    if n < 2 || k == 0 || k >= n {
        return Err(FgdError::IndexOutOfRange { index: k, lo: 1, hi: n.saturating_sub(1) });
    }
    Ok(w_window(fine, k_n, k))
}

fn fine_layout(fine: &[f64], n: usize) -> Result<(usize, usize)> {
    let m = fine.len().saturating_sub(1);
    if n == 0 || m == 0 || !m.is_multiple_of(n) {
        return Err(FgdError::NotADivisor { n, m });
    }
    Ok((m / n, m))
}

fn w_window(fine: &[f64], k_n: usize, k: usize) -> f64 {
    let centre = k * k_n;
    let lo = centre + 1 - k_n;
    let hi = centre + k_n - 1;
    compensated_sum(fine[lo - 1..=hi + 1].windows(3).map(|w| {
        let d = second_difference(w);
        d * d
    }))
}

/// All `W_{n,k}` for `k = 1..=n-1` (index 0 of the result is `W_{n,1}`).
pub fn w_statistics(fine: &[f64], n: usize) -> Result<Vec<f64>> {
    let (k_n, _) = fine_layout(fine, n)?;
    if n < 2 {
        return Err(FgdError::PathTooShort { nodes: n + 1, needed: 3 });
    }
    Ok((1..n).map(|k| w_window(fine, k_n, k)).collect())
}

/// Mean of `|a + b| / (|a| + |b|)` over consecutive second differences.
///
/// Pairs with `|a| + |b| = 0` contribute 1.
pub fn ratio_statistic(values: &[f64]) -> Result<f64> {
    ensure_nodes(values, 4)?;
    let d = delta(values, Order::Second)?.values;
    let pairs = d.len() - 1;
    let total = compensated_sum(d.windows(2).map(|w| {
        let denom = w[0].abs() + w[1].abs();
        if denom == 0.0 {
            1.0
        } else {
            (w[0] + w[1]).abs() / denom
        }
    }));
    Ok(total / pairs as f64)
}

/// `c_1 = 1`, `c_2 = 4 - 2^{2H}`.
pub fn variation_constant(h: f64, order: Order) -> f64 {
    match order {
        Order::First => 1.0,
        Order::Second => 4.0 - 2f64.powf(2.0 * h),
    }
}

/// Normalized variation of an fBm path,
/// `n^{2H-1} / c_i * sum_k (T^{-H} Delta^{(i)} B_k)^2`.
///
/// Converges to 1 almost surely. Sums over every available increment.
pub fn fbm_normalized_variation(fbm: &FbmPath, order: Order) -> Result<f64> {
    let h = fbm.hurst().value();
    if h == 0.5 {
        return Err(FgdError::InvalidHurst(h));
    }
    let grid = fbm.grid();
    let n = grid.points() as f64;
    let raw = squared_increment_sum(fbm.values(), order)?;
    Ok(n.powf(2.0 * h - 1.0) / variation_constant(h, order) * raw * grid.horizon().powf(-2.0 * h))
}

/// `max_k |Vhat_k - k T / n|` over `k = 2..n-1`, where `Vhat_k` is the
/// partial normalized second-order variation up to node `k`.
pub fn sup_deviation(fbm: &FbmPath) -> Result<f64> {
    let values = fbm.values();
    ensure_nodes(values, 5)?;
    let h = fbm.hurst().value();
    let grid = fbm.grid();
    let n = grid.points();
    let t = grid.horizon();
    let scale = (n as f64).powf(2.0 * h - 1.0) / (t.powf(2.0 * h - 1.0) * variation_constant(h, Order::Second));
    let d = delta(values, Order::Second)?.values;
    let mut acc = KahanSum::new();
    let mut worst: f64 = 0.0;
    for (idx, x) in d.iter().enumerate() {
        acc.add(x * x);
        let k = idx + 1;
        if k >= 2 {
            let dev = (scale * acc.value() - k as f64 * t / n as f64).abs();
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}
