//! Hurst-index estimators for fractional Gompertz paths.
//!
//! * [`h1`]: log-ratio of second-order normalized variations at `n` and `2n`.
//! * [`h2`]: coarse second differences against local fine-grid energy `W_{n,k}`.
//! * [`h3`]: log-regression of `V^{(2)}_{n_j} / (n_j - 1)` over several grids.
//! * [`h4`]: affine inversion of the increment ratio statistic.
//!
//! Estimates are never clipped; values outside `(0, 1)` carry a flag.

use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::variation::{normalized_variation, ratio_statistic, squared_increment_sum, w_statistics, Order};

/// Intercept of the affine approximation of `Lambda_2(H)`.
pub const LAMBDA2_INTERCEPT: f64 = 0.5174;
/// Slope of the affine approximation of `Lambda_2(H)`.
pub const LAMBDA2_SLOPE: f64 = 0.1468;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub value: f64,
    pub out_of_range: bool,
}

impl HurstEstimate {
    pub fn new(value: f64) -> Self {
        Self { value, out_of_range: !(value > 0.0 && value < 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `n_j = r_j * n`.
    #[serde(alias = "mult")]
    Multiplicative,
    /// `n_j = n / r_j`.
    #[default]
    #[serde(alias = "div")]
    Divisive,
}

impl std::str::FromStr for Convention {
    type Err = FgdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mult" | "multiplicative" => Ok(Convention::Multiplicative),
            "div" | "divisive" => Ok(Convention::Divisive),
            other => Err(FgdError::InvalidParameter(format!("unknown convention {other:?}"))),
        }
    }
}

/// Set of grid sizes used by [`h3`] and the `sigma_4` estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSchedule {
    ratios: Vec<usize>,
    base: usize,
    convention: Convention,
}

impl RatioSchedule {
    pub fn new(ratios: Vec<usize>, base: usize, convention: Convention) -> Result<Self> {
        if ratios.len() < 2 {
            return Err(FgdError::DegenerateSchedule(format!("need at least two ratios, got {}", ratios.len())));
        }
        if base == 0 || ratios.contains(&0) {
            return Err(FgdError::DegenerateSchedule("ratios and base must be positive".into()));
        }
        let mut sorted = ratios.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ratios.len() {
            return Err(FgdError::DegenerateSchedule(format!("ratios must be distinct: {ratios:?}")));
        }
        if convention == Convention::Divisive {
            if let Some(r) = ratios.iter().find(|&&r| !base.is_multiple_of(r)) {
                return Err(FgdError::DegenerateSchedule(format!("{r} does not divide {base}")));
            }
        }
        let schedule = Self { ratios, base, convention };
        if schedule.sizes().iter().any(|&s| s < 2) {
            return Err(FgdError::DegenerateSchedule("every grid needs at least two increments".into()));
        }
        Ok(schedule)
    }

    /// `r = (1, 2, 4, 8)`, divisive.
    pub fn default_for(base: usize) -> Result<Self> {
        Self::new(vec![1, 2, 4, 8], base, Convention::Divisive)
    }

    pub fn ratios(&self) -> &[usize] {
        &self.ratios
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn with_base(&self, base: usize) -> Result<Self> {
        Self::new(self.ratios.clone(), base, self.convention)
    }

    /// Grid sizes `n_j`, in the order of the ratios.
    pub fn sizes(&self) -> Vec<usize> {
        self.ratios
            .iter()
            .map(|&r| match self.convention {
                Convention::Multiplicative => r * self.base,
                Convention::Divisive => self.base / r,
            })
            .collect()
    }

    /// Finest grid that every `n_j` divides.
    pub fn finest(&self) -> usize {
        self.sizes().into_iter().fold(1, lcm)
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionWeights {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Centred log-scale regressors `y` and weights `z = y / sum(y^2)`.
///
/// `y_i` is `ln r_i` minus its mean under the multiplicative convention.
/// Under the divisive convention the regressor is `ln n_i = ln n - ln r_i`,
/// so `y_i` changes sign.
pub fn weights(schedule: &RatioSchedule) -> Result<RegressionWeights> {
    let sign = match schedule.convention {
        Convention::Multiplicative => 1.0,
        Convention::Divisive => -1.0,
    };
    let logs: Vec<f64> = schedule.ratios.iter().map(|&r| sign * (r as f64).ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let y: Vec<f64> = logs.iter().map(|l| l - mean).collect();
    let ss: f64 = y.iter().map(|v| v * v).sum();
    if ss == 0.0 {
        return Err(FgdError::DegenerateSchedule("all ratios equal".into()));
    }
    let z = y.iter().map(|v| v / ss).collect();
    Ok(RegressionWeights { y, z })
}

fn positive(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(FgdError::ZeroVariation)
    }
}

fn increments(values: &[f64]) -> usize {
    values.len().saturating_sub(1)
}

/// `1/2 - ln(V_{2n} / V_n) / (2 ln 2)`.
pub fn h1_from_variations(v_n: f64, v_2n: f64) -> Result<HurstEstimate> {
    let ratio = positive(v_2n)? / positive(v_n)?;
    Ok(HurstEstimate::new(0.5 - ratio.ln() / (2.0 * std::f64::consts::LN_2)))
}

/// `coarse` and `fine` are the same path observed on `n` and `2n` increments.
pub fn h1(coarse: &[f64], fine: &[f64]) -> Result<HurstEstimate> {
    let n = increments(coarse);
    if increments(fine) != 2 * n {
        return Err(FgdError::GridMismatch(format!(
            "fine grid must have {} increments, got {}",
            2 * n,
            increments(fine)
        )));
    }
    h1_from_variations(normalized_variation(coarse, Order::Second)?, normalized_variation(fine, Order::Second)?)
}

/// `1/2 + ln(S) / (2 ln k_n)`.
pub fn h2_from_statistic(s: f64, k_n: usize) -> Result<HurstEstimate> {
    if k_n < 2 {
        return Err(FgdError::InvalidParameter(format!("k_n must be at least 2, got {k_n}")));
    }
    Ok(HurstEstimate::new(0.5 + positive(s)?.ln() / (2.0 * (k_n as f64).ln())))
}

/// `S = 2/(n-1) * sum_{k=2}^{n-1} (Delta^{(2)} X(t_k))^2 / W_{n,k-1}`.
///
/// The coarse sum stops at `k = n - 1` so that no node beyond `T` is needed.
pub fn h2_statistic(fine: &[f64], n: usize) -> Result<f64> {
    if n < 4 {
        return Err(FgdError::PathTooShort { nodes: n + 1, needed: 5 });
    }
    let k_n = n * n;
    if increments(fine) != n * k_n {
        return Err(FgdError::GridMismatch(format!(
            "fine grid must have n^3 = {} increments, got {}",
            n * k_n,
            increments(fine)
        )));
    }
    let w = w_statistics(fine, n)?;
    let coarse: Vec<f64> = fine.iter().step_by(k_n).copied().collect();
    let mut total = crate::numeric::KahanSum::new();
    for k in 2..n {
        let d = coarse[k + 1] - 2.0 * coarse[k] + coarse[k - 1];
        total.add(d * d / positive(w[k - 2])?);
    }
    Ok(2.0 / (n - 1) as f64 * total.value())
}

/// Estimator on a fine path with `n^3` increments.
pub fn h2(fine: &[f64], n: usize) -> Result<HurstEstimate> {
    h2_from_statistic(h2_statistic(fine, n)?, n * n)
}

/// `floor(N^{1/k})`, computed exactly in integers.
pub fn integer_root(budget: usize, k: u32) -> usize {
    let mut r = (budget as f64).powf(1.0 / k as f64).round() as usize;
    while r > 0 && r.checked_pow(k).is_none_or(|p| p > budget) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|p| p <= budget) {
        r += 1;
    }
    r
}

/// Coarse size `n` the `h2` estimator uses for an observation budget `N`.
pub fn h2_size_for_budget(budget: usize) -> usize {
    integer_root(budget, 3)
}

/// Root `n` for the `h4` estimator; the path has `n^4` increments.
pub fn h4_size_for_budget(budget: usize) -> usize {
    integer_root(budget, 4)
}

/// `-1/2 sum_j z_j ln(V_j / (n_j - 1))`.
pub fn h3_from_variations(variations: &[f64], sizes: &[usize], w: &RegressionWeights) -> Result<HurstEstimate> {
    if variations.len() != w.z.len() || sizes.len() != w.z.len() {
        return Err(FgdError::GridMismatch("one variation per schedule entry required".into()));
    }
    let mut acc = 0.0;
    for ((&v, &n), &z) in variations.iter().zip(sizes).zip(&w.z) {
        acc += z * (positive(v)? / (n as f64 - 1.0)).ln();
    }
    Ok(HurstEstimate::new(-0.5 * acc))
}

/// `paths[j]` is the path on `schedule.sizes()[j]` increments.
pub fn h3(paths: &[&[f64]], schedule: &RatioSchedule) -> Result<HurstEstimate> {
    let sizes = schedule.sizes();
    check_schedule_paths(paths, &sizes)?;
    let variations = paths
        .iter()
        .map(|p| normalized_variation(p, Order::Second))
        .collect::<Result<Vec<_>>>()?;
    h3_from_variations(&variations, &sizes, &weights(schedule)?)
}

pub(crate) fn check_schedule_paths(paths: &[&[f64]], sizes: &[usize]) -> Result<()> {
    if paths.len() != sizes.len() {
        return Err(FgdError::GridMismatch(format!("expected {} paths, got {}", sizes.len(), paths.len())));
    }
    for (p, &s) in paths.iter().zip(sizes) {
        if increments(p) != s {
            return Err(FgdError::GridMismatch(format!("expected {s} increments, got {}", increments(p))));
        }
    }
    Ok(())
}

/// `(R - 0.5174) / 0.1468`.
pub fn h4_from_ratio(r: f64) -> HurstEstimate {
    HurstEstimate::new((r - LAMBDA2_INTERCEPT) / LAMBDA2_SLOPE)
}

/// Estimator on a path with `N = n^4` increments.
pub fn h4(values: &[f64]) -> Result<HurstEstimate> {
    if increments(values) < 8 {
        return Err(FgdError::PathTooShort { nodes: values.len(), needed: 9 });
    }
    Ok(h4_from_ratio(ratio_statistic(values)?))
}

/// Raw second-order energy, exposed for diagnostics.
pub fn second_order_energy(values: &[f64]) -> Result<f64> {
    squared_increment_sum(values, Order::Second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn weights_two_point() {
        let s = RatioSchedule::new(vec![1, 2], 8, Convention::Multiplicative).unwrap();
        let w = weights(&s).unwrap();
        assert!((w.y[0] + LN_2 / 2.0).abs() < 1e-15);
        assert!((w.y[1] - LN_2 / 2.0).abs() < 1e-15);
        assert!((w.z[0] + 1.0 / LN_2).abs() < 1e-14);
        assert!((w.z[1] - 1.0 / LN_2).abs() < 1e-14);
    }

    #[test]
    fn weight_identities() {
        for conv in [Convention::Multiplicative, Convention::Divisive] {
            let s = RatioSchedule::new(vec![1, 2, 4, 8], 64, conv).unwrap();
            let w = weights(&s).unwrap();
            let sz: f64 = w.z.iter().sum();
            let sy: f64 = w.y.iter().sum();
            let szy: f64 = w.z.iter().zip(&w.y).map(|(a, b)| a * b).sum();
            assert!(sz.abs() < 1e-12 && sy.abs() < 1e-12 && (szy - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_schedules() {
        assert!(matches!(
            RatioSchedule::new(vec![3, 3], 9, Convention::Multiplicative),
            Err(FgdError::DegenerateSchedule(_))
        ));
        assert!(RatioSchedule::new(vec![1], 9, Convention::Multiplicative).is_err());
        assert!(RatioSchedule::new(vec![1, 3], 8, Convention::Divisive).is_err());
    }

    #[test]
    fn schedule_sizes() {
        let d = RatioSchedule::default_for(1024).unwrap();
        assert_eq!(d.sizes(), vec![1024, 512, 256, 128]);
        assert_eq!(d.finest(), 1024);
        let m = RatioSchedule::new(vec![1, 2], 100, Convention::Multiplicative).unwrap();
        assert_eq!(m.sizes(), vec![100, 200]);
        assert_eq!(m.finest(), 200);
    }

    #[test]
    fn h1_inversions() {
        let h = 0.73;
        let v_n = 5.0;
        let v_2n = 2f64.powf(1.0 - 2.0 * h) * v_n;
        assert!((h1_from_variations(v_n, v_2n).unwrap().value - h).abs() < 1e-12);
        assert_eq!(h1_from_variations(2.0, 2.0).unwrap().value, 0.5);
        assert!(matches!(h1_from_variations(0.0, 1.0), Err(FgdError::ZeroVariation)));
    }

    #[test]
    fn h1_grid_check() {
        let a = [1.0, 2.0, 3.0, 2.5];
        let b = [1.0, 2.0, 3.0, 2.5, 2.0];
        assert!(matches!(h1(&a, &b), Err(FgdError::GridMismatch(_))));
    }

    #[test]
    fn h2_inversions() {
        let h = 0.81;
        let k_n = 256;
        let s = (k_n as f64).powf(2.0 * h - 1.0);
        assert!((h2_from_statistic(s, k_n).unwrap().value - h).abs() < 1e-12);
        assert_eq!(h2_from_statistic(1.0, k_n).unwrap().value, 0.5);
    }

    #[test]
    fn h2_zero_variation() {
        let flat = vec![1.0; 4 * 16 + 1];
        assert!(matches!(h2(&flat, 4), Err(FgdError::ZeroVariation)));
        assert!(matches!(h2(&flat[..60], 4), Err(FgdError::GridMismatch(_))));
    }

    #[test]
    fn h3_inversions() {
        let h = 0.66;
        let c = 0.37;
        for conv in [Convention::Multiplicative, Convention::Divisive] {
            let s = RatioSchedule::new(vec![1, 2, 4, 8], 256, conv).unwrap();
            let sizes = s.sizes();
            let v: Vec<f64> = sizes.iter().map(|&n| c * (n as f64).powf(-2.0 * h) * (n as f64 - 1.0)).collect();
            let est = h3_from_variations(&v, &sizes, &weights(&s).unwrap()).unwrap();
            assert!((est.value - h).abs() < 1e-12);
        }
        // Equal raw variations on n and 2n: the (n_j - 1) normalization alone
        // drives the estimate, which tends to 1/2.
        let n = 4096usize;
        let s = RatioSchedule::new(vec![1, 2], n, Convention::Multiplicative).unwrap();
        let est = h3_from_variations(&[7.0, 7.0], &s.sizes(), &weights(&s).unwrap()).unwrap();
        let exact = -((n as f64 - 1.0) / (2.0 * n as f64 - 1.0)).ln() / (2.0 * LN_2);
        assert!((est.value - exact).abs() < 1e-12);
        assert!((est.value - 0.5).abs() < 1e-3);
    }

    #[test]
    fn h3_two_scale_reduction() {
        let s = RatioSchedule::new(vec![1, 2], 50, Convention::Multiplicative).unwrap();
        let w = weights(&s).unwrap();
        let mut rng = crate::rng::rng_from_seed(77);
        for _ in 0..100 {
            let u = crate::rng::standard_normals(&mut rng, 2);
            let (v_n, v_2n) = (u[0].exp(), u[1].exp());
            let est = h3_from_variations(&[v_n, v_2n], &[50, 100], &w).unwrap().value;
            let direct = -((v_2n / 99.0) * (49.0 / v_n)).ln() / (2.0 * LN_2);
            assert!((est - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn h4_affine() {
        assert_eq!(h4_from_ratio(0.5174).value, 0.0);
        assert!(h4_from_ratio(0.5174).out_of_range);
        assert!((h4_from_ratio(0.6642).value - 1.0).abs() < 1e-12);
        assert!(h4(&[0.0, 1.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn budget_roots() {
        assert_eq!(h2_size_for_budget(4096), 16);
        assert_eq!(h2_size_for_budget(1024), 10);
        assert_eq!(h2_size_for_budget(1000), 10);
        assert_eq!(h2_size_for_budget(999), 9);
        assert_eq!(h4_size_for_budget(2401), 7);
        assert_eq!(h4_size_for_budget(2400), 6);
        assert_eq!(h4_size_for_budget(1024), 5);
    }
}
