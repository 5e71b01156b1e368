//! Fractional Brownian motion on uniform grids.
//!
//! The production generator is circulant embedding of fractional Gaussian
//! noise (Wood–Chan / Davies–Harte) on the minimal embedding of size `2m`.
//! A dense Cholesky sampler of the same law is kept as an exact oracle.
//!
//! Both generators synthesize the path on `[0, 1]` and multiply by `T^H`
//! afterwards, so `path(T) == T^H * path(1)` holds bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::numeric::abs_pow;
use crate::rng::{rng_from_seed, standard_normals};

/// Largest number of increments the Cholesky oracle accepts by default.
pub const CHOLESKY_CAP: usize = 1024;

/// Eigenvalues above `-EIGEN_CLAMP * gamma(0)` are clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(FgdError::InvalidHurst(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Rejects `H <= 1/2`; the estimators are only defined on `(1/2, 1)`.
    pub fn require_long_memory(self) -> Result<Self> {
        if self.0 > 0.5 {
            Ok(self)
        } else {
            Err(FgdError::InvalidHurst(self.0))
        }
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = FgdError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// Uniform partition of `[0, T]` into `m` increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    horizon: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, points: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(FgdError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if points == 0 {
            return Err(FgdError::InvalidGrid("need at least one increment".into()));
        }
        Ok(Self { horizon, points })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of increments `m`; the grid has `m + 1` nodes.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.points as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.points {
            self.horizon
        } else {
            self.horizon * k as f64 / self.points as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.points).map(|k| self.time(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    grid: GridSpec,
    hurst: HurstIndex,
    values: Vec<f64>,
}

impl FbmPath {
    /// Wraps externally produced values. `values[0]` must be 0 and every
    /// entry finite.
    pub fn from_values(grid: GridSpec, hurst: HurstIndex, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points() + 1 {
            return Err(FgdError::GridMismatch(format!(
                "{} values for a grid of {} increments",
                values.len(),
                grid.points()
            )));
        }
        if values[0] != 0.0 {
            return Err(FgdError::InvalidParameter("fBm path must start at 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FgdError::InvalidParameter("fBm path has non-finite values".into()));
        }
        Ok(Self { grid, hurst, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Autocovariance of unit-step fractional Gaussian noise,
/// `0.5 * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})`.
pub fn fgn_autocovariance(h: HurstIndex, lag: i64) -> f64 {
    let two_h = 2.0 * h.value();
    let k = lag.unsigned_abs() as f64;
    0.5 * (abs_pow(k + 1.0, two_h) - 2.0 * abs_pow(k, two_h) + abs_pow(k - 1.0, two_h))
}

fn circulant_row(h: HurstIndex, m: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * m);
    for k in 0..=m {
        row.push(fgn_autocovariance(h, k as i64));
    }
    for k in (1..m).rev() {
        row.push(row[k]);
    }
    row
}

/// Eigenvalues of the `2m x 2m` circulant embedding of the fGn covariance.
pub fn circulant_eigenvalues(h: HurstIndex, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(FgdError::InvalidGrid("need at least one increment".into()));
    }
    let row = circulant_row(h, m);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let tol = EIGEN_CLAMP * row[0];
    buf.iter()
        .enumerate()
        .map(|(index, c)| {
            let value = c.re;
            if value >= 0.0 {
                Ok(value)
            } else if value >= -tol {
                Ok(0.0)
            } else {
                Err(FgdError::NegativeEigenvalue { index, value })
            }
        })
        .collect()
}

/// Largest absolute imaginary part in the FFT of the embedding's first row.
pub fn circulant_imaginary_residue(h: HurstIndex, m: usize) -> f64 {
    let row = circulant_row(h, m);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
}

fn integrate_unit_noise(h: HurstIndex, grid: GridSpec, noise: impl Iterator<Item = f64>) -> Vec<f64> {
    let m = grid.points();
    let unit_scale = (m as f64).powf(-h.value());
    let horizon_scale = grid.horizon().powf(h.value());
    let mut values = Vec::with_capacity(m + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for x in noise.take(m) {
        acc += x;
        values.push(horizon_scale * (unit_scale * acc));
    }
    values
}

/// Draws two independent fBm paths from one circulant synthesis.
pub fn sample_fbm_circulant_pair(h: HurstIndex, grid: GridSpec, seed: u64) -> Result<(FbmPath, FbmPath)> {
    let m = grid.points();
    let eig = circulant_eigenvalues(h, m)?;
    let size = eig.len();
    let mut rng = rng_from_seed(seed);
    let z = standard_normals(&mut rng, 2 * size);
    let norm = size as f64;
    let mut buf: Vec<Complex<f64>> = eig
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let s = (lambda / norm).sqrt();
            Complex::new(s * z[2 * j], s * z[2 * j + 1])
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let first = integrate_unit_noise(h, grid, buf.iter().map(|c| c.re));
    let second = integrate_unit_noise(h, grid, buf.iter().map(|c| c.im));
    Ok((
        FbmPath { grid, hurst: h, values: first },
        FbmPath { grid, hurst: h, values: second },
    ))
}

/// Exact fBm sample on `grid` via circulant embedding.
pub fn sample_fbm_circulant(h: HurstIndex, grid: GridSpec, seed: u64) -> Result<FbmPath> {
    sample_fbm_circulant_pair(h, grid, seed).map(|(p, _)| p)
}

pub fn sample_fbm_cholesky(h: HurstIndex, grid: GridSpec, seed: u64) -> Result<FbmPath> {
    sample_fbm_cholesky_capped(h, grid, seed, CHOLESKY_CAP)
}

/// Dense Cholesky sampler of the fBm covariance
/// `0.5 * (s^{2H} + t^{2H} - |t - s|^{2H})`.
pub fn sample_fbm_cholesky_capped(h: HurstIndex, grid: GridSpec, seed: u64, cap: usize) -> Result<FbmPath> {
    let m = grid.points();
    if m > cap {
        return Err(FgdError::OracleTooLarge { requested: m, cap });
    }
    let two_h = 2.0 * h.value();
    let t: Vec<f64> = (1..=m).map(|k| k as f64 / m as f64).collect();
    let cov = DMatrix::from_fn(m, m, |i, j| {
        0.5 * (abs_pow(t[i], two_h) + abs_pow(t[j], two_h) - abs_pow(t[i] - t[j], two_h))
    });
    let chol = cov.cholesky().ok_or(FgdError::FactorizationFailed)?;
    let l = chol.l();
    let mut rng = rng_from_seed(seed);
    let z = nalgebra::DVector::from_vec(standard_normals(&mut rng, m));
    let unit = l * z;
    let horizon_scale = grid.horizon().powf(h.value());
    let mut values = Vec::with_capacity(m + 1);
    values.push(0.0);
    values.extend(unit.iter().map(|v| horizon_scale * v));
    Ok(FbmPath { grid, hurst: h, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hurst(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn autocovariance_examples() {
        assert_eq!(fgn_autocovariance(hurst(0.75), 0), 1.0);
        assert_eq!(fgn_autocovariance(hurst(0.5), 1), 0.0);
        let expected = 0.5 * (2f64.powf(1.5) - 2.0);
        assert!((fgn_autocovariance(hurst(0.75), 1) - expected).abs() < 1e-15);
        assert!((expected - 0.414_213_56).abs() < 1e-8);
    }

    #[test]
    fn autocovariance_sign_follows_hurst() {
        for lag in 1..=100 {
            assert!(fgn_autocovariance(hurst(0.7), lag) > 0.0);
            assert!(fgn_autocovariance(hurst(0.3), lag) < 0.0);
            assert_eq!(fgn_autocovariance(hurst(0.7), lag), fgn_autocovariance(hurst(0.7), -lag));
        }
    }

    #[test]
    fn brownian_embedding_is_identity() {
        let eig = circulant_eigenvalues(hurst(0.5), 4).unwrap();
        assert_eq!(eig.len(), 8);
        for e in eig {
            assert!((e - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn small_embedding_matches_dense_eigendecomposition() {
        let h = hurst(0.75);
        let row = circulant_row(h, 2);
        let n = row.len();
        let c = DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n]);
        let mut dense: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut fft = circulant_eigenvalues(h, 2).unwrap();
        dense.sort_by(f64::total_cmp);
        fft.sort_by(f64::total_cmp);
        for (a, b) in dense.iter().zip(&fft) {
            assert!(*a >= -1e-12);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_is_preserved() {
        let eig = circulant_eigenvalues(hurst(0.75), 64).unwrap();
        let sum: f64 = eig.iter().sum();
        assert!((sum - 128.0).abs() < 1e-9);
    }

    #[test]
    fn imaginary_residue_is_negligible() {
        for &h in &[0.1, 0.5, 0.75, 0.95] {
            assert!(circulant_imaginary_residue(hurst(h), 100) < 1e-9);
        }
    }

    #[test]
    fn embedding_is_nonnegative_across_hurst_range() {
        for i in 1..20 {
            let h = hurst(i as f64 / 20.0);
            for &m in &[1, 2, 3, 17, 256, 1000] {
                assert!(circulant_eigenvalues(h, m).is_ok());
            }
        }
    }

    #[test]
    fn circulant_is_deterministic_and_starts_at_zero() {
        let grid = GridSpec::new(1.0, 256).unwrap();
        let a = sample_fbm_circulant(hurst(0.75), grid, 42).unwrap();
        let b = sample_fbm_circulant(hurst(0.75), grid, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values().len(), 257);
    }

    #[test]
    fn cholesky_is_deterministic_and_starts_at_zero() {
        let grid = GridSpec::new(2.0, 32).unwrap();
        let a = sample_fbm_cholesky(hurst(0.6), grid, 9).unwrap();
        let b = sample_fbm_cholesky(hurst(0.6), grid, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
    }

    #[test]
    fn horizon_scaling_is_exact() {
        let h = hurst(0.7);
        let unit = sample_fbm_circulant(h, GridSpec::new(1.0, 128).unwrap(), 5).unwrap();
        let long = sample_fbm_circulant(h, GridSpec::new(3.5, 128).unwrap(), 5).unwrap();
        let s = 3.5f64.powf(0.7);
        for (a, b) in unit.values().iter().zip(long.values()) {
            assert_eq!(s * a, *b);
        }
        let unit = sample_fbm_cholesky(h, GridSpec::new(1.0, 16).unwrap(), 5).unwrap();
        let long = sample_fbm_cholesky(h, GridSpec::new(3.5, 16).unwrap(), 5).unwrap();
        for (a, b) in unit.values().iter().zip(long.values()) {
            assert_eq!(s * a, *b);
        }
    }

    #[test]
    fn oracle_cap_enforced() {
        let grid = GridSpec::new(1.0, 20).unwrap();
        assert!(matches!(
            sample_fbm_cholesky_capped(hurst(0.7), grid, 1, 10),
            Err(FgdError::OracleTooLarge { requested: 20, cap: 10 })
        ));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(HurstIndex::new(1.0).is_err());
        assert!(HurstIndex::new(0.0).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert!(hurst(0.5).require_long_memory().is_err());
        assert!(GridSpec::new(0.0, 4).is_err());
        assert!(GridSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn paired_paths_differ() {
        let grid = GridSpec::new(1.0, 64).unwrap();
        let (a, b) = sample_fbm_circulant_pair(hurst(0.75), grid, 1).unwrap();
        assert_ne!(a.values(), b.values());
        assert_eq!(b.values()[0], 0.0);
    }
}
