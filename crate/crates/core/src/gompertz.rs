//! Fractional Gompertz diffusion paths.
//!
//! `dX = (alpha X - beta X ln X) dt + sigma X dB^H`. Paths are built from an
//! fBm path through the explicit solution
//! `X_t = exp(e^{-beta t} ln x0 + (alpha/beta)(1 - e^{-beta t}) + sigma I_t)`
//! with `I_t = int_0^t e^{-beta (t - s)} dB^H_s`. An explicit Euler scheme
//! is provided as a cross-check only.

use serde::{Deserialize, Serialize};

use crate::error::{FgdError, Result};
use crate::fgn::{FbmPath, GridSpec, HurstIndex};

/// Largest exponent whose `exp` is a finite, positive `f64`.
const MAX_EXPONENT: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzParams {
    pub x0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub hurst: HurstIndex,
    pub horizon: f64,
}

impl GompertzParams {
    pub fn new(x0: f64, alpha: f64, beta: f64, sigma: f64, hurst: HurstIndex, horizon: f64) -> Result<Self> {
        let p = Self { x0, alpha, beta, sigma, hurst, horizon };
        p.validate()?;
        Ok(p)
    }

    /// `x0 = 3, alpha = 0.5, beta = 2, sigma = 1.5, T = 1`.
    pub fn defaults(hurst: HurstIndex) -> Self {
        Self { x0: 3.0, alpha: 0.5, beta: 2.0, sigma: 1.5, hurst, horizon: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FgdError::InvalidParameter(msg));
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return bad(format!("x0 must be positive, got {}", self.x0));
        }
        if !self.alpha.is_finite() {
            return bad(format!("alpha must be finite, got {}", self.alpha));
        }
        if !self.beta.is_finite() || self.beta == 0.0 {
            return bad(format!("beta must be finite and nonzero, got {}", self.beta));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    /// Deterministic part of the log-solution at time `t`.
    pub fn log_mean(&self, t: f64) -> f64 {
        let decay = (-self.beta * t).exp();
        decay * self.x0.ln() + self.alpha / self.beta * (1.0 - decay)
    }

    /// The `sigma = 0` Gompertz curve.
    pub fn deterministic(&self, t: f64) -> f64 {
        self.log_mean(t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPath {
    grid: GridSpec,
    params: GompertzParams,
    values: Vec<f64>,
}

impl ProcessPath {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn params(&self) -> &GompertzParams {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `int_0^{t_k} e^{-beta (t_k - s)} dB^H_s` for every node `k`.
///
/// Uses `I_t = B_t - beta * int_0^t e^{-beta (t - s)} B_s ds`, with the
/// Lebesgue integral by the composite trapezoid rule. The running integral
/// is propagated as `J_k = e^{-beta d} J_{k-1} + d/2 (e^{-beta d} B_{k-1} + B_k)`,
/// which is the trapezoid sum without forming `e^{beta s}`.
pub fn volterra_integrals(beta: f64, fbm: &FbmPath) -> Vec<f64> {
    let b = fbm.values();
    if beta == 0.0 {
        return b.to_vec();
    }
    let d = fbm.grid().step();
    let decay = (-beta * d).exp();
    let mut out = Vec::with_capacity(b.len());
    out.push(0.0);
    let mut running = 0.0;
    for k in 1..b.len() {
        running = decay * running + 0.5 * d * (decay * b[k - 1] + b[k]);
        out.push(b[k] - beta * running);
    }
    out
}

pub fn volterra_integral(beta: f64, fbm: &FbmPath, k: usize) -> Result<f64> {
    let m = fbm.grid().points();
    if k > m {
        return Err(FgdError::IndexOutOfRange { index: k, lo: 0, hi: m });
    }
    Ok(volterra_integrals(beta, fbm)[k])
}

fn check_compatible(params: &GompertzParams, fbm: &FbmPath) -> Result<()> {
    params.validate()?;
    if fbm.hurst() != params.hurst {
        return Err(FgdError::GridMismatch(format!(
            "fBm has H = {}, parameters have H = {}",
            fbm.hurst().value(),
            params.hurst.value()
        )));
    }
    let horizon = fbm.grid().horizon();
    if (horizon - params.horizon).abs() > 1e-12 * params.horizon.max(1.0) {
        return Err(FgdError::GridMismatch(format!(
            "fBm horizon {horizon} differs from parameter horizon {}",
            params.horizon
        )));
    }
    Ok(())
}

/// Builds the fGd path driven by `fbm` through the explicit solution.
pub fn solve_explicit(params: &GompertzParams, fbm: &FbmPath) -> Result<ProcessPath> {
    check_compatible(params, fbm)?;
    let grid = fbm.grid();
    let mut values = Vec::with_capacity(grid.points() + 1);
    values.push(params.x0);
    if params.sigma == 0.0 {
        for k in 1..=grid.points() {
            values.push(exp_checked(params.log_mean(grid.time(k)))?);
        }
    } else {
        let integrals = volterra_integrals(params.beta, fbm);
        for (k, integral) in integrals.iter().enumerate().skip(1) {
            values.push(exp_checked(params.log_mean(grid.time(k)) + params.sigma * integral)?);
        }
    }
    Ok(ProcessPath { grid, params: *params, values })
}

fn exp_checked(exponent: f64) -> Result<f64> {
    if exponent.is_finite() && exponent.abs() <= MAX_EXPONENT {
        Ok(exponent.exp())
    } else {
        Err(FgdError::Overflow(exponent))
    }
}

/// Explicit Euler scheme for the SDE driven by the increments of `fbm`.
pub fn euler_path(params: &GompertzParams, fbm: &FbmPath) -> Result<ProcessPath> {
    check_compatible(params, fbm)?;
    let grid = fbm.grid();
    let d = grid.step();
    let b = fbm.values();
    let mut values = Vec::with_capacity(b.len());
    let mut x = params.x0;
    values.push(x);
    for k in 1..b.len() {
        let drift = params.alpha * x - params.beta * x * x.ln();
        x += drift * d + params.sigma * x * (b[k] - b[k - 1]);
        if !(x > 0.0 && x.is_finite()) {
            return Err(FgdError::NonpositiveState(k));
        }
        values.push(x);
    }
    Ok(ProcessPath { grid, params: *params, values })
}

/// Restriction of a path to a coarser uniform grid.
pub trait Subsample: Sized {
    /// Keeps every `(m / n)`-th node so the result has `n` increments.
    fn subsample(&self, n: usize) -> Result<Self>;
}

fn thin(values: &[f64], grid: GridSpec, n: usize) -> Result<(GridSpec, Vec<f64>)> {
    let m = grid.points();
    if n == 0 || !m.is_multiple_of(n) {
        return Err(FgdError::NotADivisor { n, m });
    }
    let stride = m / n;
    let kept = values.iter().step_by(stride).copied().collect();
    Ok((GridSpec::new(grid.horizon(), n)?, kept))
}

impl Subsample for FbmPath {
    fn subsample(&self, n: usize) -> Result<Self> {
        let (grid, values) = thin(self.values(), self.grid(), n)?;
        FbmPath::from_values(grid, self.hurst(), values)
    }
}

impl Subsample for ProcessPath {
    fn subsample(&self, n: usize) -> Result<Self> {
        let (grid, values) = thin(&self.values, self.grid, n)?;
        Ok(ProcessPath { grid, params: self.params, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgn::sample_fbm_circulant;

    fn hurst(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    fn fbm(h: f64, m: usize, seed: u64) -> FbmPath {
        sample_fbm_circulant(hurst(h), GridSpec::new(1.0, m).unwrap(), seed).unwrap()
    }

    #[test]
    fn volterra_trivial_cases() {
        let path = fbm(0.75, 64, 3);
        assert_eq!(volterra_integral(2.0, &path, 0).unwrap(), 0.0);
        assert_eq!(volterra_integrals(0.0, &path), path.values());
        assert!(volterra_integral(2.0, &path, 65).is_err());
    }

    /// Left-point Riemann–Stieltjes sum, independent of the chain-rule route.
    fn riemann_stieltjes(beta: f64, path: &FbmPath, k: usize) -> f64 {
        let g = path.grid();
        let b = path.values();
        (1..=k)
            .map(|j| (-beta * (g.time(k) - g.time(j - 1))).exp() * (b[j] - b[j - 1]))
            .sum()
    }

    #[test]
    fn volterra_matches_riemann_stieltjes() {
        let m = 1 << 14;
        let path = fbm(0.75, m, 11);
        let chain = volterra_integrals(2.0, &path);
        for &k in &[m / 4, m / 2, m] {
            assert!((chain[k] - riemann_stieltjes(2.0, &path, k)).abs() < 1e-2);
        }
    }

    #[test]
    fn volterra_discrepancy_shrinks_with_refinement() {
        let fine = fbm(0.75, 1 << 14, 21);
        let mut logs_d = Vec::new();
        let mut logs_err = Vec::new();
        for p in 10..=14 {
            let path = fine.subsample(1 << p).unwrap();
            let chain = volterra_integrals(2.0, &path);
            let err = (0..=path.grid().points())
                .step_by(path.grid().points() / 16)
                .map(|k| (chain[k] - riemann_stieltjes(2.0, &path, k)).abs())
                .fold(0.0, f64::max);
            logs_d.push(path.grid().step().ln());
            logs_err.push(err.ln());
        }
        let (slope, _) = crate::numeric::ols_slope(&logs_d, &logs_err);
        assert!(slope >= 0.75 - 0.1, "slope {slope}");
    }

    #[test]
    fn explicit_starts_at_x0_and_stays_positive() {
        let h = hurst(0.75);
        let params = GompertzParams::defaults(h);
        let path = solve_explicit(&params, &fbm(0.75, 512, 1)).unwrap();
        assert_eq!(path.values()[0], 3.0);
        assert!(path.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn explicit_is_exact_without_noise() {
        let mut params = GompertzParams::defaults(hurst(0.75));
        params.sigma = 0.0;
        let path = solve_explicit(&params, &fbm(0.75, 256, 1)).unwrap();
        for (k, &x) in path.values().iter().enumerate() {
            let t = path.grid().time(k);
            let exact = (params.x0.ln() * (-2.0 * t).exp() + 0.25 * (1.0 - (-2.0 * t).exp())).exp();
            assert!((x - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_curve_approaches_limit() {
        let h = hurst(0.75);
        let params = GompertzParams::new(3.0, 0.5, 2.0, 0.0, h, 20.0).unwrap();
        let path = solve_explicit(&params, &sample_fbm_circulant(h, GridSpec::new(20.0, 64).unwrap(), 0).unwrap())
            .unwrap();
        let last = *path.values().last().unwrap();
        let closed = (0.25f64).exp() * ((-40.0f64).exp() * (3f64.ln() - 0.25)).exp();
        assert!((last - closed).abs() < 1e-12);
        assert!((last - 1.284_025).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_is_constant() {
        let h = hurst(0.75);
        let params = GompertzParams::new((0.25f64).exp(), 0.5, 2.0, 0.0, h, 1.0).unwrap();
        let path = solve_explicit(&params, &fbm(0.75, 32, 0)).unwrap();
        for &x in path.values() {
            assert!((x - params.x0).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let params = GompertzParams::defaults(hurst(0.7));
        assert!(matches!(solve_explicit(&params, &fbm(0.75, 16, 0)), Err(FgdError::GridMismatch(_))));
        let other = sample_fbm_circulant(hurst(0.7), GridSpec::new(2.0, 16).unwrap(), 0).unwrap();
        assert!(matches!(solve_explicit(&params, &other), Err(FgdError::GridMismatch(_))));
        let mut bad = params;
        bad.beta = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let h = hurst(0.75);
        let params = GompertzParams::new(3.0, 2000.0, 1.0, 0.0, h, 1.0).unwrap();
        let err = solve_explicit(&params, &fbm(0.75, 16, 0)).unwrap_err();
        assert!(matches!(err, FgdError::Overflow(_)));
    }

    #[test]
    fn euler_single_step_without_drift() {
        let h = hurst(0.75);
        let params = GompertzParams::new(1.0, 0.0, 2.0, 0.0, h, 1.0).unwrap();
        let path = euler_path(&params, &fbm(0.75, 1, 0)).unwrap();
        assert_eq!(path.values(), &[1.0, 1.0]);
    }

    #[test]
    fn euler_matches_deterministic_solution() {
        let h = hurst(0.75);
        let params = GompertzParams::new(3.0, 0.5, 2.0, 0.0, h, 1.0).unwrap();
        let path = fbm(0.75, 1 << 16, 0);
        let euler = *euler_path(&params, &path).unwrap().values().last().unwrap();
        let exact = *solve_explicit(&params, &path).unwrap().values().last().unwrap();
        assert!(((euler - exact) / exact).abs() < 1e-3);
    }

    #[test]
    fn euler_matches_explicit_on_noisy_path() {
        let params = GompertzParams::defaults(hurst(0.75));
        let path = fbm(0.75, 1 << 16, 2024);
        let euler = *euler_path(&params, &path).unwrap().values().last().unwrap();
        let exact = *solve_explicit(&params, &path).unwrap().values().last().unwrap();
        assert!(((euler - exact) / exact).abs() < 5e-2, "{euler} vs {exact}");
    }

    #[test]
    fn euler_reports_nonpositive_state() {
        let h = hurst(0.75);
        let params = GompertzParams::new(1.0, 0.0, 1.0, 50.0, h, 1.0).unwrap();
        let grid = GridSpec::new(1.0, 2).unwrap();
        let path = FbmPath::from_values(grid, h, vec![0.0, -1.0, 0.0]).unwrap();
        assert!(matches!(euler_path(&params, &path), Err(FgdError::NonpositiveState(1))));
    }

    #[test]
    fn subsample_index_arithmetic() {
        let grid = GridSpec::new(1.0, 8).unwrap();
        let values: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let path = FbmPath::from_values(grid, hurst(0.7), values).unwrap();
        assert_eq!(path.subsample(8).unwrap(), path);
        assert_eq!(path.subsample(2).unwrap().values(), &[0.0, 4.0, 8.0]);
        assert_eq!(path.subsample(4).unwrap().subsample(2).unwrap(), path.subsample(2).unwrap());
        assert!(matches!(path.subsample(3), Err(FgdError::NotADivisor { n: 3, m: 8 })));
    }
}
