//! Deterministic Monte Carlo experiments over grids of `(H, sigma, n)`.
//!
//! Each `(cell, replicate)` pair gets its own seed from [`split_seed`]. One
//! "primary" fBm path per replicate is shared by every estimator except
//! `h2` and `h4`, which need `n^3`/`n^4`-point grids that do
//! not nest with it, so they draw their own paths from seeds derived from
//! the same replicate seed.
//!
//! Per-replicate results are sorted before aggregation, which makes the
//! summary independent of evaluation order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::diffusion::{sigma2_1, sigma2_2, sigma2_3, sigma4_from_variations};
use crate::error::{FgdError, Result};
use crate::fgn::{sample_fbm_circulant, GridSpec, HurstIndex};
use crate::gompertz::{solve_explicit, GompertzParams, Subsample};
use crate::hurst::{
    gcd, h1_from_variations, h2, h2_size_for_budget, h3_from_variations, h4, h4_size_for_budget, lcm, weights,
    Convention, RatioSchedule, RegressionWeights,
};
use crate::numeric::{compensated_sum, mean_var, ols_slope};
use crate::rng::{mix64, split_seed};
use crate::theory::{h3_variance_coefficients, limit_var_h1, sigma2_l, sigma_sq, SeriesPolicy};
use crate::variation::{normalized_variation, Order};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HurstKind {
    H1,
    H2,
    H3,
    H4,
}

/// Where a diffusion estimator gets its Hurst index from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlugIn {
    Estimated(HurstKind),
    True,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigmaKind {
    S1,
    S2,
    S3,
}

/// Estimator identifiers: `h1`..`h4`, `s{1,2,3}_h{1..4}`, `s{1,2,3}_true`, `s4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Hurst(HurstKind),
    Sigma(SigmaKind, PlugIn),
    Sigma4,
}

impl EstimatorId {
    fn needs_hurst(self) -> Option<HurstKind> {
        match self {
            EstimatorId::Hurst(k) => Some(k),
            EstimatorId::Sigma(_, PlugIn::Estimated(k)) => Some(k),
            EstimatorId::Sigma(_, PlugIn::True) => None,
            EstimatorId::Sigma4 => Some(HurstKind::H3),
        }
    }
}

impl fmt::Display for HurstKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            HurstKind::H1 => 1,
            HurstKind::H2 => 2,
            HurstKind::H3 => 3,
            HurstKind::H4 => 4,
        };
        write!(f, "h{i}")
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorId::Hurst(k) => write!(f, "{k}"),
            EstimatorId::Sigma4 => write!(f, "s4"),
            EstimatorId::Sigma(s, p) => {
                let i = match s {
                    SigmaKind::S1 => 1,
                    SigmaKind::S2 => 2,
                    SigmaKind::S3 => 3,
                };
                match p {
                    PlugIn::Estimated(k) => write!(f, "s{i}_{k}"),
                    PlugIn::True => write!(f, "s{i}_true"),
                }
            }
        }
    }
}

fn parse_hurst_kind(s: &str) -> Option<HurstKind> {
    match s {
        "h1" => Some(HurstKind::H1),
        "h2" => Some(HurstKind::H2),
        "h3" => Some(HurstKind::H3),
        "h4" => Some(HurstKind::H4),
        _ => None,
    }
}

impl FromStr for EstimatorId {
    type Err = FgdError;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = parse_hurst_kind(s) {
            return Ok(EstimatorId::Hurst(k));
        }
        if s == "s4" {
            return Ok(EstimatorId::Sigma4);
        }
        let bad = || FgdError::InvalidSpec(format!("unknown estimator {s:?}"));
        let (head, tail) = s.split_once('_').ok_or_else(bad)?;
        let kind = match head {
            "s1" => SigmaKind::S1,
            "s2" => SigmaKind::S2,
            "s3" => SigmaKind::S3,
            _ => return Err(bad()),
        };
        let plug = if tail == "true" { PlugIn::True } else { PlugIn::Estimated(parse_hurst_kind(tail).ok_or_else(bad)?) };
        Ok(EstimatorId::Sigma(kind, plug))
    }
}

impl Serialize for EstimatorId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EstimatorId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub ratios: Vec<usize>,
    #[serde(default)]
    pub convention: Convention,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self { ratios: vec![1, 2, 4, 8], convention: Convention::Divisive }
    }
}

fn default_x0() -> f64 {
    3.0
}
fn default_alpha() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    2.0
}
fn default_sigma() -> Vec<f64> {
    vec![1.5]
}
fn default_horizon() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    300
}
fn default_oversample() -> usize {
    1
}

/// One Monte Carlo study. Cells are the Cartesian product of `hurst`,
/// `sigma` and `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub hurst: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimators: Vec<EstimatorId>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    /// Simulation grid refinement applied on top of the coarsest grid that
    /// serves every estimator.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| FgdError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FgdError::InvalidSpec(msg));
        if self.replicates == 0 {
            return bad("replicates: must be at least 1".into());
        }
        if self.hurst.is_empty() || self.sigma.is_empty() || self.n.is_empty() || self.estimators.is_empty() {
            return bad("hurst, sigma, n and estimators must be non-empty".into());
        }
        if self.oversample == 0 {
            return bad("oversample: must be at least 1".into());
        }
        if let Some(h) = self.hurst.iter().find(|&&h| !(h > 0.5 && h < 1.0)) {
            return bad(format!("hurst: {h} outside (1/2, 1)"));
        }
        if let Some(s) = self.sigma.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("sigma: {s} must be positive"));
        }
        let cells = self.hurst.len() * self.sigma.len() * self.n.len();
        if cells > u32::MAX as usize || self.replicates > u32::MAX as usize {
            return bad("too many cells or replicates".into());
        }
        let probe = HurstIndex::new(self.hurst[0]).map_err(|e| FgdError::InvalidSpec(format!("hurst: {e}")))?;
        GompertzParams::new(self.x0, self.alpha, self.beta, self.sigma[0], probe, self.horizon)
            .map_err(|e| FgdError::InvalidSpec(e.to_string()))?;
        for &n in &self.n {
            CellPlan::new(self, n).map_err(|e| FgdError::InvalidSpec(format!("n = {n}: {e}")))?;
        }
        Ok(())
    }

    /// Cells in evaluation order: `hurst` outermost, then `sigma`, then `n`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &hurst in &self.hurst {
            for &sigma in &self.sigma {
                for &n in &self.n {
                    out.push(Cell { hurst, sigma, n });
                }
            }
        }
        out
    }

    fn uses(&self, k: HurstKind) -> bool {
        self.estimators.iter().any(|e| e.needs_hurst() == Some(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub hurst: f64,
    pub sigma: f64,
    pub n: usize,
}

/// Grids needed by one value of `n`.
#[derive(Debug, Clone)]
struct CellPlan {
    n: usize,
    primary: usize,
    schedule: Option<RatioSchedule>,
    weights: Option<RegressionWeights>,
    h2_n: Option<usize>,
    h4_n: Option<usize>,
    oversample: usize,
}

impl CellPlan {
    fn new(spec: &ExperimentSpec, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(FgdError::InvalidGrid(format!("n must be at least 4, got {n}")));
        }
        let mut primary = n;
        if spec.uses(HurstKind::H1) {
            primary = lcm(primary, 2 * n);
        }
        let (schedule, weights) = if spec.uses(HurstKind::H3) {
            let s = RatioSchedule::new(spec.schedule.ratios.clone(), n, spec.schedule.convention)?;
            primary = lcm(primary, s.finest());
            let w = weights(&s)?;
            (Some(s), Some(w))
        } else {
            (None, None)
        };
        let h2_n = if spec.uses(HurstKind::H2) {
            let m = h2_size_for_budget(n);
            if m < 4 {
                return Err(FgdError::InvalidGrid(format!("h2 needs a budget of at least 64, got {n}")));
            }
            Some(m)
        } else {
            None
        };
        let h4_n = if spec.uses(HurstKind::H4) {
            let m = h4_size_for_budget(n);
            if m < 2 {
                return Err(FgdError::InvalidGrid(format!("h4 needs a budget of at least 16, got {n}")));
            }
            Some(m)
        } else {
            None
        };
        Ok(Self { n, primary: primary * spec.oversample, schedule, weights, h2_n, h4_n, oversample: spec.oversample })
    }
}

/// Result of one estimator on one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateValue {
    /// Estimate on the parameter scale (`H`, or `sigma` for diffusion estimators).
    pub estimate: f64,
    /// Rate-scaled error, on the scale where the limit variance applies.
    pub standardized: f64,
    pub out_of_range: bool,
}

struct Replicate<'a> {
    plan: &'a CellPlan,
    cell: Cell,
    params: GompertzParams,
    seed: u64,
    horizon: f64,
}

const H2_STREAM: u64 = 0x6832;
const H4_STREAM: u64 = 0x6834;

impl Replicate<'_> {
    fn path(&self, m: usize, seed: u64) -> Result<Vec<f64>> {
        let grid = GridSpec::new(self.horizon, m)?;
        let fbm = sample_fbm_circulant(self.params.hurst, grid, seed)?;
        Ok(solve_explicit(&self.params, &fbm)?.values().to_vec())
    }

    fn run(&self, estimators: &[EstimatorId]) -> Vec<Result<ReplicateValue>> {
        let primary = self.path(self.plan.primary, self.seed);
        let thin = |n: usize| -> Result<Vec<f64>> {
            let values = primary.as_ref().map_err(Clone::clone)?;
            let stride = (values.len() - 1) / n;
            Ok(values.iter().step_by(stride).copied().collect())
        };
        let n = self.plan.n;
        let h = self.cell.hurst;

        let h1 = lazy(|| {
            let coarse = normalized_variation(&thin(n)?, Order::Second)?;
            let fine = normalized_variation(&thin(2 * n)?, Order::Second)?;
            h1_from_variations(coarse, fine)
        });
        let h3_parts = lazy(|| {
            let schedule = self.plan.schedule.as_ref().expect("schedule planned for h3");
            let sizes = schedule.sizes();
            let v = sizes
                .iter()
                .map(|&s| normalized_variation(&thin(s)?, Order::Second))
                .collect::<Result<Vec<_>>>()?;
            let est = h3_from_variations(&v, &sizes, self.plan.weights.as_ref().expect("weights planned"))?;
            Ok((est, v, sizes))
        });
        let h2_est = lazy(|| {
            let m = self.plan.h2_n.expect("h2 planned");
            let fine = m * m * m;
            let values = self.path(fine * self.plan.oversample, mix64(self.seed ^ H2_STREAM))?;
            let stride = self.plan.oversample;
            let values: Vec<f64> = values.iter().step_by(stride).copied().collect();
            h2(&values, m)
        });
        let h4_est = lazy(|| {
            let m = self.plan.h4_n.expect("h4 planned");
            let big = m.pow(4);
            let values = self.path(big * self.plan.oversample, mix64(self.seed ^ H4_STREAM))?;
            let values: Vec<f64> = values.iter().step_by(self.plan.oversample).copied().collect();
            h4(&values)
        });
        let hurst_of = |k: HurstKind| -> Result<crate::hurst::HurstEstimate> {
            match k {
                HurstKind::H1 => h1.get(),
                HurstKind::H2 => h2_est.get(),
                HurstKind::H3 => h3_parts.get().map(|p| p.0),
                HurstKind::H4 => h4_est.get(),
            }
        };

        let sqrt_n = (n as f64).sqrt();
        estimators
            .iter()
            .map(|&id| -> Result<ReplicateValue> {
                match id {
                    EstimatorId::Hurst(k) => {
                        let est = hurst_of(k)?;
                        let rate = match k {
                            HurstKind::H1 => 2.0 * std::f64::consts::LN_2 * sqrt_n,
                            HurstKind::H2 => {
                                let m = self.plan.h2_n.expect("h2 planned") as f64;
                                2.0 * m.sqrt() * (m / self.horizon).ln()
                            }
                            HurstKind::H3 => h3_rate(self.plan.schedule.as_ref().expect("h3 planned")),
                            HurstKind::H4 => (self.plan.h4_n.expect("h4 planned").pow(4) as f64).sqrt(),
                        };
                        Ok(ReplicateValue {
                            estimate: est.value,
                            standardized: rate * (est.value - h),
                            out_of_range: est.out_of_range,
                        })
                    }
                    EstimatorId::Sigma(kind, plug) => {
                        let (h_hat, oor) = match plug {
                            PlugIn::True => (h, false),
                            PlugIn::Estimated(k) => {
                                let e = hurst_of(k)?;
                                (e.value, e.out_of_range)
                            }
                        };
                        let path = thin(n)?;
                        let s2 = match kind {
                            SigmaKind::S1 => sigma2_1(&path, h_hat, self.horizon)?,
                            SigmaKind::S2 => sigma2_2(&path, h_hat, self.horizon)?,
                            SigmaKind::S3 => sigma2_3(&path, h_hat, self.horizon)?,
                        };
                        let sigma = self.cell.sigma;
                        Ok(ReplicateValue {
                            estimate: s2.sqrt(),
                            standardized: sqrt_n * (s2 - sigma * sigma),
                            out_of_range: oor,
                        })
                    }
                    EstimatorId::Sigma4 => {
                        let (est, v, sizes) = h3_parts.get()?;
                        let s4 = sigma4_from_variations(&v, &sizes, est.value)?;
                        let sigma = self.cell.sigma;
                        Ok(ReplicateValue {
                            estimate: s4.sigma,
                            standardized: sqrt_n * (s4.sigma_sq - sigma * sigma),
                            out_of_range: est.out_of_range,
                        })
                    }
                }
            })
            .collect()
    }
}

/// `sqrt(b)` where `b` is the largest common divisor of the schedule grids.
fn h3_rate(schedule: &RatioSchedule) -> f64 {
    let b = schedule.sizes().into_iter().fold(0, gcd);
    (b as f64).sqrt()
}

/// Evaluates a closure at most once.
struct Lazy<T, F: Fn() -> Result<T>> {
    cell: std::cell::OnceCell<Result<T>>,
    init: F,
}

fn lazy<T, F: Fn() -> Result<T>>(init: F) -> Lazy<T, F> {
    Lazy { cell: std::cell::OnceCell::new(), init }
}

impl<T: Clone, F: Fn() -> Result<T>> Lazy<T, F> {
    fn get(&self) -> Result<T> {
        self.cell.get_or_init(&self.init).clone()
    }
}

/// One row of the Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: EstimatorId,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub sigma: f64,
    pub n: usize,
    pub mean_abs_err: f64,
    pub se_abs: f64,
    pub mean_rel_err: f64,
    pub se_rel: f64,
    pub std_stat_var: f64,
    /// `std_stat_var` over the limit variance, when a limit is known.
    pub var_ratio: Option<f64>,
    pub oor_count: usize,
    pub fail_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub replicates: usize,
    pub rows: Vec<SummaryRow>,
}

pub const SUMMARY_HEADER: &str =
    "estimator,H,sigma,n,mean_abs_err,se_abs,mean_rel_err,se_rel,std_stat_var,var_ratio,oor_count,fail_count";

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let cols = [
                r.estimator.to_string(),
                fmt_f64(r.hurst),
                fmt_f64(r.sigma),
                r.n.to_string(),
                fmt_f64(r.mean_abs_err),
                fmt_f64(r.se_abs),
                fmt_f64(r.mean_rel_err),
                fmt_f64(r.se_rel),
                fmt_f64(r.std_stat_var),
                r.var_ratio.map(fmt_f64).unwrap_or_default(),
                r.oor_count.to_string(),
                r.fail_count.to_string(),
            ];
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn row(&self, estimator: &str, hurst: f64, sigma: f64, n: usize) -> Option<&SummaryRow> {
        let id: EstimatorId = estimator.parse().ok()?;
        self.rows.iter().find(|r| r.estimator == id && r.hurst == hurst && r.sigma == sigma && r.n == n)
    }
}

/// Per-replicate outcomes for every `(cell, estimator)`.
#[derive(Debug, Clone)]
pub struct RawResults {
    pub cells: Vec<Cell>,
    pub estimators: Vec<EstimatorId>,
    /// Indexed `[cell][replicate][estimator]`.
    pub values: Vec<Vec<Vec<Result<ReplicateValue>>>>,
}

impl RawResults {
    /// Successful estimates of `estimator` in `cell`, in replicate order.
    pub fn estimates(&self, cell: usize, estimator: EstimatorId) -> Vec<ReplicateValue> {
        let j = self.estimators.iter().position(|&e| e == estimator).expect("estimator in spec");
        self.values[cell].iter().filter_map(|rep| rep[j].as_ref().ok().copied()).collect()
    }
}

/// Runs every replicate. Parallel across replicates on the current rayon pool.
pub fn run_replicates(spec: &ExperimentSpec) -> Result<RawResults> {
    spec.validate()?;
    let cells = spec.cells();
    let plans = spec.n.iter().map(|&n| CellPlan::new(spec, n)).collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..spec.replicates).map(move |r| (c, r))).collect();
    let flat: Vec<Vec<Result<ReplicateValue>>> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let cell = cells[c];
            let plan = &plans[spec.n.iter().position(|&n| n == cell.n).expect("planned n")];
            let hurst = match HurstIndex::new(cell.hurst) {
                Ok(h) => h,
                Err(e) => return vec![Err(e); spec.estimators.len()],
            };
            let params = GompertzParams {
                x0: spec.x0,
                alpha: spec.alpha,
                beta: spec.beta,
                sigma: cell.sigma,
                hurst,
                horizon: spec.horizon,
            };
            let rep = Replicate {
                plan,
                cell,
                params,
                seed: split_seed(spec.seed, c as u32, r as u32),
                horizon: spec.horizon,
            };
            rep.run(&spec.estimators)
        })
        .collect();
    let mut values = Vec::with_capacity(cells.len());
    let mut iter = flat.into_iter();
    for _ in 0..cells.len() {
        values.push(iter.by_ref().take(spec.replicates).collect());
    }
    Ok(RawResults { cells, estimators: spec.estimators.clone(), values })
}

/// Limit variance of the standardized statistic, when one is known.
fn limit_variance(spec: &ExperimentSpec, id: EstimatorId, cell: Cell) -> Option<f64> {
    let policy = SeriesPolicy::default();
    match id {
        EstimatorId::Hurst(HurstKind::H1) => limit_var_h1(cell.hurst, policy).ok(),
        EstimatorId::Hurst(HurstKind::H3) => {
            let schedule = RatioSchedule::new(spec.schedule.ratios.clone(), cell.n, spec.schedule.convention).ok()?;
            h3_limit_variance(&schedule, cell.hurst, policy).ok()
        }
        EstimatorId::Sigma(SigmaKind::S2, PlugIn::True) => {
            sigma_sq(cell.hurst, policy).ok().map(|v| cell.sigma.powi(4) * v)
        }
        _ => None,
    }
}

/// Limit variance of `sqrt(b) (Hhat^{(3)} - H)` where `b` is the common
/// divisor of the schedule grids and `k_i = n_i / b`.
pub fn h3_limit_variance(schedule: &RatioSchedule, h: f64, policy: SeriesPolicy) -> Result<f64> {
    let sizes = schedule.sizes();
    let b = sizes.iter().copied().fold(0, gcd);
    let ks: Vec<usize> = sizes.iter().map(|s| s / b).collect();
    let mult = RatioSchedule::new(ks.clone(), b, Convention::Multiplicative)?;
    let w = weights(&mult)?;
    let d = h3_variance_coefficients(&ks, &w.z);
    sigma2_l(&ks, &d, h, policy)
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    let se = if xs.len() > 1 { (v / xs.len() as f64).sqrt() } else { 0.0 };
    (m, se)
}

/// Aggregates raw replicate results into the summary table.
pub fn summarize(spec: &ExperimentSpec, raw: &RawResults) -> SummaryTable {
    let mut rows = Vec::new();
    for (c, cell) in raw.cells.iter().enumerate() {
        for (j, &id) in raw.estimators.iter().enumerate() {
            let truth = match id {
                EstimatorId::Hurst(_) => cell.hurst,
                _ => cell.sigma,
            };
            let ok: Vec<ReplicateValue> = raw.values[c].iter().filter_map(|rep| rep[j].as_ref().ok().copied()).collect();
            let fail_count = raw.values[c].len() - ok.len();
            let abs = sorted(ok.iter().map(|v| (v.estimate - truth).abs()).collect());
            let rel = sorted(ok.iter().map(|v| (v.estimate - truth) / truth).collect());
            let std = sorted(ok.iter().map(|v| v.standardized).collect());
            let (mean_abs_err, se_abs) = mean_se(&abs);
            let (mean_rel_err, se_rel) = mean_se(&rel);
            let std_stat_var = if std.len() > 1 { mean_var(&std).1 } else { f64::NAN };
            let var_ratio = limit_variance(spec, id, *cell).map(|target| std_stat_var / target);
            rows.push(SummaryRow {
                estimator: id,
                hurst: cell.hurst,
                sigma: cell.sigma,
                n: cell.n,
                mean_abs_err,
                se_abs,
                mean_rel_err,
                se_rel,
                std_stat_var,
                var_ratio,
                oor_count: ok.iter().filter(|v| v.out_of_range).count(),
                fail_count,
            });
        }
    }
    SummaryTable { replicates: spec.replicates, rows }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<SummaryTable> {
    let raw = run_replicates(spec)?;
    Ok(summarize(spec, &raw))
}

/// Runs on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<SummaryTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FgdError::InvalidParameter(e.to_string()))?;
    pool.install(|| run_experiment(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostic {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub target_variance: f64,
    pub ratio: f64,
    /// Kolmogorov–Smirnov distance to `N(0, target_variance)`.
    pub ks_distance: f64,
}

/// Standardizes `rate * (estimate - center)` and compares it with
/// `N(0, target_variance)`.
pub fn normality_diagnostic(estimates: &[f64], center: f64, rate: f64, target_variance: f64) -> Result<NormalityDiagnostic> {
    const MIN_SAMPLES: usize = 30;
    if estimates.len() < MIN_SAMPLES {
        return Err(FgdError::TooFewSamples { got: estimates.len(), needed: MIN_SAMPLES });
    }
    if !(rate > 0.0) || !(target_variance > 0.0) {
        return Err(FgdError::InvalidParameter("rate and target variance must be positive".into()));
    }
    let z = sorted(estimates.iter().map(|e| rate * (e - center)).collect());
    let (mean, variance) = mean_var(&z);
    let sd = target_variance.sqrt();
    let n = z.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in z.iter().enumerate() {
        let cdf = 0.5 * erfc(-x / (sd * std::f64::consts::SQRT_2));
        ks = ks.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    Ok(NormalityDiagnostic {
        samples: z.len(),
        mean,
        variance,
        target_variance,
        ratio: variance / target_variance,
        ks_distance: ks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub slope: f64,
    pub slope_se: f64,
    /// `(d, max residual)` per grid, coarsest first.
    pub points: Vec<(f64, f64)>,
    pub fit_error: Option<String>,
}

/// Fits `log max_k |Delta2 X_k - sigma X_{k-1} Delta2 B_k|` against
/// `log d` over nested grids, all restrictions of one simulated path.
pub fn increment_residual_scan(params: &GompertzParams, seed: u64, grids: &[usize]) -> Result<SlopeRecord> {
    let mut grids = grids.to_vec();
    grids.sort_unstable();
    grids.dedup();
    let flagged = |msg: String| SlopeRecord { slope: f64::NAN, slope_se: f64::NAN, points: vec![], fit_error: Some(msg) };
    if grids.len() < 3 {
        return Ok(flagged(format!("need at least 3 grid sizes, got {}", grids.len())));
    }
    if grids[0] < 3 {
        return Ok(flagged("grids need at least 3 increments".into()));
    }
    let finest = *grids.last().expect("non-empty");
    if let Some(g) = grids.iter().find(|&&g| !finest.is_multiple_of(g)) {
        return Ok(flagged(format!("grid {g} does not divide {finest}")));
    }
    let fbm = sample_fbm_circulant(params.hurst, GridSpec::new(params.horizon, finest)?, seed)?;
    let x = solve_explicit(params, &fbm)?;
    let mut points = Vec::new();
    for &m in &grids {
        let b = fbm.subsample(m)?;
        let xs = x.subsample(m)?;
        let (b, xs) = (b.values(), xs.values());
        let residual = (1..m)
            .map(|k| {
                let dx = xs[k + 1] - 2.0 * xs[k] + xs[k - 1];
                let db = b[k + 1] - 2.0 * b[k] + b[k - 1];
                (dx - params.sigma * xs[k - 1] * db).abs()
            })
            .fold(0.0, f64::max);
        points.push((params.horizon / m as f64, residual));
    }
    if points.iter().any(|&(_, r)| !(r > 0.0)) {
        return Ok(SlopeRecord { fit_error: Some("zero residual".into()), ..flagged(String::new()) });
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, slope_se) = ols_slope(&lx, &ly);
    Ok(SlopeRecord { slope, slope_se, points, fit_error: None })
}

/// Named sweeps used to compare the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Hurst estimators, absolute error against `H` at `n = 2^10`.
    Fig1,
    /// Hurst estimators, absolute error against `n` at `H = 0.75`.
    Fig2,
    /// Diffusion estimators, relative error against `sigma` at `n = 2^10`.
    Fig3,
    /// Diffusion estimators, relative error against `n` at `sigma = 1`.
    Fig4,
}

impl FromStr for Preset {
    type Err = FgdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            other => Err(FgdError::InvalidSpec(format!("unknown preset {other:?}"))),
        }
    }
}

fn sigma_estimators() -> Vec<EstimatorId> {
    let mut ids = Vec::new();
    for s in [SigmaKind::S1, SigmaKind::S2, SigmaKind::S3] {
        for h in [HurstKind::H1, HurstKind::H2, HurstKind::H3] {
            ids.push(EstimatorId::Sigma(s, PlugIn::Estimated(h)));
        }
    }
    ids.push(EstimatorId::Sigma4);
    ids
}

impl Preset {
    pub fn spec(self) -> ExperimentSpec {
        let hurst_ids = vec![
            EstimatorId::Hurst(HurstKind::H1),
            EstimatorId::Hurst(HurstKind::H2),
            EstimatorId::Hurst(HurstKind::H3),
            EstimatorId::Hurst(HurstKind::H4),
        ];
        let sizes: Vec<usize> = (8..=12).map(|p| 1usize << p).collect();
        let base = ExperimentSpec {
            hurst: vec![0.75],
            sigma: vec![1.5],
            n: vec![1 << 10],
            x0: 3.0,
            alpha: 0.5,
            beta: 2.0,
            horizon: 1.0,
            replicates: 300,
            seed: 0x5eed,
            estimators: hurst_ids,
            schedule: ScheduleSpec::default(),
            oversample: 1,
        };
        match self {
            Preset::Fig1 => ExperimentSpec { hurst: vec![0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95], ..base },
            Preset::Fig2 => ExperimentSpec { n: sizes, ..base },
            Preset::Fig3 => ExperimentSpec {
                sigma: vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                estimators: sigma_estimators(),
                ..base
            },
            Preset::Fig4 => ExperimentSpec { sigma: vec![1.0], n: sizes, estimators: sigma_estimators(), ..base },
        }
    }
}

/// Mean of a slice via compensated summation; `NaN` when empty.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        compensated_sum(xs.iter().copied()) / xs.len() as f64
    }
}
