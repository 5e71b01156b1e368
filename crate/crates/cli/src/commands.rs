use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use fgd_core::diffusion::{sigma2_1, sigma2_2, sigma2_3, sigma4};
use fgd_core::fgn::{sample_fbm_cholesky, sample_fbm_circulant};
use fgd_core::gompertz::solve_explicit;
use fgd_core::harness::{run_experiment_with_threads, ExperimentSpec, Preset};
use fgd_core::hurst::{h1, h2, h3, h4, integer_root};
use fgd_core::io::{fmt_f64, read_path_csv, write_path_csv};
use fgd_core::theory::{lambda2_affine, limit_var_h1, sigma12, sigma_sq, sigma_star_first, SeriesPolicy};
use fgd_core::{Convention, FgdError, GompertzParams, GridSpec, HurstEstimate, HurstIndex, RatioSchedule};
use serde_json::json;

use crate::{EstimatorArg, Method, OUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<FgdError> for CliError {
    fn from(e: FgdError) -> Self {
        use FgdError::*;
        match e {
            InvalidHurst(_) | InvalidGrid(_) | InvalidParameter(_) | OracleTooLarge { .. } | GridMismatch(_)
            | NotADivisor { .. } | PathTooShort { .. } | IndexOutOfRange { .. } | DegenerateSchedule(_)
            | InvalidSpec(_) | Io(_) => CliError::Usage(e.to_string()),
            NegativeEigenvalue { .. } | FactorizationFailed | Overflow(_) | NonpositiveState(_) | ZeroVariation
            | TooFewSamples { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

fn write_failed(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("write failed: {e}"))
}

/// Applies the output-directory override to relative paths.
fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let p = resolve_out(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(write_failed)?;
            }
            let f = File::create(&p).map_err(|e| write_failed(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

pub fn simulate_fbm(
    hurst: f64,
    points: usize,
    horizon: f64,
    seed: u64,
    method: Method,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let h = HurstIndex::new(hurst)?;
    let grid = GridSpec::new(horizon, points)?;
    let path = match method {
        Method::Circulant => sample_fbm_circulant(h, grid, seed)?,
        Method::Cholesky => sample_fbm_cholesky(h, grid, seed)?,
    };
    write_path_csv(open_out(out)?, &grid.times(), path.values())?;
    Ok(())
}

/// `p` is `[x0, alpha, beta, sigma, hurst, horizon]`.
pub fn simulate_gompertz(p: [f64; 6], points: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let [x0, alpha, beta, sigma, hurst, horizon] = p;
    let h = HurstIndex::new(hurst)?;
    let params = GompertzParams::new(x0, alpha, beta, sigma, h, horizon)?;
    let grid = GridSpec::new(horizon, points)?;
    let fbm = sample_fbm_circulant(h, grid, seed)?;
    let x = solve_explicit(&params, &fbm)?;
    write_path_csv(open_out(out)?, &grid.times(), x.values())?;
    Ok(())
}

fn thin(values: &[f64], n: usize) -> Result<Vec<f64>, CliError> {
    let m = values.len() - 1;
    if n == 0 || !m.is_multiple_of(n) {
        return Err(FgdError::NotADivisor { n, m }.into());
    }
    Ok(values.iter().step_by(m / n).copied().collect())
}

fn parse_schedule(ratios: &str, convention: &str, m: usize) -> Result<RatioSchedule, CliError> {
    let ratios = ratios
        .split(',')
        .map(|r| r.trim().parse::<usize>().map_err(|e| CliError::Usage(format!("--schedule: {r:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let convention: Convention = convention.parse().map_err(|e: FgdError| CliError::Usage(e.to_string()))?;
    // Pick the base so the finest grid is the whole file.
    let base = match convention {
        Convention::Divisive => m,
        Convention::Multiplicative => {
            let l = ratios.iter().copied().filter(|&r| r > 0).fold(1, num_lcm);
            if !m.is_multiple_of(l) {
                return Err(FgdError::NotADivisor { n: l, m }.into());
            }
            m / l
        }
    };
    let schedule = RatioSchedule::new(ratios, base, convention)?;
    if schedule.finest() != m {
        return Err(CliError::Usage(format!("schedule's finest grid {} does not match the file's {m} increments", schedule.finest())));
    }
    Ok(schedule)
}

fn num_lcm(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

fn hurst_by_h1(values: &[f64]) -> Result<HurstEstimate, CliError> {
    let m = values.len() - 1;
    if !m.is_multiple_of(2) {
        return Err(CliError::Usage(format!("h1 needs an even number of increments, got {m}")));
    }
    Ok(h1(&thin(values, m / 2)?, values)?)
}

fn hurst_by_h3(values: &[f64], schedule: &RatioSchedule) -> Result<HurstEstimate, CliError> {
    let paths = schedule.sizes().into_iter().map(|s| thin(values, s)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&[f64]> = paths.iter().map(Vec::as_slice).collect();
    Ok(h3(&refs, schedule)?)
}

pub fn estimate(
    input: &Path,
    estimator: EstimatorArg,
    hurst_est: &str,
    schedule: &str,
    convention: &str,
) -> Result<(), CliError> {
    let file = File::open(input).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
    let table = read_path_csv(file)?;
    let values = &table.values;
    if values.len() < 2 {
        return Err(FgdError::PathTooShort { nodes: values.len(), needed: 2 }.into());
    }
    let m = values.len() - 1;
    let horizon = table.horizon();
    let schedule = || parse_schedule(schedule, convention, m);

    let record = match estimator {
        EstimatorArg::H1 | EstimatorArg::H2 | EstimatorArg::H3 | EstimatorArg::H4 => {
            let est = match estimator {
                EstimatorArg::H1 => hurst_by_h1(values)?,
                EstimatorArg::H2 => {
                    let n = integer_root(m, 3);
                    if n.pow(3) != m {
                        return Err(CliError::Usage(format!("h2 needs n^3 increments, got {m}")));
                    }
                    h2(values, n)?
                }
                EstimatorArg::H3 => hurst_by_h3(values, &schedule()?)?,
                _ => h4(values)?,
            };
            json!({
                "estimator": format!("{estimator:?}").to_lowercase(),
                "increments": m,
                "value": est.value,
                "out_of_range": est.out_of_range,
            })
        }
        EstimatorArg::S4 => {
            let schedule = schedule()?;
            let h = hurst_by_h3(values, &schedule)?;
            let paths = schedule.sizes().into_iter().map(|s| thin(values, s)).collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&[f64]> = paths.iter().map(Vec::as_slice).collect();
            let s4 = sigma4(&refs, &schedule, h.value)?;
            json!({
                "estimator": "s4",
                "increments": m,
                "value": s4.sigma,
                "sigma_sq": s4.sigma_sq,
                "intercept": s4.intercept,
                "hurst": h.value,
            })
        }
        EstimatorArg::S1 | EstimatorArg::S2 | EstimatorArg::S3 => {
            let h = match hurst_est {
                "h1" => hurst_by_h1(values)?.value,
                "h3" => hurst_by_h3(values, &schedule()?)?.value,
                other => other
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("--hurst-est: expected a number, h1 or h3, got {other:?}")))?,
            };
            let s2 = match estimator {
                EstimatorArg::S1 => sigma2_1(values, h, horizon)?,
                EstimatorArg::S2 => sigma2_2(values, h, horizon)?,
                _ => sigma2_3(values, h, horizon)?,
            };
            json!({
                "estimator": format!("{estimator:?}").to_lowercase(),
                "increments": m,
                "value": s2,
                "sigma": s2.sqrt(),
                "hurst": h,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
    Ok(())
}

pub fn experiment(
    spec: Option<&Path>,
    preset: Option<&str>,
    out: &Path,
    replicates: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let mut spec = match (spec, preset) {
        (Some(path), _) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text)?
        }
        (None, Some(name)) => name.parse::<Preset>()?.spec(),
        (None, None) => return Err(CliError::Usage("one of --spec or --preset is required".into())),
    };
    if let Some(r) = replicates {
        spec.replicates = r;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let threads = match threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let table = run_experiment_with_threads(&spec, threads)?;
    let dir = resolve_out(out);
    std::fs::create_dir_all(&dir).map_err(write_failed)?;
    std::fs::write(dir.join("summary.csv"), table.to_csv()).map_err(write_failed)?;
    std::fs::write(dir.join("summary.json"), table.to_json()).map_err(write_failed)?;
    eprintln!("wrote {} rows to {}", table.rows.len(), dir.display());
    Ok(())
}

/// Parses `start:stop:step` or a comma-separated list.
pub fn parse_h_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Usage(format!("--h-grid: {msg}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, d) = (num(start)?, num(stop)?, num(step)?);
            if d.is_nan() || d <= 0.0 || b < a {
                return Err(bad("need start <= stop and step > 0".into()));
            }
            let count = ((b - a) / d + 1e-9).floor() as usize + 1;
            // Rounded so that 0.55 + 2 * 0.05 prints as 0.65.
            (0..count).map(|i| ((a + i as f64 * d) * 1e12).round() / 1e12).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad(format!("cannot parse {text:?}"))),
    };
    if grid.is_empty() {
        return Err(bad("empty grid".into()));
    }
    for &h in &grid {
        HurstIndex::new(h)?;
    }
    Ok(grid)
}

pub const VARIANCE_HEADER: [&str; 7] =
    ["H", "sigma_sq", "sigma_star_first", "sigma12", "limit_var_h1", "lambda2_affine", "note"];

pub fn variance_table(h_grid: &str, tol: f64, out: Option<&Path>) -> Result<(), CliError> {
    let grid = parse_h_grid(h_grid)?;
    let policy = SeriesPolicy::new(tol, SeriesPolicy::default().max_terms)?;
    let mut w = csv::Writer::from_writer(open_out(out)?);
    w.write_record(VARIANCE_HEADER).map_err(write_failed)?;
    for h in grid {
        let (star, note) = match sigma_star_first(h, policy) {
            Ok(v) => (fmt_f64(v), String::new()),
            Err(FgdError::InvalidHurst(_)) => (String::new(), "sigma_star_first diverges for H >= 0.75".to_string()),
            Err(e) => return Err(e.into()),
        };
        w.write_record([
            fmt_f64(h),
            fmt_f64(sigma_sq(h, policy)?),
            star,
            fmt_f64(sigma12(h, policy)?),
            fmt_f64(limit_var_h1(h, policy)?),
            fmt_f64(lambda2_affine(h)),
            note,
        ])
        .map_err(write_failed)?;
    }
    w.flush().map_err(write_failed)?;
    Ok(())
}
