#![allow(dead_code)]

use fgd_core::fgn::{sample_fbm_cholesky, sample_fbm_circulant};
use fgd_core::{GridSpec, HurstIndex};

/// Mean and standard error of iid draws.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn increments(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Clone, Copy)]
pub enum Generator {
    Circulant,
    Cholesky,
}

pub fn fbm_increments(gen: Generator, h: f64, m: usize, seed: u64) -> Vec<f64> {
    let h = HurstIndex::new(h).unwrap();
    let grid = GridSpec::new(1.0, m).unwrap();
    let path = match gen {
        Generator::Circulant => sample_fbm_circulant(h, grid, seed).unwrap(),
        Generator::Cholesky => sample_fbm_cholesky(h, grid, seed).unwrap(),
    };
    increments(path.values())
}

/// Entrywise sample covariance of zero-mean increment vectors, with the
/// standard error of each entry taken from the spread of the products.
pub struct CovEstimate {
    pub m: usize,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl CovEstimate {
    pub fn from_samples(samples: &[Vec<f64>]) -> Self {
        let m = samples[0].len();
        let n = samples.len() as f64;
        let mut sum = vec![0.0; m * m];
        let mut sum_sq = vec![0.0; m * m];
        for s in samples {
            for i in 0..m {
                for j in 0..m {
                    let p = s[i] * s[j];
                    sum[i * m + j] += p;
                    sum_sq[i * m + j] += p * p;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let se = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, mu)| ((sq / n - mu * mu) * n / (n - 1.0) / n).sqrt())
            .collect();
        Self { m, mean, se }
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        (self.mean[i * self.m + j], self.se[i * self.m + j])
    }
}

/// Exact covariance of increments `i` and `j` of fBm on `m` steps over `[0, 1]`.
pub fn increment_covariance(h: f64, m: usize, i: usize, j: usize) -> f64 {
    let lag = (i as f64 - j as f64).abs();
    let g = 0.5 * ((lag + 1.0).powf(2.0 * h) - 2.0 * lag.powf(2.0 * h) + (lag - 1.0).abs().powf(2.0 * h));
    g / (m as f64).powf(2.0 * h)
}
