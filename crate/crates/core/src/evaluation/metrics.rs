use std::fmt::Write as _;

use crate::error::{Error, Result};

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::size("metric needs at least one sample"));
    }
    if y.len() != y_hat.len() {
        return Err(Error::size(format!("length mismatch: {} targets, {} predictions", y.len(), y_hat.len())));
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `1 - SSE / SST`.
pub fn r2_score(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    if y.len() < 2 {
        return Err(Error::size("r2 needs at least two samples"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(Error::degenerate("target has zero variance; r2 undefined"));
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub r2: f64,
    pub n: usize,
    pub split: String,
}

impl MetricsReport {
    pub fn compute(y: &[f64], y_hat: &[f64], split: impl Into<String>) -> Result<Self> {
        Ok(Self { rmse: rmse(y, y_hat)?, r2: r2_score(y, y_hat)?, n: y.len(), split: split.into() })
    }

    pub fn to_table(&self) -> String {
        format!(
            "{:<8} {:>6} {:>14} {:>10}\n{:<8} {:>6} {:>14.6e} {:>10.6}\n",
            "split", "n", "rmse", "r2", self.split, self.n, self.rmse, self.r2
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfReport {
    pub values: Vec<f64>,
    pub n: usize,
}

impl AcfReport {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("# acf n={} estimator=biased\n{:>5} {:>12}\n", self.n, "lag", "acf");
        for (lag, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{lag:>5} {v:>12.6}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,acf\n");
        for (lag, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{lag},{v}");
        }
        out
    }
}

/// Biased autocorrelation estimate for lags `0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfReport> {
    let n = series.len();
    if n < max_lag + 2 {
        return Err(Error::size(format!("acf up to lag {max_lag} needs at least {} samples", max_lag + 2)));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("series contains non-finite values"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::degenerate("constant series; autocorrelation undefined"));
    }
    let values = (0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                1.0
            } else {
                centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / denom
            }
        })
        .collect();
    Ok(AcfReport { values, n })
}
