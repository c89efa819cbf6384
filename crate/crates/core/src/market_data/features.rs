//! Candidate feature engineering from bars.

use std::collections::HashSet;

use super::{Bar, BarSeries};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Names of the engineered (non-noise) columns, in column order.
pub const ENGINEERED_FEATURES: [&str; 6] = ["ret", "log_ret", "range", "vol_z", "rvol", "close_z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Close-to-close simple return.
    Return,
    LogReturn,
    /// (high - low) / close.
    RangeRatio,
    /// Volume z-score over the trailing window.
    VolumeZ,
    /// Population standard deviation of the simple returns inside the
    /// trailing window.
    RollingVol,
    /// Close z-score over the trailing window.
    CloseZ,
    /// Seeded standard-normal noise column.
    Noise(usize),
}

impl FeatureKind {
    pub fn name(&self) -> String {
        match self {
            FeatureKind::Return => "ret".into(),
            FeatureKind::LogReturn => "log_ret".into(),
            FeatureKind::RangeRatio => "range".into(),
            FeatureKind::VolumeZ => "vol_z".into(),
            FeatureKind::RollingVol => "rvol".into(),
            FeatureKind::CloseZ => "close_z".into(),
            FeatureKind::Noise(j) => format!("noise_{j}"),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ret" => FeatureKind::Return,
            "log_ret" => FeatureKind::LogReturn,
            "range" => FeatureKind::RangeRatio,
            "vol_z" => FeatureKind::VolumeZ,
            "rvol" => FeatureKind::RollingVol,
            "close_z" => FeatureKind::CloseZ,
            other => FeatureKind::Noise(other.strip_prefix("noise_")?.parse().ok()?),
        })
    }

    pub fn all(n_noise: usize) -> Vec<FeatureKind> {
        let mut kinds = vec![
            FeatureKind::Return,
            FeatureKind::LogReturn,
            FeatureKind::RangeRatio,
            FeatureKind::VolumeZ,
            FeatureKind::RollingVol,
            FeatureKind::CloseZ,
        ];
        kinds.extend((0..n_noise).map(FeatureKind::Noise));
        kinds
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard-normal noise addressed by `(seed, column, bar)`, so any cell can
/// be produced without generating the ones before it.
pub fn noise_value(seed: u64, column: usize, bar: usize) -> f64 {
    let key = splitmix64(seed ^ splitmix64(column as u64 ^ splitmix64(bar as u64)));
    let a = splitmix64(key);
    let b = splitmix64(a);
    // 53-bit uniforms; u1 in (0, 1] keeps the log finite.
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn zscore(x: f64, mean: f64, std: f64) -> f64 {
    // Constant windows produce a rounding-level std; treat them as flat.
    if std <= 1e-12 * mean.abs().max(1e-300) {
        0.0
    } else {
        (x - mean) / std
    }
}

/// Computes candidate feature values for individual bars.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor {
    vol_window: usize,
    noise_seed: u64,
}

impl FeatureExtractor {
    pub fn new(vol_window: usize, noise_seed: u64) -> Result<Self> {
        if vol_window < 2 {
            return Err(Error::size("vol_window must be >= 2"));
        }
        Ok(Self { vol_window, noise_seed })
    }

    pub fn vol_window(&self) -> usize {
        self.vol_window
    }

    /// First bar index with a full lookback.
    pub fn first_valid_bar(&self) -> usize {
        self.vol_window - 1
    }

    /// Feature value at bar `t`; requires `t >= first_valid_bar()`.
    pub fn value(&self, bars: &[Bar], t: usize, kind: FeatureKind) -> f64 {
        debug_assert!(t >= self.first_valid_bar() && t < bars.len());
        let lo = t + 1 - self.vol_window;
        match kind {
            FeatureKind::Return => bars[t].close / bars[t - 1].close - 1.0,
            FeatureKind::LogReturn => (bars[t].close / bars[t - 1].close).ln(),
            FeatureKind::RangeRatio => (bars[t].high - bars[t].low) / bars[t].close,
            FeatureKind::VolumeZ => {
                let vols = bars[lo..=t].iter().map(|b| b.volume);
                let (m, s) = mean_std(vols);
                zscore(bars[t].volume, m, s)
            }
            FeatureKind::RollingVol => {
                let rets = bars[lo..=t].windows(2).map(|w| w[1].close / w[0].close - 1.0);
                mean_std(rets).1
            }
            FeatureKind::CloseZ => {
                let closes = bars[lo..=t].iter().map(|b| b.close);
                let (m, s) = mean_std(closes);
                zscore(bars[t].close, m, s)
            }
            FeatureKind::Noise(j) => noise_value(self.noise_seed, j, t),
        }
    }

    /// Writes the `window` rows ending at bar `end` (inclusive) for the given
    /// columns into `out`, row-major.
    pub fn extract_window(
        &self,
        bars: &[Bar],
        end: usize,
        window: usize,
        columns: &[FeatureKind],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if window == 0 || end >= bars.len() || end + 1 < window + self.first_valid_bar() {
            return Err(Error::size(format!("cannot extract a {window}-row window ending at bar {end}")));
        }
        out.clear();
        for t in end + 1 - window..=end {
            out.extend(columns.iter().map(|&k| self.value(bars, t, k)));
        }
        Ok(())
    }
}

/// Engineered features (rows = time steps) with the forward-return target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
    names: Vec<String>,
    target: Vec<f64>,
    first_bar: usize,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, names: Vec<String>, target: Vec<f64>, first_bar: usize) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::size("feature matrix needs at least one column"));
        }
        if names.len() != values.cols() {
            return Err(Error::size("one name per column required"));
        }
        if target.len() != values.rows() {
            return Err(Error::size("target length must equal row count"));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::data("column names must be unique"));
        }
        if !values.is_finite() || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("feature matrix contains non-finite values"));
        }
        Ok(Self { values, names, target, first_bar })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Index of the source bar behind row 0.
    pub fn first_bar(&self) -> usize {
        self.first_bar
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    /// Rows `start..end`, keeping the bar alignment.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.slice_rows(start, end),
            names: self.names.clone(),
            target: self.target[start..end].to_vec(),
            first_bar: self.first_bar + start,
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select_columns(columns),
            names: columns.iter().map(|&c| self.names[c].clone()).collect(),
            target: self.target.clone(),
            first_bar: self.first_bar,
        }
    }
}

/// Everything needed to rebuild a model's candidate features from bars.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub horizon: usize,
    pub vol_window: usize,
    /// Rows per model input window.
    pub window: usize,
    pub n_noise: usize,
    pub noise_seed: u64,
}

impl FeatureSpec {
    pub fn build(&self, bars: &BarSeries) -> Result<FeatureMatrix> {
        build_feature_matrix(bars, self.horizon, self.vol_window, self.n_noise, self.noise_seed)
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        FeatureKind::all(self.n_noise)
    }

    pub fn extractor(&self) -> Result<FeatureExtractor> {
        FeatureExtractor::new(self.vol_window, self.noise_seed)
    }
}

/// Builds the candidate feature matrix.
///
/// Row `r` describes bar `first_bar + r`; rows without a full `vol_window`
/// lookback or without a bar `horizon` steps ahead are dropped, leaving
/// `n - vol_window + 1 - horizon` rows.
pub fn build_feature_matrix(
    bars: &BarSeries,
    horizon: usize,
    vol_window: usize,
    n_noise: usize,
    seed: u64,
) -> Result<FeatureMatrix> {
    if horizon < 1 {
        return Err(Error::size("horizon must be >= 1"));
    }
    let extractor = FeatureExtractor::new(vol_window, seed)?;
    let b = bars.bars();
    if b.len() <= vol_window + horizon {
        return Err(Error::size(format!(
            "{} bars is too short for vol_window {vol_window} and horizon {horizon}",
            b.len()
        )));
    }
    let kinds = FeatureKind::all(n_noise);
    let first = extractor.first_valid_bar();
    let last = b.len() - 1 - horizon;
    let n_rows = last - first + 1;

    let mut values = Matrix::zeros(n_rows, kinds.len());
    let mut target = Vec::with_capacity(n_rows);
    for (r, t) in (first..=last).enumerate() {
        for (c, &k) in kinds.iter().enumerate() {
            values.set(r, c, extractor.value(b, t, k));
        }
        target.push(b[t + horizon].close / b[t].close - 1.0);
    }
    FeatureMatrix::new(values, kinds.iter().map(FeatureKind::name).collect(), target, first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{generate_synthetic, SynthConfig};

    fn bar(ts: i64, close: f64) -> Bar {
        Bar { timestamp: ts, open: close, high: close, low: close, close, volume: 1.0 }
    }

    fn flat(n: usize) -> BarSeries {
        BarSeries::new("", (0..n).map(|i| bar(i as i64, 100.0)).collect()).unwrap()
    }

    #[test]
    fn simple_return_at_second_bar() {
        let bars = [bar(0, 100.0), bar(1, 110.0)];
        let ex = FeatureExtractor::new(2, 0).unwrap();
        let r = ex.value(&bars, 1, FeatureKind::Return);
        assert!((r - 0.10).abs() < 1e-15);
    }

    #[test]
    fn constant_prices_have_zero_log_return() {
        let fm = build_feature_matrix(&flat(40), 1, 5, 0, 1).unwrap();
        assert!(fm.values().column(1).iter().all(|&v| v == 0.0));
        assert!(fm.values().column(5).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn row_count_small_case() {
        let fm = build_feature_matrix(&flat(25), 1, 20, 0, 1).unwrap();
        assert_eq!(fm.n_rows(), 5);
        assert_eq!(fm.first_bar(), 19);
        for n in 22..60 {
            let fm = build_feature_matrix(&flat(n), 1, 20, 2, 1).unwrap();
            assert_eq!(fm.n_rows(), n - 20 - 1 + 1);
            assert_eq!(fm.n_features(), 8);
        }
    }

    #[test]
    fn too_short_is_size_error() {
        assert!(matches!(build_feature_matrix(&flat(21), 1, 20, 0, 1), Err(Error::Size(_))));
    }

    #[test]
    fn targets_recomputed_from_bars() {
        let bars = generate_synthetic(&SynthConfig { n_bars: 400, ..Default::default() }).unwrap();
        for h in [1, 3] {
            let fm = build_feature_matrix(&bars, h, 10, 1, 3).unwrap();
            for r in 0..fm.n_rows() {
                let t = fm.first_bar() + r;
                let c = bars.bars();
                assert_eq!(fm.target()[r], c[t + h].close / c[t].close - 1.0);
            }
        }
    }

    #[test]
    fn extract_window_matches_matrix_rows() {
        let bars = generate_synthetic(&SynthConfig { n_bars: 200, ..Default::default() }).unwrap();
        let fm = build_feature_matrix(&bars, 1, 10, 2, 9).unwrap();
        let ex = FeatureExtractor::new(10, 9).unwrap();
        let kinds = FeatureKind::all(2);
        let mut out = Vec::new();
        let end_row = 50;
        ex.extract_window(bars.bars(), fm.first_bar() + end_row, 4, &kinds, &mut out).unwrap();
        let expected: Vec<f64> = (end_row - 3..=end_row).flat_map(|r| fm.values().row(r).to_vec()).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn noise_is_roughly_standard_normal() {
        let xs: Vec<f64> = (0..20_000).map(|t| noise_value(11, 2, t)).collect();
        let (m, s) = mean_std(xs.iter().copied());
        assert!(m.abs() < 0.03, "{m}");
        assert!((s - 1.0).abs() < 0.03, "{s}");
        assert_ne!(noise_value(11, 2, 5), noise_value(11, 3, 5));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in FeatureKind::all(3) {
            assert_eq!(FeatureKind::from_name(&k.name()), Some(k));
        }
        assert_eq!(FeatureKind::from_name("f0"), None);
    }
}
