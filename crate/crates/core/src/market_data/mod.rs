//! Market data ingestion, synthetic generation, feature engineering and
//! windowing.

mod csv;
mod features;
mod synth;
mod windows;

pub use csv::{parse_bar_csv, parse_bar_csv_str, write_bar_csv, CSV_HEADER};
pub use features::{
    build_feature_matrix, noise_value, FeatureExtractor, FeatureKind, FeatureMatrix, FeatureSpec, ENGINEERED_FEATURES,
};
pub use synth::{generate_synthetic, planted_signal_matrix, SynthConfig};
pub use windows::{make_windows, WindowSet};

use crate::error::{Error, Result};

/// One OHLCV aggregation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    /// Epoch microseconds.
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} exceeds min(open, close) {}", self.low, self.open.min(self.close)));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} is below max(open, close) {}", self.high, self.open.max(self.close)));
        }
        Ok(())
    }
}

/// Time-ordered bars with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BarSeries {
    symbol: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>) -> Result<Self> {
        for (i, bar) in bars.iter().enumerate() {
            bar.validate().map_err(|msg| Error::data(format!("bar {i}: {msg}")))?;
            if i > 0 && bar.timestamp <= bars[i - 1].timestamp {
                return Err(Error::data(format!("bar {i}: timestamp {} is not strictly increasing", bar.timestamp)));
            }
        }
        Ok(Self { symbol: symbol.into(), bars })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Simple close-to-close returns, one shorter than the series.
    pub fn returns(&self) -> Vec<f64> {
        self.bars.windows(2).map(|w| w[1].close / w[0].close - 1.0).collect()
    }
}
