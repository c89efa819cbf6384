//! Deterministic synthetic data.
//!
//! Bars follow a geometric random walk whose volatility doubles on alternate
//! regimes. Each bar also carries a latent order-flow shock that is revealed
//! through that bar's volume and leaks into the next bar's return with
//! correlation `signal_strength`, so the volume z-score feature is the one
//! engineered feature with predictive content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Bar, BarSeries, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const START_TIMESTAMP_US: i64 = 1_700_000_000_000_000;
const BAR_INTERVAL_US: i64 = 1_000_000;
const START_PRICE: f64 = 100.0;
const BASE_VOLUME: f64 = 10_000.0;
const VOLUME_SIGNAL_LOADING: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_bars: usize,
    pub seed: u64,
    /// Per-bar log drift.
    pub drift: f64,
    /// Per-bar log volatility in calm regimes.
    pub volatility: f64,
    /// Bars between volatility regime toggles.
    pub regime_shift_period: usize,
    /// Pure-noise feature columns appended by feature engineering.
    pub n_noise_features: usize,
    /// Correlation between the latent volume shock and the next return.
    pub signal_strength: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_bars: 10_000,
            seed: 7,
            drift: 0.0,
            volatility: 0.001,
            regime_shift_period: 1000,
            n_noise_features: 5,
            signal_strength: 0.8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(Error::config("drift", "must be finite"));
        }
        if !self.volatility.is_finite() || self.volatility < 0.0 {
            return Err(Error::config("volatility", "must be finite and >= 0"));
        }
        if self.regime_shift_period < 1 {
            return Err(Error::config("regime_shift_period", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.signal_strength) {
            return Err(Error::config("signal_strength", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<BarSeries> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rho = cfg.signal_strength;
    let idio = (1.0 - rho * rho).sqrt();

    let mut bars = Vec::with_capacity(cfg.n_bars);
    let mut prev_close = START_PRICE;
    let mut prev_shock = 0.0;
    for t in 0..cfg.n_bars {
        let regime_scale = if (t / cfg.regime_shift_period) % 2 == 1 { 2.0 } else { 1.0 };
        let sigma = cfg.volatility * regime_scale;

        let eps: f64 = rng.sample(StandardNormal);
        let wick_up: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let wick_down: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let shock: f64 = rng.sample(StandardNormal);

        let open = prev_close;
        let close = open * (cfg.drift + sigma * (rho * prev_shock + idio * eps)).exp();
        let high = open.max(close) * (0.5 * sigma * wick_up).exp();
        let low = open.min(close) * (-0.5 * sigma * wick_down).exp();
        let volume = BASE_VOLUME * (1.0 + VOLUME_SIGNAL_LOADING * shock).max(0.05);

        bars.push(Bar { timestamp: START_TIMESTAMP_US + t as i64 * BAR_INTERVAL_US, open, high, low, close, volume });
        prev_close = close;
        prev_shock = shock;
    }
    BarSeries::new("SYNTH", bars)
}

/// Feature-level planted-signal set: `n_features` standard-normal columns
/// named `f0..`, where column `signal_col` has correlation `strength` with
/// the standard-normal target and every other column is independent noise.
pub fn planted_signal_matrix(
    n: usize,
    n_features: usize,
    signal_col: usize,
    strength: f64,
    seed: u64,
) -> Result<FeatureMatrix> {
    if signal_col >= n_features {
        return Err(Error::size("signal column out of range"));
    }
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::data("strength must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idio = (1.0 - strength * strength).sqrt();
    let mut values = Matrix::zeros(n, n_features);
    let mut target = Vec::with_capacity(n);
    for r in 0..n {
        let y: f64 = rng.sample(StandardNormal);
        for c in 0..n_features {
            let e: f64 = rng.sample(StandardNormal);
            let v = if c == signal_col { strength * y + idio * e } else { e };
            values.set(r, c, v);
        }
        target.push(y);
    }
    let names = (0..n_features).map(|c| format!("f{c}")).collect();
    FeatureMatrix::new(values, names, target, 0)
}
