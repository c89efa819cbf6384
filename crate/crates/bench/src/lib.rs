//! Fixtures shared by the criterion benches.

use litenet::config::PipelineConfig;
use litenet::litenet::{prune_model, FusedModel};
use litenet::market_data::planted_signal_matrix;
use litenet::matrix::Matrix;
use litenet::pipeline::{build_features, load_series, run_pipeline};

pub struct InferenceFixture {
    pub model: FusedModel,
    pub pruned: FusedModel,
    /// Normalized network inputs for the held-out windows.
    pub inputs: Vec<Vec<f64>>,
}

/// Trains on a short synthetic series, then prunes a copy at the `q`
/// quantile of kernel weight magnitudes.
pub fn inference_fixture(n_bars: usize, epochs: usize, q: f64) -> InferenceFixture {
    let mut cfg = PipelineConfig::default();
    cfg.synth.n_bars = n_bars;
    cfg.train.epochs = epochs;
    let fm = build_features(&load_series(&cfg).expect("synthetic bars"), &cfg).expect("features");
    let run = run_pipeline(&fm, &cfg).expect("pipeline");
    let eps = magnitude_quantile(&run.model, q);
    let (net, _) = prune_model(&run.model.net, eps).expect("prune");
    let pruned = FusedModel { net, ..run.model.clone() };
    let inputs = run.model.prepare_inputs(&run.test_windows).expect("inputs");
    InferenceFixture { model: run.model, pruned, inputs }
}

pub fn magnitude_quantile(model: &FusedModel, q: f64) -> f64 {
    let mut mags: Vec<f64> = model.net.modules().iter().flat_map(|m| m.kernel.iter().map(|w| w.abs())).collect();
    mags.sort_by(f64::total_cmp);
    mags[((mags.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize]
}

/// A feature column carrying signal and its target.
pub fn mi_pair(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let fm = planted_signal_matrix(n, 2, 0, 0.5, seed).expect("planted matrix");
    (fm.values().column(0), fm.target().to_vec())
}

/// `n` rows of per-feature statistics around three centers.
pub fn cluster_points(n: usize, d: usize) -> Matrix {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut unit = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let data = (0..n * d).map(|i| ((i / d) % 3) as f64 * 4.0 + unit()).collect();
    Matrix::new(n, d, data).expect("shape")
}
