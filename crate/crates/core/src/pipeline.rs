//! End-to-end runs: load bars, build features, split chronologically, select,
//! train and score the held-out tail.

use crate::config::{DataSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::litenet::{train_with_history, FusedModel, TrainHistory};
use crate::market_data::{generate_synthetic, make_windows, parse_bar_csv, BarSeries, FeatureMatrix, WindowSet};
use crate::mutual_info::run_selection;

/// Share of rows held out at the end of the series.
pub const TEST_FRACTION: f64 = 0.2;

pub fn load_series(cfg: &PipelineConfig) -> Result<BarSeries> {
    match &cfg.data {
        DataSource::Synthetic => generate_synthetic(&cfg.synth),
        DataSource::Csv(path) => {
            let file = std::fs::File::open(path)?;
            parse_bar_csv(std::io::BufReader::new(file))
        }
    }
}

pub fn build_features(bars: &BarSeries, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    cfg.features.build(bars)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    /// Training rows, ending `horizon` rows before the test period so no
    /// training target overlaps it.
    pub train: FeatureMatrix,
    /// Test rows preceded by `window - 1` rows of lookback.
    pub test: FeatureMatrix,
    /// First test row in the full matrix.
    pub test_start: usize,
}

pub fn split_chronological(fm: &FeatureMatrix, window: usize, horizon: usize) -> Result<DataSplit> {
    let n = fm.n_rows();
    let n_test = (n as f64 * TEST_FRACTION).floor() as usize;
    let test_start = n - n_test;
    if n_test < 2 || test_start < horizon + window || window == 0 {
        return Err(Error::size(format!("{n} rows are too few for window {window} and horizon {horizon}")));
    }
    Ok(DataSplit {
        train: fm.slice_rows(0, test_start - horizon),
        test: fm.slice_rows(test_start + 1 - window, n),
        test_start,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub model: FusedModel,
    pub history: TrainHistory,
    pub test_windows: WindowSet,
    pub predictions: Vec<f64>,
    pub metrics: MetricsReport,
}

pub fn run_pipeline(fm: &FeatureMatrix, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let window = cfg.features.window;
    let split = split_chronological(fm, window, cfg.features.horizon)?;
    let selection = run_selection(&split.train, &cfg.selection, 0)?;
    let train_windows = make_windows(split.train, window)?;
    let (model, history) =
        train_with_history(&train_windows, &cfg.features, &cfg.train, &selection, cfg.reselect().as_ref())?;
    let test_windows = make_windows(split.test, window)?;
    let predictions = model.predict_windows(&test_windows)?;
    let metrics = MetricsReport::compute(&test_windows.targets(), &predictions, "test")?;
    Ok(PipelineRun { model, history, test_windows, predictions, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn ramp(n: usize) -> FeatureMatrix {
        let values = Matrix::new(n, 1, (0..n).map(|v| v as f64).collect()).unwrap();
        FeatureMatrix::new(values, vec!["x".into()], (0..n).map(|v| v as f64).collect(), 0).unwrap()
    }

    #[test]
    fn split_is_chronological_and_purged() {
        let s = split_chronological(&ramp(100), 5, 2).unwrap();
        assert_eq!(s.test_start, 80);
        assert_eq!(s.train.n_rows(), 78);
        assert_eq!(s.train.target().last(), Some(&77.0));
        assert_eq!(s.test.n_rows(), 24);
        assert_eq!(s.test.target()[0], 76.0);
        assert_eq!(make_windows(s.test, 5).unwrap().len(), 20);
    }

    #[test]
    fn too_small() {
        assert!(matches!(split_chronological(&ramp(8), 5, 1), Err(Error::Size(_))));
    }
}
