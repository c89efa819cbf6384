use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Sliding windows of consecutive feature rows, each labelled with the target
/// of its last row.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    features: FeatureMatrix,
    window: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.features.n_rows() + 1 - self.window
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window_size(&self) -> usize {
        self.window
    }

    pub fn width(&self) -> usize {
        self.features.n_features()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    /// Row-major `window x width` slice for window `i`.
    pub fn window(&self, i: usize) -> &[f64] {
        let d = self.width();
        &self.features.values().as_slice()[i * d..(i + self.window) * d]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.features.target()[i + self.window - 1]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.target(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.window(i), self.target(i)))
    }
}

pub fn make_windows(features: FeatureMatrix, window: usize) -> Result<WindowSet> {
    if window == 0 {
        return Err(Error::size("window must be >= 1"));
    }
    if window > features.n_rows() {
        return Err(Error::size(format!("window {window} exceeds {} rows", features.n_rows())));
    }
    Ok(WindowSet { features, window })
}
