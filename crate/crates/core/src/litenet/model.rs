use crate::error::{Error, Result};
use crate::market_data::{FeatureMatrix, FeatureSpec, WindowSet};
use crate::mutual_info::SelectionReport;

use super::conv::ConvModule;
use super::train::TrainConfig;

/// Inference form of one module: only retained taps, as flat offsets into a
/// row-major input of fixed width.
#[derive(Debug, Clone, PartialEq)]
struct SparseModule {
    taps: Vec<(usize, f64)>,
    out_rows: usize,
    out_cols: usize,
    bias: f64,
    head_w: f64,
    head_b: f64,
    positions: f64,
}

impl SparseModule {
    fn compile(m: &ConvModule, rows: usize, cols: usize) -> Result<Self> {
        let (out_rows, out_cols) = m.output_dims(rows, cols)?;
        let f = m.size;
        let taps = (0..f * f).filter(|&t| m.mask[t]).map(|t| ((t / f) * cols + t % f, m.kernel[t])).collect();
        Ok(Self {
            taps,
            out_rows,
            out_cols,
            bias: m.bias,
            head_w: m.head_w,
            head_b: m.head_b,
            positions: (out_rows * out_cols) as f64,
        })
    }

    #[inline]
    fn eval(&self, input: &[f64], cols: usize) -> f64 {
        let mut sum = 0.0;
        for m in 0..self.out_rows {
            for n in 0..self.out_cols {
                let base = &input[m * cols + n..];
                let mut acc = 0.0;
                for &(off, w) in &self.taps {
                    acc += w * base[off];
                }
                let z = acc + self.bias;
                if z > 0.0 {
                    sum += z;
                }
            }
        }
        self.head_w * (sum / self.positions) + self.head_b
    }
}

/// `L` parallel conv modules over a `rows x cols` window, fused as
/// `y = sum_i alpha_i * M_i(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedNet {
    modules: Vec<ConvModule>,
    alpha: Vec<f64>,
    rows: usize,
    cols: usize,
    sparse: Vec<SparseModule>,
}

impl FusedNet {
    pub fn new(modules: Vec<ConvModule>, alpha: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::size("at least one module required"));
        }
        if alpha.len() != modules.len() {
            return Err(Error::size("one fusion weight per module required"));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::data("fusion weights must be finite"));
        }
        for m in &modules {
            if m.kernel.len() != m.size * m.size || m.mask.len() != m.kernel.len() {
                return Err(Error::size("kernel and mask must be size x size"));
            }
            if m.kernel.iter().zip(&m.mask).any(|(w, keep)| !keep && *w != 0.0) {
                return Err(Error::data("masked weights must be stored as 0"));
            }
        }
        let mut net = Self { modules, alpha, rows, cols, sparse: Vec::new() };
        net.recompile()?;
        Ok(net)
    }

    pub(crate) fn recompile(&mut self) -> Result<()> {
        self.sparse =
            self.modules.iter().map(|m| SparseModule::compile(m, self.rows, self.cols)).collect::<Result<_>>()?;
        Ok(())
    }

    pub fn modules(&self) -> &[ConvModule] {
        &self.modules
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Input rows (window length).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Input columns (feature count).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        FusedNet::new(self.modules.clone(), alpha, self.rows, self.cols)
    }

    /// Checked fused prediction for one row-major window.
    pub fn fused_forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.rows * self.cols {
            return Err(Error::size(format!(
                "expected a {}x{} window ({} values), got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                input.len()
            )));
        }
        Ok(self.forward(input))
    }

    /// Unchecked hot path; `input` must hold `rows * cols` values.
    #[inline]
    pub fn forward(&self, input: &[f64]) -> f64 {
        debug_assert_eq!(input.len(), self.rows * self.cols);
        self.sparse.iter().zip(&self.alpha).map(|(m, a)| a * m.eval(input, self.cols)).sum()
    }

    /// Per-module outputs `M_i(X)`.
    pub fn module_outputs(&self, input: &[f64]) -> Vec<f64> {
        self.sparse.iter().map(|m| m.eval(input, self.cols)).collect()
    }

    /// Flat parameter vector: per module the kernel, bias, head weight and
    /// head bias, then every fusion weight.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for m in &self.modules {
            p.extend_from_slice(&m.kernel);
            p.extend([m.bias, m.head_w, m.head_b]);
        }
        p.extend_from_slice(&self.alpha);
        p
    }

    pub fn parameter_count(&self) -> usize {
        self.modules.iter().map(|m| m.kernel.len() + 3).sum::<usize>() + self.alpha.len()
    }

    /// Same layout as [`parameters`](Self::parameters); `false` marks masked
    /// kernel weights.
    pub fn trainable(&self) -> Vec<bool> {
        let mut t = Vec::with_capacity(self.parameter_count());
        for m in &self.modules {
            t.extend_from_slice(&m.mask);
            t.extend([true; 3]);
        }
        t.extend(std::iter::repeat_n(true, self.alpha.len()));
        t
    }

    /// Writes a flat parameter vector back. Masked weights stay exactly 0.
    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.parameter_count() {
            return Err(Error::size("parameter vector length mismatch"));
        }
        let mut at = 0;
        for m in &mut self.modules {
            for (k, (w, keep)) in m.kernel.iter_mut().zip(&m.mask).enumerate() {
                *w = if *keep { p[at + k] } else { 0.0 };
            }
            at += m.kernel.len();
            m.bias = p[at];
            m.head_w = p[at + 1];
            m.head_b = p[at + 2];
            at += 3;
        }
        self.alpha.copy_from_slice(&p[at..]);
        self.recompile()
    }

    pub(crate) fn modules_mut(&mut self) -> &mut [ConvModule] {
        &mut self.modules
    }
}

/// Z-score parameters for every candidate feature and for the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub feature_mean: Vec<f64>,
    /// Zero-variance columns store 1.
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let m = values.clone().sum::<f64>() / n;
    let v = values.map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, if v > 0.0 { v.sqrt() } else { 1.0 })
}

impl Normalizer {
    pub fn fit(fm: &FeatureMatrix) -> Self {
        let x = fm.values();
        let (feature_mean, feature_std) =
            (0..x.cols()).map(|c| mean_std((0..x.rows()).map(move |r| x.get(r, c)))).unzip();
        let (target_mean, target_std) = mean_std(fm.target().iter().copied());
        Self { feature_mean, feature_std, target_mean, target_std }
    }

    /// Normalized copy of the given columns with a normalized target.
    pub fn apply(&self, fm: &FeatureMatrix, columns: &[usize]) -> Result<FeatureMatrix> {
        let mut sub = fm.select_columns(columns);
        let mut values = sub.values().clone();
        for r in 0..values.rows() {
            for (slot, &c) in values.row_mut(r).iter_mut().zip(columns) {
                *slot = (*slot - self.feature_mean[c]) / self.feature_std[c];
            }
        }
        let target = sub.target().iter().map(|y| (y - self.target_mean) / self.target_std).collect();
        sub = FeatureMatrix::new(values, sub.names().to_vec(), target, sub.first_bar())?;
        Ok(sub)
    }

    #[inline]
    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }
}

/// A trained predictor with everything needed to run it on raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedModel {
    pub net: FusedNet,
    /// Candidate-feature indices feeding the network, in column order.
    pub inputs: Vec<usize>,
    pub normalizer: Normalizer,
    pub selection: SelectionReport,
    pub features: FeatureSpec,
    pub train_config: TrainConfig,
}

impl FusedModel {
    pub fn window(&self) -> usize {
        self.net.rows()
    }

    /// Gathers and normalizes the model inputs from a window over all
    /// candidate features.
    #[inline]
    pub fn gather(&self, window: &[f64], full_width: usize, out: &mut Vec<f64>) {
        out.clear();
        for row in window.chunks_exact(full_width) {
            out.extend(
                self.inputs
                    .iter()
                    .map(|&c| (row[c] - self.normalizer.feature_mean[c]) / self.normalizer.feature_std[c]),
            );
        }
    }

    /// Prediction in target units for a window over all candidate features.
    #[inline]
    pub fn predict(&self, window: &[f64], full_width: usize, scratch: &mut Vec<f64>) -> f64 {
        self.gather(window, full_width, scratch);
        self.normalizer.denormalize_target(self.net.forward(scratch))
    }

    fn check_windows(&self, windows: &WindowSet) -> Result<()> {
        if windows.window_size() != self.window() {
            return Err(Error::size(format!(
                "model expects {}-row windows, got {}",
                self.window(),
                windows.window_size()
            )));
        }
        if windows.width() != self.normalizer.feature_mean.len() {
            return Err(Error::size(format!(
                "model expects {} candidate features, got {}",
                self.normalizer.feature_mean.len(),
                windows.width()
            )));
        }
        Ok(())
    }

    pub fn predict_windows(&self, windows: &WindowSet) -> Result<Vec<f64>> {
        self.check_windows(windows)?;
        let mut scratch = Vec::with_capacity(self.window() * self.inputs.len());
        Ok((0..windows.len()).map(|i| self.predict(windows.window(i), windows.width(), &mut scratch)).collect())
    }

    /// Normalized network inputs, one per window.
    pub fn prepare_inputs(&self, windows: &WindowSet) -> Result<Vec<Vec<f64>>> {
        self.check_windows(windows)?;
        Ok((0..windows.len())
            .map(|i| {
                let mut v = Vec::new();
                self.gather(windows.window(i), windows.width(), &mut v);
                v
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn constant(v: f64, size: usize) -> ConvModule {
        let mut m = ConvModule::zeros(size);
        m.head_b = v;
        m
    }

    #[test]
    fn identity_fusion() {
        let m = ConvModule::new(2, vec![0.5, -0.25, 1.0, 0.75], 0.1, 1.5, -0.2).unwrap();
        let x: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect();
        let net = FusedNet::new(vec![m.clone()], vec![1.0], 3, 4).unwrap();
        let direct = super::super::conv::module_forward(&Matrix::new(3, 4, x.clone()).unwrap(), &m).unwrap();
        assert_eq!(net.fused_forward(&x).unwrap(), direct);
    }

    #[test]
    fn fusion_of_constant_modules() {
        let net = FusedNet::new(vec![constant(2.0, 2), constant(3.0, 3)], vec![0.5, 0.5], 4, 4).unwrap();
        assert_eq!(net.fused_forward(&[0.7; 16]).unwrap(), 2.5);
        let zero = net.with_alpha(vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.fused_forward(&[0.7; 16]).unwrap(), 0.0);
    }

    #[test]
    fn doubling_alpha_doubles_output() {
        let a = ConvModule::new(2, vec![0.3, -0.7, 0.2, 0.9], 0.05, 0.8, 0.1).unwrap();
        let b = ConvModule::new(3, (0..9).map(|v| (v as f64 * 0.37).cos()).collect(), -0.1, -1.1, 0.3).unwrap();
        let net = FusedNet::new(vec![a, b], vec![0.4, -0.6], 5, 4).unwrap();
        let doubled = net.with_alpha(vec![0.8, -1.2]).unwrap();
        for s in 0..10 {
            let x: Vec<f64> = (0..20).map(|v| ((v * 7 + s) as f64).sin()).collect();
            assert_eq!(doubled.forward(&x), 2.0 * net.forward(&x));
        }
    }

    #[test]
    fn contract_mismatch() {
        let net = FusedNet::new(vec![constant(1.0, 2)], vec![1.0], 3, 3).unwrap();
        assert!(matches!(net.fused_forward(&[0.0; 8]), Err(Error::Size(_))));
        assert!(FusedNet::new(vec![constant(1.0, 4)], vec![1.0], 3, 3).is_err());
        assert!(FusedNet::new(vec![], vec![], 3, 3).is_err());
    }

    #[test]
    fn parameter_round_trip_respects_mask() {
        let mut m = ConvModule::new(2, vec![0.5, 0.0, 0.2, 0.1], 0.0, 1.0, 0.0).unwrap();
        m.mask[1] = false;
        let mut net = FusedNet::new(vec![m], vec![1.0], 3, 3).unwrap();
        let mut p = net.parameters();
        assert_eq!(p.len(), net.parameter_count());
        assert!(!net.trainable()[1]);
        p[1] = 9.0;
        net.set_parameters(&p).unwrap();
        assert_eq!(net.modules()[0].kernel[1], 0.0);
    }
}
