//! Mini-batch Adam training with scheduled magnitude pruning and optional
//! per-epoch feature re-selection.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market_data::{FeatureSpec, WindowSet};
use crate::mutual_info::{dynamic_reselect, SelectionParams, SelectionReport};

use super::conv::ConvModule;
use super::grad::{loss_and_gradients, small_weight_count, Sample};
use super::model::{FusedModel, FusedNet, Normalizer};
use super::prune::{model_stats, prune_model, ModelStats, PruneReport};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Epochs between learning-rate halvings.
    pub lr_halving_period: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Pruning threshold.
    pub epsilon: f64,
    /// Weight of the small-weight count in the reported penalized loss.
    pub lambda: f64,
    /// Epochs at whose start the network is pruned.
    pub prune_epochs: Vec<usize>,
    /// One conv module per entry.
    pub kernel_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            lr0: 0.001,
            lr_halving_period: 10,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epsilon: 0.01,
            lambda: 0.1,
            prune_epochs: vec![10, 20],
            kernel_sizes: vec![3, 5],
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        let positive = [("lr0", self.lr0), ("adam_eps", self.adam_eps)];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        if self.lr_halving_period < 1 {
            return Err(Error::config("lr_halving_period", "must be >= 1"));
        }
        for (key, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, "must lie in (0, 1)"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("lambda", "must be finite and >= 0"));
        }
        if self.kernel_sizes.is_empty() || self.kernel_sizes.contains(&0) {
            return Err(Error::config("kernels", "need at least one kernel size, each >= 1"));
        }
        Ok(())
    }

    /// `lr0 * 0.5^floor(epoch / lr_halving_period)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let halvings = (epoch / self.lr_halving_period).min(i32::MAX as usize) as i32;
        self.lr0 * 0.5f64.powi(halvings)
    }

    pub fn max_kernel(&self) -> usize {
        self.kernel_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Re-selection settings: the selection is re-run at every epoch boundary on
/// the trailing `recent_rows` training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReselectConfig {
    pub params: SelectionParams,
    pub recent_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean mini-batch MSE over the epoch, normalized target units.
    pub loss: f64,
    /// `loss` plus `lambda` times the small retained weights after the epoch.
    pub penalized_loss: f64,
    pub stats: ModelStats,
    pub inputs: Vec<usize>,
    /// Kernel masks after the epoch, modules concatenated.
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// `(epoch, report)` for every scheduled prune that ran.
    pub prunes: Vec<(usize, PruneReport)>,
    /// Every selection in force during training, starting with the initial one.
    pub selections: Vec<SelectionReport>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, cfg: &TrainConfig, lr: f64, params: &mut [f64], grad: &[f64], trainable: &[bool]) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            if !trainable[i] {
                self.m[i] = 0.0;
                self.v[i] = 0.0;
                continue;
            }
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

fn init_net(cfg: &TrainConfig, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<FusedNet> {
    let modules = cfg
        .kernel_sizes
        .iter()
        .map(|&f| {
            let bound = 1.0 / f as f64;
            let kernel = (0..f * f).map(|_| rng.random_range(-bound..bound)).collect();
            let head_w = rng.random_range(-1.0..1.0);
            ConvModule::new(f, kernel, 0.0, head_w, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let l = modules.len();
    FusedNet::new(modules, vec![1.0 / l as f64; l], rows, cols)
}

/// Normalized inputs for every training row, restricted to `inputs`.
fn gather_rows(dataset: &WindowSet, normalizer: &Normalizer, inputs: &[usize]) -> Vec<f64> {
    let x = dataset.features().values();
    let mut out = Vec::with_capacity(x.rows() * inputs.len());
    for r in 0..x.rows() {
        let row = x.row(r);
        out.extend(inputs.iter().map(|&c| (row[c] - normalizer.feature_mean[c]) / normalizer.feature_std[c]));
    }
    out
}

pub fn train(
    dataset: &WindowSet,
    features: &FeatureSpec,
    cfg: &TrainConfig,
    selection: &SelectionReport,
) -> Result<FusedModel> {
    Ok(train_with_history(dataset, features, cfg, selection, None)?.0)
}

/// Trains a fused network on `dataset`, whose windows span every candidate
/// feature.
///
/// The network reads `max(selected, largest kernel)` columns chosen by
/// [`SelectionReport::model_inputs`]. With `reselect`, the selection is
/// re-run before every epoch after the first and the input columns follow
/// it.
pub fn train_with_history(
    dataset: &WindowSet,
    features: &FeatureSpec,
    cfg: &TrainConfig,
    selection: &SelectionReport,
    reselect: Option<&ReselectConfig>,
) -> Result<(FusedModel, TrainHistory)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::size("empty dataset"));
    }
    if selection.names.as_slice() != dataset.features().names() {
        return Err(Error::size("selection and dataset describe different features"));
    }
    if features.window != dataset.window_size() {
        return Err(Error::size(format!(
            "feature spec window {} does not match dataset window {}",
            features.window,
            dataset.window_size()
        )));
    }
    let rows = dataset.window_size();
    let width = selection.selected.len().max(cfg.max_kernel());
    if cfg.max_kernel() > rows {
        return Err(Error::size(format!("kernel size {} exceeds window {rows}", cfg.max_kernel())));
    }

    let normalizer = Normalizer::fit(dataset.features());
    let targets: Vec<f64> =
        dataset.targets().iter().map(|y| (y - normalizer.target_mean) / normalizer.target_std).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_net(cfg, rows, width, &mut rng)?;
    let mut current = selection.clone();
    let mut inputs = current.model_inputs(width)?;
    let mut history = TrainHistory { selections: vec![current.clone()], ..Default::default() };
    let mut data = gather_rows(dataset, &normalizer, &inputs);

    let mut adam = Adam::new(net.parameter_count());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut params = net.parameters();
    let mut trainable = net.trainable();

    for epoch in 0..cfg.epochs {
        if let (Some(rs), true) = (reselect, epoch > 0) {
            let n = dataset.features().n_rows();
            let start = n - rs.recent_rows.min(n);
            let recent = dataset.features().slice_rows(start, n);
            current = dynamic_reselect(&current, &recent, &rs.params)?;
            let next = current.model_inputs(width)?;
            if next != inputs {
                inputs = next;
                data = gather_rows(dataset, &normalizer, &inputs);
            }
            history.selections.push(current.clone());
        }

        if cfg.prune_epochs.contains(&epoch) {
            let (pruned, report) = prune_model(&net, cfg.epsilon)?;
            net = pruned;
            params = net.parameters();
            trainable = net.trainable();
            history.prunes.push((epoch, report));
        }

        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(
                chunk.iter().map(|&i| Sample { input: &data[i * width..(i + rows) * width], target: targets[i] }),
            );
            let (loss, grad) = loss_and_gradients(&net, &batch)?;
            loss_sum += loss * chunk.len() as f64;
            adam.step(cfg, lr, &mut params, &grad, &trainable);
            net.set_parameters(&params)?;
        }
        let loss = loss_sum / order.len() as f64;
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            loss,
            penalized_loss: loss + cfg.lambda * small_weight_count(&net, cfg.epsilon) as f64,
            stats: model_stats(&net),
            inputs: inputs.clone(),
            mask: net.modules().iter().flat_map(|m| m.mask.iter().copied()).collect(),
        });
    }

    let model = FusedModel {
        net,
        inputs,
        normalizer,
        selection: current,
        features: features.clone(),
        train_config: cfg.clone(),
    };
    Ok((model, history))
}
