//! Magnitude pruning: retained weights satisfy `|w| > epsilon`; the rest are
//! zeroed and masked for good.

use crate::error::{Error, Result};

use super::model::FusedNet;

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub epsilon: f64,
    pub newly_masked: usize,
    pub masked: usize,
    pub kernel_weights: usize,
    pub sparsity: f64,
    /// Kernels left untouched because pruning would have emptied them.
    pub degenerate_kernels: Vec<usize>,
}

impl PruneReport {
    pub fn ensure_nondegenerate(&self) -> Result<()> {
        if self.degenerate_kernels.is_empty() {
            Ok(())
        } else {
            Err(Error::degenerate(format!(
                "pruning at epsilon {} would empty kernel(s) {:?}; skipped",
                self.epsilon, self.degenerate_kernels
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    pub total_params: usize,
    pub unmasked_params: usize,
    pub kernel_weights: usize,
    pub masked_weights: usize,
    /// Masked kernel weights over all kernel weights.
    pub sparsity: f64,
    /// Kernel multiply-accumulates per inference, retained taps only.
    pub macs: usize,
}

pub fn prune_model(net: &FusedNet, epsilon: f64) -> Result<(FusedNet, PruneReport)> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::data("epsilon must be >= 0"));
    }
    let mut out = net.clone();
    let mut newly_masked = 0;
    let mut degenerate_kernels = Vec::new();
    for (i, m) in out.modules_mut().iter_mut().enumerate() {
        let survivors = m.kernel.iter().zip(&m.mask).filter(|(w, keep)| **keep && w.abs() > epsilon).count();
        if survivors == 0 {
            degenerate_kernels.push(i);
            continue;
        }
        for (w, keep) in m.kernel.iter_mut().zip(m.mask.iter_mut()) {
            if *keep && w.abs() <= epsilon {
                *keep = false;
                *w = 0.0;
                newly_masked += 1;
            }
        }
    }
    out.recompile()?;
    let stats = model_stats(&out);
    Ok((
        out,
        PruneReport {
            epsilon,
            newly_masked,
            masked: stats.masked_weights,
            kernel_weights: stats.kernel_weights,
            sparsity: stats.sparsity,
            degenerate_kernels,
        },
    ))
}

pub fn model_stats(net: &FusedNet) -> ModelStats {
    let mut kernel_weights = 0;
    let mut masked_weights = 0;
    let mut macs = 0;
    for m in net.modules() {
        let unmasked = m.unmasked();
        kernel_weights += m.kernel.len();
        masked_weights += m.kernel.len() - unmasked;
        macs += (net.rows() + 1 - m.size) * (net.cols() + 1 - m.size) * unmasked;
    }
    let total_params = net.parameter_count();
    ModelStats {
        total_params,
        unmasked_params: total_params - masked_weights,
        kernel_weights,
        masked_weights,
        sparsity: masked_weights as f64 / kernel_weights as f64,
        macs,
    }
}
