//! Gate-and-rank feature selection.
//!
//! Every feature's MI with the target is estimated; features below the MI
//! threshold are dropped, survivors are ranked by their inverse-variance
//! weight (ties to the lower index) and the first `top_m` are kept. When no
//! feature passes the gate the single highest-MI feature is returned and the
//! report is flagged as a fallback.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{kde_joint_grid, mutual_information, DEFAULT_GRID};
use crate::clustering::{fit_kmeans, KMeansParams, Standardizer};
use crate::error::{Error, Result};
use crate::feature_weights::{feature_weights, FeatureWeightVector};
use crate::market_data::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionParams {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// k-means restarts.
    pub n_init: usize,
    pub mi_threshold: f64,
    pub top_m: usize,
    pub grid_size: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            k: 10,
            max_iter: 100,
            tol: 1e-6,
            seed: 0,
            n_init: 10,
            mi_threshold: 0.05,
            top_m: 5,
            grid_size: DEFAULT_GRID,
        }
    }
}

impl SelectionParams {
    fn kmeans(&self) -> KMeansParams {
        KMeansParams { k: self.k, max_iter: self.max_iter, tol: self.tol, seed: self.seed, n_init: self.n_init }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Training cycle (epoch) that produced this report.
    pub cycle: u64,
    pub names: Vec<String>,
    /// Per-feature MI with the target, nats.
    pub mi: Vec<f64>,
    pub weights: Vec<f64>,
    pub clamped: Vec<bool>,
    pub threshold: f64,
    pub top_m: usize,
    /// Position of each feature in the descending-weight order.
    pub weight_rank: Vec<usize>,
    /// Chosen features, by descending weight.
    pub selected: Vec<usize>,
    pub fallback: bool,
    /// Per-feature `(h_feature, h_target)` KDE bandwidths.
    pub bandwidths: Vec<(f64, f64)>,
    pub grid_size: usize,
}

fn by_weight(weights: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b))
}

fn by_mi(mi: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| mi[b].total_cmp(&mi[a]).then(a.cmp(&b))
}

impl SelectionReport {
    /// Indices passing the MI gate, before the `top_m` cut.
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.mi.len()).filter(|&i| self.mi[i] >= self.threshold).collect()
    }

    pub fn selected_names(&self) -> Vec<&str> {
        self.selected.iter().map(|&i| self.names[i].as_str()).collect()
    }

    /// Input columns for a model that needs exactly `width` features: the
    /// selection (truncated if longer), then the best remaining features by
    /// MI.
    pub fn model_inputs(&self, width: usize) -> Result<Vec<usize>> {
        if width > self.names.len() {
            return Err(Error::size(format!("model needs {width} input features but only {} exist", self.names.len())));
        }
        let mut cols: Vec<usize> = self.selected.iter().copied().take(width).collect();
        let mut rest: Vec<usize> = (0..self.names.len()).filter(|i| !cols.contains(i)).collect();
        rest.sort_by(by_mi(&self.mi));
        cols.extend(rest.into_iter().take(width - cols.len()));
        Ok(cols)
    }

    /// Line-oriented table: feature, weight, MI, selected flag.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# selection cycle={} threshold={} top_m={} fallback={} kernel=gaussian bandwidth=silverman grid={}",
            self.cycle, self.threshold, self.top_m, self.fallback, self.grid_size
        );
        let _ = writeln!(out, "{:<12} {:>14} {:>12} {:>8}", "feature", "weight", "mi", "selected");
        for i in 0..self.names.len() {
            let flag = if self.selected.contains(&i) { "yes" } else { "no" };
            let _ = writeln!(out, "{:<12} {:>14.6e} {:>12.6} {:>8}", self.names[i], self.weights[i], self.mi[i], flag);
        }
        out
    }
}

fn column_mi(x: &[f64], y: &[f64], grid: usize) -> Result<(f64, (f64, f64))> {
    match kde_joint_grid(x, y, grid) {
        Ok(g) => Ok((mutual_information(&g), (g.hx, g.hy))),
        // A constant feature carries no information about the target.
        Err(Error::Degenerate(_)) if x.iter().all(|&v| v == x[0]) => Ok((0.0, (0.0, 0.0))),
        Err(e) => Err(e),
    }
}

pub fn select_features(
    fm: &FeatureMatrix,
    weights: &FeatureWeightVector,
    mi_threshold: f64,
    top_m: usize,
    grid_size: usize,
) -> Result<SelectionReport> {
    let d = fm.n_features();
    if top_m < 1 {
        return Err(Error::size("top_m must be >= 1"));
    }
    if weights.weights.len() != d {
        return Err(Error::size("one weight per feature required"));
    }
    if !mi_threshold.is_finite() {
        return Err(Error::data("MI threshold must be finite"));
    }
    let y = fm.target();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::degenerate("target has zero variance; mutual information undefined"));
    }
    let columns: Vec<Vec<f64>> = (0..d).map(|c| fm.values().column(c)).collect();
    if let Some(c) = columns.iter().position(|col| col.iter().any(|v| !v.is_finite())) {
        return Err(Error::data(format!("feature `{}` has non-finite values", fm.names()[c])));
    }

    let per_feature: Vec<(f64, (f64, f64))> =
        columns.par_iter().map(|col| column_mi(col, y, grid_size)).collect::<Result<_>>()?;
    let mi: Vec<f64> = per_feature.iter().map(|p| p.0).collect();
    let bandwidths = per_feature.iter().map(|p| p.1).collect();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(by_weight(&weights.weights));
    let mut weight_rank = vec![0; d];
    for (rank, &i) in order.iter().enumerate() {
        weight_rank[i] = rank;
    }

    let mut selected: Vec<usize> = order.iter().copied().filter(|&i| mi[i] >= mi_threshold).take(top_m).collect();
    let fallback = selected.is_empty();
    if fallback {
        let best = (0..d).min_by(by_mi(&mi)).expect("at least one feature");
        selected.push(best);
    }

    Ok(SelectionReport {
        cycle: 0,
        names: fm.names().to_vec(),
        mi,
        weights: weights.weights.clone(),
        clamped: weights.clamped.clone(),
        threshold: mi_threshold,
        top_m,
        weight_rank,
        selected,
        fallback,
        bandwidths,
        grid_size,
    })
}

/// Standardize, cluster, weight and select on `fm`.
pub fn run_selection(fm: &FeatureMatrix, params: &SelectionParams, cycle: u64) -> Result<SelectionReport> {
    let z = Standardizer::fit(fm.values()).transform(fm.values());
    let model = fit_kmeans(&z, &params.kmeans())?;
    let weights = feature_weights(&z, &model)?;
    let mut report = select_features(fm, &weights, params.mi_threshold, params.top_m, params.grid_size)?;
    report.cycle = cycle;
    Ok(report)
}

/// Re-runs the whole selection on a recent slice, advancing the cycle id.
pub fn dynamic_reselect(
    prev: &SelectionReport,
    recent: &FeatureMatrix,
    params: &SelectionParams,
) -> Result<SelectionReport> {
    if recent.n_rows() == 0 {
        return Err(Error::size("recent slice is empty"));
    }
    if recent.names() != prev.names.as_slice() {
        return Err(Error::size("recent slice has a different feature universe"));
    }
    run_selection(recent, params, prev.cycle + 1)
}
