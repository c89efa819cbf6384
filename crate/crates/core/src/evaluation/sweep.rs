use std::fmt::Write as _;

use super::bench::latency_bench;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::market_data::FeatureMatrix;
use crate::pipeline::run_pipeline;

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Window(Vec<usize>),
    Threshold(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Window(_) => "window",
            SweepAxis::Threshold(_) => "mi_threshold",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::Window(v) => v.len(),
            SweepAxis::Threshold(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub rmse: f64,
    pub r2: f64,
    pub latency_mean_ns: f64,
    pub selected: Vec<String>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>12} {:>14} {:>10} {:>14}  selected\n", self.axis, "rmse", "r2", "latency_ns");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>12} {:>14.6e} {:>10.6} {:>14.1}  {}{}",
                r.value,
                r.rmse,
                r.r2,
                r.latency_mean_ns,
                r.selected.join(","),
                if r.fallback { " (fallback)" } else { "" }
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},rmse,r2,latency_mean_ns,selected,fallback\n", self.axis);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.value,
                r.rmse,
                r.r2,
                r.latency_mean_ns,
                r.selected.join(";"),
                r.fallback
            );
        }
        out
    }
}

/// Runs the full pipeline once per axis value, in the order given.
pub fn sweep_experiment(fm: &FeatureMatrix, axis: &SweepAxis, cfg: &PipelineConfig) -> Result<SweepTable> {
    if axis.len() == 0 {
        return Err(Error::size("sweep axis is empty"));
    }
    let mut rows = Vec::with_capacity(axis.len());
    for i in 0..axis.len() {
        let mut c = cfg.clone();
        let value = match axis {
            SweepAxis::Window(v) => {
                c.features.window = v[i];
                v[i] as f64
            }
            SweepAxis::Threshold(v) => {
                c.selection.mi_threshold = v[i];
                v[i]
            }
        };
        let run = run_pipeline(fm, &c)?;
        let latency = latency_bench(&run.model, &run.test_windows, c.bench.reps, c.bench.warmup)?;
        rows.push(SweepRow {
            value,
            rmse: run.metrics.rmse,
            r2: run.metrics.r2,
            latency_mean_ns: latency.mean_ns,
            selected: run.model.selection.selected_names().iter().map(|s| s.to_string()).collect(),
            fallback: run.model.selection.fallback,
        });
    }
    Ok(SweepTable { axis: axis.name(), rows })
}
