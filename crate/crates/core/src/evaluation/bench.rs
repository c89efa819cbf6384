use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::litenet::{model_stats, FusedModel};
use crate::market_data::{BarSeries, FeatureKind, WindowSet};

/// Published figures kept for comparison in reports only.
pub const REFERENCE_EXECUTION_MS: f64 = 35.0;
pub const REFERENCE_LATENCY_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKind {
    /// Network forward pass on a prepared input.
    Latency,
    /// Feature extraction from bars for one window, normalization and forward
    /// pass.
    Execution,
}

impl BenchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BenchKind::Latency => "latency",
            BenchKind::Execution => "execution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub kind: BenchKind,
    /// Wall time of every timed inference, warmup excluded.
    pub samples_ns: Vec<u64>,
    pub reps: usize,
    pub warmup: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p95_ns: u64,
    pub p99_ns: u64,
    pub sparsity: f64,
    /// Hash of every timed prediction, in order.
    pub checksum: u64,
    pub reference_execution_ms: f64,
    pub reference_latency_ms: f64,
}

/// Nearest-rank percentile of ascending `sorted`.
pub fn nearest_rank(sorted: &[u64], pct: f64) -> u64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn fold_checksum(h: u64, y: f64) -> u64 {
    (h ^ y.to_bits()).wrapping_mul(0x0000_0100_0000_01B3)
}

const CHECKSUM_SEED: u64 = 0xcbf2_9ce4_8422_2325;

impl LatencyReport {
    fn from_samples(kind: BenchKind, samples_ns: Vec<u64>, warmup: usize, sparsity: f64, checksum: u64) -> Self {
        let mut sorted = samples_ns.clone();
        sorted.sort_unstable();
        let mean_ns = samples_ns.iter().map(|&s| s as f64).sum::<f64>() / samples_ns.len() as f64;
        Self {
            kind,
            reps: samples_ns.len(),
            warmup,
            mean_ns,
            p50_ns: nearest_rank(&sorted, 50.0),
            p95_ns: nearest_rank(&sorted, 95.0),
            p99_ns: nearest_rank(&sorted, 99.0),
            samples_ns,
            sparsity,
            checksum,
            reference_execution_ms: REFERENCE_EXECUTION_MS,
            reference_latency_ms: REFERENCE_LATENCY_MS,
        }
    }

    pub fn mean_ms(&self) -> f64 {
        self.mean_ns / 1e6
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} bench: reps={} warmup={} sparsity={:.4} checksum={:016x}",
            self.kind.name(),
            self.reps,
            self.warmup,
            self.sparsity,
            self.checksum
        );
        let _ = writeln!(
            out,
            "# reference (not comparable hardware): execution {} ms, latency {} ms",
            self.reference_execution_ms, self.reference_latency_ms
        );
        let _ = writeln!(out, "{:>12} {:>10} {:>10} {:>10} {:>12}", "mean_ns", "p50_ns", "p95_ns", "p99_ns", "mean_ms");
        let _ = writeln!(
            out,
            "{:>12.1} {:>10} {:>10} {:>10} {:>12.6}",
            self.mean_ns,
            self.p50_ns,
            self.p95_ns,
            self.p99_ns,
            self.mean_ms()
        );
        out
    }

    /// Structured text: a summary section plus one sample per line.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[latency]");
        let _ = writeln!(out, "kind = {}", self.kind.name());
        let _ = writeln!(out, "reps = {}", self.reps);
        let _ = writeln!(out, "warmup = {}", self.warmup);
        let _ = writeln!(out, "mean_ns = {}", self.mean_ns);
        let _ = writeln!(out, "p50_ns = {}", self.p50_ns);
        let _ = writeln!(out, "p95_ns = {}", self.p95_ns);
        let _ = writeln!(out, "p99_ns = {}", self.p99_ns);
        let _ = writeln!(out, "sparsity = {}", self.sparsity);
        let _ = writeln!(out, "checksum = {:016x}", self.checksum);
        let _ = writeln!(out, "reference_execution_ms = {}", self.reference_execution_ms);
        let _ = writeln!(out, "reference_latency_ms = {}", self.reference_latency_ms);
        let _ = writeln!(out, "\n[samples_ns]");
        for s in &self.samples_ns {
            let _ = writeln!(out, "{s}");
        }
        out
    }
}

fn run_timed(reps: usize, warmup: usize, mut step: impl FnMut(usize) -> f64) -> (Vec<u64>, u64) {
    for i in 0..warmup {
        black_box(step(i));
    }
    let mut samples = Vec::with_capacity(reps);
    let mut checksum = CHECKSUM_SEED;
    for i in 0..reps {
        let start = Instant::now();
        let y = black_box(step(black_box(i)));
        samples.push(start.elapsed().as_nanos() as u64);
        checksum = fold_checksum(checksum, y);
    }
    (samples, checksum)
}

/// Times the network forward pass, cycling through `windows`.
pub fn latency_bench(model: &FusedModel, windows: &WindowSet, reps: usize, warmup: usize) -> Result<LatencyReport> {
    if reps == 0 {
        return Err(Error::size("reps must be >= 1"));
    }
    if windows.is_empty() {
        return Err(Error::size("no windows to benchmark"));
    }
    let inputs = model.prepare_inputs(windows)?;
    let net = &model.net;
    let (samples, checksum) = run_timed(reps, warmup, |i| net.forward(&inputs[i % inputs.len()]));
    Ok(LatencyReport::from_samples(BenchKind::Latency, samples, warmup, model_stats(net).sparsity, checksum))
}

/// Times the full per-input step: compute the model's input features for a
/// window straight from `bars`, normalize and predict. Cycles through every
/// bar that has a full lookback.
pub fn execution_bench(model: &FusedModel, bars: &BarSeries, reps: usize, warmup: usize) -> Result<LatencyReport> {
    if reps == 0 {
        return Err(Error::size("reps must be >= 1"));
    }
    let extractor = model.features.extractor()?;
    let kinds: Vec<FeatureKind> = model
        .inputs
        .iter()
        .map(|&c| {
            let name = &model.selection.names[c];
            FeatureKind::from_name(name).ok_or_else(|| Error::data(format!("`{name}` is not a bar feature")))
        })
        .collect::<Result<_>>()?;
    let mean: Vec<f64> = model.inputs.iter().map(|&c| model.normalizer.feature_mean[c]).collect();
    let std: Vec<f64> = model.inputs.iter().map(|&c| model.normalizer.feature_std[c]).collect();
    let window = model.window();
    let first_end = extractor.first_valid_bar() + window - 1;
    let b = bars.bars();
    if b.len() <= first_end {
        return Err(Error::size(format!("need more than {first_end} bars")));
    }
    let ends = b.len() - first_end;
    let mut buf = Vec::with_capacity(window * kinds.len());
    let mut failed = false;
    let (samples, checksum) = run_timed(reps, warmup, |i| {
        if extractor.extract_window(b, first_end + i % ends, window, &kinds, &mut buf).is_err() {
            failed = true;
            return f64::NAN;
        }
        for row in buf.chunks_exact_mut(kinds.len()) {
            for ((v, m), s) in row.iter_mut().zip(&mean).zip(&std) {
                *v = (*v - m) / s;
            }
        }
        model.normalizer.denormalize_target(model.net.forward(&buf))
    });
    if failed {
        return Err(Error::size("window extraction failed"));
    }
    Ok(LatencyReport::from_samples(BenchKind::Execution, samples, warmup, model_stats(&model.net).sparsity, checksum))
}
