//! Metrics, autocorrelation, latency benchmarks and parameter sweeps.

mod bench;
mod metrics;
mod sweep;

pub use bench::{
    execution_bench, latency_bench, nearest_rank, BenchKind, LatencyReport, REFERENCE_EXECUTION_MS,
    REFERENCE_LATENCY_MS,
};
pub use metrics::{acf, r2_score, rmse, AcfReport, MetricsReport};
pub use sweep::{sweep_experiment, SweepAxis, SweepRow, SweepTable};
