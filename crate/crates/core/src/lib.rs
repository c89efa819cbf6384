//! Low-latency market prediction: dynamic feature selection (k-means
//! clustering, inverse-variance weighting, KDE mutual information) feeding a
//! pruned multi-scale convolutional predictor, plus metrics and latency
//! benchmarks.

pub mod clustering;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod feature_weights;
mod kv;
pub mod litenet;
pub mod market_data;
pub mod matrix;
pub mod mutual_info;
pub mod pipeline;

pub use clustering::{fit_kmeans, kmeans_objective, ClusterModel, KMeansParams, Standardizer};
pub use config::{load_config, load_config_file, DataSource, PipelineConfig};
pub use error::{Error, Result};
pub use evaluation::{acf, r2_score, rmse, AcfReport, LatencyReport, MetricsReport};
pub use feature_weights::{feature_weights, FeatureWeightVector};
pub use litenet::{FusedModel, FusedNet, TrainConfig};
pub use market_data::{Bar, BarSeries, FeatureMatrix, FeatureSpec, SynthConfig, WindowSet};
pub use matrix::Matrix;
pub use mutual_info::{SelectionParams, SelectionReport};
pub use pipeline::{run_pipeline, PipelineRun};
