//! Multi-scale convolutional predictor with learned fusion, magnitude
//! pruning and a sparse inference path.

mod artifact;
mod conv;
mod grad;
mod model;
mod prune;
mod train;

pub use artifact::{load_model, model_from_str, model_to_string, save_model, ARTIFACT_TAG};
pub use conv::{conv_forward, module_forward, ConvModule};
pub use grad::{loss_and_gradients, mse_loss, penalized_loss, small_weight_count, Sample};
pub use model::{FusedModel, FusedNet, Normalizer};
pub use prune::{model_stats, prune_model, ModelStats, PruneReport};
pub use train::{train, train_with_history, EpochRecord, ReselectConfig, TrainConfig, TrainHistory};
