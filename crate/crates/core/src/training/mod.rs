//! Gradient estimators, regularizers and the training loop.

pub mod cd;
pub mod config;
pub mod fit;
pub mod metric;
pub mod sparsity;

pub use cd::{cd_gradient, cd_record_gradients, CdOptions, PersistentChains};
pub use config::TrainConfig;
pub use fit::{concept_distances, fit, mean_exact_log_likelihood, mean_group_norm, EpochStats, TrainLog};
pub use metric::{metric_gradient, metric_objective, neighbourhood_distances, symmetric_kl, PROB_EPS};
pub use sparsity::{group_norms, sparsity_gradient, sparsity_penalty, MIN_GROUP_NORM};
