//! Mixed-variate restricted Boltzmann machines.
//!
//! A single layer of binary hidden units is shared by visible units of
//! different types (binary, Gaussian, categorical, constrained Poisson and
//! replicated softmax). Training uses contrastive divergence with optional
//! group sparsity on the hidden posteriors and a symmetric-KL metric
//! learning term driven by concept labels. Tiny models can be checked
//! against exact enumeration in [`oracle`].

pub mod analytics;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod io;
pub mod model;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod schema;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use inference::{predict_unseen, project, reconstruct, LatentProfile, Normalization, PredictionRanking};
pub use model::{energy, hidden_conditional, visible_conditional, UnitDist};
pub use oracle::{exact_gradient, exact_log_likelihood, exact_log_partition, hybrid_objectives, Oracle};
pub use params::{Gradient, ModelParams};
pub use schema::{MixedRecord, Unit, UnitType, Value, VisibleSchema, VisibleVector};
pub use training::{fit, TrainConfig, TrainLog};
