//! Gaussian-process regression with exact inference.

mod kernel;
mod model;

pub use kernel::{
    angular, gram, gram_symmetric, matern32, periodic, poly_decay, squared_exponential, wendland,
    Input, InputKind, KernelSpec, WENDLAND_TAU,
};
pub use model::{
    log_marginal_likelihood, sample_prior, GpModel, ModelDocument, Prediction, TrainingSet,
    MODEL_SCHEMA_VERSION,
};
