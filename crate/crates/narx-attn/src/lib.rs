//! Dual-stage attention recurrent networks for NARX-style time-series
//! forecasting.
//!
//! The crate implements, from scratch, everything needed to train and probe an
//! attention-equipped encoder-decoder forecaster over multivariate driving
//! series:
//!
//! - [`tensor`]: dense vector/matrix arithmetic over any [`Scalar`] type
//! - [`tape`]: a reverse-mode differentiation tape over vector-level primitives
//! - [`store`]: named parameter storage with gradient slots and a text format
//! - [`gradcheck`]: central finite-difference verification of gradients
//! - [`cells`]: the LSTM unit shared by encoder and decoder
//! - [`encoder`] / [`decoder`]: the input- and temporal-attention stages
//! - [`models`]: the five model variants of the ablation ladder
//! - [`train`]: Adam, the learning-rate schedule, and the training loop
//! - [`data`]: CSV ingestion, splits, standardization, windowing, synthesis
//! - [`metrics`]: RMSE / MAE / MAPE
//!
//! All numeric code is generic over the scalar type via `num-traits`; the
//! aliases below fix `f64`, which is what the CLI and the test suites use.

pub mod cells;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod store;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` vector, the default working precision.
pub type Vector64 = tensor::Vector<f64>;
/// `f64` matrix.
pub type Matrix64 = tensor::Matrix<f64>;
/// `f64` differentiation tape.
pub type Tape64 = tape::Tape<f64>;
/// `f64` parameter store.
pub type Store64 = store::ParameterStore<f64>;
/// `f64` model.
// pub type Model64 = models::Model<f64>;
/// `f64` training configuration.
// pub type TrainConfig64 = train::TrainConfig<f64>;
