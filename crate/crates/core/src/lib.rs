//! Visitor-flow forecasting toolkit: recurrent models trained by
//! backpropagation through time, an ARIMA baseline with automatic order
//! selection, the hourly preprocessing pipeline, and the benchmark harness
//! that compares them.
//!
//! The numeric core (tape, solvers, cells, ARIMA) is generic over
//! [`Scalar`]; the aliases below fix it to `f64`, which is what the data
//! pipeline and harness use.

pub mod arima;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod harness;
pub mod ode;
pub mod rnn;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type Adam = autodiff::Adam<f64>;
pub type Model = rnn::Model<f64>;
pub type SequenceBatch = rnn::SequenceBatch<f64>;

pub type TensorF32 = autodiff::Tensor<f32>;
pub type TapeF32 = autodiff::Tape<f32>;
pub type ModelF32 = rnn::Model<f32>;

pub type ArimaModel = arima::ArimaModel<f64>;
