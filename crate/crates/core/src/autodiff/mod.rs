//! Reverse-mode differentiation over dense matrices, with the Adam
//! optimizer and the training losses.

mod adam;
mod loss;
mod tape;
mod tensor;

pub use adam::{clip_global_norm, Adam};
pub use loss::{compute_loss, loss_value, LossKind};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
