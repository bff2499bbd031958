//! Minimal dense-tensor engine: convolution and affine kernels, a reverse-mode
//! tape, and the ADADELTA optimizer. Everything is `f32`, single-threaded and
//! deterministic: identical inputs give bitwise-identical outputs.

pub mod adadelta;
mod error;
pub mod kernels;
#[cfg(any(test, feature = "reference"))]
pub mod reference;
pub mod tape;
mod tensor;

pub use adadelta::{AdadeltaConfig, AdadeltaState};
pub use error::{Result, TensorError};
pub use kernels::{ChannelStats, ConvGeometry};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
