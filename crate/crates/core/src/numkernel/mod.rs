//! Dense `f64` tensors and a reverse-mode tape covering every operation the
//! predictor, refiner and loss need.

mod ops;
mod tape;
mod tensor;

pub use ops::{dilated_conv1d, gru_cell, matmul, offset_bounds, softmax_rows, GruWeights};
pub use tape::{Gradients, Pick, Tape, Var};
pub use tensor::Tensor;

