//! Dense matrices, the reverse-mode tape, and optimizers.

pub mod gradcheck;
mod matrix;
pub mod optim;
mod tape;

pub use matrix::Matrix;
pub use optim::{adam_step, sgd_step, AdamConfig, AdamState, Optimizer, OptimizerConfig};
pub use tape::{sigmoid, softplus, Gradients, Tape, Var};
