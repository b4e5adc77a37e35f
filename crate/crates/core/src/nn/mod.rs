//! Fully-connected ReLU networks with hand-written reverse-mode gradients,
//! including the vector-Jacobian product through the input gradient that the
//! gradient inversion attack differentiates.

mod backprop;
mod checkpoint;
mod model;
mod optim;

pub use backprop::{
    backward, backward_from_upstream, grad_of_input_grad, GradientBundle, SecondOrderGrads,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use model::{Dense, ForwardCache, MlpModel, ParamGrads};
pub use optim::{sgd_step, AdamState, Optimizer, OptimizerConfig, OptimizerKind};

#[cfg(test)]
pub(crate) mod testutil;
