//! Network definition: activations, the bias-free MLP, backprop gradients,
//! and the binary checkpoint format.

mod activation;
mod checkpoint;
mod gradients;
mod mlp;

pub use activation::Activation;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradients::{param_gradients, ParamGradients};
pub use mlp::{softmax, ForwardTrace, Mlp, RegionCode, SoftmaxJacobian};
