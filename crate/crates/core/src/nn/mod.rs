//! Dense neural networks with manual backpropagation, batch normalization,
//! L2 weight decay and the Adam optimizer.

mod activation;
mod adam;
pub mod checkpoint;
mod layer;
mod matrix;
mod network;

pub use activation::Activation;
pub use adam::Adam;
pub use layer::{uniform_matrix, xavier_uniform, BatchNorm, DenseLayer};
pub use matrix::Matrix;
pub use network::{
    DenseNetwork, ForwardCache, Gradients, HiddenSpec, LayerGradients, Mode, NetworkSpec,
    OutputInit,
};
