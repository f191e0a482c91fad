//! Minimal reverse-mode tensor engine: exactly the ops the autoencoder
//! needs, each with a hand-written backward kernel.

mod graph;
pub mod gradcheck;
pub(crate) mod ops;
mod params;
pub(crate) mod scalar;
#[allow(clippy::module_inception)]
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use ops::conv::{conv1d_out_len, conv_transpose1d_out_len};
pub use params::{Init, Parameter, ParameterSet};
pub use scalar::Scalar;
pub use tensor::Tensor;
