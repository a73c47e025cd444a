//! Dense networks, gradients and optimisation.

pub mod adam;
pub mod checkpoint;
pub mod grad;
pub mod network;
pub mod tensor;

pub use adam::{AdamHyper, AdamState};
pub use grad::{
    backward_into, forward_cached, input_gradient, penalty_param_gradient, per_example_gradients,
    ForwardCache, Penalty, PerExample,
};
pub use network::{Activation, DenseLayer, Network, ParamKind, ParamTag};
pub use tensor::{l2_norm, Tensor};
