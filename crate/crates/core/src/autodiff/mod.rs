//! Layer-wise reverse-mode differentiation with approximate linear layers.
//!
//! Forward passes are always exact. A linear layer in a sampled mode keeps
//! only `k = ⌈budget · rows⌉` rescaled rows of its input and uses them for the
//! weight gradient `∇W = H'ᵀ ∇Z'`; the input gradient `∇H = ∇Z Wᵀ` is never
//! approximated, so sampling noise does not propagate between layers.

mod activation;
mod attention;
mod cache;
mod linear;
mod network;

pub use activation::{gelu_backward, gelu_forward, relu_backward, relu_forward};
pub use attention::AttentionBlock;
pub use cache::GradNormCache;
pub use linear::{subsample, subsample_with, LinearConfig, LinearLayer, SampledActivation, SamplingMode};
pub use network::{Layer, LossKind, Network, Targets};
