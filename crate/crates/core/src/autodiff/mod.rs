//! Reverse-mode differentiation engine, layers, optimiser and checkpoints.

pub mod check;
mod checkpoint;
mod conv;
mod graph;
mod nn;
mod ops;
mod optim;
mod params;
mod scalar;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use conv::{conv1d_out_len, same_padding};
pub use graph::{Graph, NodeId};
pub use nn::{Layer, LayerSpec, Mode, Module, Network};
pub use ops::softmax_rows;
pub use optim::{adam_step, maxnorm_project, Adam, AdamConfig};
pub use params::{Param, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;
