//! Dense-tensor neural networks with hand-written backward passes.

pub mod layer;
pub mod lstm;
pub mod network;
pub mod ops;
pub mod optim;
pub mod tensor;
pub mod train;

pub use layer::{infer_shapes, Layer, LayerSpec};
pub use lstm::{lstm_backward, lstm_sequence, lstm_step, LstmParams, LstmState};
pub use network::{Gradients, Network};
pub use ops::{Activation, Mode};
pub use optim::{adam_step, OptimizerState};
pub use tensor::Tensor;
pub use train::{evaluate_network, fit, EpochRecord, History, TrainConfig};
