//! Dense float64 tensors with tape-based reverse-mode differentiation,
//! optimizers and parameter checkpoints.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{Checkpoint, EncodedTensor, CHECKPOINT_VERSION};
pub use gradcheck::{gradcheck, gradcheck_params, GradCheck};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{glorot_init, glorot_with, Param, ParamId, ParamStore};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;
