//! Dense `f64` tensors with a recording graph for reverse-mode
//! differentiation, a finite-difference gradient checker and a binary
//! snapshot format for parameter checkpoints.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod params;
pub mod snapshot;
pub mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{check_gradients, relative_error, GradCheckConfig, GradCheckReport};
pub use graph::{sigmoid, Gradients, Graph, Reduction, Var};
pub use params::{Bound, ParamId, ParamStore};
pub use snapshot::{read_snapshot, write_snapshot};
pub use tensor::Tensor;
