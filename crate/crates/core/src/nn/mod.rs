//! Hand-rolled neural building blocks.
//!
//! Every trainable weight of a model lives in one flat `Vec<f64>` addressed
//! through a named-tensor [`Layout`]. That single decision buys: elementwise
//! Adam and global-norm clipping over one slice, finite-difference gradient
//! checks that walk tensors by name, per-tensor gradient diagnostics, and a
//! self-describing checkpoint format.

mod lstm;
mod optim;
mod params;

pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads};
pub use optim::{clip_global_norm, Adam};
pub use params::{GradWriter, Layout, LayoutBuilder, ParamVec, SentGrad, TensorSpec, EMBED};
