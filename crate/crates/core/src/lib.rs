//! Trace-norm regularized tensor regression and classification.
//!
//! The model is the affine score `f(X) = <W, X> + b` on order-N tensors, fit by
//! minimizing the squared loss plus `lambda` times the tensor trace norm of
//! `W`. Batch training uses accelerated proximal gradient with an explicit
//! Lipschitz step; each proximal step is solved by Douglas-Rachford
//! splitting or ADMM. The online trainer keeps sufficient statistics so the
//! full-history gradient is available after every sample.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apg;
pub mod data;
pub mod datagen;
pub mod error;
pub mod inner;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod online;
pub mod prox;
pub mod tensor;

pub use apg::{fit_batch, ApgConfig, ClassifierModel};
pub use data::{LabeledDataset, Sample};
pub use error::{Error, Result};
pub use inner::{InnerConfig, InnerSolver};
pub use online::{fit_online, SufficientStats};
pub use tensor::DenseTensor;
