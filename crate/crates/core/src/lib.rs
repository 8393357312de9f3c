//! Task adaptation network training core.
//!
//! Joint adaptation of feature distributions (a domain discriminator behind a
//! gradient reversal) and of task semantics (an MLP scoring the cross-domain
//! Gram matrix of features, trained by feature-critic updates on
//! high-confidence pivot samples).
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the experiment
//! runner and the command line live in the companion `tan` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod networks;
pub mod objectives;
pub mod pivot;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use autodiff::{Gradients, Graph, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
