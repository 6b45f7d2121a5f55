//! Numeric core of a triplet-loss GAN for ×4 single-image super-resolution.
//!
//! Everything here is pure computation over in-memory tensors and builds
//! without `std` (an allocator is required). File formats, dataset layout
//! and the command line live in the companion `srtgan` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod discriminator;
mod error;
pub mod generator;
pub mod gradcheck;
pub mod imaging;
pub mod losses;
pub mod metrics;
mod nn;
pub mod optim;
pub mod ops;
pub mod params;
pub mod qa;
pub mod qa_train;
mod real;
pub mod synthetic;
pub mod tape;
mod tensor;
pub mod trainer;
pub mod vgg;

pub use discriminator::{DiscMode, Discriminator, DiscriminatorConfig};
pub use error::{Error, Result};
pub use generator::{Generator, GeneratorConfig};
pub use imaging::{ImagePair, ImageTensor, Ratio};
pub use params::ParamStore;
pub use qa::{QaConfig, QaNetwork};
pub use real::{DType, Real};
pub use tape::{Eager, Grads, Graph, Tape, Var};
pub use tensor::Tensor;
pub use vgg::{Vgg, VggConfig};
