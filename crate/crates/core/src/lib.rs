//! Random-feature constructions of two-layer networks with general
//! activations, and the machinery to measure how fast they converge.
//!
//! The pipeline is: pick an [`activation::ActivationModel`] and a
//! [`target::SpectralTarget`], freeze a [`representation::RepresentationKernel`],
//! draw features with [`sampler`], assemble a [`network::TwoLayerNetwork`] and
//! score it with [`metrics`].

pub mod activation;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod network;
pub mod numeric;
pub mod oracle;
pub mod qmc;
pub mod quadrature;
pub mod representation;
pub mod rng;
pub mod sampler;
pub mod target;

pub use error::{Error, Result};
