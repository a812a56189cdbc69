//! Neuromorphic tactile pipeline: sigma-delta event encoding, current-based
//! LIF spiking networks trained with surrogate gradients, and fixed-point
//! inference with synaptic-operation accounting.

pub mod baselines;
pub mod container;
pub mod error;
pub mod event_codec;
pub mod harness;
pub mod quant;
pub mod snn;
pub mod train;

pub use error::{Error, Result};
