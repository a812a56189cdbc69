//! Current-based LIF spiking networks: single-layer dynamics and the
//! two-layer feedforward / recurrent forward pass.

pub mod lif;
pub mod network;

pub use lif::{lif_step, LayerState, LifParams};
pub use network::{
    argmax_count, forward, forward_with, infer, predict, ForwardTrace, LayerTrace, NetworkDef,
    SpikeFn, SpikeSummary,
};
