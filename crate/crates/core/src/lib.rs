//! Hybrid quantum-classical graph neural network toolkit for particle track
//! segment classification.
//!
//! The crate covers the full pipeline: detector events (TrackML-format CSV
//! or synthetic helical tracks) are turned into hit graphs with doublet
//! cuts, graph edges are classified by an attention-passing GNN whose inner
//! layers are simulated parametrized quantum circuits, and the circuits
//! themselves are characterized by expressibility and entanglement
//! descriptors. Everything is exact and deterministic: statevector
//! simulation with adjoint-mode gradients, seeded RNG streams, and
//! scheduling-independent parallel loops (rayon behind the `parallel`
//! feature, on by default).

pub mod adjoint;
pub mod checkpoint;
pub mod descriptors;
pub mod error;
pub mod event;
pub mod exec;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pqc;
pub mod provenance;
pub mod statevector;
pub mod template;
pub mod train;

pub use error::{Error, Result};
