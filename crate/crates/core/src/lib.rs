//! Monitored Clifford circuits with variable-range two-qubit gates.
//!
//! Stabilizer states are stored as phase-free GF(2) tableaux; entanglement
//! entropies, mutual informations and the logarithmic negativity are exact
//! ranks over GF(2). On top of that sit the cluster (CHRC) and power-law
//! (LRHRC) circuit protocols, a dense state-vector reference for small
//! registers, and finite-size-scaling analysis.

// `!(x <= y)` is used on purpose where NaN must take the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod entanglement;
pub mod error;
pub mod gf2;
pub mod oracle;
pub mod protocols;
pub mod seeds;
pub mod tableau;

pub use entanglement::{Quadripartition, Region, Scratch};
pub use error::{Error, Result};
pub use gf2::{BitMatrix, BitVector};
pub use protocols::{Distance, ProtocolConfig, TrajectoryObservables, UnitaryKind};
pub use tableau::{MeasurementKind, StabilizerTableau, SymplecticGate};
