//! Truncated-Fock-space simulator for finite-energy GKP code states and
//! their autonomous stabilization protocols.

pub mod error;
pub mod fock;
pub mod gkp;
pub mod linalg;
pub mod noise;
pub mod protocols;

pub use error::{Result, SimError};
pub use fock::{HilbertConfig, Operator, QuantumState, Space};
pub use gkp::{GkpParams, Pauli, StabAxis};
pub use noise::{NoiseParams, NoisyChannel};
pub use protocols::{ProtocolName, ProtocolSpec, RoundAxis, RoundChannel, StOrder, Variant};
