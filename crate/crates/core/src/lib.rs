//! Linear precoder design for K-user MIMO interference networks.
//!
//! The algorithm core is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulation harness uses.

pub mod algorithms;
pub mod channel;
pub mod harness;
pub mod network;
pub mod numerics;
pub mod scalar;

pub use algorithms::{AlgorithmError, AlgorithmSettings, IterationRecord, IterationTrace, Variant};
pub use scalar::Real;

pub type ComplexMatrix64 = numerics::ComplexMatrix<f64>;
pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type ChannelParams64 = channel::ChannelParams<f64>;
pub type NetworkConfig64 = network::NetworkConfig<f64>;
pub type TxState64 = network::TxState<f64>;
pub type RxState64 = network::RxState<f64>;
pub type RunOutput64 = algorithms::RunOutput<f64>;
