//! Deterministic simulator for decentralized gradient descent over wireless
//! channels using non-coherent over-the-air computation.
//!
//! Nodes jointly minimize the average of their local objectives by mixing
//! local gradient steps with a consensus correction. The consensus signal is
//! never exchanged digitally: transmitters encode their parameter vectors
//! into per-sample transmit energies, signals superpose over simulated
//! Rayleigh-fading links, and receivers estimate the network disagreement
//! from received energy alone. Alongside the baseline estimator, an
//! interference-robust variant applies a network-common random rotation and
//! a pseudo-random pilot so that external interference averages out instead
//! of accumulating into a drift.
//!
//! Every random draw comes from a named stream derived from the master seed,
//! so whole experiments replay bit-exactly.

pub mod channel;
pub mod codec;
pub mod dgd;
pub mod harness;
pub mod objective;
pub mod ota;
pub mod rng;
