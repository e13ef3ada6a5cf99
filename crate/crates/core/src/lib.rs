//! Simulation and exact analysis of a probabilistic cellular automaton in
//! which monochromatic runs of length at least `kappa` are recolored at random
//! until the configuration is stable.
//!
//! * [`lattice`]: configurations, stability classification and the recoloring step.
//! * [`exact`]: exact k-step instability probabilities and the contraction certificate.
//! * [`montecarlo`]: seeded trajectory experiments and fixation statistics.

pub mod crosscheck;
pub mod dyadic;
pub mod exact;
pub mod lattice;
pub mod montecarlo;
pub mod params;
pub mod rng;

pub use dyadic::Dyadic;
pub use params::ModelParams;

/// Code identity recorded in manifests.
pub const CODE_VERSION: &str = concat!("candy ", env!("CARGO_PKG_VERSION"));
