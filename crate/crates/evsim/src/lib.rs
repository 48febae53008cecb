//! Agent-based simulation of charging-station control on a simplified
//! electrical distribution grid. Charging stations set prices or power
//! levels through contextual bandits (LinUCB), tabular Q-learning or
//! baseline heuristics; schedule-driven electric vehicles charge in
//! response; transformer loadings and agent rewards are recorded for
//! offline analysis.

pub mod agents;
pub mod bandits;
pub mod engine;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod mobility;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod tours;

pub use error::{EvsimError, Result};
