//! Exact lattice solver for equilibrium derivative prices under
//! regime-switching exponential risk aversion with unspanned income.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod market;
pub mod numeric;
pub mod output;
pub mod pricing;
pub mod verify;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use lattice::{Lattice, NodeId, TimeGrid};
pub use market::{RegimeChain, ScenarioTree};
pub use pricing::{PricingSolution, SolutionMode};
