//! Local computation mechanisms with per-query probe accounting.
//!
//! Every mechanism comes as a global reference run and a local per-query
//! evaluation that reads the instance only through an [`AdjacencyOracle`]
//! and reports how many adjacency lists it fetched.

pub mod auctions;
pub mod error;
pub mod harness;
pub mod instance;
pub mod oracles;
pub mod probe;
pub mod query_tree;
pub mod rng;
pub mod rsd;
pub mod scheduling;
pub mod stable_matching;

pub use error::{Error, Result};
pub use instance::{build_instance, Family, InstanceSpec};
pub use probe::{AdjacencyOracle, Entity, ProbeCounter};
pub use rng::{DrawKey, Purpose, RandomTape};
