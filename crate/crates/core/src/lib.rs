//! Trust-aware multipath flow allocation for mobile ad hoc networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`trust`] turns forwarding observations and social signals into trust values.
//! * [`identity`] propagates identity confidence through a voucher graph.
//! * [`network`] holds topologies, k-path discovery and path trust.
//! * [`flow`] allocates rates over admissible paths by dual decomposition.
//! * [`social`] ingests wall-post and profile datasets.
//! * [`sim`] runs seeded round-based network simulations and sweeps.
//! * [`cli`] is the command-line front-end used by the `trustflow` binary.

pub mod cli;
pub mod config;
pub mod flow;
pub mod identity;
pub mod network;
pub mod output;
pub mod sim;
pub mod social;
pub mod topofile;
pub mod trust;

mod error;

pub use error::{Error, Result};
pub use network::NodeId;
