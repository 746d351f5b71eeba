//! Forward-link simulator for precoded multi-beam GEO satellites.
//!
//! Users are scheduled over a window of slots under individual demands with a
//! greedy RZF-based scheduler, and the power of each slot can be re-optimised
//! by successive geometric programming.

pub mod bench;
pub mod channel;
pub mod config;
pub mod error;
pub mod gpcore;
pub mod poweralloc;
pub mod precoding;
pub mod scheduler;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use scheduler::{Method, Network, PowerMode};
