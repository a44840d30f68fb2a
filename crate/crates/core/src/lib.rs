//! Joint source/relay/destination transceiver design for two-hop
//! amplify-and-forward MIMO relay links, with Monte Carlo BER tooling.

pub mod channel;
pub mod dfe;
pub mod error;
pub mod extended;
pub mod factors;
pub mod linalg;
pub mod linear;
pub mod mse;
pub mod objectives;
pub mod sim;

pub use error::{Error, Result};
pub use objectives::{DesignBranch, Objective};
