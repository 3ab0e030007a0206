//! Continuous-variable phase-space toolkit: conditional Wigner functions,
//! physicality witnesses, steering criteria and heralded (remote) state
//! preparation.

pub mod conditional;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod measurements;
pub mod phase_space;
pub mod steering;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
