//! Design and verification of sech-pulse controlled-phase gates between two
//! transmons coupled through a common cavity.

pub mod device;
pub mod error;
pub mod invariants;
pub mod metrics;
pub mod ode;
pub mod optimize;
pub mod propagator;
pub mod protocol;
pub mod sech;
pub mod special;
pub mod units;

pub use error::{Error, ErrorKind, Result};
