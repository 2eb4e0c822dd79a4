//! Joint scheduling, resource allocation and routing for mmWave
//! integrated access and backhaul networks.

pub mod acceptance;
pub mod channel;
pub mod cli;
pub mod error;
pub mod graphs;
pub mod model;
pub mod oracle;
pub mod plan;
pub mod resources;
pub mod routing;
pub mod scheduling;
pub mod simulate;

pub use error::{Error, Result};
