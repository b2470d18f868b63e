//! Files and command line around [`bnps_core`]: power-profile and trace
//! formats, scenario files, CSV exports, and the `bnps` tool.

pub mod cli;
pub mod error;
pub mod export;
pub mod oulu;
pub mod profile;
pub mod scenario;
pub mod trace;

pub use bnps_core as core;
pub use error::Error;
