//! Dynamic-phasor simulation and small-signal analysis of power systems with
//! grid-following inverters.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod control;
pub mod devices;
pub mod error;
pub mod io;
pub mod phasor;

pub use error::{Error, Result};
