//! Small-signal analysis: linearization, modes, frequency response, Prony.

pub mod freq;
pub mod linearize;
pub mod modal;
pub mod prony;

pub use freq::{frequency_response, locational_impact, logspace, transfer_at, ImpactRow};
pub use linearize::{linearize, LinearModel, LinearizeOptions, WASHOUT_PREFIX};
pub use modal::{eigenanalysis, eigenvalues, least_damped_in_band, modal_controllability, modes_in_band, Mode};
pub use prony::{dominant_in_band, prony_fit, PronyComponent, PronyOptions};
