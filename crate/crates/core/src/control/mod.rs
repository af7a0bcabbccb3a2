//! Damping-controller design: filters, model reduction, H-infinity synthesis and the
//! sequential loop-closure procedure.

pub mod design;
pub mod filter;
pub mod hinf;
pub mod linalg;
pub mod reduce;

pub use design::{
    close_loop, least_damped, sequential_design, settling_time_check, Controller, Design, DesignSpec, SettlingReport,
    StageReport,
};
pub use filter::{FilterSpec, Realization};
pub use hinf::{
    build_generalized_plant, hinf_synthesize, lft, peak_gain, GeneralizedPlant, StateSpace, Synthesis,
    SynthesisOptions, SynthesisProblem,
};
pub use reduce::{peak_error, schur_balanced_truncation, stable_projection, truncation_bound, StableSplit};
