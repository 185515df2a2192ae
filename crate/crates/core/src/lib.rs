//! Numerical laboratory for the prescribed Q-curvature flow on the round S⁴.

pub mod error;
pub mod flow_engine;
pub mod blowup_monitor;
pub mod conformal_ops;
pub mod mobius_gauge;
pub mod morse_gate;
pub mod s4_spectral;
pub mod workbench;

pub use error::{QflowError, Result};
