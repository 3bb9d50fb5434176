//! Tunneling of Gaussian wave packets through truncated linear-ramp
//! barriers, seen through Bohmian trajectories.
//!
//! The crate provides closed-form estimators of the transmission
//! probability built from the initial state alone, a split-step
//! wave-packet propagator that yields the exact transmission, numeric
//! Bohmian trajectories driven by that propagator, and a sweep driver that
//! tabulates all of them.

pub mod analytic_ramp;
pub mod bohmian;
pub mod csv;
pub mod error;
pub mod quadrature;
pub mod sweep;
pub mod tdse;
pub mod trajectory;
pub mod transmission;

pub use analytic_ramp::{GaussianPacket, RampSpec};
pub use error::{Error, Result};
pub use tdse::{SpatialGrid, TruncatedRampSpec};
pub use transmission::{TransmissionMethod, TransmissionResult};
