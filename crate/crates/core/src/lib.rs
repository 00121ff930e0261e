//! Numerical lab for Liénard systems
//!
//! ```text
//! x' = y - F(x),   y' = -eps x + e x^2
//! ```
//!
//! with polynomial F vanishing at 0. Return maps on the negative y-axis,
//! separatrices of the saddle at infinity, the homoclinic parameter of the
//! quartic family, limit-cycle census and first integrals.
//!
//! Everything is generic over [`scalar::Real`] (`f32`, `f64`); the aliases
//! below fix `f64`. Root isolation runs in exact rationals.

pub mod census;
pub mod conserved;
pub mod error;
pub mod ode;
pub mod poly;
pub mod scalar;
pub mod section;
pub mod separatrix;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Poly = poly::Poly<f64>;
pub type SystemParams = ode::SystemParams<f64>;
pub type PhaseState = ode::PhaseState<f64>;
pub type OdeConfig = ode::OdeConfig<f64>;
pub type ReturnSample = section::ReturnSample<f64>;
pub type SeparatrixResult = separatrix::SeparatrixResult<f64>;
pub type HomoclinicResult = separatrix::HomoclinicResult<f64>;
pub type CycleRecord = census::CycleRecord<f64>;
pub type CensusReport = census::CensusReport<f64>;
pub type State4 = conserved::State4<f64>;
pub type DriftReport = conserved::DriftReport<f64>;
