//! Reconstruction of mechanical oscillator network states from pulsed
//! optomechanical readout.

pub mod dynamics;
pub mod estimator;
pub mod error;
pub mod gaussian;
pub mod integrals;
mod linalg;
pub mod network;
mod ode;
pub mod parallel;
pub mod profile;
pub mod protocol;
pub mod singlephoton;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use linalg::symplectic_form;
pub use ode::Tolerances;
pub use parallel::Execution;
