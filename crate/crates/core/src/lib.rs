//! Modeling, simulation and calibration toolkit for cavity-optomechanical
//! acoustic sensors.
//!
//! The crate goes from device geometry and gas environment to
//! noise-equivalent pressure spectra, calibration chains and application
//! level detection limits. Rates are angular (rad/s) internally; reported
//! spectra are single-sided per cyclic Hz.

pub mod applications;
pub mod calibration;
pub mod config;
pub mod damping;
pub mod error;
pub mod model;
pub mod noise;
pub mod plot;
pub mod response;
pub mod spectrum;
pub mod timedomain;
pub mod units;

pub use error::{Error, Result};
pub use model::{derive_geometry, GasEnvironment, MechanicalMode, OpticalCavity, SensorGeometry};

pub use response::CouplingKind;
pub use spectrum::SpectrumSeries;
