//! Behavioral simulator for slope-detection and clamped voltage sensing of
//! 1T1R resistive memory arrays, with process variation, Monte-Carlo array
//! experiments and oxide-breakdown reliability math.

pub mod cli;
pub mod config;
pub mod conv;
pub mod device;
pub mod error;
pub mod experiments;
pub mod reliability;
pub mod slope;
pub mod variation;
pub mod waveform;

pub use error::{Result, SimError};
