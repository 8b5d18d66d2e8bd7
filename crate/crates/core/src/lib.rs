//! Loosely-coupled fusion of 5G mmWave position fixes with strapdown inertial and wheel
//! odometer dead reckoning, together with the scenario simulator and evaluation tools
//! used to compare the standalone and integrated solutions.

pub mod config;
pub mod fivegfix;
pub mod fusion;
pub mod geo;
pub mod ins;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod sensors;
pub mod solution;
