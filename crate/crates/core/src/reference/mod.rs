//! Reference solutions, Brownian sampling and path simulation.

pub mod brownian;
pub mod paths;
pub mod riccati;
