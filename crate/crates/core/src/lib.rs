//! Machine-learned heat-flux closure for the 1D Euler-Poisson system.

pub mod closures;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fluid;
pub mod grid;
pub mod kinetic;
pub mod linalg;
pub mod model;
pub mod processing;
pub mod trainer;
pub mod vnet;

pub use error::{Error, Result};
pub use grid::{PhaseGrid, SpaceGrid};
