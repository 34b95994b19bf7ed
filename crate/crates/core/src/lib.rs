pub mod chaos;
pub mod commands;
pub mod config;
pub mod domain;
pub mod error;
pub mod gauss;
pub mod kernels;
pub mod paths;
pub mod quadrature;
pub mod semigroup;
pub mod stats;
pub mod verify;

pub use domain::{BoundaryValues, DomainModel, Side};
pub use error::{Error, Result};
