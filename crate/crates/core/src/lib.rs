//! Semidispersing billiards whose scatterers have flat points.
//!
//! Scatterers are superellipses `|x|^β + |y|^β = a^β`; the flat points sit on the
//! coordinate axes. The crate provides the collision maps, induced maps on the
//! complement of the flat-point windows, the cell partition, Monte Carlo
//! estimators of tails and correlations, and a reduced channel model.

pub mod cells;
pub mod config;
pub mod error;
pub mod flight;
pub mod geometry;
pub mod jacobi;
pub mod map;
pub mod scalar;
pub mod stats;

pub use config::{Mode, TableConfig};
pub use error::{Error, Result};
pub use geometry::{Component, Table, Vec2};
pub use map::{PhasePoint, State};
