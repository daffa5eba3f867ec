//! Table geometry: scatterer profile, arclength and boundary frames.

mod quadrature;
mod superellipse;
mod table;
mod vec2;

pub use quadrature::gauss_legendre;
pub use superellipse::Superellipse;
pub use table::{BoundaryPoint, Component, Table};
pub use vec2::Vec2;
