//! Grids, graph functions, indicator sets, obstacles and fractional orders.

mod contact;
mod graph;
mod indicator;
pub mod io;
mod obstacle;
mod order;

pub use contact::ContactSet;
pub use graph::{CoarseSamples, ExteriorSpec, GraphFunction, Plane};
pub use indicator::{IndicatorGrid, SetExterior};
pub use obstacle::Obstacle;
pub use order::FractionalOrder;
