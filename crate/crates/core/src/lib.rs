pub mod accel;
pub mod watertight;
mod error;
pub mod geom;
pub mod metrics;
pub mod pipeline;
pub mod sampling;

pub use error::{Error, Result};
