pub mod error;
pub mod evalbench;
pub mod fit;
pub mod geo;
pub mod likelihood;
pub mod model;
pub mod numerics;
pub mod predict;
pub mod simulate;
pub mod uq;

pub use error::{Error, Result};
