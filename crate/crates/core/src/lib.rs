pub mod cells;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
