pub mod audit;
pub mod bounds;
pub mod data;
pub mod error;
pub mod model;
pub mod numkit;
pub mod train;

pub use error::{Error, Result};
