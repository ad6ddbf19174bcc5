pub mod error;
pub mod geometry;
pub mod material;
pub mod cases;
pub mod mesh;
pub mod reconstruction;
pub mod solver;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};
