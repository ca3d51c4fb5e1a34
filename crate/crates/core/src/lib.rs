pub mod cli;
pub mod cotangent;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod presymplectic;
pub mod reduction;
pub mod report;
pub mod sampling;
pub mod scene;
pub mod symplectic;

pub use error::{Error, Result};
