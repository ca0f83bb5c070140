pub mod calculus;
pub mod cli;
pub mod error;
pub mod expr;
pub mod flow;
pub mod forms;
pub mod helmholtz;
pub mod manifest;
pub mod manifold;
mod multi_index;
pub mod quadrature;
pub mod stokes;

pub use error::{Error, Result};
