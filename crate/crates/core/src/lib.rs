pub mod error;
pub mod quadrature;
pub mod rng;
pub mod bifurcation;
pub mod bridge;
pub mod passage;
pub mod roots;
pub mod stable;

pub use error::{Error, Result};
