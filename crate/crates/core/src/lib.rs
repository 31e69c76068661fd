//! Finite-dimensional models of approximately divisible C*-algebras: matrix
//! unit towers, the two-generator construction and its inversion, and the
//! numerical checks around them.

pub mod algebra;
pub mod error;
pub mod generator;
pub mod matrix;
pub mod microstates;
pub mod recovery;
pub mod similarity;
pub mod stabilizer;
pub mod tower;

pub use error::{Error, Result};
