pub mod corpus;
pub mod evaluate;
pub mod error;
pub mod gibbs;
pub mod mathfn;
pub mod model;
mod parallel;
#[cfg(test)]
mod testutil;
pub mod synth;
pub mod variational;

pub use error::{Error, Result};
