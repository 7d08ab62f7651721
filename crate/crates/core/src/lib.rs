//! Reflecting complementary media: geometry, push-forward calculus, an exact radial mode
//! solver, a P1 finite element solver, and the experiment harness built on them.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
