//! Dual decomposition for block-separable convex programs with affine
//! coupling, built around price discovery (projected dual subgradient and
//! homogeneous analytic-center cutting planes) and multi-response primal
//! recovery that blends several bounded-suboptimality agent responses into
//! a low-residual primal point each iteration.

pub mod bench;
pub mod error;
pub mod harness;
pub mod oracles;
pub mod pricing;
pub mod problem;
pub mod recovery;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;
