//! Rényi information dimension, affine decompositions and rate-distortion
//! bounds for linear images of discrete-continuous sources.

pub mod decompose;
pub mod drb;
pub mod empirical;
pub mod error;
pub mod linalg;
pub mod ma;
pub mod model;
pub mod rational;
pub mod rid;

pub use decompose::{decompose, AffineComponent, Decomposition, DiffEntropy};
pub use error::{Error, Result};
pub use linalg::{rank, spark, RationalMatrix, SubspaceCanonical};
pub use model::{sample, validate, SampleBatch, SourceSpec};
pub use rational::Rational;
pub use rid::{rid_linear, rid_linear_mc, RidResult};
