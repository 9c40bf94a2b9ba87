//! Singular integrals of homogeneous kernels on self-similar sets in the
//! Heisenberg group `H^n` and Euclidean `R^d`.

pub mod cantor;
pub mod config;
pub mod error;
pub mod fd;
pub mod group;
pub mod ifs;
pub mod interval;
pub mod kernel;
pub mod operators;
pub mod phi;
pub mod pipeline;
pub mod quadrature;
pub mod real;
pub mod separation;

pub use error::{Error, Result};
pub use group::{GroupSpace, Point};
pub use interval::Interval;
pub use kernel::{KernelFamily, KernelSpec, Orientation};
pub use ifs::{Cylinder, Ifs, Refinement, SelfSimilarMeasure, Similarity, Word};
