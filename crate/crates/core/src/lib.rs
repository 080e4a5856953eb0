//! Exact symbolic kernel for Z-graded manifolds and graded vector bundles
//! presented by charts and transition data.
//!
//! The kernel works with graded-commutative formal series truncated by
//! generator weight, with coefficients in an exact rational-function ring.
//! On top of the series algebra sit graded matrices with a two-sided
//! Neumann-series inversion, symbolic atlases, bundles given by transition
//! cocycles, and the section calculus.

pub mod error;
pub mod grading;
pub mod scalar;
pub mod geometry;
pub mod matrix;
pub mod report;
pub mod sections;
pub mod series;

pub use error::{CoreError, Result};
