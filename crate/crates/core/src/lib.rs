//! Numerical toolkit for the Siegel upper half-space
//! `U = { z in C^n : Im z_n > |z'|^2 }`.
//!
//! Bergman kernel and metric, automorphisms, quadrature on the chart and on
//! Bergman balls, positive measures and their transforms, separated lattices,
//! and Schatten norms of Toeplitz operators with atomic symbols.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lattice;
pub mod measures;
pub mod montecarlo;
pub mod quadrature;
pub mod region;
pub mod schatten;
pub mod special;
pub mod transforms;

pub use error::{Error, Result};
pub use geometry::SiegelPoint;
pub use region::Region;
