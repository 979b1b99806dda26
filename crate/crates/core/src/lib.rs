//! Invasion fitness in mass-structured growth-fragmentation-death models.
//!
//! Three independent routes compute whether a small population can invade:
//! the exact branching simulation ([`simulate`]), the extinction probability
//! as the minimal fixed point of a monotone integral map ([`extinction`]),
//! and the principal eigenvalue of the growth-fragmentation operator
//! ([`eigen`]). A transient finite-volume solver ([`pde`]) serves as a
//! further oracle, and [`validate`] cross-checks all of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod config;
pub mod eigen;
pub mod error;
pub mod extinction;
pub mod grid;
pub mod interp;
pub mod model;
pub mod ode;
pub mod pde;
pub mod quadrature;
pub mod simulate;
pub mod validate;

pub use error::{GrowFragError, Result};
pub use grid::{GridScheme, MassGrid};
pub use model::{DivisionRate, FragmentKernel, GrowthLaw, HittingTime, ModelSpec};
