//! Numerical laboratory for generalized Sierpinski carpets.
//!
//! The crate builds carpet generator patterns and their finite pre-carpet
//! approximations as resistor networks, solves Dirichlet and Poisson
//! problems on them, and derives the quantities that govern their scaling
//! behaviour: effective resistances, walk/spectral dimension estimates,
//! boundary energies of Besov type, harmonic extensions and mean exit
//! times.
//!
//! Everything here is deterministic: iteration orders are fixed by the
//! lexicographic cell order, geometry predicates use exact integer
//! arithmetic, and solver reductions run in index order. The crate is
//! `no_std`-compatible (with `alloc`); IO, file formats and the command
//! line live in the companion `gsc-lab` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("gsc-core requires either the `std` or the `libm` feature");

pub mod boundary;
pub mod error;
pub mod exit_time;
pub mod extension;
pub mod graph;
pub mod lattice;
pub(crate) mod math;
pub mod pattern;
pub mod resistance;

pub use error::GscError;
pub use lattice::{FaceMeasure, LatticeDomain};
pub use pattern::{CellIndex, DimensionReport, GscPattern, SubFace, ValidationReport};
pub use resistance::{BoundaryRule, HarmonicSolution, ResistanceSeries};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, GscError>;
