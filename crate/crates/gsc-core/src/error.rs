//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors produced when building geometry or running solves.
#[derive(Debug, Clone, PartialEq)]
pub enum GscError {
    /// Malformed input (wrong mask size, out-of-range index, bad tuple).
    InvalidInput(String),
    /// A pattern failed one of the generator axioms; carries the axiom
    /// name and a witness description.
    InvalidPattern { axiom: &'static str, detail: String },
    /// An operation was called outside its contract.
    Contract(String),
    /// The requested lattice exceeds the configured node cap.
    SizeLimit { nodes: u128, cap: u64 },
    /// Grid too coarse to resolve the requested sub-face level.
    Resolution { requested: u32, available: u32 },
    /// Iterative solve did not reach the tolerance within the cap.
    SolverDiverged { residual: f64, iterations: u32 },
    /// Dirichlet problem with an empty constraint set.
    SingularSystem,
}

impl fmt::Display for GscError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GscError::InvalidInput(s) => write!(f, "invalid input: {s}"),
            GscError::InvalidPattern { axiom, detail } => {
                write!(f, "pattern violates {axiom}: {detail}")
            }
            GscError::Contract(s) => write!(f, "contract violation: {s}"),
            GscError::SizeLimit { nodes, cap } => {
                write!(f, "lattice would have {nodes} nodes, above the cap of {cap}")
            }
            GscError::Resolution { requested, available } => write!(
                f,
                "grid resolves sub-faces up to level {available}, level {requested} requested"
            ),
            GscError::SolverDiverged { residual, iterations } => write!(
                f,
                "solver stopped at residual {residual:e} after {iterations} iterations"
            ),
            GscError::SingularSystem => write!(f, "no Dirichlet constraints; system is singular"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GscError {}
