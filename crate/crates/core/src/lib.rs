//! Neumann-Neumann iterations for `-Δu = f` on `(-1,1)^2` split into four
//! squares meeting at one interior cross-point.
//!
//! The crate provides the lattice and its reflections ([`grid`]), the even/odd
//! split ([`symmetry`]), a profile LDL^T solver ([`linsolve`]), five-point
//! subdomain and monolithic solvers with residual fluxes ([`fd`]), the
//! standard, mixed and combined iterations ([`nnm`]), and the experiment
//! driver with its CSV formats ([`experiment`], [`io`]).

pub mod error;
pub mod experiment;
pub mod fd;
pub mod grid;
pub mod io;
pub mod linsolve;
pub mod nnm;
pub mod symmetry;

pub use error::{Error, Result};
pub use fd::{
    CornerPolicy, DdRule, DnRule, EdgeBc, EdgeCondition, EdgeKind, NnRule, SubField,
    SubdomainSolver, Trace, TraceKind,
};
pub use grid::{Grid, InterfaceId, NodeClass, NodeIndex, Reflection, SubdomainId};
pub use nnm::{MethodKind, RunHistory, RunStatus};
pub use symmetry::{GlobalField, Parity};
