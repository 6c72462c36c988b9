//! Entanglement measures on small multipartite quantum states and numerical
//! checks of the monogamy and polygamy inequalities they satisfy.
//!
//! The crate is layered bottom-up:
//!
//! * [`densemath`]: dense complex matrices, Kronecker products and a Jacobi
//!   eigensolver for Hermitian matrices.
//! * [`qstate`]: pure and mixed multipartite states, partial traces,
//!   purification, random and named states, JSON state files.
//! * [`measures`]: closed-form quantities (entropies, mutual information,
//!   the two-qubit concurrence family).
//! * [`roofopt`]: one-sided optimizers for entanglement of formation and of
//!   assistance, tangle of assistance and one-way unlocalizable entanglement.
//! * [`harness`]: inequality checks with certification status, and seeded
//!   batch runs over sampled states.
//!
//! Batches and optimizer restarts run on rayon when the `parallel` feature
//! is on (the default) and sequentially otherwise. Results are identical
//! either way.

pub mod densemath;
pub mod error;
pub mod harness;
pub mod measures;
pub mod par;
pub mod qstate;
pub mod report;
pub mod rng;
pub mod roofopt;

pub use densemath::{ComplexMatrix, C64};
pub use error::{Error, Result};
pub use harness::{InequalityId, SlackReport, Status};
pub use qstate::{Bipartition, DensityMatrix, DimVector, PureState, State};
pub use roofopt::{BoundDirection, OptResult, OptimizerConfig};
