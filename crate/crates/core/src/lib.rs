//! Open-system dynamics of spin-1/2 ensembles in the collective-state space.
//!
//! A state of `N` qubits that is identical across the degenerate copies of
//! each total-`J` irrep is described by one `(2J+1)×(2J+1)` block per `J`,
//! so the stored size grows as `N²` rather than `4^N`. Decoherence that acts
//! identically but independently on every particle keeps states in this
//! class; [`liouvillian`] implements that map, and [`oracle`] checks it
//! against brute-force evolution in the full `2^N` space.

mod banded;
pub mod error;
pub mod integrator;
pub mod irrep;
pub mod liouvillian;
pub mod operators;
pub mod oracle;
pub mod scenarios;
pub mod state;
pub mod validation;

pub use error::{Error, Result};
pub use irrep::{Component, EnsembleSpec, JLabel};
pub use liouvillian::{ChannelKind, ChannelSpec, Liouvillian};
pub use operators::{BlockOperator, CollectiveOp, LocalOperatorCoeffs, C64};
pub use state::{BlockedDensity, BlockedKet};
