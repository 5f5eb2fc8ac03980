//! Sum-rate optimal power allocation for the two-user ergodic-fading
//! orthogonal multiaccess relay channel with decode-and-forward relaying.
//!
//! The sources share a fraction `θ` of the band and the relay forwards on the
//! rest. Given a finite fading ensemble and average power budgets,
//! [`classify_and_solve`] finds which case governs the optimum and returns the
//! optimal policy; [`oracle::subgradient_solve`] is an independent numerical
//! check.

pub mod classifier;
pub mod ensemble;
pub mod error;
pub mod oracle;
pub mod rates;
mod root;
pub mod solvers;

pub use classifier::{classify_and_solve, CaseLabel, SolveOutcome, SolveStatus};
pub use ensemble::{
    build_geometry_ensemble, load_ensemble, read_ensemble, validate_ensemble, FadingEnsemble,
    GainState, NodeGeometry, Point, Receiver, User,
};
pub use error::{Error, Result};
pub use oracle::{subgradient_solve, OracleReport};
pub use rates::{
    achievable_sum_rate, corner_rates, Bound, ChannelConfig, PowerPolicy, RateSummary, Transmitter,
};
pub use solvers::{CaseSolution, DualVariables};
