//! Case solvers: water-filling, multiplier calibration, per-state KKT
//! solutions and the case-by-case multiplier searches.

mod calibrate;
mod cases;
mod kkt;
mod waterfill;

pub use calibrate::{calibrate_duals, SourceAllocation, BUDGET_RESIDUAL};
pub use cases::{
    solve_boundary, solve_case1, solve_case2, solve_equalizer, solve_opportunistic, solve_weighted,
    BoundaryCase, CaseSolution, CaseSolver, DualVariables, ALPHA_TOLERANCE,
};
pub use kkt::{
    axis_candidate_solve, kkt_marginals, per_state_axis_solve, state_lagrangian, Coupling,
    FractionTerm, WeightedKktSpec,
};
pub use waterfill::{waterfill, Waterfill};

use std::f64::consts::LN_2;

use crate::ensemble::FadingEnsemble;
use crate::error::Result;
use crate::rates::{ChannelConfig, Transmitter};

/// Worst KKT violations of a case solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktAudit {
    /// Largest `|f_k − ν_k ln 2|` over states where source `k` is on.
    pub stationarity: f64,
    /// Largest `f_k − ν_k ln 2` over states where source `k` is off.
    pub slackness: f64,
    /// `|E[P] − P̄|` per transmitter (sources 1, 2, relay) where `ν > 0`.
    pub budget: [f64; 3],
    /// `E[P] − P̄` per transmitter, positive when a budget is exceeded.
    pub excess: [f64; 3],
}

impl KktAudit {
    /// Checks the audit against the stationarity and budget tolerances.
    pub fn passes(&self, cfg: &ChannelConfig, kkt_tol: f64) -> bool {
        self.stationarity <= kkt_tol
            && self.slackness <= kkt_tol
            && Transmitter::ALL.iter().all(|&tx| {
                let b = cfg.budget(tx);
                let tol = BUDGET_RESIDUAL * b.max(1.0);
                self.budget[tx.index()] <= tol && self.excess[tx.index()] <= tol
            })
    }
}

/// Audits the source stationarity conditions of `sol` for the combination of
/// bounds recorded in its multipliers, and all three budgets.
pub fn kkt_audit(sol: &CaseSolution, e: &FadingEnsemble, cfg: &ChannelConfig) -> Result<KktAudit> {
    sol.policy.check_aligned(e)?;
    let spec = WeightedKktSpec::from_bound_weights(sol.duals.bound_weights)?;
    let mut audit = KktAudit::default();
    for (i, s) in e.states().iter().enumerate() {
        if e.weights()[i] <= 0.0 {
            continue;
        }
        let p = [sol.policy.p1[i], sol.policy.p2[i]];
        let f = kkt_marginals(s, &spec, p, cfg.theta);
        for k in 0..2 {
            let price = sol.duals.nu[k].map_or(f64::INFINITY, |v| v * LN_2);
            if p[k] > 0.0 {
                audit.stationarity = audit.stationarity.max((f[k] - price).abs());
            } else if price.is_finite() {
                audit.slackness = audit.slackness.max(f[k] - price);
            }
        }
    }
    let avg = sol.policy.averages(e);
    for tx in Transmitter::ALL {
        let k = tx.index();
        let b = cfg.budget(tx);
        audit.excess[k] = avg[k] - b;
        if sol.duals.nu[k].is_some_and(|v| v > 1e-12) {
            audit.budget[k] = (avg[k] - b).abs();
        }
    }
    Ok(audit)
}
