//! Calibration of the source power multipliers `ν_1, ν_2`.
//!
//! For fixed prices every state is solved independently. The average power
//! of source `k` is nonincreasing in its own price, so `ν_1` is found by a
//! bracketed search for each trial `ν_2`, and `ν_2` by an outer search on the
//! resulting average of source 2. On finite ensembles the average can jump
//! when a state changes hands between the users; the search then collapses
//! onto the jump and the two one-sided allocations are mixed so the budget
//! holds exactly.

use std::f64::consts::LN_2;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::rates::ChannelConfig;
use crate::root::{find_root, RootOutcome, Sample};

use super::kkt::{StateProblem, WeightedKktSpec};

/// Iteration cap per search level.
pub const MAX_ITERATIONS: usize = 200;

/// Relative budget residual accepted at a calibrated solution.
pub const BUDGET_RESIDUAL: f64 = 1e-9;

/// Calibrated source powers and their multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAllocation {
    /// Per-state powers of source 1 and source 2.
    pub powers: [Vec<f64>; 2],
    /// `None` when the source is held silent (zero budget or no usable gain).
    pub nu: [Option<f64>; 2],
}

#[derive(Debug, Clone)]
struct Trial {
    mu: [f64; 2],
    powers: [Vec<f64>; 2],
    avg: [f64; 2],
}

impl Trial {
    /// `t·self + (1 − t)·other`, prices interpolated geometrically.
    fn mix(&self, other: &Trial, t: f64) -> Trial {
        let t = t.clamp(0.0, 1.0);
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| t * x + (1.0 - t) * y)
                .collect()
        };
        let mu = [0, 1].map(|k| {
            let (a, b) = (self.mu[k], other.mu[k]);
            if a.is_finite() && b.is_finite() {
                (t * a.ln() + (1.0 - t) * b.ln()).exp()
            } else {
                a
            }
        });
        Trial {
            mu,
            powers: [
                lerp(&self.powers[0], &other.powers[0]),
                lerp(&self.powers[1], &other.powers[1]),
            ],
            avg: [0, 1].map(|k| t * self.avg[k] + (1.0 - t) * other.avg[k]),
        }
    }
}

struct Calibrator<'a> {
    problems: Vec<StateProblem>,
    weights: &'a [f64],
    budgets: [f64; 2],
    peak: [f64; 2],
    theta: f64,
}

impl<'a> Calibrator<'a> {
    fn new(spec: &WeightedKktSpec, e: &'a FadingEnsemble, cfg: &ChannelConfig) -> Self {
        let problems: Vec<StateProblem> = e
            .states()
            .iter()
            .map(|s| StateProblem::new(spec, s, cfg.theta))
            .collect();
        let peak = [0, 1].map(|k| {
            problems
                .iter()
                .zip(e.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(p, _)| p.peak_marginal(k))
                .fold(0.0, f64::max)
        });
        Calibrator {
            problems,
            weights: e.weights(),
            budgets: [cfg.p1, cfg.p2],
            peak,
            theta: cfg.theta,
        }
    }

    fn active(&self, k: usize) -> bool {
        self.budgets[k] > 0.0 && self.peak[k] > 0.0
    }

    fn evaluate(&self, mu: [f64; 2]) -> Trial {
        let n = self.problems.len();
        let mut powers = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut avg = [0.0; 2];
        for (sp, &w) in self.problems.iter().zip(self.weights) {
            let p = sp.solve(mu);
            for k in 0..2 {
                powers[k].push(p[k]);
                avg[k] += w * p[k];
            }
        }
        Trial { mu, powers, avg }
    }

    /// Searches price `k` (log scale) for average power `budgets[k]`, with
    /// `solve_at` producing the allocation for a trial price.
    fn search<F>(&self, k: usize, hint: Option<f64>, mut solve_at: F) -> Result<Trial>
    where
        F: FnMut(f64) -> Result<Trial>,
    {
        let budget = self.budgets[k];
        let ceiling = self.peak[k];
        let mut eval = |x: f64| -> Result<Sample<Trial>> {
            let t = solve_at(x.exp())?;
            Ok(Sample {
                x,
                f: t.avg[k] - budget,
                data: t,
            })
        };

        let start = match hint {
            Some(h) if h > 0.0 && h < ceiling => h,
            _ => (0.5 * ceiling).min(self.theta / budget),
        };
        let first = eval(start.ln())?;
        let (lo, hi) = if first.f >= 0.0 {
            let mut lo = first;
            let mut step = 0.25f64;
            loop {
                let x = (lo.x + step.max(0.05)).min(ceiling.ln());
                let s = eval(x)?;
                if s.f < 0.0 || x >= ceiling.ln() {
                    break (lo, s);
                }
                lo = s;
                step *= 4.0;
            }
        } else {
            let mut hi = first;
            let mut step = 0.25f64;
            let mut tries = 0;
            loop {
                let s = eval(hi.x - step)?;
                if s.f >= 0.0 {
                    break (s, hi);
                }
                hi = s;
                step *= 2.0;
                tries += 1;
                if tries > MAX_ITERATIONS {
                    return Err(Error::NoConvergence(format!(
                        "could not bracket the multiplier of source {}",
                        k + 1
                    )));
                }
            }
        };
        if hi.f > 0.0 {
            // cannot happen: at the peak marginal the source is silent
            return Err(Error::NoConvergence(format!(
                "source {} still active at its peak marginal",
                k + 1
            )));
        }

        let f_tol = 1e-13 * budget.max(1.0);
        let x_tol = 1e-15 * lo.x.abs().max(hi.x.abs()).max(1.0);
        match find_root(lo, hi, f_tol, x_tol, MAX_ITERATIONS, |x| {
            eval(x).map(|s| (s.f, s.data))
        })? {
            RootOutcome::Converged(s) => Ok(s.data),
            RootOutcome::Jump { lo, hi } => {
                let (a, b) = (lo.data, hi.data);
                let t = (budget - b.avg[k]) / (a.avg[k] - b.avg[k]);
                Ok(a.mix(&b, t))
            }
        }
    }

    fn solve(&self, hint: [Option<f64>; 2]) -> Result<Trial> {
        let inf = f64::INFINITY;
        match (self.active(0), self.active(1)) {
            (false, false) => Ok(self.evaluate([inf, inf])),
            (true, false) => self.search(0, hint[0], |m| Ok(self.evaluate([m, inf]))),
            (false, true) => self.search(1, hint[1], |m| Ok(self.evaluate([inf, m]))),
            (true, true) => {
                let mut inner_hint = hint[0];
                self.search(1, hint[1], |m2| {
                    let t = self.search(0, inner_hint, |m1| Ok(self.evaluate([m1, m2])))?;
                    inner_hint = Some(t.mu[0]);
                    Ok(t)
                })
            }
        }
    }
}

/// Finds source multipliers under which the spec's per-state maximizers meet
/// both source budgets (or leave a source silent with `ν = None`).
pub fn calibrate_duals(
    spec: &WeightedKktSpec,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<SourceAllocation> {
    calibrate_with_hint(spec, e, cfg, [None, None])
}

/// As [`calibrate_duals`], starting the searches from previously found prices.
pub(crate) fn calibrate_with_hint(
    spec: &WeightedKktSpec,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
    hint: [Option<f64>; 2],
) -> Result<SourceAllocation> {
    let cal = Calibrator::new(spec, e, cfg);
    let trial = cal.solve(hint)?;
    let mut nu = [None, None];
    for k in 0..2 {
        if cal.active(k) {
            let b = cal.budgets[k];
            let resid = (trial.avg[k] - b).abs();
            if resid > BUDGET_RESIDUAL * b.max(1.0) {
                return Err(Error::NoConvergence(format!(
                    "budget residual {resid:e} for source {}",
                    k + 1
                )));
            }
            nu[k] = Some(trial.mu[k] / LN_2);
        }
    }
    let Trial { powers, .. } = trial;
    Ok(SourceAllocation { powers, nu })
}
