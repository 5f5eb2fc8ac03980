//! Brute-force maximizer of the intersection sum rate.
//!
//! The sum rate is the minimum of four concave functions of the per-state
//! powers, so projected supergradient ascent converges to its maximum. The
//! oracle uses nothing from the case solvers.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::FadingEnsemble;
use crate::error::Result;
use crate::rates::{corner_rates, Bound, ChannelConfig, PowerPolicy, Transmitter};

/// Bounds within this distance of the minimum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Step numerator per `√n` states, in units of each transmitter's budget.
pub const STEP_SCALE: f64 = 2.0;

/// Default iteration count of [`subgradient_solve`].
pub const DEFAULT_ITERATIONS: usize = 20_000;

/// Sum rate of a policy with its active bound and a supergradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub active: Bound,
    /// Derivative of the active bound with respect to every per-state power.
    pub gradient: PowerPolicy,
}

/// `d/dx [bw · log2(1 + x / bw)] · g` for received power `x`.
fn slope(bw: f64, x: f64, g: f64) -> f64 {
    g / (LN_2 * (1.0 + x / bw))
}

/// Evaluates the sum rate and the gradient of its smallest bound (lowest
/// index among ties).
pub fn sum_rate_objective(
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<Objective> {
    let summary = corner_rates(policy, e, cfg)?;
    let bounds = summary.bounds();
    let value = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let active = Bound::ALL
        .into_iter()
        .find(|b| bounds[b.index()] <= value + TIE_TOLERANCE)
        .expect("a minimum exists");

    let (th, thb) = (cfg.theta, cfg.theta_bar());
    let n = e.len();
    let mut grad = PowerPolicy::zeros(n);
    for (i, (w, s)) in e.iter().enumerate() {
        let (p1, p2, pr) = (policy.p1[i], policy.p2[i], policy.pr[i]);
        let link = w * slope(thb, s.g_dr * pr, s.g_dr);
        let (d1, d2, dr) = match active {
            Bound::RelaySum => {
                let x = s.g_r1 * p1 + s.g_r2 * p2;
                (slope(th, x, s.g_r1), slope(th, x, s.g_r2), 0.0)
            }
            Bound::DestinationSum => {
                let x = s.g_d1 * p1 + s.g_d2 * p2;
                (slope(th, x, s.g_d1), slope(th, x, s.g_d2), link)
            }
            Bound::RelayDestination => (
                slope(th, s.g_r1 * p1, s.g_r1),
                slope(th, s.g_d2 * p2, s.g_d2),
                link,
            ),
            Bound::DestinationRelay => (
                slope(th, s.g_d1 * p1, s.g_d1),
                slope(th, s.g_r2 * p2, s.g_r2),
                link,
            ),
        };
        grad.p1[i] = w * d1;
        grad.p2[i] = w * d2;
        grad.pr[i] = dr;
    }
    Ok(Objective {
        value,
        active,
        gradient: grad,
    })
}

/// Euclidean projection of `raw` onto `{p >= 0, Σ w_i p_i <= budget}`.
pub fn project_onto_budget(raw: &[f64], weights: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = raw.iter().map(|&p| p.max(0.0)).collect();
    let used = |t: f64| -> f64 {
        raw.iter()
            .zip(weights)
            .map(|(&p, &w)| w * (p - t * w).max(0.0))
            .sum()
    };
    if used(0.0) <= budget {
        return clipped;
    }
    // the projection is (raw − t·w)⁺ with t making the budget tight
    let mut hi = raw
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, &w)| p / w)
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if used(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    raw.iter()
        .zip(weights)
        .map(|(&p, &w)| (p - hi * w).max(0.0))
        .collect()
}

/// Projects every transmitter's powers onto its budget set.
pub fn project_budgets(raw: &PowerPolicy, e: &FadingEnsemble, cfg: &ChannelConfig) -> PowerPolicy {
    let w = e.weights();
    PowerPolicy {
        p1: project_onto_budget(&raw.p1, w, cfg.p1),
        p2: project_onto_budget(&raw.p2, w, cfg.p2),
        pr: project_onto_budget(&raw.pr, w, cfg.pr),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub policy: PowerPolicy,
    /// Best sum rate seen, in bits.
    pub objective: f64,
    pub iterations: usize,
    pub final_step: f64,
    /// `E[P] − P̄` per transmitter (sources 1, 2, relay); nonpositive up to rounding.
    pub budget_residuals: [f64; 3],
}

/// Settings of the supergradient ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub iterations: usize,
    /// Extra runs from random feasible starts.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            iterations: DEFAULT_ITERATIONS,
            restarts: 0,
            seed: 0,
        }
    }
}

/// Projected supergradient ascent from the uniform policy `P_k(i) = P̄_k`.
///
/// Steps are `a/√t` with `a = 2√n`, taken along the supergradient with each
/// transmitter's block scaled by its budget and normalized by the part of the
/// supergradient lying along the budget planes. Every iterate is projected
/// back onto the budgets and the best one is returned.
pub fn subgradient_solve(
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
    iterations: usize,
    seed: u64,
) -> Result<OracleReport> {
    subgradient_solve_with(
        e,
        cfg,
        &OracleOptions {
            iterations,
            restarts: 0,
            seed,
        },
    )
}

pub fn subgradient_solve_with(
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    cfg.validate()?;
    let iterations = opts.iterations.max(1);
    let scale = STEP_SCALE * (e.len() as f64).sqrt();
    let mut best = ascend(
        PowerPolicy::uniform(e.len(), cfg),
        e,
        cfg,
        iterations,
        scale,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let mut start = PowerPolicy::zeros(e.len());
        for tx in Transmitter::ALL {
            let b = cfg.budget(tx);
            for p in start.powers_mut(tx).iter_mut() {
                *p = 2.0 * b * rng.random::<f64>();
            }
        }
        let start = project_budgets(&start, e, cfg);
        let run = ascend(start, e, cfg, iterations, scale)?;
        if run.objective > best.objective {
            best = run;
        }
    }
    Ok(best)
}

fn ascend(
    start: PowerPolicy,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
    iterations: usize,
    scale: f64,
) -> Result<OracleReport> {
    let w = e.weights();
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let budgets = Transmitter::ALL.map(|tx| cfg.budget(tx));
    let mut current = project_budgets(&start, e, cfg);
    let mut obj = sum_rate_objective(&current, e, cfg)?;
    let mut best_policy = current.clone();
    let mut best_value = obj.value;
    let mut step = 0.0;
    for t in 1..=iterations {
        let g = &obj.gradient;
        // norm of the part of the supergradient along each budget plane,
        // blocks scaled by their budgets
        let mut norm2 = 0.0;
        for tx in Transmitter::ALL {
            let b = budgets[tx.index()];
            let gk = g.powers(tx);
            let along: f64 = gk.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() / w2;
            let tangential: f64 = gk.iter().zip(w).map(|(x, y)| (x - along * y).powi(2)).sum();
            norm2 += b * b * tangential;
        }
        if !(norm2 > 0.0) {
            break;
        }
        step = scale / (t as f64).sqrt();
        let k = step / norm2.sqrt();
        let mut next = current.clone();
        for tx in Transmitter::ALL {
            let b = budgets[tx.index()];
            for (p, d) in next.powers_mut(tx).iter_mut().zip(g.powers(tx)) {
                *p += k * b * b * d;
            }
        }
        current = project_budgets(&next, e, cfg);
        obj = sum_rate_objective(&current, e, cfg)?;
        if obj.value > best_value {
            best_value = obj.value;
            best_policy = current.clone();
        }
    }
    let avg = best_policy.averages(e);
    let budget_residuals = Transmitter::ALL.map(|tx| avg[tx.index()] - cfg.budget(tx));
    Ok(OracleReport {
        policy: best_policy,
        objective: best_value,
        iterations,
        final_step: step,
        budget_residuals,
    })
}
