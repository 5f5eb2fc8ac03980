//! Per-state stationarity conditions of a weighted sum of rate bounds.
//!
//! Every case reduces to maximizing a nonnegative combination of the four
//! sum-rate bounds under the power budgets. Its per-state derivative with
//! respect to source `k` is a weighted sum of fractions
//!
//! ```text
//! f_k = Σ_t c_t · g_{t,k} / (1 + s_t / θ)
//! ```
//!
//! where `s_t` is the joint received power `Σ_j g_{t,j} P_j` for a
//! multiaccess term and the user's own `g_{t,k} P_k` for an individual term.
//! Stationarity reads `f_k = ν_k ln 2` wherever `P_k > 0`.

use std::f64::consts::LN_2;

use arrayvec::ArrayVec;

use crate::ensemble::{GainState, Receiver, User};
use crate::error::{Error, Result};
use crate::rates::Bound;
use crate::root::{find_root, RootOutcome, Sample};

/// Tolerance on the total weight of a specification.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Both users share one log term at a common receiver.
    Joint,
    /// Each user has its own log term.
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionTerm {
    pub coefficient: f64,
    /// Receiver whose gain user 1 and user 2 (in that order) see in this term.
    pub receivers: [Receiver; 2],
    pub coupling: Coupling,
}

impl FractionTerm {
    fn for_bound(bound: Bound, coefficient: f64) -> Self {
        use Receiver::{Destination as D, Relay as R};
        let (receivers, coupling) = match bound {
            Bound::RelaySum => ([R, R], Coupling::Joint),
            Bound::DestinationSum => ([D, D], Coupling::Joint),
            Bound::RelayDestination => ([R, D], Coupling::Individual),
            Bound::DestinationRelay => ([D, R], Coupling::Individual),
        };
        FractionTerm {
            coefficient,
            receivers,
            coupling,
        }
    }
}

/// The weighted combination of bounds whose KKT conditions are being solved.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedKktSpec {
    weights: [f64; 4],
    terms: ArrayVec<FractionTerm, 4>,
}

impl WeightedKktSpec {
    /// Combination `Σ_b weights[b] · bound_b` over `Bound::ALL`; weights must be
    /// nonnegative and sum to one.
    pub fn from_bound_weights(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMultiplier(format!(
                "bound weights {weights:?} must be nonnegative"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidMultiplier(format!(
                "bound weights {weights:?} sum to {sum}"
            )));
        }
        let terms = Bound::ALL
            .iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(&b, w)| FractionTerm::for_bound(b, w))
            .collect();
        Ok(WeightedKktSpec { weights, terms })
    }

    /// A single bound with full weight.
    pub fn single(bound: Bound) -> Self {
        let mut w = [0.0; 4];
        w[bound.index()] = 1.0;
        Self::from_bound_weights(w).expect("unit weight is valid")
    }

    /// Sum rate at one receiver: the multiaccess water-filling form.
    pub fn opportunistic(rx: Receiver) -> Self {
        Self::single(match rx {
            Receiver::Relay => Bound::RelaySum,
            Receiver::Destination => Bound::DestinationSum,
        })
    }

    /// `(1 − α)` on the relay sum and `α` on the destination sum.
    pub fn equalizer(alpha: f64) -> Result<Self> {
        Self::from_bound_weights([1.0 - alpha, alpha, 0.0, 0.0])
    }

    pub fn bound_weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn terms(&self) -> &[FractionTerm] {
        &self.terms
    }

    /// Total weight on bounds that include the relay-to-destination link.
    pub fn relay_weight(&self) -> f64 {
        self.weights[1] + self.weights[2] + self.weights[3]
    }

    /// The fraction terms seen by one user, as `(coefficient, receiver, coupling)`.
    pub fn user_terms(&self, user: User) -> Vec<(f64, Receiver, Coupling)> {
        self.terms
            .iter()
            .map(|t| (t.coefficient, t.receivers[user.index()], t.coupling))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct PreparedTerm {
    c: f64,
    g: [f64; 2],
    joint: bool,
}

/// The source part of the Lagrangian restricted to a single fading state.
#[derive(Debug, Clone)]
pub(crate) struct StateProblem {
    terms: ArrayVec<PreparedTerm, 4>,
    theta: f64,
}

impl StateProblem {
    pub(crate) fn new(spec: &WeightedKktSpec, state: &GainState, theta: f64) -> Self {
        let terms = spec
            .terms
            .iter()
            .map(|t| PreparedTerm {
                c: t.coefficient,
                g: [
                    state.gain(t.receivers[0], User::One),
                    state.gain(t.receivers[1], User::Two),
                ],
                joint: t.coupling == Coupling::Joint,
            })
            .collect();
        StateProblem { terms, theta }
    }

    fn load(&self, t: &PreparedTerm, k: usize, p: [f64; 2]) -> f64 {
        if t.joint {
            t.g[0] * p[0] + t.g[1] * p[1]
        } else {
            t.g[k] * p[k]
        }
    }

    /// `f_k` at powers `p`.
    pub(crate) fn marginal(&self, k: usize, p: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.c * t.g[k] / (1.0 + self.load(t, k, p) / self.theta))
            .sum()
    }

    /// `∂f_k/∂P_k`, always nonpositive.
    fn marginal_slope(&self, k: usize, p: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let x = 1.0 + self.load(t, k, p) / self.theta;
                -t.c * t.g[k] * t.g[k] / (self.theta * x * x)
            })
            .sum()
    }

    /// Weighted rate terms in nats: `Σ_t c_t θ ln(1 + s_t / θ)`.
    pub(crate) fn objective(&self, p: [f64; 2]) -> f64 {
        let th = self.theta;
        self.terms
            .iter()
            .map(|t| {
                let logs = if t.joint {
                    (self.load(t, 0, p) / th).ln_1p()
                } else {
                    (t.g[0] * p[0] / th).ln_1p() + (t.g[1] * p[1] / th).ln_1p()
                };
                t.c * th * logs
            })
            .sum()
    }

    /// Per-state Lagrangian in nats with prices `mu = ν ln 2`.
    pub(crate) fn lagrangian(&self, p: [f64; 2], mu: [f64; 2]) -> f64 {
        let mut l = self.objective(p);
        for k in 0..2 {
            if p[k] > 0.0 {
                l -= mu[k] * p[k];
            }
        }
        l
    }

    /// Largest marginal user `k` can ever see in this state.
    pub(crate) fn peak_marginal(&self, k: usize) -> f64 {
        self.marginal(k, [0.0, 0.0])
    }

    /// Root in `P_k` of `f_k(P_k; P_j = other) = mu`, or 0 when the marginal at
    /// zero power is already at or below the price.
    pub(crate) fn user_root(&self, k: usize, other: f64, mu: f64) -> f64 {
        let j = 1 - k;
        let mut p = [0.0; 2];
        p[j] = other;
        if !mu.is_finite() || self.marginal(k, p) <= mu {
            return 0.0;
        }
        let th = self.theta;
        let csum: f64 = self.terms.iter().map(|t| t.c).sum();
        let m = mu / csum;
        // every term's own root brackets the root of the weighted mean
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut any_zero = false;
        for t in &self.terms {
            let g = t.g[k];
            if g > 0.0 {
                let offset = if t.joint { t.g[j] * other } else { 0.0 };
                let r = th / m - (th + offset) / g;
                lo = lo.min(r);
                hi = hi.max(r);
            } else {
                any_zero = true;
            }
        }
        let lo = if any_zero { 0.0 } else { lo.max(0.0) };
        let hi = hi.max(lo).min(th / mu * csum.max(1.0));

        // Newton from the left on a convex decreasing function is monotone
        let mut x = lo;
        for _ in 0..100 {
            p[k] = x;
            let f = self.marginal(k, p) - mu;
            if f <= mu * 1e-15 {
                return x;
            }
            let slope = self.marginal_slope(k, p);
            let step = -f / slope;
            let next = x + step;
            if !(next.is_finite()) || next > hi * (1.0 + 1e-12) + 1e-300 {
                break;
            }
            if step <= x * 1e-16 {
                return next;
            }
            x = next;
        }
        // fallback: plain bisection on [x, hi]
        let (mut a, mut b) = (x, hi.max(x));
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            p[k] = mid;
            if self.marginal(k, p) > mu {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Best point on each axis: `(a1, 0)` and `(0, a2)`.
    pub(crate) fn axis_roots(&self, mu: [f64; 2]) -> [f64; 2] {
        [self.user_root(0, 0.0, mu[0]), self.user_root(1, 0.0, mu[1])]
    }

    /// Axis-restricted solve: the better of user 1 only, user 2 only or
    /// silence by per-state Lagrangian value (ties to user 1, then to zero).
    pub(crate) fn solve_axis_only(&self, mu: [f64; 2]) -> [f64; 2] {
        let [a1, a2] = self.axis_roots(mu);
        let c1 = [a1, 0.0];
        let c2 = [0.0, a2];
        let l1 = self.lagrangian(c1, mu);
        let l2 = self.lagrangian(c2, mu);
        let best = if l1 >= l2 { c1 } else { c2 };
        if self.lagrangian(best, mu) > 0.0 {
            best
        } else {
            [0.0, 0.0]
        }
    }

    /// Exact maximizer of the per-state Lagrangian over `P >= 0`.
    ///
    /// The axis candidates are returned whenever they satisfy the KKT
    /// conditions; otherwise the stationary point with both powers positive
    /// is located.
    pub(crate) fn solve(&self, mu: [f64; 2]) -> [f64; 2] {
        let [a1, a2] = self.axis_roots(mu);
        if a1 == 0.0 && a2 == 0.0 {
            return [0.0, 0.0];
        }
        let kkt1 = a1 > 0.0 && (!mu[1].is_finite() || self.marginal(1, [a1, 0.0]) <= mu[1]);
        let kkt2 = a2 > 0.0 && (!mu[0].is_finite() || self.marginal(0, [0.0, a2]) <= mu[0]);
        match (kkt1, kkt2) {
            (true, true) => {
                if self.lagrangian([a1, 0.0], mu) >= self.lagrangian([0.0, a2], mu) {
                    [a1, 0.0]
                } else {
                    [0.0, a2]
                }
            }
            (true, false) => [a1, 0.0],
            (false, true) => [0.0, a2],
            (false, false) => self.solve_interior(mu, a1),
        }
    }

    /// Hessian of the objective (negative semidefinite).
    fn hessian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for t in &self.terms {
            if t.joint {
                let x = 1.0 + self.load(t, 0, p) / self.theta;
                let s = t.c / (self.theta * x * x);
                for a in 0..2 {
                    for b in 0..2 {
                        h[a][b] -= s * t.g[a] * t.g[b];
                    }
                }
            } else {
                for k in 0..2 {
                    let x = 1.0 + t.g[k] * p[k] / self.theta;
                    h[k][k] -= t.c * t.g[k] * t.g[k] / (self.theta * x * x);
                }
            }
        }
        h
    }

    /// Both users active: damped Newton on the stationarity equations,
    /// falling back to a nested search along `P_2`.
    fn solve_interior(&self, mu: [f64; 2], a1: f64) -> [f64; 2] {
        let [_, a2] = self.axis_roots(mu);
        let mut p = [0.5 * a1, 0.5 * a2];
        let mut value = self.lagrangian(p, mu);
        for _ in 0..60 {
            let r = [self.marginal(0, p) - mu[0], self.marginal(1, p) - mu[1]];
            if r[0].abs() <= 1e-14 * mu[0] && r[1].abs() <= 1e-14 * mu[1] {
                return p;
            }
            let h = self.hessian(p);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if !(det > 0.0) {
                break;
            }
            let d = [
                -(h[1][1] * r[0] - h[0][1] * r[1]) / det,
                -(h[0][0] * r[1] - h[1][0] * r[0]) / det,
            ];
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let q = [p[0] + step * d[0], p[1] + step * d[1]];
                if q[0] > 0.0 && q[1] > 0.0 {
                    let v = self.lagrangian(q, mu);
                    if v >= value - 1e-14 * (1.0 + value.abs()) {
                        p = q;
                        value = v;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        self.solve_interior_nested(mu, a1)
    }

    fn solve_interior_nested(&self, mu: [f64; 2], a1: f64) -> [f64; 2] {
        let respond = |p2: f64| self.user_root(0, p2, mu[0]);
        let residual = |p2: f64| {
            let p1 = respond(p2);
            (self.marginal(1, [p1, p2]) - mu[1], p1)
        };
        let upper = self.theta / mu[1];
        let lo = Sample {
            x: 0.0,
            f: self.marginal(1, [a1, 0.0]) - mu[1],
            data: a1,
        };
        let (fh, dh) = residual(upper);
        let hi = Sample {
            x: upper,
            f: fh.min(0.0),
            data: dh,
        };
        let out = find_root(lo, hi, mu[1] * 1e-14, upper * 1e-16, 400, |x| {
            Ok(residual(x))
        })
        .expect("infallible evaluation");
        match out {
            RootOutcome::Converged(s) => [s.data, s.x],
            RootOutcome::Jump { lo, hi } => {
                let p2 = 0.5 * (lo.x + hi.x);
                [respond(p2), p2]
            }
        }
    }
}

/// Prices `ν ln 2` used by the per-state problems; an inactive multiplier
/// freezes its source at zero power.
pub(crate) fn prices(nu: [Option<f64>; 2]) -> [f64; 2] {
    nu.map(|n| n.map_or(f64::INFINITY, |v| v * LN_2))
}

/// Per-state source powers maximizing the spec's Lagrangian at multipliers
/// `nu` (`None` = source held silent).
///
/// Candidates are user 1 alone, user 2 alone and silence; the stationary
/// point with both users on is used only when neither single-user candidate
/// satisfies the KKT conditions, which can happen for specs mixing more than
/// one fraction.
pub fn per_state_axis_solve(
    state: &GainState,
    spec: &WeightedKktSpec,
    nu: [Option<f64>; 2],
    theta: f64,
) -> [f64; 2] {
    StateProblem::new(spec, state, theta).solve(prices(nu))
}

/// The axis candidates alone, without the interior fallback.
pub fn axis_candidate_solve(
    state: &GainState,
    spec: &WeightedKktSpec,
    nu: [Option<f64>; 2],
    theta: f64,
) -> [f64; 2] {
    StateProblem::new(spec, state, theta).solve_axis_only(prices(nu))
}

/// `(f_1, f_2)` at powers `p`.
pub fn kkt_marginals(
    state: &GainState,
    spec: &WeightedKktSpec,
    p: [f64; 2],
    theta: f64,
) -> [f64; 2] {
    let sp = StateProblem::new(spec, state, theta);
    [sp.marginal(0, p), sp.marginal(1, p)]
}

/// Per-state Lagrangian `Σ_t c_t θ ln(1 + s_t/θ) − Σ_k ν_k ln2 · P_k` (nats).
pub fn state_lagrangian(
    state: &GainState,
    spec: &WeightedKktSpec,
    nu: [f64; 2],
    p: [f64; 2],
    theta: f64,
) -> f64 {
    StateProblem::new(spec, state, theta).lagrangian(p, nu.map(|v| v * LN_2))
}
