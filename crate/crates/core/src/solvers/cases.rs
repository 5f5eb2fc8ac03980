//! Candidate policies for every case.
//!
//! Each case maximizes a nonnegative combination `Σ λ_b T_b` of the four
//! sum-rate bounds (see [`Bound`]); the boundary multipliers `α` are the
//! entries of `λ`. Single-α cases search the weight moved between two bounds
//! until those bounds are equal; the `(l, 3c)` cases nest that search inside
//! a search on the weight of the individual bound.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::classifier::CaseLabel;
use crate::ensemble::{FadingEnsemble, Receiver, User};
use crate::error::{Error, Result};
use crate::rates::{corner_rates, Bound, ChannelConfig, PowerPolicy, RateSummary};
use crate::root::{find_root, RootOutcome, Sample};

use super::calibrate::calibrate_with_hint;
use super::kkt::WeightedKktSpec;
use super::waterfill::{waterfill, Waterfill};

/// Target residual of the multiplier searches, in bits.
///
/// Far below the classifier's equality tolerance so that a found boundary
/// point never also passes as a member of a neighbouring open set.
pub const ALPHA_TOLERANCE: f64 = 1e-10;

/// Iteration cap for the multiplier searches.
const ALPHA_ITERATIONS: usize = 200;

/// Grid resolution of the fallback scan for the two-multiplier cases.
const GRID_STEPS: usize = 64;

/// Lagrange multipliers of a case solution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualVariables {
    /// `ν_1, ν_2, ν_r`; `None` marks a transmitter held silent.
    pub nu: [Option<f64>; 3],
    /// Boundary multipliers. Case 3c: weight on the destination sum.
    /// Single-α boundaries: weight on the individual bound. `(l, 3c)`:
    /// `[α1, α2]` with `α1` on the individual bound, `α2` on the destination
    /// sum and `α3 = 1 − α1 − α2` on the relay sum.
    pub alpha: Vec<f64>,
    /// Weights of the combination of bounds the policy maximizes, in
    /// `Bound::ALL` order.
    pub bound_weights: [f64; 4],
}

/// A candidate policy with its multipliers and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSolution {
    pub policy: PowerPolicy,
    pub duals: DualVariables,
    pub summary: RateSummary,
}

impl CaseSolution {
    pub fn sum_rate(&self) -> f64 {
        self.summary.sum_rate()
    }
}

/// The six boundary cases `(l, n)`: `l` picks the individual bound, `n` the
/// receiver(s) of the joint bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCase {
    OneThreeA,
    TwoThreeA,
    OneThreeB,
    TwoThreeB,
    OneThreeC,
    TwoThreeC,
}

impl BoundaryCase {
    pub const ALL: [BoundaryCase; 6] = [
        BoundaryCase::OneThreeA,
        BoundaryCase::TwoThreeA,
        BoundaryCase::OneThreeB,
        BoundaryCase::TwoThreeB,
        BoundaryCase::OneThreeC,
        BoundaryCase::TwoThreeC,
    ];

    /// The individual bound: case 1's for `l = 1`, case 2's for `l = 2`.
    pub fn individual_bound(self) -> Bound {
        use BoundaryCase::*;
        match self {
            OneThreeA | OneThreeB | OneThreeC => Bound::DestinationRelay,
            TwoThreeA | TwoThreeB | TwoThreeC => Bound::RelayDestination,
        }
    }

    /// The joint bound, or `None` for the equalizer-based cases.
    pub fn joint_bound(self) -> Option<Bound> {
        use BoundaryCase::*;
        match self {
            OneThreeA | TwoThreeA => Some(Bound::RelaySum),
            OneThreeB | TwoThreeB => Some(Bound::DestinationSum),
            OneThreeC | TwoThreeC => None,
        }
    }

    pub fn label(self) -> CaseLabel {
        use BoundaryCase::*;
        match self {
            OneThreeA => CaseLabel::Boundary1With3a,
            TwoThreeA => CaseLabel::Boundary2With3a,
            OneThreeB => CaseLabel::Boundary1With3b,
            TwoThreeB => CaseLabel::Boundary2With3b,
            OneThreeC => CaseLabel::Boundary1With3c,
            TwoThreeC => CaseLabel::Boundary2With3c,
        }
    }
}

/// Maximizer of one weighted combination of bounds.
#[derive(Debug, Clone)]
struct Candidate {
    weights: [f64; 4],
    policy: PowerPolicy,
    nu: [Option<f64>; 2],
    summary: RateSummary,
}

impl Candidate {
    fn bound(&self, b: Bound) -> f64 {
        self.summary.bound(b)
    }
}

/// Result of a search moving weight from bound `a` (β = 0) to bound `b`.
#[derive(Debug, Clone)]
enum PairOutcome {
    /// `T_a = T_b` at the returned point.
    Found(Candidate, f64),
    /// `T_a < T_b` already at β = 0.
    Below(Candidate),
    /// `T_a > T_b` even at β = 1.
    Above(Candidate),
}

impl PairOutcome {
    fn beta(&self) -> f64 {
        match self {
            PairOutcome::Found(_, b) => *b,
            PairOutcome::Below(_) => 0.0,
            PairOutcome::Above(_) => 1.0,
        }
    }

    fn candidate(&self) -> &Candidate {
        match self {
            PairOutcome::Found(c, _) | PairOutcome::Below(c) | PairOutcome::Above(c) => c,
        }
    }
}

fn unit(b: Bound) -> [f64; 4] {
    let mut w = [0.0; 4];
    w[b.index()] = 1.0;
    w
}

fn key(w: &[f64; 4]) -> [u64; 4] {
    w.map(f64::to_bits)
}

/// Solves the cases of one channel and ensemble, caching every weighted
/// maximizer it computes so later cases can reuse earlier endpoints.
pub struct CaseSolver<'a> {
    e: &'a FadingEnsemble,
    cfg: ChannelConfig,
    relay: Waterfill,
    cache: RefCell<HashMap<[u64; 4], Candidate>>,
}

impl<'a> CaseSolver<'a> {
    pub fn new(e: &'a FadingEnsemble, cfg: &ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let gains: Vec<f64> = e.states().iter().map(|s| s.g_dr).collect();
        let relay = waterfill(&gains, e.weights(), cfg.pr, cfg.theta_bar());
        Ok(CaseSolver {
            e,
            cfg: *cfg,
            relay,
            cache: RefCell::new(HashMap::new()),
        })
    }

    fn make(&self, weights: [f64; 4], p: [Vec<f64>; 2], nu: [Option<f64>; 2]) -> Result<Candidate> {
        let [p1, p2] = p;
        let policy = PowerPolicy {
            p1,
            p2,
            pr: self.relay.powers.clone(),
        };
        let summary = corner_rates(&policy, self.e, &self.cfg)?;
        Ok(Candidate {
            weights,
            policy,
            nu,
            summary,
        })
    }

    fn source_waterfill(&self, user: User, rx: Receiver) -> Waterfill {
        let gains: Vec<f64> = self.e.states().iter().map(|s| s.gain(rx, user)).collect();
        waterfill(
            &gains,
            self.e.weights(),
            self.cfg.source_budget(user),
            self.cfg.theta,
        )
    }

    /// Both sources water-fill independently: user 1 towards `rx1`, user 2
    /// towards the other receiver.
    fn decoupled(&self, rx1: Receiver) -> Result<Candidate> {
        let (bound, rx2) = match rx1 {
            Receiver::Destination => (Bound::DestinationRelay, Receiver::Relay),
            Receiver::Relay => (Bound::RelayDestination, Receiver::Destination),
        };
        let w = unit(bound);
        if let Some(c) = self.cache.borrow().get(&key(&w)) {
            return Ok(c.clone());
        }
        let a = self.source_waterfill(User::One, rx1);
        let b = self.source_waterfill(User::Two, rx2);
        let c = self.make(w, [a.powers, b.powers], [a.nu, b.nu])?;
        self.cache.borrow_mut().insert(key(&w), c.clone());
        Ok(c)
    }

    /// Maximizer of `Σ weights[b] T_b`; `hint` seeds the source prices.
    fn weighted(&self, weights: [f64; 4], hint: [Option<f64>; 2]) -> Result<Candidate> {
        if weights == unit(Bound::DestinationRelay) {
            return self.decoupled(Receiver::Destination);
        }
        if weights == unit(Bound::RelayDestination) {
            return self.decoupled(Receiver::Relay);
        }
        if let Some(c) = self.cache.borrow().get(&key(&weights)) {
            return Ok(c.clone());
        }
        let spec = WeightedKktSpec::from_bound_weights(weights)?;
        let alloc = calibrate_with_hint(&spec, self.e, &self.cfg, hint)?;
        let nu = alloc.nu;
        let c = self.make(weights, alloc.powers, nu)?;
        self.cache.borrow_mut().insert(key(&weights), c.clone());
        Ok(c)
    }

    fn hint_of(c: &Candidate) -> [Option<f64>; 2] {
        c.nu.map(|n| n.map(|v| v * std::f64::consts::LN_2))
    }

    fn solution(&self, c: &Candidate, alpha: Vec<f64>) -> CaseSolution {
        CaseSolution {
            policy: c.policy.clone(),
            duals: DualVariables {
                nu: [c.nu[0], c.nu[1], self.relay.nu],
                alpha,
                bound_weights: c.weights,
            },
            summary: c.summary,
        }
    }

    /// Mixes two candidates' policies, rates recomputed from the mixture.
    fn mix(&self, a: &Candidate, b: &Candidate, t: f64) -> Result<Candidate> {
        let policy = a.policy.mix(&b.policy, t);
        let summary = corner_rates(&policy, self.e, &self.cfg)?;
        let weights = [0, 1, 2, 3].map(|j| t * a.weights[j] + (1.0 - t) * b.weights[j]);
        let nu = [0, 1].map(|k| match (a.nu[k], b.nu[k]) {
            (Some(x), Some(y)) => Some(t * x + (1.0 - t) * y),
            (x, _) => x,
        });
        Ok(Candidate {
            weights,
            policy,
            nu,
            summary,
        })
    }

    /// Finds `t` with `resid(mix(a, b, t)) = 0` given `resid(a) >= 0 >= resid(b)`.
    fn mix_to_zero<F>(&self, a: &Candidate, b: &Candidate, resid: F) -> Result<(Candidate, f64)>
    where
        F: Fn(&Candidate) -> f64,
    {
        // t = 1 is `a`; the residual of a mixture is continuous in t
        let eval = |s: f64| -> Result<(f64, Candidate)> {
            let c = self.mix(a, b, 1.0 - s)?;
            Ok((resid(&c), c))
        };
        let lo = Sample {
            x: 0.0,
            f: resid(a),
            data: a.clone(),
        };
        let hi = Sample {
            x: 1.0,
            f: resid(b),
            data: b.clone(),
        };
        match find_root(lo, hi, ALPHA_TOLERANCE, 1e-15, ALPHA_ITERATIONS, eval)? {
            RootOutcome::Converged(s) => Ok((s.data, s.x)),
            RootOutcome::Jump { lo, .. } => Ok((lo.data, lo.x)),
        }
    }

    /// Moves `mass` between bounds `a` (β = 0) and `b` (β = 1) on top of the
    /// fixed weights until `T_a = T_b`. `T_a − T_b` is nonincreasing in β.
    fn pair_search(
        &self,
        fixed: [f64; 4],
        mass: f64,
        a: Bound,
        b: Bound,
        hint: [Option<f64>; 2],
    ) -> Result<PairOutcome> {
        let weights_at = |beta: f64| {
            let mut w = fixed;
            w[a.index()] += mass * (1.0 - beta);
            w[b.index()] += mass * beta;
            normalize(w)
        };
        let resid = |c: &Candidate| c.bound(a) - c.bound(b);

        let c0 = self.weighted(weights_at(0.0), hint)?;
        let r0 = resid(&c0);
        if mass <= 0.0 {
            return Ok(if r0.abs() <= ALPHA_TOLERANCE {
                PairOutcome::Found(c0, 0.5)
            } else if r0 < 0.0 {
                PairOutcome::Below(c0)
            } else {
                PairOutcome::Above(c0)
            });
        }
        if r0 < -ALPHA_TOLERANCE {
            return Ok(PairOutcome::Below(c0));
        }
        let c1 = self.weighted(weights_at(1.0), Self::hint_of(&c0))?;
        let r1 = resid(&c1);
        if r1 > ALPHA_TOLERANCE {
            return Ok(PairOutcome::Above(c1));
        }
        match (r0.abs() <= ALPHA_TOLERANCE, r1.abs() <= ALPHA_TOLERANCE) {
            (true, true) => {
                let mid = self.weighted(weights_at(0.5), Self::hint_of(&c0))?;
                return Ok(PairOutcome::Found(mid, 0.5));
            }
            (true, false) => return Ok(PairOutcome::Found(c0, 0.0)),
            (false, true) => return Ok(PairOutcome::Found(c1, 1.0)),
            (false, false) => {}
        }

        let lo = Sample {
            x: 0.0,
            f: r0,
            data: c0,
        };
        let hi = Sample {
            x: 1.0,
            f: r1,
            data: c1,
        };
        let last_hint = RefCell::new(hint);
        let out = find_root(lo, hi, ALPHA_TOLERANCE, 1e-15, ALPHA_ITERATIONS, |beta| {
            let c = self.weighted(weights_at(beta), *last_hint.borrow())?;
            *last_hint.borrow_mut() = Self::hint_of(&c);
            Ok((resid(&c), c))
        })?;
        Ok(match out {
            RootOutcome::Converged(s) => PairOutcome::Found(s.data, s.x),
            RootOutcome::Jump { lo, hi } => {
                let (c, s) = self.mix_to_zero(&lo.data, &hi.data, resid)?;
                let beta = lo.x + s * (hi.x - lo.x);
                PairOutcome::Found(c, beta)
            }
        })
    }

    /// Case 1: `R^max_{1,d} + R^max_{2,r}` with decoupled water-filling.
    pub fn case1(&self) -> Result<CaseSolution> {
        let c = self.decoupled(Receiver::Destination)?;
        Ok(self.solution(&c, Vec::new()))
    }

    /// Case 2: `R^max_{1,r} + R^max_{2,d}` with decoupled water-filling.
    pub fn case2(&self) -> Result<CaseSolution> {
        let c = self.decoupled(Receiver::Relay)?;
        Ok(self.solution(&c, Vec::new()))
    }

    /// Cases 3a (relay) and 3b (destination): multiaccess sum rate at one
    /// receiver, opportunistic in the sources.
    pub fn opportunistic(&self, rx: Receiver) -> Result<CaseSolution> {
        let b = match rx {
            Receiver::Relay => Bound::RelaySum,
            Receiver::Destination => Bound::DestinationSum,
        };
        let c = self.weighted(unit(b), [None, None])?;
        Ok(self.solution(&c, Vec::new()))
    }

    /// Case 3c: weight `α` on the destination sum, `1 − α` on the relay sum,
    /// with `α` chosen so both sums are equal.
    pub fn equalizer(&self) -> Result<CaseSolution> {
        match self.pair_search(
            [0.0; 4],
            1.0,
            Bound::RelaySum,
            Bound::DestinationSum,
            [None, None],
        )? {
            PairOutcome::Found(c, beta) => Ok(self.solution(&c, vec![beta])),
            _ => Err(Error::NotInCase(CaseLabel::Case3c)),
        }
    }

    /// One of the six boundary cases.
    pub fn boundary(&self, case: BoundaryCase) -> Result<CaseSolution> {
        let side = case.individual_bound();
        match case.joint_bound() {
            Some(joint) => match self.pair_search([0.0; 4], 1.0, joint, side, [None, None])? {
                PairOutcome::Found(c, beta) => Ok(self.solution(&c, vec![beta])),
                _ => Err(Error::NotInCase(case.label())),
            },
            None => self.boundary_with_equalizer(case, side),
        }
    }

    /// Inner equalizer search with weight `a1` on the individual bound.
    fn inner(&self, side: Bound, a1: f64, hint: [Option<f64>; 2]) -> Result<PairOutcome> {
        let mut fixed = [0.0; 4];
        fixed[side.index()] = a1;
        self.pair_search(
            fixed,
            1.0 - a1,
            Bound::RelaySum,
            Bound::DestinationSum,
            hint,
        )
    }

    fn outer_residual(side: Bound, inner: &PairOutcome) -> f64 {
        let c = inner.candidate();
        let beta = inner.beta();
        c.bound(side)
            - ((1.0 - beta) * c.bound(Bound::RelaySum) + beta * c.bound(Bound::DestinationSum))
    }

    fn boundary_with_equalizer(&self, case: BoundaryCase, side: Bound) -> Result<CaseSolution> {
        let not_in_case = || Error::NotInCase(case.label());
        let finish = |inner: &PairOutcome, a1: f64| -> Result<CaseSolution> {
            match inner {
                PairOutcome::Found(c, beta) => Ok(self.solution(c, vec![a1, (1.0 - a1) * beta])),
                _ => Err(not_in_case()),
            }
        };

        let q_at = |a1: f64, hint: [Option<f64>; 2]| -> Result<(f64, PairOutcome)> {
            let inner = self.inner(side, a1, hint)?;
            Ok((Self::outer_residual(side, &inner), inner))
        };

        // q(α1) is nondecreasing; its zero is the wanted multiplier
        let (q0, in0) = q_at(0.0, [None, None])?;
        if q0.abs() <= ALPHA_TOLERANCE {
            return finish(&in0, 0.0);
        }
        let (q1, in1) = q_at(1.0, Self::hint_of(in0.candidate()))?;
        if q1.abs() <= ALPHA_TOLERANCE {
            return finish(&in1, 1.0);
        }

        let (lo, hi) = if q0 < 0.0 && q1 > 0.0 {
            (
                Sample {
                    x: 0.0,
                    f: -q0,
                    data: in0,
                },
                Sample {
                    x: 1.0,
                    f: -q1,
                    data: in1,
                },
            )
        } else if q0 > 0.0 && q1 < 0.0 {
            // monotone bracketing failed: scan for a sign change
            match self.grid_scan(side, &q_at)? {
                Some(pair) => pair,
                None => return Err(not_in_case()),
            }
        } else {
            return Err(not_in_case());
        };

        let last_hint = RefCell::new(Self::hint_of(lo.data.candidate()));
        let out = find_root(lo, hi, ALPHA_TOLERANCE, 1e-15, ALPHA_ITERATIONS, |a1| {
            let (q, inner) = q_at(a1, *last_hint.borrow())?;
            *last_hint.borrow_mut() = Self::hint_of(inner.candidate());
            Ok((-q, inner))
        })?;
        match out {
            RootOutcome::Converged(s) => finish(&s.data, s.x),
            RootOutcome::Jump { lo, hi } => {
                let (a, b) = (lo.data.candidate(), hi.data.candidate());
                let (beta_a, beta_b) = (lo.data.beta(), hi.data.beta());
                let resid = |c: &Candidate| {
                    // blend the pair weight like the policies
                    let t = pair_fraction(c, a, b);
                    let beta = t * beta_a + (1.0 - t) * beta_b;
                    -(c.bound(side)
                        - ((1.0 - beta) * c.bound(Bound::RelaySum)
                            + beta * c.bound(Bound::DestinationSum)))
                };
                let (c, s) = self.mix_to_zero(a, b, resid)?;
                let a1 = lo.x + s * (hi.x - lo.x);
                let beta = (1.0 - s) * beta_a + s * beta_b;
                Ok(self.solution(&c, vec![a1, (1.0 - a1) * beta]))
            }
        }
    }

    /// Scans `α1` on a grid for adjacent points with `q <= 0 <= q`, returning
    /// them as a bracket for the negated residual.
    fn grid_scan<F>(
        &self,
        _side: Bound,
        q_at: &F,
    ) -> Result<Option<(Sample<PairOutcome>, Sample<PairOutcome>)>>
    where
        F: Fn(f64, [Option<f64>; 2]) -> Result<(f64, PairOutcome)>,
    {
        let mut prev: Option<Sample<PairOutcome>> = None;
        for i in 0..=GRID_STEPS {
            let a1 = i as f64 / GRID_STEPS as f64;
            let hint = prev
                .as_ref()
                .map_or([None, None], |p| Self::hint_of(p.data.candidate()));
            let (q, inner) = q_at(a1, hint)?;
            let s = Sample {
                x: a1,
                f: -q,
                data: inner,
            };
            if let Some(p) = prev.take() {
                if p.f >= 0.0 && s.f <= 0.0 {
                    return Ok(Some((p, s)));
                }
            }
            prev = Some(s);
        }
        Ok(None)
    }
}

/// Fraction `t` such that `c` is the mixture `t·a + (1 − t)·b`, read off the
/// multiplier weights (exact for mixtures built by [`CaseSolver::mix`]).
fn pair_fraction(c: &Candidate, a: &Candidate, b: &Candidate) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..4 {
        let d = a.weights[j] - b.weights[j];
        num += (c.weights[j] - b.weights[j]) * d;
        den += d * d;
    }
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Clears rounding noise so `WeightedKktSpec` accepts the weights.
fn normalize(mut w: [f64; 4]) -> [f64; 4] {
    for x in &mut w {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in &mut w {
            *x /= s;
        }
    }
    w
}

/// Case 1 policy and multipliers.
pub fn solve_case1(e: &FadingEnsemble, cfg: &ChannelConfig) -> Result<CaseSolution> {
    CaseSolver::new(e, cfg)?.case1()
}

/// Case 2 policy and multipliers.
pub fn solve_case2(e: &FadingEnsemble, cfg: &ChannelConfig) -> Result<CaseSolution> {
    CaseSolver::new(e, cfg)?.case2()
}

/// Case 3a (`Receiver::Relay`) or 3b (`Receiver::Destination`).
pub fn solve_opportunistic(
    rx: Receiver,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<CaseSolution> {
    CaseSolver::new(e, cfg)?.opportunistic(rx)
}

/// Case 3c equalizer policy.
pub fn solve_equalizer(e: &FadingEnsemble, cfg: &ChannelConfig) -> Result<CaseSolution> {
    CaseSolver::new(e, cfg)?.equalizer()
}

/// One of the boundary cases.
pub fn solve_boundary(
    case: BoundaryCase,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<CaseSolution> {
    CaseSolver::new(e, cfg)?.boundary(case)
}

/// Maximizer of an arbitrary weighted combination of the bounds, with the
/// relay water-filling on its own link.
pub fn solve_weighted(
    weights: [f64; 4],
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<CaseSolution> {
    let solver = CaseSolver::new(e, cfg)?;
    let c = solver.weighted(weights, [None, None])?;
    Ok(solver.solution(&c, Vec::new()))
}
