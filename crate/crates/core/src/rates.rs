//! Decode-and-forward rate functionals for a fixed power policy.
//!
//! All rates are in bits per channel use. The sources share the fraction θ of
//! the band, the relay transmits on the remaining 1 − θ, and every
//! expectation is a weighted sum over the ensemble in state order.

use std::f64::consts::LN_2;

use crate::ensemble::{FadingEnsemble, GainState, Receiver, User};
use crate::error::{Error, Result};

/// Relative slack allowed on an average-power budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// `bw · log2(1 + snr / bw)`: rate of a Gaussian link occupying bandwidth
/// fraction `bw` with received power `snr` (unit noise).
#[inline]
pub fn band_rate(bw: f64, snr: f64) -> f64 {
    bw * (snr / bw).ln_1p() / LN_2
}

/// A transmitter with an average-power budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transmitter {
    Source(User),
    Relay,
}

impl Transmitter {
    pub const ALL: [Transmitter; 3] = [
        Transmitter::Source(User::One),
        Transmitter::Source(User::Two),
        Transmitter::Relay,
    ];

    pub fn index(self) -> usize {
        match self {
            Transmitter::Source(u) => u.index(),
            Transmitter::Relay => 2,
        }
    }
}

/// Bandwidth split and average power budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Fraction of the band used by the sources, in (0, 1).
    pub theta: f64,
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
}

impl ChannelConfig {
    pub fn new(theta: f64, p1: f64, p2: f64, pr: f64) -> Result<Self> {
        let cfg = ChannelConfig { theta, p1, p2, pr };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta = {} must lie in (0, 1)",
                self.theta
            )));
        }
        for (name, b) in [("p1", self.p1), ("p2", self.p2), ("pr", self.pr)] {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "budget {name} = {b} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    /// Bandwidth fraction of the relay-to-destination channel.
    pub fn theta_bar(&self) -> f64 {
        1.0 - self.theta
    }

    pub fn budget(&self, tx: Transmitter) -> f64 {
        match tx {
            Transmitter::Source(User::One) => self.p1,
            Transmitter::Source(User::Two) => self.p2,
            Transmitter::Relay => self.pr,
        }
    }

    pub fn source_budget(&self, user: User) -> f64 {
        self.budget(Transmitter::Source(user))
    }

    pub fn with_budget(mut self, tx: Transmitter, value: f64) -> Self {
        match tx {
            Transmitter::Source(User::One) => self.p1 = value,
            Transmitter::Source(User::Two) => self.p2 = value,
            Transmitter::Relay => self.pr = value,
        }
        self
    }

    pub fn swapped_users(&self) -> Self {
        ChannelConfig {
            p1: self.p2,
            p2: self.p1,
            ..*self
        }
    }
}

/// Per-state transmit powers of both sources and the relay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerPolicy {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub pr: Vec<f64>,
}

impl PowerPolicy {
    pub fn zeros(n: usize) -> Self {
        PowerPolicy {
            p1: vec![0.0; n],
            p2: vec![0.0; n],
            pr: vec![0.0; n],
        }
    }

    /// Policy spending each budget uniformly over all states.
    pub fn uniform(n: usize, cfg: &ChannelConfig) -> Self {
        PowerPolicy {
            p1: vec![cfg.p1; n],
            p2: vec![cfg.p2; n],
            pr: vec![cfg.pr; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn powers(&self, tx: Transmitter) -> &[f64] {
        match tx {
            Transmitter::Source(User::One) => &self.p1,
            Transmitter::Source(User::Two) => &self.p2,
            Transmitter::Relay => &self.pr,
        }
    }

    pub fn powers_mut(&mut self, tx: Transmitter) -> &mut Vec<f64> {
        match tx {
            Transmitter::Source(User::One) => &mut self.p1,
            Transmitter::Source(User::Two) => &mut self.p2,
            Transmitter::Relay => &mut self.pr,
        }
    }

    pub fn source(&self, user: User) -> &[f64] {
        self.powers(Transmitter::Source(user))
    }

    /// Ensures every power vector has one entry per ensemble state.
    pub fn check_aligned(&self, e: &FadingEnsemble) -> Result<()> {
        for v in [&self.p1, &self.p2, &self.pr] {
            if v.len() != e.len() {
                return Err(Error::Misaligned {
                    expected: e.len(),
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Average power of each transmitter, in `Transmitter::ALL` order.
    pub fn averages(&self, e: &FadingEnsemble) -> [f64; 3] {
        Transmitter::ALL.map(|tx| {
            e.weights()
                .iter()
                .zip(self.powers(tx))
                .map(|(w, p)| w * p)
                .sum()
        })
    }

    /// Nonnegative and within every budget up to [`BUDGET_TOLERANCE`].
    pub fn is_feasible(&self, e: &FadingEnsemble, cfg: &ChannelConfig) -> bool {
        if self.check_aligned(e).is_err() {
            return false;
        }
        let nonneg = [&self.p1, &self.p2, &self.pr]
            .iter()
            .all(|v| v.iter().all(|&p| p >= 0.0 && p.is_finite()));
        let avg = self.averages(e);
        nonneg
            && Transmitter::ALL.iter().all(|&tx| {
                let b = cfg.budget(tx);
                avg[tx.index()] <= b + BUDGET_TOLERANCE * b.max(1.0)
            })
    }

    /// Convex combination `t·self + (1 − t)·other`.
    pub fn mix(&self, other: &PowerPolicy, t: f64) -> PowerPolicy {
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| (t * x + (1.0 - t) * y).max(0.0))
                .collect()
        };
        PowerPolicy {
            p1: lerp(&self.p1, &other.p1),
            p2: lerp(&self.p2, &other.p2),
            pr: lerp(&self.pr, &other.pr),
        }
    }

    pub fn swapped_users(&self) -> Self {
        PowerPolicy {
            p1: self.p2.clone(),
            p2: self.p1.clone(),
            pr: self.pr.clone(),
        }
    }
}

/// Nonempty subset of the sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserSet {
    One,
    Two,
    Both,
}

impl UserSet {
    fn contains(self, user: User) -> bool {
        matches!(
            (self, user),
            (UserSet::Both, _) | (UserSet::One, User::One) | (UserSet::Two, User::Two)
        )
    }
}

impl From<User> for UserSet {
    fn from(u: User) -> Self {
        match u {
            User::One => UserSet::One,
            User::Two => UserSet::Two,
        }
    }
}

fn received_power(state: &GainState, rx: Receiver, users: UserSet, p1: f64, p2: f64) -> f64 {
    let mut s = 0.0;
    if users.contains(User::One) {
        s += state.gain(rx, User::One) * p1;
    }
    if users.contains(User::Two) {
        s += state.gain(rx, User::Two) * p2;
    }
    s
}

fn source_rate(
    rx: Receiver,
    users: UserSet,
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    theta: f64,
) -> Result<f64> {
    policy.check_aligned(e)?;
    Ok(e.iter()
        .enumerate()
        .map(|(i, (w, s))| {
            w * band_rate(
                theta,
                received_power(s, rx, users, policy.p1[i], policy.p2[i]),
            )
        })
        .sum())
}

/// Rate bound of the user subset `users` at the relay.
pub fn rate_at_relay(
    users: UserSet,
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    theta: f64,
) -> Result<f64> {
    source_rate(Receiver::Relay, users, policy, e, theta)
}

/// Rate of the relay-to-destination link on its `1 − θ` band.
pub fn relay_link_rate(policy: &PowerPolicy, e: &FadingEnsemble, theta: f64) -> Result<f64> {
    policy.check_aligned(e)?;
    let bw = 1.0 - theta;
    Ok(e.iter()
        .zip(&policy.pr)
        .map(|((w, s), &pr)| w * band_rate(bw, s.g_dr * pr))
        .sum())
}

/// Rate bound of the user subset `users` at the destination, including the
/// relay's forwarded contribution.
pub fn rate_at_destination(
    users: UserSet,
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    theta: f64,
) -> Result<f64> {
    Ok(source_rate(Receiver::Destination, users, policy, e, theta)?
        + relay_link_rate(policy, e, theta)?)
}

/// The four upper bounds whose minimum is the achievable sum rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    /// Sum rate at the relay.
    RelaySum,
    /// Sum rate at the destination.
    DestinationSum,
    /// User 1 limited by the relay, user 2 by the destination.
    RelayDestination,
    /// User 1 limited by the destination, user 2 by the relay.
    DestinationRelay,
}

impl Bound {
    pub const ALL: [Bound; 4] = [
        Bound::RelaySum,
        Bound::DestinationSum,
        Bound::RelayDestination,
        Bound::DestinationRelay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Bound::RelaySum => "relay sum",
            Bound::DestinationSum => "destination sum",
            Bound::RelayDestination => "user 1 at relay + user 2 at destination",
            Bound::DestinationRelay => "user 1 at destination + user 2 at relay",
        }
    }
}

/// Corner rates of both receivers' rate regions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSummary {
    /// `rmax[user][receiver]`: rate of a user decoded last (or alone).
    pub rmax: [[f64; 2]; 2],
    /// `rmin[user][receiver]`: rate of a user decoded first at the sum-rate corner.
    pub rmin: [[f64; 2]; 2],
    pub sum_relay: f64,
    pub sum_dest: f64,
}

impl RateSummary {
    pub fn rmax(&self, user: User, rx: Receiver) -> f64 {
        self.rmax[user.index()][rx.index()]
    }

    pub fn rmin(&self, user: User, rx: Receiver) -> f64 {
        self.rmin[user.index()][rx.index()]
    }

    pub fn sum(&self, rx: Receiver) -> f64 {
        match rx {
            Receiver::Relay => self.sum_relay,
            Receiver::Destination => self.sum_dest,
        }
    }

    /// Values of the four sum-rate bounds in `Bound::ALL` order.
    pub fn bounds(&self) -> [f64; 4] {
        use Receiver::{Destination as D, Relay as R};
        use User::{One, Two};
        [
            self.sum_relay,
            self.sum_dest,
            self.rmax(One, R) + self.rmax(Two, D),
            self.rmax(One, D) + self.rmax(Two, R),
        ]
    }

    pub fn bound(&self, b: Bound) -> f64 {
        self.bounds()[b.index()]
    }

    /// Largest `R1 + R2` inside the intersection of both regions.
    pub fn sum_rate(&self) -> f64 {
        self.bounds().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// All corner rates for `policy`, computed in a single pass over the states.
pub fn corner_rates(
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<RateSummary> {
    policy.check_aligned(e)?;
    let theta = cfg.theta;
    let theta_bar = cfg.theta_bar();
    // [relay single 1, relay single 2, dest single 1, dest single 2, relay mac, dest mac, relay link]
    let mut acc = [0.0f64; 7];
    for (i, (w, s)) in e.iter().enumerate() {
        let (p1, p2, pr) = (policy.p1[i], policy.p2[i], policy.pr[i]);
        let terms = [
            band_rate(theta, s.g_r1 * p1),
            band_rate(theta, s.g_r2 * p2),
            band_rate(theta, s.g_d1 * p1),
            band_rate(theta, s.g_d2 * p2),
            band_rate(theta, s.g_r1 * p1 + s.g_r2 * p2),
            band_rate(theta, s.g_d1 * p1 + s.g_d2 * p2),
            band_rate(theta_bar, s.g_dr * pr),
        ];
        for (a, t) in acc.iter_mut().zip(terms) {
            *a += w * t;
        }
    }
    let [r1, r2, d1, d2, mac_r, mac_d, link] = acc;
    Ok(summary_from_parts(r1, r2, d1, d2, mac_r, mac_d, link))
}

pub(crate) fn summary_from_parts(
    r1: f64,
    r2: f64,
    d1: f64,
    d2: f64,
    mac_r: f64,
    mac_d: f64,
    link: f64,
) -> RateSummary {
    let rmax = [[r1, d1 + link], [r2, d2 + link]];
    let sum_relay = mac_r;
    let sum_dest = mac_d + link;
    let rmin = [
        [sum_relay - rmax[1][0], sum_dest - rmax[1][1]],
        [sum_relay - rmax[0][0], sum_dest - rmax[0][1]],
    ];
    RateSummary {
        rmax,
        rmin,
        sum_relay,
        sum_dest,
    }
}

/// Maximum `R1 + R2` over the intersection of the relay and destination
/// regions achieved by `policy`.
pub fn achievable_sum_rate(
    policy: &PowerPolicy,
    e: &FadingEnsemble,
    cfg: &ChannelConfig,
) -> Result<f64> {
    Ok(corner_rates(policy, e, cfg)?.sum_rate())
}
