//! Finite weighted fading ensembles.
//!
//! The ergodic fading process is represented by a finite list of channel
//! states, each carrying a probability weight. Every expectation taken by the
//! rate and solver modules is a weighted sum over these states, evaluated in
//! state order.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Tolerance on the total probability mass of an ensemble.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Column header of the ensemble CSV format.
pub const CSV_HEADER: [&str; 6] = ["weight", "g_r1", "g_r2", "g_d1", "g_d2", "g_dr"];

/// One of the two sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }
}

/// One of the two receivers of source transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Receiver {
    Relay,
    Destination,
}

impl Receiver {
    pub const BOTH: [Receiver; 2] = [Receiver::Relay, Receiver::Destination];

    pub fn index(self) -> usize {
        match self {
            Receiver::Relay => 0,
            Receiver::Destination => 1,
        }
    }
}

/// Squared channel-gain magnitudes of one fading state, noise normalized.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainState {
    /// source 1 to relay
    pub g_r1: f64,
    /// source 2 to relay
    pub g_r2: f64,
    /// source 1 to destination
    pub g_d1: f64,
    /// source 2 to destination
    pub g_d2: f64,
    /// relay to destination
    pub g_dr: f64,
}

impl GainState {
    pub fn new(g_r1: f64, g_r2: f64, g_d1: f64, g_d2: f64, g_dr: f64) -> Self {
        GainState {
            g_r1,
            g_r2,
            g_d1,
            g_d2,
            g_dr,
        }
    }

    /// Gain from `user` to `receiver`.
    pub fn gain(&self, receiver: Receiver, user: User) -> f64 {
        match (receiver, user) {
            (Receiver::Relay, User::One) => self.g_r1,
            (Receiver::Relay, User::Two) => self.g_r2,
            (Receiver::Destination, User::One) => self.g_d1,
            (Receiver::Destination, User::Two) => self.g_d2,
        }
    }

    /// Same state seen with the two sources relabelled.
    pub fn swapped_users(&self) -> Self {
        GainState {
            g_r1: self.g_r2,
            g_r2: self.g_r1,
            g_d1: self.g_d2,
            g_d2: self.g_d1,
            g_dr: self.g_dr,
        }
    }

    fn as_array(&self) -> [f64; 5] {
        [self.g_r1, self.g_r2, self.g_d1, self.g_d2, self.g_dr]
    }
}

/// A validated, immutable weighted set of fading states.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingEnsemble {
    states: Vec<GainState>,
    weights: Vec<f64>,
}

impl FadingEnsemble {
    /// Builds and validates an ensemble.
    pub fn new(states: Vec<GainState>, weights: Vec<f64>) -> Result<Self> {
        validate_ensemble(FadingEnsemble { states, weights })
    }

    /// Equal-weight ensemble over `states`.
    pub fn uniform(states: Vec<GainState>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let weights = vec![1.0 / n as f64; n];
        Self::new(states, weights)
    }

    pub fn states(&self) -> &[GainState] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Iterates `(weight, state)` pairs in state order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &GainState)> + '_ {
        self.weights.iter().copied().zip(self.states.iter())
    }

    /// Weighted average of `f` over the states, accumulated in state order.
    pub fn expect<F: FnMut(&GainState) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(w, s)| w * f(s)).sum()
    }

    /// The same ensemble with the two sources relabelled in every state.
    pub fn swapped_users(&self) -> Self {
        FadingEnsemble {
            states: self.states.iter().map(GainState::swapped_users).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Writes the ensemble in the CSV interchange format.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let map_err = |e: csv::Error| Error::Io(e.to_string());
        writer.write_record(CSV_HEADER).map_err(map_err)?;
        for (w, s) in self.iter() {
            let row = std::iter::once(w).chain(s.as_array());
            writer
                .write_record(row.map(|x| format!("{x:e}")))
                .map_err(map_err)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Checks every ensemble invariant and renormalizes the weights when their sum
/// is within [`WEIGHT_SUM_TOLERANCE`] of one.
pub fn validate_ensemble(e: FadingEnsemble) -> Result<FadingEnsemble> {
    let FadingEnsemble {
        states,
        mut weights,
    } = e;
    if states.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if states.len() != weights.len() {
        return Err(Error::Misaligned {
            expected: states.len(),
            found: weights.len(),
        });
    }
    for (i, s) in states.iter().enumerate() {
        for g in s.as_array() {
            if g.is_nan() || g.is_infinite() {
                return Err(Error::NonFiniteGain { state: i });
            }
            if g < 0.0 {
                return Err(Error::NegativeGain { state: i });
            }
        }
    }
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::NegativeWeight { state: i });
        }
    }
    let sum = compensated_sum(&weights);
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightSum { sum });
    }
    // already normalized to rounding accuracy: leave untouched so validation is idempotent
    if (sum - 1.0).abs() > weights.len() as f64 * f64::EPSILON {
        for w in &mut weights {
            *w /= sum;
        }
    }
    Ok(FadingEnsemble { states, weights })
}

/// Neumaier summation; a plain sum of 10^6 equal weights drifts past the
/// weight-sum tolerance.
fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Reads an ensemble from the CSV interchange format.
pub fn load_ensemble<P: AsRef<Path>>(path: P) -> Result<FadingEnsemble> {
    let file = std::fs::File::open(path.as_ref())?;
    read_ensemble(file)
}

/// Parses an ensemble from any reader producing the CSV interchange format.
pub fn read_ensemble<R: Read>(input: R) -> Result<FadingEnsemble> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::EmptyEnsemble),
        Some(rec) => rec.map_err(|e| Error::Parse(e.to_string()))?,
    };
    if header.len() != CSV_HEADER.len() {
        return Err(Error::Parse("wrong arity".into()));
    }
    if header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "unexpected header, expected `{}`",
            CSV_HEADER.join(",")
        )));
    }

    let mut states = Vec::new();
    let mut weights = Vec::new();
    for (row, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Parse("wrong arity".into()));
        }
        let mut vals = [0.0; 6];
        for (v, field) in vals.iter_mut().zip(rec.iter()) {
            *v = field
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", row + 1)))?;
        }
        weights.push(vals[0]);
        states.push(GainState::new(vals[1], vals[2], vals[3], vals[4], vals[5]));
    }
    FadingEnsemble::new(states, weights)
}

/// Planar position of a node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node placement and path-loss exponent used to derive mean link gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub source1: Point,
    pub source2: Point,
    pub relay: Point,
    pub destination: Point,
    pub path_loss_exponent: f64,
}

impl NodeGeometry {
    /// Distances of the five transmitter-receiver links in `GainState` field
    /// order: r1, r2, d1, d2, dr.
    pub fn link_distances(&self) -> [f64; 5] {
        [
            self.source1.distance(&self.relay),
            self.source2.distance(&self.relay),
            self.source1.distance(&self.destination),
            self.source2.distance(&self.destination),
            self.relay.distance(&self.destination),
        ]
    }

    /// Mean gain `d^-γ` of each link, in `GainState` field order.
    pub fn mean_gains(&self) -> Result<[f64; 5]> {
        let gamma = self.path_loss_exponent;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "path-loss exponent {gamma} must be finite and nonnegative"
            )));
        }
        const NAMES: [&str; 5] = ["r1", "r2", "d1", "d2", "dr"];
        let mut means = [0.0; 5];
        for ((m, d), name) in means.iter_mut().zip(self.link_distances()).zip(NAMES) {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::DegenerateGeometry(format!(
                    "link {name} has distance {d}"
                )));
            }
            *m = d.powf(-gamma);
        }
        Ok(means)
    }
}

/// Samples `n_states` equally weighted Rayleigh-fading states: every gain is
/// exponential with mean `d^-γ` for its link distance `d`.
pub fn build_geometry_ensemble(
    geometry: &NodeGeometry,
    n_states: usize,
    seed: u64,
) -> Result<FadingEnsemble> {
    if n_states == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let means = geometry.mean_gains()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n_states)
        .map(|_| {
            let mut draw = [0.0; 5];
            for (g, m) in draw.iter_mut().zip(means) {
                let x: f64 = Exp1.sample(&mut rng);
                *g = m * x;
            }
            GainState::new(draw[0], draw[1], draw[2], draw[3], draw[4])
        })
        .collect();
    FadingEnsemble::uniform(states)
}
