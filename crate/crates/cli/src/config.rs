//! Experiment configuration documents.

use std::fmt;
use std::path::{Path, PathBuf};

use marc_core::{
    build_geometry_ensemble, load_ensemble, ChannelConfig, FadingEnsemble, NodeGeometry, Point,
};
use serde::Deserialize;

/// θ values a sweep may visit.
pub const THETA_MIN: f64 = 1e-3;
pub const THETA_MAX: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub theta: f64,
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub n_states: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub source1: [f64; 2],
    pub source2: [f64; 2],
    pub relay: [f64; 2],
    pub destination: [f64; 2],
    pub path_loss_exponent: f64,
}

impl GeometrySection {
    pub fn to_geometry(self) -> NodeGeometry {
        let p = |[x, y]: [f64; 2]| Point::new(x, y);
        NodeGeometry {
            source1: p(self.source1),
            source2: p(self.source2),
            relay: p(self.relay),
            destination: p(self.destination),
            path_loss_exponent: self.path_loss_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    P1,
    P2,
    Pr,
    Theta,
    RelayX,
    RelayY,
}

impl SweepParameter {
    pub fn moves_relay(self) -> bool {
        matches!(self, SweepParameter::RelayX | SweepParameter::RelayY)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSection {
    /// Sweep values in order; `start + i·step` up to `stop` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        // tolerate rounding of a stop value that is meant to be on the grid
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                if self.parameter == SweepParameter::Theta {
                    v.clamp(THETA_MIN, THETA_MAX)
                } else {
                    v
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// Invalid or unreadable configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Where the states come from.
#[derive(Debug, Clone)]
pub enum EnsembleSource {
    Geometry {
        geometry: NodeGeometry,
        n_states: usize,
        seed: u64,
    },
    File(PathBuf),
}

impl EnsembleSource {
    pub fn seed(&self) -> u64 {
        match self {
            EnsembleSource::Geometry { seed, .. } => *seed,
            EnsembleSource::File(_) => 0,
        }
    }

    pub fn build(&self) -> marc_core::Result<FadingEnsemble> {
        match self {
            EnsembleSource::Geometry {
                geometry,
                n_states,
                seed,
            } => build_geometry_ensemble(geometry, *n_states, *seed),
            EnsembleSource::File(path) => load_ensemble(path),
        }
    }
}

/// A parsed and checked configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub channel: ChannelConfig,
    pub source: EnsembleSource,
    pub sweep: Option<SweepSection>,
    pub oracle_iterations: Option<usize>,
    pub oracle_tolerance: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

pub fn load(path: &Path) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base)
}

/// Parses a config; relative ensemble file paths resolve against `base`.
pub fn parse(text: &str, base: &Path) -> Result<Experiment, ConfigError> {
    let raw: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;

    let c = raw.channel;
    let channel = ChannelConfig::new(c.theta, c.p1, c.p2, c.pr)
        .map_err(|e| ConfigError(format!("channel: {e}")))?;

    let ens = raw.ensemble;
    let source = match (ens.geometry, ens.file) {
        (Some(_), Some(_)) => {
            return err("ensemble: give exactly one of `geometry` or `file`, not both")
        }
        (None, None) => return err("ensemble: missing field `geometry` or `file`"),
        (Some(g), None) => {
            let Some(n_states) = ens.n_states else {
                return err("ensemble: missing field `n_states` (required with `geometry`)");
            };
            let Some(seed) = ens.seed else {
                return err("ensemble: missing field `seed` (required with `geometry`)");
            };
            if n_states == 0 {
                return err("ensemble.n_states: must be positive");
            }
            EnsembleSource::Geometry {
                geometry: g.to_geometry(),
                n_states,
                seed,
            }
        }
        (None, Some(file)) => {
            if ens.n_states.is_some() || ens.seed.is_some() {
                return err("ensemble: `n_states` and `seed` apply only to `geometry`");
            }
            EnsembleSource::File(base.join(file))
        }
    };

    if let Some(s) = &raw.sweep {
        if !(s.step > 0.0) || !s.step.is_finite() {
            return err(format!("sweep.step: {} must be positive", s.step));
        }
        if !s.start.is_finite() || !s.stop.is_finite() {
            return err("sweep: `start` and `stop` must be finite");
        }
        if s.stop < s.start {
            return err(format!("sweep.stop: {} is below start {}", s.stop, s.start));
        }
        if s.parameter.moves_relay() && matches!(source, EnsembleSource::File(_)) {
            return err("sweep.parameter: relay position sweeps need `ensemble.geometry`");
        }
    }

    let (oracle_iterations, oracle_tolerance) = match raw.oracle {
        None => (None, DEFAULT_TOLERANCE),
        Some(o) => {
            if o.iterations == Some(0) {
                return err("oracle.iterations: must be positive");
            }
            let tol = o.tolerance.unwrap_or(DEFAULT_TOLERANCE);
            if !(tol >= 0.0) || !tol.is_finite() {
                return err(format!("oracle.tolerance: {tol} must be nonnegative"));
            }
            (o.iterations, tol)
        }
    };

    Ok(Experiment {
        channel,
        source,
        sweep: raw.sweep,
        oracle_iterations,
        oracle_tolerance,
    })
}
