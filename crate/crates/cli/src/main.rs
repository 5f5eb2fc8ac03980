//! `marc`: sum-rate-optimal power allocation for the two-user orthogonal
//! multiaccess relay channel.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use marc_core::oracle::DEFAULT_ITERATIONS;
use marc_core::{
    classify_and_solve, subgradient_solve, ChannelConfig, Error, FadingEnsemble, SolveOutcome,
    SolveStatus,
};
use rayon::prelude::*;

use config::{EnsembleSource, Experiment, SweepParameter};
use output::SweepRow;

const EXIT_CONFIG: i32 = 1;
const EXIT_NO_CONVERGENCE: i32 = 2;
const EXIT_DEGENERATE: i32 = 3;
const EXIT_GAP: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "marc", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Directory receiving the CSV outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Supergradient iterations of the oracle (overrides the config).
    #[arg(long, global = true)]
    oracle_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify and solve one configuration.
    Solve { config: PathBuf },
    /// Solve along the configured parameter sweep.
    Sweep { config: PathBuf },
    /// Cross-check the case solution against the supergradient oracle.
    Verify { config: PathBuf },
}

/// A failed run: exit code and message.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn solver_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence(_) | Error::CaseNoConvergence { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::new(solver_code(&err), err.to_string())
    }
}

impl From<config::ConfigError> for Failure {
    fn from(err: config::ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, err.0)
    }
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    output::write(dir, name, bytes)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot write {name}: {e}")))
}

fn status_code(out: &SolveOutcome) -> i32 {
    match out.status {
        SolveStatus::Classified => 0,
        SolveStatus::DegenerateClassification => EXIT_DEGENERATE,
    }
}

fn ensemble(x: &Experiment) -> Result<FadingEnsemble, Failure> {
    x.source
        .build()
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("ensemble: {e}")))
}

fn cmd_solve(x: &Experiment, out_dir: &Path) -> Result<i32, Failure> {
    let e = ensemble(x)?;
    let out = classify_and_solve(&e, &x.channel)?;
    write_out(out_dir, "outcome.csv", &output::outcome_csv(&out))?;
    write_out(
        out_dir,
        "policy.csv",
        &output::policy_csv(&out, e.weights()),
    )?;
    if out.status == SolveStatus::DegenerateClassification {
        eprintln!("warning: no case conditions held; returned {}", out.label);
    }
    Ok(status_code(&out))
}

/// Solves one sweep point; ensemble and channel are rebuilt from the config.
fn sweep_point(
    x: &Experiment,
    base: Option<&FadingEnsemble>,
    param: SweepParameter,
    v: f64,
) -> SweepRow {
    let run = || -> Result<SolveOutcome, Failure> {
        let c = x.channel;
        let channel = match param {
            SweepParameter::P1 => ChannelConfig::new(c.theta, v, c.p2, c.pr),
            SweepParameter::P2 => ChannelConfig::new(c.theta, c.p1, v, c.pr),
            SweepParameter::Pr => ChannelConfig::new(c.theta, c.p1, c.p2, v),
            SweepParameter::Theta => ChannelConfig::new(v, c.p1, c.p2, c.pr),
            SweepParameter::RelayX | SweepParameter::RelayY => Ok(c),
        }
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
        let moved;
        let e = match (base, &x.source) {
            (Some(e), _) => e,
            (
                None,
                EnsembleSource::Geometry {
                    geometry,
                    n_states,
                    seed,
                },
            ) => {
                let mut g = *geometry;
                if param == SweepParameter::RelayX {
                    g.relay.x = v;
                } else {
                    g.relay.y = v;
                }
                // same seed at every point: only the mean gains move
                moved = marc_core::build_geometry_ensemble(&g, *n_states, *seed)
                    .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
                &moved
            }
            (None, EnsembleSource::File(_)) => unreachable!("rejected at config load"),
        };
        Ok(classify_and_solve(e, &channel)?)
    };
    match run() {
        Ok(out) => SweepRow::Solved(Box::new(out)),
        Err(f) => SweepRow::Failed {
            code: f.code,
            message: f.message,
        },
    }
}

fn cmd_sweep(x: &Experiment, out_dir: &Path) -> Result<i32, Failure> {
    let Some(sweep) = x.sweep else {
        return Err(Failure::new(EXIT_CONFIG, "sweep: missing field `sweep`"));
    };
    let param = sweep.parameter;
    let base = if param.moves_relay() {
        None
    } else {
        Some(ensemble(x)?)
    };
    let values = sweep.values();
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&v| sweep_point(x, base.as_ref(), param, v))
        .collect();
    write_out(out_dir, "sweep.csv", &output::sweep_csv(&values, &rows))?;
    let first_failure = rows.iter().find_map(|r| match r {
        SweepRow::Solved(out) => Some(status_code(out)).filter(|&c| c != 0),
        SweepRow::Failed { code, .. } => Some(*code),
    });
    Ok(first_failure.unwrap_or(0))
}

fn cmd_verify(x: &Experiment, out_dir: &Path, iters: Option<usize>) -> Result<i32, Failure> {
    let e = ensemble(x)?;
    let out = classify_and_solve(&e, &x.channel)?;
    let iterations = iters.or(x.oracle_iterations).unwrap_or(DEFAULT_ITERATIONS);
    let oracle = subgradient_solve(&e, &x.channel, iterations, x.source.seed())?;
    write_out(
        out_dir,
        "verify.csv",
        &output::verify_csv(out.sum_rate, oracle.objective),
    )?;
    let gap = out.sum_rate - oracle.objective;
    if !(gap.abs() <= x.oracle_tolerance) {
        eprintln!(
            "verification gap {} exceeds {}",
            output::fmt_num(gap),
            output::fmt_num(x.oracle_tolerance)
        );
        return Ok(EXIT_GAP);
    }
    if out.status == SolveStatus::DegenerateClassification {
        eprintln!("warning: no case conditions held; returned {}", out.label);
    }
    Ok(0)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MARC_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::new(
                EXIT_CONFIG,
                format!("MARC_THREADS: `{v}` is not a positive integer"),
            )
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("thread pool: {e}")))
}

fn run(args: &Args) -> Result<i32, Failure> {
    if args.oracle_iters == Some(0) {
        return Err(Failure::new(EXIT_CONFIG, "--oracle-iters must be positive"));
    }
    let path = match &args.command {
        Command::Solve { config } | Command::Sweep { config } | Command::Verify { config } => {
            config
        }
    };
    let x = config::load(path)?;
    let pool = thread_pool()?;
    pool.install(|| match &args.command {
        Command::Solve { .. } => cmd_solve(&x, &args.out_dir),
        Command::Sweep { .. } => cmd_sweep(&x, &args.out_dir),
        Command::Verify { .. } => cmd_verify(&x, &args.out_dir, args.oracle_iters),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
