//! Command-line front end. Every subcommand can also be driven by a JSON experiment
//! descriptor through `heun run`.
//!
//! Exit codes: 0 when every tolerance is met, 1 on a tolerance violation or numerical
//! failure, 2 on malformed input.

pub mod args;
pub mod commands;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{Error, Result};
use commands::{
    CompareCmd, Context, DarbouxCmd, FiniteGapCmd, LatticeCmd, Outcome, QesCmd, ScanCmd, ShowOperatorCmd,
    TransformCmd, TransformInput, VerifyAllCmd,
};
use output::{write_text, OUT_DIR_ENV};

pub const DEFAULT_SEED: u64 = 42;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "heun", version, about = "Darboux-Crum and integral transformations of Heun's equation in elliptic form")]
pub struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "heun-out")]
    pub out_dir: PathBuf,
    /// Seed for every randomized sample; a descriptor's own seed takes precedence.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Artifact file stem; defaults to the command name (or the descriptor's file stem).
    #[arg(long, global = true)]
    pub name: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Lattice(LatticeCmd),
    ShowOperator(ShowOperatorCmd),
    Qes(QesCmd),
    Darboux(DarbouxCmd),
    Scan(ScanCmd),
    Compare(CompareCmd),
    Transform(TransformCmd),
    FiniteGap(FiniteGapCmd),
    VerifyAll(VerifyAllCmd),
    /// Runs an experiment descriptor.
    Run {
        descriptor: PathBuf,
    },
}

/// A fully parsed command, whichever way it arrived.
#[derive(Debug)]
pub enum Job {
    Lattice(LatticeCmd),
    ShowOperator(ShowOperatorCmd),
    Qes(QesCmd),
    Darboux(DarbouxCmd),
    Scan(ScanCmd),
    Compare(CompareCmd),
    Transform(TransformInput),
    FiniteGap(FiniteGapCmd),
    VerifyAll(VerifyAllCmd),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Lattice(_) => "lattice",
            Job::ShowOperator(_) => "show-operator",
            Job::Qes(_) => "qes",
            Job::Darboux(_) => "darboux",
            Job::Scan(_) => "scan",
            Job::Compare(_) => "compare",
            Job::Transform(_) => "transform",
            Job::FiniteGap(_) => "finite-gap",
            Job::VerifyAll(_) => "verify-all",
        }
    }

    pub fn execute(&self, ctx: &Context) -> Result<Outcome> {
        match self {
            Job::Lattice(c) => c.execute(ctx),
            Job::ShowOperator(c) => c.execute(ctx),
            Job::Qes(c) => c.execute(ctx),
            Job::Darboux(c) => c.execute(ctx),
            Job::Scan(c) => c.execute(ctx),
            Job::Compare(c) => c.execute(ctx),
            Job::Transform(c) => c.execute(ctx),
            Job::FiniteGap(c) => c.execute(ctx),
            Job::VerifyAll(c) => c.execute(ctx),
        }
    }
}

/// Parsed descriptor: the job plus its own seed, worker count and stem.
#[derive(Debug)]
pub struct Descriptor {
    pub job: Job,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn body<T: DeserializeOwned>(command: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Schema(format!("{command}: {e}")))
}

/// Parses descriptor JSON: an object with `command` and that command's fields, plus
/// optional `seed` and `workers`.
pub fn parse_descriptor(text: &str, base_dir: &Path) -> Result<Descriptor> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("descriptor is not JSON: {e}")))?;
    let Value::Object(mut map) = v else {
        return Err(Error::Schema("descriptor must be a JSON object".into()));
    };
    let command = match map.remove("command") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(Error::Schema("`command` must be a string".into())),
        None => return Err(Error::Schema("missing `command`".into())),
    };
    let seed = match map.remove("seed") {
        None | Some(Value::Null) => None,
        Some(s) => Some(s.as_u64().ok_or_else(|| Error::Schema("`seed` must be a non-negative integer".into()))?),
    };
    let workers = match map.remove("workers") {
        None | Some(Value::Null) => None,
        Some(w) => Some(
            w.as_u64()
                .filter(|w| *w > 0)
                .ok_or_else(|| Error::Schema("`workers` must be a positive integer".into()))? as usize,
        ),
    };
    let rest = Value::Object(map);
    let job = match command.as_str() {
        "lattice" => Job::Lattice(body(&command, rest)?),
        "show-operator" => Job::ShowOperator(body(&command, rest)?),
        "qes" => Job::Qes(body(&command, rest)?),
        "darboux" => Job::Darboux(body(&command, rest)?),
        "scan" => Job::Scan(body(&command, rest)?),
        "compare" => Job::Compare(body(&command, rest)?),
        "transform" => {
            // either a pointer to a request file or the request inline
            if rest.get("input").is_some() {
                let mut cmd: TransformCmd = body(&command, rest)?;
                if cmd.input.is_relative() {
                    cmd.input = base_dir.join(&cmd.input);
                }
                Job::Transform(cmd.load()?)
            } else {
                Job::Transform(body(&command, rest)?)
            }
        }
        "finite-gap" => Job::FiniteGap(body(&command, rest)?),
        "verify-all" => Job::VerifyAll(body(&command, rest)?),
        other => return Err(Error::Schema(format!("unknown command {other:?}"))),
    };
    Ok(Descriptor { job, seed, workers })
}

/// Input problems exit with 2, everything else that goes wrong with 1.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_)
        | Error::InvalidCoupling(_)
        | Error::InvalidParams(_)
        | Error::InvalidPair(_)
        | Error::UnsupportedSign(_)
        | Error::InadmissibleChain(_)
        | Error::NonIntegerDimension { .. }
        | Error::DegenerateLattice { .. }
        | Error::Crowding(_)
        | Error::PoleProximity { .. } => EXIT_SCHEMA,
        _ => EXIT_TOLERANCE,
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Schema("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Io(e.to_string())),
    }
}

/// Executes a parsed command line; returns the exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    let (job, seed, workers, default_stem) = match cli.command {
        Command::Run { descriptor } => {
            let text = std::fs::read_to_string(&descriptor)
                .map_err(|e| Error::Schema(format!("cannot read {}: {e}", descriptor.display())))?;
            let base = descriptor.parent().unwrap_or(Path::new("."));
            let d = parse_descriptor(&text, base)?;
            let stem = descriptor
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| d.job.name().to_string());
            (d.job, d.seed.or(cli.seed), d.workers.or(cli.workers), stem)
        }
        other => {
            let job = match other {
                Command::Lattice(c) => Job::Lattice(c),
                Command::ShowOperator(c) => Job::ShowOperator(c),
                Command::Qes(c) => Job::Qes(c),
                Command::Darboux(c) => Job::Darboux(c),
                Command::Scan(c) => Job::Scan(c),
                Command::Compare(c) => Job::Compare(c),
                Command::Transform(c) => Job::Transform(c.load()?),
                Command::FiniteGap(c) => Job::FiniteGap(c),
                Command::VerifyAll(c) => Job::VerifyAll(c),
                Command::Run { .. } => unreachable!("handled above"),
            };
            let stem = job.name().to_string();
            (job, cli.seed, cli.workers, stem)
        }
    };
    let ctx = Context {
        seed: seed.unwrap_or(DEFAULT_SEED),
        stem: cli.name.unwrap_or(default_stem),
    };
    let outcome = with_workers(workers, || job.execute(&ctx))??;
    for (rel, text) in &outcome.files {
        write_text(&cli.out_dir.join(rel), text)?;
    }
    println!("{}", outcome.summary);
    for (rel, _) in &outcome.files {
        println!("wrote {}", cli.out_dir.join(rel).display());
    }
    println!("{}", if outcome.passed { "PASS" } else { "FAIL: tolerance violated" });
    Ok(if outcome.passed { EXIT_OK } else { EXIT_TOLERANCE })
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
