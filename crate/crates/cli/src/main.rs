//! `capax`: batch front end for capacities, potentials, norms and the
//! inequality checks.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 when a solver exhausted
//! its iteration budget (results that could be written carry flags).

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{run, Failure};
use crate::config::{parse_kv, Command, InputError, RunConfig};

#[derive(Parser)]
#[command(name = "capax", version, about = "Nonlinear potential theory on uniform grids")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Capacity of a set (--set or --input mask).
    Capacity,
    /// Riesz or Bessel potential of a function.
    Potential,
    /// Wolff potential of a measure.
    Wolff,
    /// Choquet integral of |g|^t against capacity.
    Choquet,
    /// One of the function-space norms (--norm).
    Norm,
    /// One inequality check over a seeded family (--check).
    Verify,
    /// The standard suite of checks.
    Report,
}

/// Values stay strings here so flags and config files share one parser.
#[derive(Args)]
struct Opts {
    /// Flat key=value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dimension (1..=3).
    #[arg(long = "n", global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long = "s", global = true)]
    s: Option<String>,
    #[arg(long = "q", global = true)]
    q: Option<String>,
    #[arg(long = "p", global = true)]
    p: Option<String>,
    #[arg(long = "r", global = true)]
    r: Option<String>,
    /// Nodes per axis (power of two, at least 8).
    #[arg(long = "N", global = true)]
    points: Option<String>,
    /// Box half-width.
    #[arg(long = "L", global = true)]
    half_width: Option<String>,
    /// riesz or bessel.
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Family seed.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Levels per Choquet integral.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<String>,
    /// Machine-readable result file; a manifest is written beside it.
    #[arg(long, global = true)]
    output: Option<String>,
    /// Where `capacity` writes the extremal function.
    #[arg(long, global = true)]
    extremal: Option<String>,
    /// Inequality for `verify`.
    #[arg(long, global = true)]
    check: Option<String>,
    /// Test family name.
    #[arg(long, global = true)]
    family: Option<String>,
    /// Family member used as a single input.
    #[arg(long, global = true)]
    index: Option<String>,
    /// Family size.
    #[arg(long, global = true)]
    count: Option<String>,
    /// Set spec: ball:R, cube:a, annulus:r1:r2, joined with `+`.
    #[arg(long, global = true)]
    set: Option<String>,
    /// Field or mask file (.json or binary).
    #[arg(long, global = true)]
    input: Option<String>,
    /// Norm for `norm`.
    #[arg(long, global = true)]
    norm: Option<String>,
    /// Exponent for `ibp` and `choquet`.
    #[arg(long = "t", global = true)]
    t: Option<String>,
    /// Wolff truncation radius (default infinite).
    #[arg(long, global = true)]
    radius: Option<String>,
    /// Comma-separated node counts for a refinement study.
    #[arg(long, global = true)]
    refine: Option<String>,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("n", &self.n),
            ("alpha", &self.alpha),
            ("s", &self.s),
            ("q", &self.q),
            ("p", &self.p),
            ("r", &self.r),
            ("N", &self.points),
            ("L", &self.half_width),
            ("kind", &self.kind),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("levels", &self.levels),
            ("threads", &self.threads),
            ("output", &self.output),
            ("extremal", &self.extremal),
            ("check", &self.check),
            ("family", &self.family),
            ("index", &self.index),
            ("count", &self.count),
            ("set", &self.set),
            ("input", &self.input),
            ("norm", &self.norm),
            ("t", &self.t),
            ("radius", &self.radius),
            ("refine", &self.refine),
        ]
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, InputError> {
    let mut map: BTreeMap<String, String> = match &cli.opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
            parse_kv(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in cli.opts.pairs() {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    }
    let command = match cli.command {
        Cmd::Capacity => Command::Capacity,
        Cmd::Potential => Command::Potential,
        Cmd::Wolff => Command::Wolff,
        Cmd::Choquet => Command::Choquet,
        Cmd::Norm => Command::Norm,
        Cmd::Verify => Command::Verify,
        Cmd::Report => Command::Report,
    };
    RunConfig::from_map(command, &map)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cfg) {
        Ok(outcome) if outcome.degraded => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
