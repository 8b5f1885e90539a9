//! Command-line frontend.

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use phototransform::verify::Level;

use self::config::ConfigError;

const AFTER_HELP: &str = "\
Exit codes:
  0  success (verify: every check passed)
  1  compute or I/O error, or a failed verify check
  2  usage, config or schema error (the message names the offending key)

Config (--config): a JSON document with optional sections
  phantom   {\"kind\": \"gaussian\" | \"gaussian_mixture\" | \"lambertian_slope\" | \"two_slope\" | \"box\", ...}
  grids     [x, u] or [x1, x2, u1, u2], each {\"count\", \"spacing\", \"origin\"?}
  schedule  {\"a_min\", \"a_max\", \"count\"} or {\"alphas\": [...], \"weights\"?: [...]}, plus \"xbar_refine\"?
  recon     {\"beta\", \"method\", \"cutoff_b\", \"assume_lambertian\", \"tail_completion\", \"margin\", \"pad\"}
  outputs   {\"field\", \"stack\", \"adjoint\", \"reconstruction\", \"slice\", \"table\", \"report\"}
Unknown keys are rejected. Missing sections default to a 128x128 Gaussian
light field on [-4, 4]^2 with 257 alphas on [-8, 9].

Files:
  fields and stacks  <base>.bin (row-major little-endian f64) + <base>.json sidecar
  slice              binary PGM (P5), rescaled min..max to 0..255
  radon-compare      CSV: alpha,xbar,photography,scaled_radon,difference
  verify             JSON report";

#[derive(Debug, Parser)]
#[command(name = "phototransform", version, about = "Light field and focal stack transforms", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output path; overrides the matching `outputs` entry
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Input artifact; overrides the `outputs` entry the command would read
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Verification level
    #[arg(long, global = true, value_enum, default_value = "smoke")]
    pub level: LevelArg,

    /// Worker threads [default: available cores]
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    /// Seed for verify and for gaussian_mixture phantoms
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum LevelArg {
    Smoke,
    Full,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Smoke => Level::Smoke,
            LevelArg::Full => Level::Full,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the configured phantom (writes outputs.field)
    Phantom,
    /// Focal stack of a field (reads outputs.field, writes outputs.stack)
    Forward,
    /// Weighted dual of a stack, weight order recon.beta (reads outputs.stack, writes outputs.adjoint)
    Adjoint,
    /// Reconstruct a field from a stack (reads outputs.stack, writes outputs.reconstruction)
    Invert,
    /// 2-D slice of a field or stack as PGM (writes outputs.slice)
    Slice {
        /// Alpha index of an n=2 stack, or the u1=u2 index of an n=2 field [default: middle]
        #[arg(long)]
        index: Option<usize>,
    },
    /// Run the verification suite (writes outputs.report, or stdout)
    Verify,
    /// Photography against the scaled classic Radon transform of an n=1 phantom (writes outputs.table, or stdout)
    RadonCompare,
}

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Compute(String),
    /// The command ran but its result is a failure (a red verify report).
    Unmet,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<phototransform::Error> for Failure {
    fn from(e: phototransform::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Unmet) => 1,
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(ConfigError::new("--threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Compute(format!("thread pool: {e}")))?;
    }
    let exp = config::load(cli.config.as_deref())?.validate()?;
    let io = commands::Paths {
        input: cli.input.clone(),
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::Phantom => commands::phantom(&exp, &io, cli.seed),
        Command::Forward => commands::forward(&exp, &io),
        Command::Adjoint => commands::adjoint(&exp, &io),
        Command::Invert => commands::invert(&exp, &io),
        Command::Slice { index } => commands::slice(&exp, &io, *index),
        Command::Verify => commands::verify(&exp, &io, cli.level.into(), cli.seed.unwrap_or(7)),
        Command::RadonCompare => commands::radon_compare(&exp, &io, cli.seed),
    }
}
