//! Command-line and config-file parsing.
//!
//! A config file holds `key = value` lines using the long flag names of the
//! chosen subcommand (`#` starts a comment). Its entries are spliced in ahead
//! of the real flags, so anything given on the command line wins.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand};
use stochwave::problem::BUILTIN_NAMES;
use stochwave::Theta;

#[derive(Debug, Clone, Parser)]
#[command(name = "stochwave", version, about, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run one path and write the fields at the recorded times.
    Simulate(SimulateArgs),
    /// Monte Carlo strong-error study against a fine reference.
    Convergence(ConvergenceArgs),
    /// Mean maximal energy across time levels.
    Stability(StabilityArgs),
    /// Second moments of the first-step noise increments.
    NoiseCheck(NoiseCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Read defaults from a `key = value` file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// CSV destination; defaults to `$STOCHWAVE_OUT_DIR/<subcommand>.csv`,
    /// or stdout when that is unset.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot data file and script next to the CSV.
    #[arg(long)]
    pub plot: bool,
    /// Worker threads for Monte Carlo samples (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    #[arg(long, default_value = "test2", value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
    pub problem: String,
    /// 0 or 0.5.
    #[arg(long, default_value = "0.5", value_parser = parse_theta)]
    pub theta: Theta,
    /// Spatial subintervals.
    #[arg(long, default_value_t = 256, value_parser = parse_subintervals)]
    pub m: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Final time.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub horizon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Time steps N (power of two).
    #[arg(long, default_value_t = 64, value_parser = parse_steps)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub sample_index: u64,
    /// Comma-separated grid times to record (default: the final time).
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, value_parser = parse_nonnegative)]
    pub record: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Comma-separated step counts, strictly increasing powers of two.
    #[arg(long, default_value = "4,8,16,32", value_delimiter = ',', action = clap::ArgAction::Set, value_parser = parse_steps)]
    pub levels: Vec<usize>,
    /// Step count of the reference solution.
    #[arg(long = "ref", default_value_t = 256, value_parser = parse_steps)]
    pub reference: usize,
    #[arg(long, default_value_t = 100, value_parser = parse_count)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value = "8,16,32,64", value_delimiter = ',', action = clap::ArgAction::Set, value_parser = parse_steps)]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 200, value_parser = parse_count)]
    pub samples: usize,
    /// Largest tolerated relative spread of the level means.
    #[arg(long, default_value_t = 0.25, value_parser = parse_positive)]
    pub spread: f64,
    /// Growth of the energy over its initial value treated as blow-up.
    #[arg(long, default_value_t = 10.0, value_parser = parse_positive)]
    pub blowup: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseCheckArgs {
    /// Comma-separated step counts; one row per `tau = T/N`.
    #[arg(long, default_value = "4,8,16", value_delimiter = ',', action = clap::ArgAction::Set, value_parser = parse_steps)]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 100_000, value_parser = parse_count)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub horizon: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Convergence(_) => "convergence",
            Command::Stability(_) => "stability",
            Command::NoiseCheck(_) => "noise-check",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Simulate(a) => &a.out,
            Command::Convergence(a) => &a.out,
            Command::Stability(a) => &a.out,
            Command::NoiseCheck(a) => &a.out,
        }
    }

    /// Every setting that influences the results, as `key = value` pairs in
    /// config-file syntax. Output location and worker count are left out so
    /// the output does not depend on them.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[usize]| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let scheme = |s: &SchemeArgs| {
            vec![
                ("problem", s.problem.clone()),
                ("theta", s.theta.value().to_string()),
                ("m", s.m.to_string()),
                ("seed", s.seed.to_string()),
                ("horizon", s.horizon.to_string()),
            ]
        };
        let mut items = match self {
            Command::Simulate(a) => {
                let mut v = scheme(&a.scheme);
                v.push(("steps", a.steps.to_string()));
                v.push(("sample-index", a.sample_index.to_string()));
                let times: Vec<String> = if a.record.is_empty() {
                    vec![a.scheme.horizon.to_string()]
                } else {
                    a.record.iter().map(|t| t.to_string()).collect()
                };
                v.push(("record", times.join(",")));
                v
            }
            Command::Convergence(a) => {
                let mut v = scheme(&a.scheme);
                v.push(("levels", list(&a.levels)));
                v.push(("ref", a.reference.to_string()));
                v.push(("samples", a.samples.to_string()));
                v
            }
            Command::Stability(a) => {
                let mut v = scheme(&a.scheme);
                v.push(("levels", list(&a.levels)));
                v.push(("samples", a.samples.to_string()));
                v.push(("spread", a.spread.to_string()));
                v.push(("blowup", a.blowup.to_string()));
                v
            }
            Command::NoiseCheck(a) => vec![
                ("levels", list(&a.levels)),
                ("samples", a.samples.to_string()),
                ("seed", a.seed.to_string()),
                ("horizon", a.horizon.to_string()),
            ],
        };
        items.push(("plot", self.output().plot.to_string()));
        items
    }
}

fn parse_theta(s: &str) -> Result<Theta, String> {
    let value: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    Theta::from_value(value).map_err(|_| format!("theta must be 0 or 0.5, got {s}"))
}

fn parse_steps(s: &str) -> Result<usize, String> {
    let n: usize = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a step count"))?;
    if n < 2 || !n.is_power_of_two() {
        return Err(format!("{n} is not a power of two >= 2"));
    }
    Ok(n)
}

fn parse_subintervals(s: &str) -> Result<usize, String> {
    let m: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if m < 2 {
        return Err("need at least 2 spatial subintervals".into());
    }
    Ok(m)
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a non-negative time")),
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_config_entries(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{line}`", i + 1);
        };
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Turns config entries into flags for `subcommand`, rejecting keys it does
/// not accept.
fn entries_to_flags(subcommand: &str, entries: &[(String, String)]) -> anyhow::Result<Vec<OsString>> {
    let root = Cli::command();
    let sub = root
        .find_subcommand(subcommand)
        .with_context(|| format!("unknown subcommand `{subcommand}`"))?;
    let mut flags = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .with_context(|| format!("unknown config key `{key}` for `{subcommand}`"))?;
        if arg.get_action().takes_values() {
            flags.push(format!("--{key}").into());
            flags.push(value.into());
        } else {
            match value.as_str() {
                "true" => flags.push(format!("--{key}").into()),
                "false" => {}
                other => bail!("config key `{key}` expects true or false, got `{other}`"),
            }
        }
    }
    Ok(flags)
}

/// Parses `argv` (including the program name), applying `--config` if given.
pub fn parse_args<I, T>(argv: I) -> anyhow::Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Cli::try_parse_from(&argv)?;
    let Some(path) = first.command.output().config.clone() else {
        return Ok(first);
    };
    let name = first.command.name();
    let text = read_file(&path)?;
    let flags = entries_to_flags(name, &read_config_entries(&text)?)
        .with_context(|| format!("in config file {}", path.display()))?;
    let at = argv
        .iter()
        .position(|a| a == name)
        .context("subcommand missing from argv")?;
    let mut merged = argv[..=at].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&argv[at + 1..]);
    Ok(Cli::try_parse_from(merged)?)
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))
}
