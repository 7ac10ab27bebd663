//! Run configuration: flags, an optional `key = value` file, and one
//! environment variable, resolved into a validated [`RunConfig`].
//!
//! Precedence, lowest first: built-in defaults, config file,
//! `RLL2D_OUTPUT_DIR` (output directory only), command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rll2d::grid_model::{ConstraintKind, MAX_SIDE, MAX_STRIP_WIDTH};
use rll2d::LayerSchedule;

use crate::CliError;

pub const OUTPUT_ENV: &str = "RLL2D_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "rll2d", version, about = "Capacities and information rates of 2-D constrained channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Noiseless capacity C_M by tree-based Ogata-Tanemura
    Capacity(Knobs),
    /// Information rate over the AWGN channel at a list of SNRs
    InfoRate(Knobs),
    /// Exact log2 Z by enumeration and transfer matrix
    Oracle(Knobs),
    /// Sampler self-test on the hard-square chain of length m
    ChainCheck(Knobs),
}

/// Every knob, unset unless given. Shared by flags and the config file.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Knobs {
    /// `key = value` file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// grid side M (chain length for chain-check)
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, short = 'w')]
    pub strip_width: Option<usize>,
    /// samples per chain (draws for chain-check)
    #[arg(long)]
    pub k: Option<usize>,
    /// outer samples of the information rate
    #[arg(long)]
    pub l: Option<usize>,
    /// independent chains for capacity estimates
    #[arg(long)]
    pub paths: Option<usize>,
    /// sweeps discarded per chain (default 10·M)
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// comma-separated SNR list in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,
    /// number of importance-sampling layers (default: 3 at 0 dB, 6 at 6 dB)
    #[arg(long)]
    pub j: Option<usize>,
    /// "geometric" or an explicit comma-separated list starting at 1
    #[arg(long)]
    pub alpha_schedule: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub constraint: Option<String>,
    /// worker threads (default: all cores); does not change results
    #[arg(long)]
    pub threads: Option<usize>,
    /// trace checkpoints per decade of samples, 0 disables traces
    #[arg(long)]
    pub trace_per_decade: Option<u32>,
}

impl Knobs {
    /// `self` where set, else `other`.
    fn or(self, other: Knobs) -> Knobs {
        Knobs {
            config: self.config.or(other.config),
            m: self.m.or(other.m),
            strip_width: self.strip_width.or(other.strip_width),
            k: self.k.or(other.k),
            l: self.l.or(other.l),
            paths: self.paths.or(other.paths),
            burn_in: self.burn_in.or(other.burn_in),
            thinning: self.thinning.or(other.thinning),
            seed: self.seed.or(other.seed),
            snr_db: self.snr_db.or(other.snr_db),
            j: self.j.or(other.j),
            alpha_schedule: self.alpha_schedule.or(other.alpha_schedule),
            output: self.output.or(other.output),
            constraint: self.constraint.or(other.constraint),
            threads: self.threads.or(other.threads),
            trace_per_decade: self.trace_per_decade.or(other.trace_per_decade),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Capacity,
    InfoRate,
    Oracle,
    ChainCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Capacity => "capacity",
            Command::InfoRate => "info-rate",
            Command::Oracle => "oracle",
            Command::ChainCheck => "chain-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSchedule {
    Geometric,
    Explicit(Vec<f64>),
}

impl fmt::Display for AlphaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSchedule::Geometric => f.write_str("geometric"),
            AlphaSchedule::Explicit(a) => {
                let parts: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Fully resolved and validated settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub m: usize,
    pub strip_width: usize,
    pub k: usize,
    pub l: usize,
    pub paths: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub snr_db: Vec<f64>,
    /// `None` picks `J` per SNR
    pub j: Option<usize>,
    pub alpha_schedule: AlphaSchedule,
    pub output: PathBuf,
    pub constraint: String,
    pub threads: Option<usize>,
    pub trace_per_decade: u32,
}

impl RunConfig {
    /// `key = value` lines covering every knob that affects the numbers;
    /// readable back with `--config`.
    pub fn manifest_entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("command", self.command.to_string()),
            ("m", self.m.to_string()),
            ("strip_width", self.strip_width.to_string()),
            ("k", self.k.to_string()),
            ("l", self.l.to_string()),
            ("paths", self.paths.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thinning", self.thinning.to_string()),
            ("seed", self.seed.to_string()),
            (
                "snr_db",
                self.snr_db.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            ),
        ];
        if let Some(j) = self.j {
            out.push(("j", j.to_string()));
        }
        out.push(("alpha_schedule", self.alpha_schedule.to_string()));
        out.push(("constraint", self.constraint.clone()));
        out.push(("trace_per_decade", self.trace_per_decade.to_string()));
        out
    }

    /// The explicit schedule, if one was given.
    pub fn explicit_schedule(&self) -> Option<LayerSchedule> {
        match &self.alpha_schedule {
            AlphaSchedule::Explicit(a) => LayerSchedule::from_alphas(a.clone()).ok(),
            AlphaSchedule::Geometric => None,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(field, format!("cannot parse {value:?}")))
}

fn parse_list(field: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(field, s))
        .collect()
}

/// Reads a config file: one `key = value` per line, `#` starts a comment,
/// keys may use `-` or `_`.
pub fn read_config_file(path: &Path) -> Result<Knobs, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        invalid("config", format!("cannot read {}: {e}", path.display()))
    })?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Knobs, CliError> {
    let mut k = Knobs::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid("config", format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('-', "_").to_lowercase();
        let value = value.trim();
        match key.as_str() {
            // a manifest read back as a config names its command; it is ignored
            "command" => {}
            "m" => k.m = Some(parse_value("m", value)?),
            "strip_width" => k.strip_width = Some(parse_value("strip_width", value)?),
            "k" => k.k = Some(parse_value("k", value)?),
            "l" => k.l = Some(parse_value("l", value)?),
            "paths" => k.paths = Some(parse_value("paths", value)?),
            "burn_in" => k.burn_in = Some(parse_value("burn_in", value)?),
            "thinning" => k.thinning = Some(parse_value("thinning", value)?),
            "seed" => k.seed = Some(parse_value("seed", value)?),
            "snr_db" => k.snr_db = Some(parse_list("snr_db", value)?),
            "j" => k.j = Some(parse_value("j", value)?),
            "alpha_schedule" => k.alpha_schedule = Some(value.to_string()),
            "output" => k.output = Some(PathBuf::from(value)),
            "constraint" => k.constraint = Some(value.to_string()),
            "threads" => k.threads = Some(parse_value("threads", value)?),
            "trace_per_decade" => k.trace_per_decade = Some(parse_value("trace_per_decade", value)?),
            other => return Err(invalid(other, "unknown config key")),
        }
    }
    Ok(k)
}

/// Parses `args` (including the program name) and resolves the run.
pub fn parse_and_validate<I, S>(args: I, env_output: Option<PathBuf>) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let (command, flags) = match cli.command {
        CommandArgs::Capacity(k) => (Command::Capacity, k),
        CommandArgs::InfoRate(k) => (Command::InfoRate, k),
        CommandArgs::Oracle(k) => (Command::Oracle, k),
        CommandArgs::ChainCheck(k) => (Command::ChainCheck, k),
    };
    let file = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => Knobs::default(),
    };
    let env = Knobs {
        output: env_output,
        ..Knobs::default()
    };
    resolve(command, flags.or(env).or(file))
}

fn at_least_one(field: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        Err(invalid(field, "must be at least 1"))
    } else {
        Ok(v)
    }
}

/// Applies defaults and checks ranges.
pub fn resolve(command: Command, k: Knobs) -> Result<RunConfig, CliError> {
    let default_m = if command == Command::ChainCheck { 5 } else { 10 };
    let m = k.m.unwrap_or(default_m);
    if m == 0 || m > MAX_SIDE {
        return Err(invalid("m", format!("must be in 1..={MAX_SIDE}, got {m}")));
    }
    let strip_width = k.strip_width.unwrap_or(1);
    if strip_width == 0 || strip_width > MAX_STRIP_WIDTH.min(m) {
        return Err(invalid(
            "strip_width",
            format!("must be in 1..={}, got {strip_width}", MAX_STRIP_WIDTH.min(m)),
        ));
    }
    let default_k = match command {
        Command::InfoRate => 10_000,
        _ => 100_000,
    };
    let k_samples = at_least_one("k", k.k.unwrap_or(default_k))?;
    let l = at_least_one("l", k.l.unwrap_or(100))?;
    let paths = at_least_one("paths", k.paths.unwrap_or(4))?;
    let thinning = at_least_one("thinning", k.thinning.unwrap_or(1))?;
    let burn_in = k.burn_in.unwrap_or(10 * m);
    let seed = k.seed.unwrap_or(1);

    let snr_db = k.snr_db.unwrap_or_else(|| (-10..=8).map(f64::from).collect());
    if snr_db.is_empty() {
        return Err(invalid("snr_db", "needs at least one value"));
    }
    if let Some(bad) = snr_db.iter().find(|v| !v.is_finite()) {
        return Err(invalid("snr_db", format!("not finite: {bad}")));
    }

    if let Some(j) = k.j {
        at_least_one("j", j)?;
    }
    let alpha_schedule = match k.alpha_schedule.as_deref().map(str::trim) {
        None | Some("geometric") => AlphaSchedule::Geometric,
        Some(list) => {
            let alphas = parse_list("alpha_schedule", list)?;
            LayerSchedule::from_alphas(alphas.clone())
                .map_err(|e| invalid("alpha_schedule", e.to_string()))?;
            if let Some(j) = k.j {
                if j + 1 != alphas.len() {
                    return Err(invalid(
                        "j",
                        format!("{j} layers but alpha_schedule lists {} exponents", alphas.len()),
                    ));
                }
            }
            AlphaSchedule::Explicit(alphas)
        }
    };
    let j = match &alpha_schedule {
        AlphaSchedule::Explicit(a) => Some(a.len() - 1),
        AlphaSchedule::Geometric => k.j,
    };

    let constraint = k.constraint.unwrap_or_else(|| "rll_1inf".to_string());
    ConstraintKind::from_name(&constraint).map_err(|e| invalid("constraint", e.to_string()))?;
    if let Some(t) = k.threads {
        at_least_one("threads", t)?;
    }

    Ok(RunConfig {
        command,
        m,
        strip_width,
        k: k_samples,
        l,
        paths,
        burn_in,
        thinning,
        seed,
        snr_db,
        j,
        alpha_schedule,
        output: k.output.unwrap_or_else(|| PathBuf::from("rll2d-out")),
        constraint,
        threads: k.threads,
        trace_per_decade: k.trace_per_decade.unwrap_or(20),
    })
}
