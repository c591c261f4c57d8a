//! Command-line arguments and the resolved experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use typical_table::counting::DEFAULT_BUDGET;
use typical_table::rng::aux_stream;
use typical_table::sampling::DEFAULT_MAX_ATTEMPTS;
use typical_table::solver::{DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use typical_table::{EntrySet, Margins};

use crate::error::CliError;

/// Auxiliary stream used to draw random entry sets.
pub const SET_STREAM: u64 = 1;
/// Auxiliary stream used by the scaling checks.
pub const SCALE_STREAM: u64 = 2;

#[derive(Debug, Parser)]
#[command(name = "tt", version, about = "Typical tables of contingency-table margins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the typical table and check its structural bounds.
    Typical(Opts),
    /// Compare the typical table with the independence table.
    Compare(Opts),
    /// Count tables exactly and compare with the bound exp(g(Z)).
    Count(Opts),
    /// Draw uniform tables by rejection or by exact dynamic programming.
    Sample(Opts),
    /// Measure how sigma_S of uniform tables concentrates around sigma_S(Z).
    Concentrate(Opts),
    /// Apply the t-scaling map and check its guarantees.
    Scale(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Typical(_) => "typical",
            Command::Compare(_) => "compare",
            Command::Count(_) => "count",
            Command::Sample(_) => "sample",
            Command::Concentrate(_) => "concentrate",
            Command::Scale(_) => "scale",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Typical(o)
            | Command::Compare(o)
            | Command::Count(o)
            | Command::Sample(o)
            | Command::Concentrate(o)
            | Command::Scale(o) => o,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rejection,
    Dp,
}

/// `--t`: a positive integer or `auto` for `floor(N / (mn)^6)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TSpec {
    Auto,
    Fixed(u64),
}

impl FromStr for TSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(TSpec::Auto);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
            Ok(t) => Ok(TSpec::Fixed(t)),
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct Opts {
    /// JSON file with {"rows": [...], "cols": [...]}.
    #[arg(long, conflicts_with_all = ["rows", "cols"])]
    pub margins: Option<PathBuf>,
    /// Comma-separated row sums (with --cols instead of --margins).
    #[arg(long, requires = "cols")]
    pub rows: Option<String>,
    /// Comma-separated column sums.
    #[arg(long, requires = "rows")]
    pub cols: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest relative margin error accepted from the solver.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    /// Number of tables to draw.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Rejection)]
    pub method: Method,
    /// Scaling factor: positive integer or `auto`.
    #[arg(long)]
    pub t: Option<TSpec>,
    /// Entry set: all | left-half | block:I1..I2xJ1..J2 | fraction:F |
    /// a JSON list of 1-based [i, j] pairs | a file holding such a list.
    #[arg(long)]
    pub set: Option<String>,
    /// Comma-separated clone factors for `compare`.
    #[arg(long, default_value = "1,2,3")]
    pub clone_k: String,
    /// Attempt limit per accepted table for the rejection sampler.
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Which positions `sigma_S` sums over.
#[derive(Clone, Debug, PartialEq)]
pub enum SetSpec {
    All,
    LeftHalf,
    /// 1-based inclusive ranges.
    Block { rows: (usize, usize), cols: (usize, usize) },
    Fraction(f64),
    List(EntrySet),
}

fn parse_range(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("bad range `{s}`, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

impl SetSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text == "all" {
            return Ok(SetSpec::All);
        }
        if text == "left-half" {
            return Ok(SetSpec::LeftHalf);
        }
        if let Some(rest) = text.strip_prefix("block:") {
            let (r, c) = rest
                .split_once(['x', 'X', '×'])
                .ok_or_else(|| CliError::Usage(format!("bad block `{rest}`, expected I1..I2xJ1..J2")))?;
            return Ok(SetSpec::Block {
                rows: parse_range(r)?,
                cols: parse_range(c)?,
            });
        }
        if let Some(rest) = text.strip_prefix("fraction:") {
            let f: f64 = rest
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad fraction `{rest}`")))?;
            return Ok(SetSpec::Fraction(f));
        }
        let json = if text.starts_with('[') {
            text.to_string()
        } else {
            std::fs::read_to_string(text).map_err(|e| CliError::Io(format!("{text}: {e}")))?
        };
        let set: EntrySet =
            serde_json::from_str(&json).map_err(|e| CliError::Usage(format!("bad entry list: {e}")))?;
        Ok(SetSpec::List(set))
    }

    /// The positions for an `m x n` table; random sets come from the
    /// auxiliary set stream of `seed`.
    pub fn resolve(&self, m: usize, n: usize, seed: u64) -> Result<EntrySet, CliError> {
        let set = match self {
            SetSpec::All => EntrySet::all(m, n),
            SetSpec::LeftHalf => EntrySet::block(0..m, 0..n.div_ceil(2)),
            SetSpec::Block { rows, cols } => EntrySet::block(rows.0 - 1..rows.1, cols.0 - 1..cols.1),
            SetSpec::Fraction(f) => EntrySet::random_fraction(m, n, *f, &mut aux_stream(seed, SET_STREAM))?,
            SetSpec::List(s) => s.clone(),
        };
        set.check_bounds(m, n)?;
        if set.is_empty() {
            return Err(CliError::Usage("the entry set is empty".into()));
        }
        Ok(set)
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::All => write!(f, "all"),
            SetSpec::LeftHalf => write!(f, "left-half"),
            SetSpec::Block { rows, cols } => write!(f, "block:{}..{}x{}..{}", rows.0, rows.1, cols.0, cols.1),
            SetSpec::Fraction(x) => write!(f, "fraction:{x}"),
            SetSpec::List(s) => write!(f, "{}", serde_json::to_string(s).expect("entry sets serialize")),
        }
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry `{v}`")))
        })
        .collect()
}

pub fn load_margins(path: &Path) -> Result<Margins, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Everything that determines the outputs of a run. The output directory is
/// left out so that the same experiment written to two places hashes the same.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub margins: Margins,
    pub seed: u64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub samples: usize,
    pub method: Method,
    pub t: Option<TSpec>,
    #[serde(serialize_with = "display_set")]
    pub set: SetSpec,
    pub clone_k: Vec<u64>,
    pub max_attempts: u64,
    pub budget: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn display_set<S: serde::Serializer>(set: &SetSpec, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(set)
}

fn default_samples(command: &str) -> usize {
    match command {
        "sample" => 1000,
        "concentrate" => 1000,
        "scale" => 200,
        _ => 0,
    }
}

fn default_set(command: &str) -> SetSpec {
    match command {
        "compare" => SetSpec::List(EntrySet::new([(0, 0)])),
        "concentrate" => SetSpec::LeftHalf,
        _ => SetSpec::All,
    }
}

/// Reads `TT_BUDGET`, falling back to the library default.
pub fn budget_from_env() -> Result<usize, CliError> {
    match std::env::var("TT_BUDGET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("TT_BUDGET must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

impl ExperimentConfig {
    pub fn from_command(command: &Command) -> Result<Self, CliError> {
        let name = command.name();
        let o = command.opts();
        let margins = match (&o.margins, &o.rows, &o.cols) {
            (Some(path), _, _) => load_margins(path)?,
            (None, Some(r), Some(c)) => Margins::new(&parse_list(r, "row")?, &parse_list(c, "column")?)?,
            _ => return Err(CliError::Usage("give --margins FILE or --rows and --cols".into())),
        };
        let clone_k = parse_list(&o.clone_k, "clone factor")?;
        if clone_k.contains(&0) {
            return Err(CliError::Usage("clone factors must be positive".into()));
        }
        if !(o.tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {}", o.tol)));
        }
        let set = match &o.set {
            Some(text) => SetSpec::parse(text)?,
            None => default_set(name),
        };
        Ok(ExperimentConfig {
            command: name.to_string(),
            margins,
            seed: o.seed,
            tol: o.tol,
            max_sweeps: o.max_sweeps,
            samples: o.samples.unwrap_or_else(|| default_samples(name)),
            method: o.method,
            t: o.t,
            set,
            clone_k,
            max_attempts: o.max_attempts,
            budget: budget_from_env()?,
            out: o.out.clone(),
        })
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configs serialize");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
