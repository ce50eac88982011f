//! Run configuration: command-line flags, optionally merged with a
//! `key=value` config file, validated per command.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::process_spec::parse_process;
use crate::registry::{KernelRegistry, StatisticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a sample path and write it as CSV.
    Gen,
    /// Sample quantile or U-quantile of one path.
    Estimate,
    /// Monte Carlo rate study of the Bahadur remainder.
    RateStudy,
    /// Coverage of CLT confidence intervals.
    Coverage,
    /// Law-of-the-iterated-logarithm boundedness along paths.
    Lil,
    /// Built-in exactness checks.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Estimate => "estimate",
            Command::RateStudy => "rate-study",
            Command::Coverage => "coverage",
            Command::Lil => "lil",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Sort-and-count selection.
    #[default]
    Fast,
    /// Enumeration of all pair statistics.
    Naive,
}

/// `--n 1000` or `--n 128..8192`; a range expands to the powers of two
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SampleSizes {
    Single(usize),
    Range(usize, usize),
}

impl SampleSizes {
    pub fn values(&self) -> Vec<usize> {
        match *self {
            SampleSizes::Single(n) => vec![n],
            SampleSizes::Range(lo, hi) => (0..usize::BITS)
                .map(|k| 1usize << k)
                .filter(|n| (lo..=hi).contains(n))
                .collect(),
        }
    }
}

impl FromStr for SampleSizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{v}` is not a sample size"))
        };
        let sizes = match s.split_once("..") {
            Some((a, b)) => {
                let (lo, hi) = (parse(a)?, parse(b)?);
                if lo > hi {
                    return Err(format!("empty range `{s}`"));
                }
                SampleSizes::Range(lo, hi)
            }
            None => SampleSizes::Single(parse(s)?),
        };
        if sizes.values().is_empty() || sizes.values()[0] == 0 {
            return Err(format!("`{s}` contains no usable sample size"));
        }
        Ok(sizes)
    }
}

impl fmt::Display for SampleSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSizes::Single(n) => write!(f, "{n}"),
            SampleSizes::Range(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

impl TryFrom<String> for SampleSizes {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SampleSizes> for String {
    fn from(s: SampleSizes) -> String {
        s.to_string()
    }
}

/// Validated configuration of one run. Serialises to the config echo of
/// every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
#[command(
    name = "uquant",
    version,
    about = "U-quantiles and Bahadur remainders of dependent data"
)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Process spec: iid, ar1:phi=0.5, ma:q=2,w=1,1,1, lin:a=4,inn=rademacher, gauss, const:value=1.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    /// Kernel name (hl, qn); implies --statistic u-quantile.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticKind>,
    /// Probability level of the quantile.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Sample size, or a range a..b of powers of two.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<SampleSizes>,
    /// Path length for lil.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    /// Monte Carlo replicates (paths for lil).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Confidence level for coverage.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Master seed.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Asymptotic variance for lil; estimated from each path when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// Bartlett bandwidth for coverage; ⌈n^{1/3}⌉ when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Per-replicate CSV (n, rep, r) for rate-study.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// File of key=value lines; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

const DEFAULT_RATE_REPS: usize = 2000;
const DEFAULT_COVERAGE_REPS: usize = 2000;
const DEFAULT_LEVEL: f64 = 0.95;
const DEFAULT_SELFTEST_SEED: u64 = 20_240_601;

/// Flags each command accepts besides `--config`, `--out`, `--format`
/// and `--threads`.
fn accepted(command: Command) -> &'static [&'static str] {
    match command {
        Command::Gen => &["process", "n", "seed"],
        Command::Estimate => &["process", "kernel", "statistic", "p", "n", "seed", "method"],
        Command::RateStudy => &[
            "process",
            "kernel",
            "statistic",
            "p",
            "n",
            "reps",
            "seed",
            "dump",
        ],
        Command::Coverage => &[
            "process",
            "kernel",
            "statistic",
            "p",
            "n",
            "reps",
            "level",
            "seed",
            "bandwidth",
        ],
        Command::Lil => &[
            "process",
            "kernel",
            "statistic",
            "p",
            "nmax",
            "reps",
            "seed",
            "sigma2",
        ],
        Command::Selftest => &["seed", "reps"],
    }
}

/// Parses the command line (first element is the program name), merges a
/// config file if given, and validates the result.
pub fn parse_args<I, T>(argv: I) -> CliResult<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut config = RunConfig::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Info(e.to_string())
        }
        _ => CliError::Usage(e.render().to_string().trim_end().to_string()),
    })?;
    if let Some(path) = config.config.clone() {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        merge_config_file(&mut config, &text, &path)?;
    }
    config.validate(&KernelRegistry::default())?;
    Ok(config)
}

fn parse_value<T: FromStr>(key: &str, value: &str, path: &Path) -> CliResult<T> {
    value.parse().map_err(|_| {
        CliError::usage(format!(
            "{}: invalid value `{value}` for `{key}`",
            path.display()
        ))
    })
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str, path: &Path) -> CliResult<T> {
    T::from_str(value, false).map_err(|_| {
        CliError::usage(format!(
            "{}: invalid value `{value}` for `{key}`",
            path.display()
        ))
    })
}

/// Fills fields not set on the command line from `key=value` lines.
/// Blank lines and `#` comments are ignored; unknown keys are rejected.
pub fn merge_config_file(config: &mut RunConfig, text: &str, path: &Path) -> CliResult<()> {
    macro_rules! fill {
        ($field:ident, $value:expr) => {
            if config.$field.is_none() {
                config.$field = Some($value);
            }
        };
    }
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "command" => {
                let c: Command = parse_enum(key, value, path)?;
                if c != config.command {
                    return Err(CliError::usage(format!(
                        "config file command `{}` conflicts with command `{}`",
                        c.name(),
                        config.command.name()
                    )));
                }
            }
            "process" => fill!(process, value.to_string()),
            "kernel" => fill!(kernel, value.to_string()),
            "statistic" => fill!(statistic, parse_enum(key, value, path)?),
            "p" => fill!(p, parse_value(key, value, path)?),
            "n" => fill!(n, parse_value(key, value, path)?),
            "nmax" => fill!(nmax, parse_value(key, value, path)?),
            "reps" => fill!(reps, parse_value(key, value, path)?),
            "level" => fill!(level, parse_value(key, value, path)?),
            "seed" => fill!(seed, parse_value(key, value, path)?),
            "sigma2" => fill!(sigma2, parse_value(key, value, path)?),
            "bandwidth" => fill!(bandwidth, parse_value(key, value, path)?),
            "method" => fill!(method, parse_enum(key, value, path)?),
            "out" => fill!(out, PathBuf::from(value)),
            "dump" => fill!(dump, PathBuf::from(value)),
            "format" => fill!(format, parse_enum(key, value, path)?),
            "threads" => fill!(threads, parse_value(key, value, path)?),
            other => {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown key `{other}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Names of the optional fields that are set.
    fn set_fields(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        macro_rules! check {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { set.push(stringify!($field)); })*
            };
        }
        check!(
            process, kernel, statistic, p, n, nmax, reps, level, seed, sigma2, bandwidth, method,
            dump
        );
        set
    }

    /// Checks everything that can be checked without running, including
    /// generator preconditions of the process spec.
    pub fn validate(&self, registry: &KernelRegistry) -> CliResult<()> {
        let cmd = self.command.name();
        let allowed = accepted(self.command);
        if self.command == Command::Lil && self.n.is_some() {
            return Err(CliError::usage("--n conflicts with lil; use --nmax"));
        }
        if let Some(flag) = self.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::usage(format!(
                "--{flag} is not accepted by {cmd}"
            )));
        }
        if self.statistic == Some(StatisticKind::Quantile) && self.kernel.is_some() {
            return Err(CliError::usage(
                "--kernel conflicts with --statistic quantile",
            ));
        }
        if self.statistic == Some(StatisticKind::UQuantile) && self.kernel.is_none() {
            return Err(CliError::usage("--statistic u-quantile requires --kernel"));
        }
        if let Some(k) = &self.kernel {
            registry.get(k)?;
        }
        if let Some(spec) = &self.process {
            parse_process(spec)?;
        }
        if self.command == Command::Gen && self.format == Some(Format::Json) {
            return Err(CliError::usage(
                "--format json conflicts with gen, which always writes CSV",
            ));
        }
        if self.dump.is_some() && self.dump == self.out {
            return Err(CliError::usage("--dump conflicts with --out: same path"));
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }

        let needs =
            |flag: &str| allowed.contains(&flag) && !matches!(self.command, Command::Selftest);
        if needs("seed") && self.seed.is_none() {
            return Err(CliError::usage(format!("{cmd} requires --seed")));
        }
        if needs("p") {
            match self.p {
                None => return Err(CliError::usage(format!("{cmd} requires --p"))),
                Some(p) if !(p > 0.0 && p < 1.0) => {
                    return Err(CliError::usage(format!("--p must lie in (0, 1), got {p}")))
                }
                _ => {}
            }
        }
        match (self.command, self.n) {
            (Command::Lil | Command::Selftest, _) => {}
            (_, None) => return Err(CliError::usage(format!("{cmd} requires --n"))),
            (Command::RateStudy, Some(_)) => {}
            (_, Some(SampleSizes::Range(..))) => {
                return Err(CliError::usage(format!(
                    "{cmd} takes a single --n, not a range"
                )))
            }
            (_, Some(SampleSizes::Single(_))) => {}
        }
        if self.command == Command::Lil && self.nmax.is_none() {
            return Err(CliError::usage("lil requires --nmax"));
        }
        if let Some(level) = self.level {
            if !(level > 0.0 && level < 1.0) {
                return Err(CliError::usage(format!(
                    "--level must lie in (0, 1), got {level}"
                )));
            }
        }
        if self.reps == Some(0) {
            return Err(CliError::usage("--reps must be at least 1"));
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::usage(format!(
                    "--sigma2 must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn process_spec(&self) -> &str {
        self.process.as_deref().unwrap_or("iid")
    }

    pub fn statistic_kind(&self) -> StatisticKind {
        match (self.statistic, &self.kernel) {
            (Some(kind), _) => kind,
            (None, Some(_)) => StatisticKind::UQuantile,
            (None, None) => StatisticKind::Quantile,
        }
    }

    pub fn format(&self) -> Format {
        match self.command {
            Command::Gen => Format::Csv,
            _ => self.format.unwrap_or_default(),
        }
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SELFTEST_SEED)
    }

    pub fn reps_or_default(&self) -> usize {
        self.reps.unwrap_or(match self.command {
            Command::RateStudy => DEFAULT_RATE_REPS,
            Command::Coverage => DEFAULT_COVERAGE_REPS,
            Command::Selftest => 200,
            _ => 1,
        })
    }

    pub fn level_or_default(&self) -> f64 {
        self.level.unwrap_or(DEFAULT_LEVEL)
    }

    pub fn single_n(&self) -> usize {
        match self.n {
            Some(SampleSizes::Single(n)) => n,
            _ => unreachable!("validated single --n"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> CliResult<RunConfig> {
        parse_args(std::iter::once("uquant").chain(args.split_whitespace()))
    }

    #[test]
    fn happy_path() {
        let c = parse(
            "rate-study --process iid --kernel hl --p 0.5 --n 128..8192 --reps 2000 --seed 42",
        )
        .unwrap();
        assert_eq!(c.command, Command::RateStudy);
        assert_eq!(
            c.n.unwrap().values(),
            [128, 256, 512, 1024, 2048, 4096, 8192]
        );
        assert_eq!(c.statistic_kind(), StatisticKind::UQuantile);
    }

    #[test]
    fn usage_errors() {
        for bad in [
            "rate-study --process iid --kernel hl --p 1.5 --n 128..8192 --seed 1",
            "estimate --process ar1:phi=1.2 --p 0.5 --n 100 --seed 1",
            "estimate --p 0.5 --n 100",
            "estimate --p 0.5 --n 100..200 --seed 1",
            "estimate --p 0.5 --n 100 --seed 1 --level 0.9",
            "lil --p 0.5 --n 100 --nmax 2048 --seed 1",
            "estimate --statistic quantile --kernel hl --p 0.5 --n 10 --seed 1",
            "estimate --kernel nope --p 0.5 --n 10 --seed 1",
            "gen --n 10 --seed 1 --format json",
            "frobnicate",
            "gen --n 10 --seed 1 --bogus 3",
            "estimate --p 0.5 --n 10..5 --seed 1",
        ] {
            match parse(bad) {
                Err(CliError::Usage(_)) => {}
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn conflicts_are_named() {
        let e =
            parse("estimate --statistic quantile --kernel hl --p 0.5 --n 10 --seed 1").unwrap_err();
        assert!(e.to_string().contains("--kernel") && e.to_string().contains("--statistic"));
        let e = parse("lil --p 0.5 --n 100 --nmax 2048 --seed 1").unwrap_err();
        assert!(e.to_string().contains("--n") && e.to_string().contains("--nmax"));
    }

    #[test]
    fn round_trips_through_json() {
        let c = parse("coverage --process ar1:phi=0.5 --kernel hl --p 0.5 --n 1000 --reps 2000 --level 0.95 --seed 7").unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"command":"gen","colour":"red"}"#).is_err());
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = std::env::temp_dir().join(format!("uquant-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(
            &path,
            "# defaults\nprocess = ar1:phi=0.3\np = 0.25\nseed = 5\nn = 64\n",
        )
        .unwrap();
        let c = parse(&format!("estimate --config {} --seed 9", path.display())).unwrap();
        assert_eq!(c.process.as_deref(), Some("ar1:phi=0.3"));
        assert_eq!(c.p, Some(0.25));
        assert_eq!(c.seed, Some(9));
        std::fs::write(&path, "colour = red\n").unwrap();
        assert!(matches!(
            parse(&format!(
                "estimate --config {} --p 0.5 --n 10 --seed 1",
                path.display()
            )),
            Err(CliError::Usage(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
