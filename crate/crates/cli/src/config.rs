//! Command-line parsing and validation.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lpdist::{DomainKind, PIndex};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides `--workers`.
pub const WORKERS_ENV: &str = "LPDIST_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "lpdist", version, about = "Distances between random points in l_p^n balls")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Draw the normalized distance n^{1/p−1/2}·‖X − Y‖₂.
    Sample(SampleArgs),
    /// Compare a batch with the CLT constants.
    CltCheck(SampleArgs),
    /// Exact distance law on the Euclidean sphere S^{n−1}.
    SphereExact(SphereArgs),
    /// Large-deviation rate function on a grid of z values.
    Rate(RateArgs),
    /// Monte Carlo estimates of −(1/n)·ln P(T_n ≥ z).
    Tail(TailArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Seed of the random streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (overridden by LPDIST_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Write values as CSV (plus a `.manifest.json` next to it).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write a JSON report with an embedded manifest.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Norm index, a real ≥ 1 or `inf`.
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    #[arg(long)]
    n: usize,
    /// `interior` (uniform in the ball) or `boundary` (cone measure).
    #[arg(long, default_value = "interior")]
    domain: String,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SphereArgs {
    #[arg(long)]
    n: usize,
    /// Distance at which the CDF is evaluated.
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    #[arg(long, default_value = "interior")]
    domain: String,
    #[arg(long, allow_hyphen_values = true)]
    z_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    z_max: f64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TailArgs {
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "interior")]
    domain: String,
    /// Thresholds, comma separated; all are evaluated on one shared sample.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    z: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Sample,
    CltCheck,
    SphereExact,
    Rate,
    Tail,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Sample => "sample",
            CommandKind::CltCheck => "clt-check",
            CommandKind::SphereExact => "sphere-exact",
            CommandKind::Rate => "rate",
            CommandKind::Tail => "tail",
        })
    }
}

/// A validated run. Fields a command does not use are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub p: Option<PIndex>,
    pub n: Option<usize>,
    pub domain: Option<DomainKind>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub steps: Option<usize>,
    pub z: Vec<f64>,
    pub t: Option<f64>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// What went wrong before anything ran.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// `--help` or `--version`: print and exit 0.
    Info(String),
    /// Bad flags: print and exit 2.
    Usage(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Info(s) | ConfigError::Usage(s) => f.write_str(s),
        }
    }
}

fn usage(flag: &str, detail: impl fmt::Display) -> ConfigError {
    ConfigError::Usage(format!("error: invalid value for '{flag}': {detail}"))
}

fn parse_p(raw: &str) -> Result<PIndex, ConfigError> {
    match raw.parse::<PIndex>() {
        Ok(p) => Ok(p),
        Err(_) if raw.trim().parse::<f64>().is_ok_and(|p| !p.is_nan()) => {
            Err(usage("--p", format!("p must be ≥ 1, got {raw}")))
        }
        Err(_) => Err(usage("--p", format!("{raw:?} is not a number or 'inf'"))),
    }
}

fn parse_domain(raw: &str) -> Result<DomainKind, ConfigError> {
    raw.parse()
        .map_err(|_| usage("--domain", format!("{raw:?} is not 'interior' or 'boundary'")))
}

fn workers_from(flag: Option<usize>, env: Option<&str>) -> Result<usize, ConfigError> {
    let workers = match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| usage(WORKERS_ENV, format!("{raw:?} is not a positive integer")))?,
        None => flag.unwrap_or_else(lpdist::stats::default_workers),
    };
    if workers == 0 {
        return Err(usage("--workers", "need at least one worker"));
    }
    Ok(workers)
}

fn positive(flag: &str, v: usize) -> Result<usize, ConfigError> {
    if v == 0 {
        return Err(usage(flag, "must be at least 1"));
    }
    Ok(v)
}

fn finite(flag: &str, v: f64) -> Result<f64, ConfigError> {
    if !v.is_finite() {
        return Err(usage(flag, format!("must be finite, got {v}")));
    }
    Ok(v)
}

const DEFAULT_SAMPLE_TRIALS: usize = 1000;
const DEFAULT_CLT_TRIALS: usize = 100_000;
const DEFAULT_TAIL_TRIALS: usize = 1_000_000;

impl RunConfig {
    /// Parses and validates `argv` (program name first), reading
    /// `LPDIST_WORKERS` from the environment.
    pub fn parse<I, T>(argv: I) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        Self::parse_with_env(argv, std::env::var(WORKERS_ENV).ok().as_deref())
    }

    /// [`RunConfig::parse`] with an explicit value for `LPDIST_WORKERS`.
    pub fn parse_with_env<I, T>(argv: I, workers_env: Option<&str>) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv).map_err(|e| {
            let text = e.render().to_string();
            if e.use_stderr() {
                ConfigError::Usage(text)
            } else {
                ConfigError::Info(text)
            }
        })?;
        let base = |command, common: Common| -> Result<RunConfig, ConfigError> {
            Ok(RunConfig {
                command,
                p: None,
                n: None,
                domain: None,
                trials: None,
                seed: common.seed,
                workers: workers_from(common.workers, workers_env)?,
                z_min: None,
                z_max: None,
                steps: None,
                z: Vec::new(),
                t: None,
                csv: common.csv,
                json: common.json,
            })
        };
        let config = match cli.command {
            CliCommand::Sample(a) => RunConfig {
                p: Some(parse_p(&a.p)?),
                n: Some(positive("--n", a.n)?),
                domain: Some(parse_domain(&a.domain)?),
                trials: Some(positive("--trials", a.trials.unwrap_or(DEFAULT_SAMPLE_TRIALS))?),
                ..base(CommandKind::Sample, a.common)?
            },
            CliCommand::CltCheck(a) => {
                let trials = a.trials.unwrap_or(DEFAULT_CLT_TRIALS);
                if trials < 100 {
                    return Err(usage("--trials", format!("clt-check needs at least 100 trials, got {trials}")));
                }
                RunConfig {
                    p: Some(parse_p(&a.p)?),
                    n: Some(positive("--n", a.n)?),
                    domain: Some(parse_domain(&a.domain)?),
                    trials: Some(trials),
                    ..base(CommandKind::CltCheck, a.common)?
                }
            }
            CliCommand::SphereExact(a) => {
                if a.n < 2 {
                    return Err(usage("--n", format!("the sphere needs n ≥ 2, got {}", a.n)));
                }
                RunConfig {
                    n: Some(a.n),
                    t: Some(finite("--t", a.t)?),
                    ..base(CommandKind::SphereExact, a.common)?
                }
            }
            CliCommand::Rate(a) => {
                let p = parse_p(&a.p)?;
                if p.as_finite().is_some_and(|p| p < 2.0) {
                    return Err(usage("--p", format!("LDP requires p ≥ 2, got {}", a.p)));
                }
                let domain = parse_domain(&a.domain)?;
                if p.is_infinite() && domain == DomainKind::BallBoundary {
                    return Err(usage("--domain", "no rate function for the boundary of the cube (p = inf)"));
                }
                let z_min = finite("--z-min", a.z_min)?;
                let z_max = finite("--z-max", a.z_max)?;
                if z_min >= z_max {
                    return Err(usage("--z-max", format!("need z-min < z-max, got [{z_min}, {z_max}]")));
                }
                if a.steps < 2 {
                    return Err(usage("--steps", format!("need at least 2 grid points, got {}", a.steps)));
                }
                RunConfig {
                    p: Some(p),
                    domain: Some(domain),
                    z_min: Some(z_min),
                    z_max: Some(z_max),
                    steps: Some(a.steps),
                    ..base(CommandKind::Rate, a.common)?
                }
            }
            CliCommand::Tail(a) => {
                for &z in &a.z {
                    if !(z.is_finite() && z > 0.0) {
                        return Err(usage("--z", format!("thresholds must be positive and finite, got {z}")));
                    }
                }
                RunConfig {
                    p: Some(parse_p(&a.p)?),
                    n: Some(positive("--n", a.n)?),
                    domain: Some(parse_domain(&a.domain)?),
                    trials: Some(positive("--trials", a.trials.unwrap_or(DEFAULT_TAIL_TRIALS))?),
                    z: a.z,
                    ..base(CommandKind::Tail, a.common)?
                }
            }
        };
        if config.csv.is_some() && config.csv == config.json {
            return Err(usage("--json", "must differ from --csv"));
        }
        Ok(config)
    }

    /// The config recorded in a manifest file, either a standalone
    /// `.manifest.json` or a JSON report with an embedded `manifest`.
    pub fn from_manifest(text: &str) -> Result<RunConfig, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let manifest = value.get("manifest").unwrap_or(&value);
        let config = manifest.get("config").ok_or("manifest has no \"config\" entry")?;
        serde_json::from_value(config.clone()).map_err(|e| e.to_string())
    }

    /// The parameters every sampling command needs.
    pub(crate) fn sampling(&self) -> (PIndex, usize, DomainKind, usize) {
        (
            self.p.expect("validated"),
            self.n.expect("validated"),
            self.domain.expect("validated"),
            self.trials.expect("validated"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse_with_env(std::iter::once("lpdist").chain(args.split_whitespace()), Some("2"))
    }

    fn usage_text(args: &str) -> String {
        match parse(args) {
            Err(ConfigError::Usage(s)) => s,
            other => panic!("{args}: expected a usage error, got {other:?}"),
        }
    }

    #[test]
    fn sample_config() {
        let c = parse("sample --p 2 --domain boundary --n 3 --trials 1000 --seed 7").unwrap();
        assert_eq!(c.command, CommandKind::Sample);
        assert_eq!(c.p, Some(PIndex::finite(2.0)));
        assert_eq!(c.domain, Some(DomainKind::BallBoundary));
        assert_eq!((c.n, c.trials, c.seed, c.workers), (Some(3), Some(1000), 7, 2));
    }

    #[test]
    fn infinity_and_defaults() {
        let c = parse("clt-check --p inf --n 200").unwrap();
        assert_eq!(c.p, Some(PIndex::INFINITY));
        assert_eq!(c.domain, Some(DomainKind::BallInterior));
        assert_eq!(c.seed, 1);
        let c = parse("tail --p inf --n 40 --z 0.95,1.05").unwrap();
        assert_eq!(c.z, vec![0.95, 1.05]);
    }

    #[test]
    fn usage_errors_name_the_flag() {
        assert!(usage_text("rate --p 1.5 --domain boundary --z-min 0.5 --z-max 1").contains("LDP requires p ≥ 2"));
        assert!(usage_text("sample --p 0.5 --n 3").contains("--p"));
        assert!(usage_text("sample --p 0.5 --n 3").contains("≥ 1"));
        assert!(usage_text("sample --p two --n 3").contains("--p"));
        assert!(usage_text("rate --p inf --domain boundary --z-min 0.5 --z-max 1").contains("--domain"));
        assert!(usage_text("sample --p 2 --n 0").contains("--n"));
        assert!(usage_text("sphere-exact --n 1 --t 1").contains("--n"));
        assert!(usage_text("tail --p 2 --n 4 --z 1,-1").contains("--z"));
        assert!(usage_text("sample --p 2 --n 3 --domain edge").contains("--domain"));
        assert!(usage_text("sample --p 2").contains("--n"));
    }

    #[test]
    fn environment_overrides_workers() {
        let argv = ["lpdist", "sample", "--p", "2", "--n", "3", "--workers", "5"];
        assert_eq!(RunConfig::parse_with_env(argv, Some("3")).unwrap().workers, 3);
        assert_eq!(RunConfig::parse_with_env(argv, None).unwrap().workers, 5);
        assert!(matches!(RunConfig::parse_with_env(argv, Some("x")), Err(ConfigError::Usage(_))));
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = parse("rate --p 3 --domain interior --z-min 0.3 --z-max 1.5 --steps 7 --csv out.csv").unwrap();
        let text = serde_json::json!({ "config": c }).to_string();
        assert_eq!(RunConfig::from_manifest(&text).unwrap(), c);
    }
}
