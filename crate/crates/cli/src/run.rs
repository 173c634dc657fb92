//! Executes a validated [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

use lpdist::clt::{clt_report_from_batch, sphere_cdf, sphere_mean, sphere_variance, CltConstants, EmpiricalClt, VarianceVerdict};
use lpdist::ldp::conjugate::UNBOUNDED_THRESHOLD;
use lpdist::ldp::mgf::MGF_TOLERANCE;
use lpdist::ldp::rate::INNER_TOLERANCE;
use lpdist::ldp::{rate_curve_with_workers, RateCurve};
use lpdist::stats::{moments, run_batch, shared_tail_rates, MomentSummary, SampleBatch, TailEstimate};
use lpdist::{DomainKind, PIndex};
use serde::Serialize;

use crate::config::{CommandKind, RunConfig};
use crate::output::{self, float, Manifest, Table};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    /// Rejected parameter combination.
    Usage(String),
    /// Numerical failure, resource limit or I/O.
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(s) | RunError::Runtime(s) => f.write_str(s),
        }
    }
}

impl From<lpdist::Error> for RunError {
    fn from(e: lpdist::Error) -> Self {
        match e {
            lpdist::Error::Unsupported(_) => RunError::Usage(format!("error: {e}")),
            _ => RunError::Runtime(format!("error: {e}")),
        }
    }
}

fn io_error(path: &std::path::Path, e: io::Error) -> RunError {
    RunError::Runtime(format!("error: cannot write {}: {e}", path.display()))
}

/// What a command produced, ready to be written.
struct Outputs {
    /// CSV table (file or stdout).
    table: Table,
    /// JSON report without its manifest.
    report: serde_json::Value,
    /// Printed on stdout instead of the table when no file is requested.
    stdout: Option<String>,
    /// Always printed, whatever files are requested.
    banner: Option<String>,
    tolerances: BTreeMap<&'static str, f64>,
    /// A diagnostic for results that did not converge; the run exits 1
    /// after the outputs are written.
    failure: Option<String>,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    summary: MomentSummary,
    values: &'a [f64],
}

#[derive(Serialize)]
struct CltJson {
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    theory: CltConstants,
    empirical: EmpiricalClt,
    ks: f64,
    ks_alternate: Option<f64>,
    verdict: CltVerdict,
}

#[derive(Serialize)]
struct CltVerdict {
    center_consistent: bool,
    variance: Option<VarianceVerdict>,
}

#[derive(Serialize)]
struct SphereReport {
    n: usize,
    t: f64,
    cdf: f64,
    mean: f64,
    var: f64,
}

#[derive(Serialize)]
struct RateReport<'a> {
    curve: &'a RateCurve,
}

#[derive(Serialize)]
struct TailReport<'a> {
    p: PIndex,
    n: usize,
    domain: DomainKind,
    trials: usize,
    seed: u64,
    estimates: &'a [TailEstimate],
}

fn batch_table(batch: &SampleBatch) -> Table {
    let mut table = Table::new(&["trial", "value"]);
    for (i, v) in batch.values.iter().enumerate() {
        table.row(&[i.to_string(), float(*v)]);
    }
    table
}

fn to_value(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn sample(config: &RunConfig) -> Result<Outputs, RunError> {
    let (p, n, domain, trials) = config.sampling();
    let batch = run_batch(p, n, domain, trials, config.seed, config.workers)?;
    let report = SampleReport {
        p,
        n,
        domain,
        trials,
        seed: config.seed,
        summary: moments(&batch.values)?,
        values: &batch.values,
    };
    Ok(Outputs {
        table: batch_table(&batch),
        report: to_value(&report),
        stdout: None,
        banner: None,
        tolerances: BTreeMap::new(),
        failure: None,
    })
}

fn clt_check(config: &RunConfig) -> Result<Outputs, RunError> {
    let (p, n, domain, trials) = config.sampling();
    let batch = run_batch(p, n, domain, trials, config.seed, config.workers)?;
    let r = clt_report_from_batch(&batch)?;
    let json = CltJson {
        p,
        n,
        domain,
        trials,
        seed: config.seed,
        theory: r.constants,
        empirical: r.empirical,
        ks: r.ks_vs_theory,
        ks_alternate: r.ks_vs_alternate,
        verdict: CltVerdict {
            center_consistent: r.center_consistent,
            variance: r.variance_verdict,
        },
    };
    let report = to_value(&json);
    Ok(Outputs {
        table: batch_table(&batch),
        stdout: Some(output::json_text(&report)),
        report,
        banner: None,
        tolerances: BTreeMap::new(),
        failure: None,
    })
}

fn sphere_exact(config: &RunConfig) -> Result<Outputs, RunError> {
    let n = config.n.expect("validated");
    let t = config.t.expect("validated");
    let r = SphereReport {
        n,
        t,
        cdf: sphere_cdf(n, t)?,
        mean: sphere_mean(n)?,
        var: sphere_variance(n)?,
    };
    let mut table = Table::new(&["n", "t", "cdf", "mean", "var"]);
    table.row(&[n.to_string(), float(t), float(r.cdf), float(r.mean), float(r.var)]);
    let banner = format!("cdf={} mean={} var={}\n", output::short(r.cdf), output::short(r.mean), output::short(r.var));
    Ok(Outputs {
        table,
        report: to_value(&r),
        stdout: Some(String::new()),
        banner: Some(banner),
        tolerances: BTreeMap::from([("sphere_cdf_absolute", 1e-10)]),
        failure: None,
    })
}

fn rate(config: &RunConfig) -> Result<Outputs, RunError> {
    let p = config.p.expect("validated");
    let domain = config.domain.expect("validated");
    let curve = rate_curve_with_workers(
        p,
        domain,
        config.z_min.expect("validated"),
        config.z_max.expect("validated"),
        config.steps.expect("validated"),
        config.workers,
    )?;
    let mut table = Table::new(&["z", "rate", "inner_argmin", "converged"]);
    for ((z, r), d) in curve.z_grid.iter().zip(&curve.rates).zip(&curve.minimizers) {
        table.row(&[
            float(*z),
            output::extended(*r),
            d.inner_argmin.map_or_else(|| "nan".into(), float),
            d.converged.to_string(),
        ]);
    }
    let failed: Vec<String> = curve
        .z_grid
        .iter()
        .zip(&curve.minimizers)
        .filter(|(_, d)| !d.converged)
        .map(|(z, _)| z.to_string())
        .collect();
    let failure = (!failed.is_empty())
        .then(|| format!("error: the rate did not converge at z = {}", failed.join(", ")));
    let tolerances = if p.is_infinite() {
        BTreeMap::from([("cube_quadrature_relative", 1e-13)])
    } else {
        BTreeMap::from([
            ("mgf_quadrature", MGF_TOLERANCE),
            ("inner_search", INNER_TOLERANCE),
            ("unbounded_threshold", UNBOUNDED_THRESHOLD),
        ])
    };
    Ok(Outputs {
        table,
        report: to_value(&RateReport { curve: &curve }),
        stdout: None,
        banner: None,
        tolerances,
        failure,
    })
}

fn tail(config: &RunConfig) -> Result<Outputs, RunError> {
    let (p, n, domain, trials) = config.sampling();
    let estimates = shared_tail_rates(p, n, domain, &config.z, trials, config.seed, config.workers)?;
    let mut table = Table::new(&["z", "rate", "hits", "trials", "censored"]);
    for e in &estimates {
        table.row(&[float(e.z), float(e.rate), e.hits.to_string(), e.trials.to_string(), e.censored.to_string()]);
    }
    let report = TailReport {
        p,
        n,
        domain,
        trials,
        seed: config.seed,
        estimates: &estimates,
    };
    Ok(Outputs {
        table,
        report: to_value(&report),
        stdout: None,
        banner: None,
        tolerances: BTreeMap::new(),
        failure: None,
    })
}

/// Runs `config`, writes its outputs and returns the exit code. `argv` is
/// echoed into the manifest.
pub fn run(config: &RunConfig, argv: &[String]) -> i32 {
    match execute(config, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn execute(config: &RunConfig, argv: &[String]) -> Result<i32, RunError> {
    let start = Instant::now();
    let out = match config.command {
        CommandKind::Sample => sample(config),
        CommandKind::CltCheck => clt_check(config),
        CommandKind::SphereExact => sphere_exact(config),
        CommandKind::Rate => rate(config),
        CommandKind::Tail => tail(config),
    }?;
    let manifest = Manifest {
        tool: "lpdist",
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        argv: argv.to_vec(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        tolerances: out.tolerances.clone(),
    };

    let mut stdout = io::stdout().lock();
    if let Some(banner) = &out.banner {
        let _ = stdout.write_all(banner.as_bytes());
    }
    if config.csv.is_none() && config.json.is_none() {
        let text = out.stdout.as_deref().unwrap_or(out.table.as_str());
        let _ = stdout.write_all(text.as_bytes());
    }
    if let Some(path) = &config.csv {
        output::write_atomic(path, out.table.as_str()).map_err(|e| io_error(path, e))?;
        let mpath = output::manifest_path(path);
        output::write_atomic(&mpath, &output::json_text(&manifest)).map_err(|e| io_error(&mpath, e))?;
    }
    if let Some(path) = &config.json {
        let report = output::with_manifest(&out.report, &manifest);
        output::write_atomic(path, &output::json_text(&report)).map_err(|e| io_error(path, e))?;
    }
    let _ = stdout.flush();
    match out.failure {
        Some(msg) => {
            eprintln!("{msg}");
            Ok(EXIT_RUNTIME)
        }
        None => Ok(EXIT_OK),
    }
}
