//! Dispatch of a validated [`RunConfig`] to the library.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use uquant_core::asymptotics::{
    clt_coverage, lil_diagnostic, power_of_two_checkpoints, LilDiagnostic,
};
use uquant_core::bahadur::{rate_study, QuantileStatistic, RateStudyConfig};
use uquant_core::empirical::EmpiricalUDist;
use uquant_core::exec::Executor;
use uquant_core::math::ks_distance;
use uquant_core::rng::derive_seed;

use crate::config::{Command, Format, Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::exec::RayonExecutor;
use crate::process_spec::parse_process;
use crate::registry::{build_statistic, derive_truth, KernelRegistry};
use crate::selftest::run_selftest;

/// Report of one run: config echo, the command's results (flattened into
/// the top level), timing and provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    #[serde(flatten)]
    pub results: Map<String, Value>,
    pub wall_time_seconds: f64,
    pub version: &'static str,
    pub timestamp: String,
}

/// Rows for CSV output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// One row of the scalar fields of `results`.
    fn from_scalars(results: &Map<String, Value>) -> Self {
        let mut t = Table::default();
        let mut row = Vec::new();
        for (k, v) in results {
            let cell = match v {
                Value::String(s) => s.clone(),
                Value::Number(_) | Value::Bool(_) | Value::Null => v.to_string(),
                _ => continue,
            };
            t.headers.push(k.clone());
            row.push(cell);
        }
        t.rows.push(row);
        t
    }

    pub fn write_to(&self, out: impl Write) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| CliError::io("writing CSV", e.into());
        w.write_record(&self.headers).map_err(to_io)?;
        for row in &self.rows {
            w.write_record(row).map_err(to_io)?;
        }
        w.flush().map_err(|e| CliError::io("writing CSV", e))
    }
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    /// Data rows: the path for `gen`, the CSV form for `--format csv`.
    pub table: Table,
    /// Per-replicate rows for `--dump`.
    pub dump: Option<Table>,
    /// Set when the run completed but a check failed (selftest).
    pub failure: Option<String>,
}

fn to_map(value: impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(value).expect("serialisable result") {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// Shortest round-trip form, scientific for very small or large values.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Runs `config` (already validated) and collects its outputs.
pub fn run(config: &RunConfig) -> CliResult<Outcome> {
    run_with_registry(config, &KernelRegistry::default())
}

pub fn run_with_registry(config: &RunConfig, registry: &KernelRegistry) -> CliResult<Outcome> {
    config.validate(registry)?;
    let started = Instant::now();
    let exec = RayonExecutor::new(config.threads)?;
    let process = parse_process(config.process_spec())?;
    let seed = config.seed_or_default();

    let statistic = || -> CliResult<QuantileStatistic> {
        build_statistic(
            registry,
            config.statistic_kind(),
            config.kernel.as_deref(),
            &process,
        )
    };
    let p = config.p.unwrap_or(0.5);

    let mut dump = None;
    let mut failure = None;
    let (results, table) = match config.command {
        Command::Gen => {
            let n = config.single_n();
            let path = process.generate(n, seed);
            let ks = process.marginal().map(|m| ks_distance(&path, |x| m.cdf(x)));
            let results = to_map(json!({
                "process": config.process_spec(),
                "n": n,
                "seed": seed,
                "params": process.params(),
                "ks": ks,
            }));
            let mut table = Table::new(&["x"]);
            table.rows = path.iter().map(|&x| vec![fmt(x)]).collect();
            (results, table)
        }
        Command::Estimate => {
            let stat = statistic()?;
            let n = config.single_n();
            let path = process.generate(n, seed);
            let method = config.method.unwrap_or_default();
            let estimate = match (&stat, method) {
                (QuantileStatistic::UQuantile(k), Method::Naive) => {
                    EmpiricalUDist::new(&path, k)?.quantile(p)?
                }
                _ => stat.estimate(&path, p)?,
            };
            let results = to_map(json!({
                "estimate": estimate,
                "n": n,
                "p": p,
                "kernel": stat.name(),
                "statistic": config.statistic_kind(),
                "process": config.process_spec(),
                "seed": seed,
                "method": method,
            }));
            let table = Table::from_scalars(&results);
            (results, table)
        }
        Command::RateStudy => {
            let stat = statistic()?;
            let truth = derive_truth(&process, &stat, p)?;
            let n_grid = config.n.expect("validated").values();
            let study = RateStudyConfig {
                process: process.clone(),
                statistic: stat,
                truth,
                n_grid: n_grid.clone(),
                replicates: config.reps_or_default(),
                master_seed: seed,
            };
            let res = rate_study(&study, &exec)?;
            if config.dump.is_some() {
                let mut d = Table::new(&["n", "rep", "r"]);
                for (n, rs) in n_grid.iter().zip(&res.remainders) {
                    for (rep, r) in rs.iter().enumerate() {
                        d.rows.push(vec![n.to_string(), rep.to_string(), fmt(*r)]);
                    }
                }
                dump = Some(d);
            }
            let mut table = Table::new(&["n", "rms_r", "mean_r", "q90_abs_r"]);
            for s in &res.per_n {
                table.rows.push(vec![
                    s.n.to_string(),
                    fmt(s.rms_r),
                    fmt(s.mean_r),
                    fmt(s.q90_abs_r),
                ]);
            }
            let mut results = to_map(&res);
            results.insert(
                "truth".into(),
                serde_json::to_value(truth).expect("serialisable"),
            );
            (results, table)
        }
        Command::Coverage => {
            let stat = statistic()?;
            let truth = derive_truth(&process, &stat, p)?;
            let res = clt_coverage(
                &process,
                &stat,
                &truth,
                config.single_n(),
                config.reps_or_default(),
                config.level_or_default(),
                config.bandwidth,
                seed,
                &exec,
            )?;
            let mut results = to_map(res);
            results.insert("process".into(), json!(config.process_spec()));
            results.insert("statistic".into(), json!(stat.name()));
            results.insert("p".into(), json!(p));
            results.insert("t_p".into(), json!(truth.t_p));
            let table = Table::from_scalars(&results);
            (results, table)
        }
        Command::Lil => {
            let stat = statistic()?;
            let truth = derive_truth(&process, &stat, p)?;
            let nmax = config.nmax.expect("validated");
            let checkpoints = power_of_two_checkpoints(nmax);
            let paths = config.reps_or_default();
            let diagnostics: Vec<LilDiagnostic> = exec
                .map_indexed(paths, |r| {
                    let path_seed = derive_seed(seed, r as u64);
                    lil_diagnostic(
                        &process,
                        &stat,
                        &truth,
                        nmax,
                        &checkpoints,
                        path_seed,
                        config.sigma2,
                    )
                })
                .into_iter()
                .collect::<Result<_, _>>()?;
            let consistent = diagnostics.iter().filter(|d| d.consistent).count();
            let mut table = Table::new(&["path", "n", "statistic"]);
            for (r, d) in diagnostics.iter().enumerate() {
                for c in &d.per_checkpoint {
                    table
                        .rows
                        .push(vec![r.to_string(), c.n.to_string(), fmt(c.statistic)]);
                }
            }
            let results = to_map(json!({
                "process": config.process_spec(),
                "statistic": stat.name(),
                "p": p,
                "t_p": truth.t_p,
                "nmax": nmax,
                "checkpoints": checkpoints,
                "paths": paths,
                "fraction_consistent": consistent as f64 / paths as f64,
                "diagnostics": diagnostics,
            }));
            (results, table)
        }
        Command::Selftest => {
            let report = run_selftest(seed, config.reps_or_default(), &exec)?;
            let mut table = Table::new(&["check", "instances", "failures", "worst", "passed"]);
            for c in &report.checks {
                table.rows.push(vec![
                    c.name.clone(),
                    c.instances.to_string(),
                    c.failures.to_string(),
                    fmt(c.worst),
                    c.passed.to_string(),
                ]);
            }
            if !report.passed {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                failure = Some(failed.join(", "));
            }
            let mut results = to_map(&report);
            results.insert("seed".into(), json!(seed));
            (results, table)
        }
    };

    let report = RunReport {
        config: config.clone(),
        results,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    Ok(Outcome {
        report,
        table,
        dump,
        failure,
    })
}

fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

fn write_json(value: &impl Serialize, mut out: impl Write, what: &str) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(what, e.into()))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(what, e))
}

/// Sidecar path of `gen` output: `<out>.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the outcome to `--out` (or `stdout`) and `--dump`.
pub fn emit(outcome: &Outcome, config: &RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let format = config.format();
    match (&config.out, format) {
        (Some(path), Format::Csv) => outcome.table.write_to(create(path)?)?,
        (Some(path), Format::Json) => write_json(&outcome.report, create(path)?, "writing report")?,
        (None, Format::Csv) => outcome.table.write_to(&mut *stdout)?,
        (None, Format::Json) => write_json(&outcome.report, &mut *stdout, "writing report")?,
    }
    if config.command == Command::Gen {
        if let Some(path) = &config.out {
            write_json(
                &outcome.report,
                create(&sidecar_path(path))?,
                "writing sidecar",
            )?;
        }
    }
    if let (Some(path), Some(dump)) = (&config.dump, &outcome.dump) {
        dump.write_to(create(path)?)?;
    }
    Ok(())
}
