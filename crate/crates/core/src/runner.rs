//! Run, sweep, compare and validate workflows with their on-disk artifacts.
//!
//! A run directory holds `events.ndjson`, `summary.json`, `trace.ndjson`
//! (the materialized jobs with the trajectories they actually took, ready to
//! replay) and `series/load_<queue>.csv`.

use std::cmp::Ordering;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Mode, RunOutput};
use crate::error::{Diagnostic, Error, Result};
use crate::metrics::{self, RunSummary};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::workload::{self, JobTraceRecord};

/// Runs a scenario to its horizon and summarizes it.
pub fn simulate(scenario: &Scenario) -> Result<(RunOutput, RunSummary)> {
    let out = scenario.run()?;
    let summary = metrics::summarize(&out, &scenario.config.metrics, &scenario.config.sla);
    Ok((out, summary))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

pub fn write_artifacts(out: &RunOutput, summary: &RunSummary, dir: &Path) -> Result<()> {
    let series = dir.join("series");
    fs::create_dir_all(&series).map_err(|e| Error::io(&series, e))?;

    let p = dir.join("events.ndjson");
    out.log
        .write_ndjson(create(&p)?)
        .map_err(|e| Error::io(&p, e))?;
    let p = dir.join("trace.ndjson");
    workload::write_jobs(&out.jobs, create(&p)?).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("summary.json");
    fs::write(&p, summary.to_json() + "\n").map_err(|e| Error::io(&p, e))?;
    for q in &out.queue_ids {
        let p = series.join(format!("load_{q}.csv"));
        metrics::queue_load_series(&out.log, q)
            .write_csv(create(&p)?)
            .map_err(csv_err(&p))?;
    }
    let p = series.join("load_total.csv");
    metrics::total_load_series(&out.log)
        .write_csv(create(&p)?)
        .map_err(csv_err(&p))?;
    Ok(())
}

/// What `cmd_run` reports back. Wall time is never written to artifacts.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub wall: Duration,
}

impl RunReport {
    pub fn events_per_sec(&self) -> f64 {
        self.summary.events_processed as f64 / self.wall.as_secs_f64().max(1e-9)
    }
}

pub fn cmd_run(
    config: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    mode: Option<Mode>,
) -> Result<RunReport> {
    let mut scenario = Scenario::load(config)?;
    if let Some(s) = seed {
        scenario.config.seed = s;
    }
    if let Some(m) = mode {
        scenario.config.mode = m;
        let diags = scenario.validate();
        if !diags.is_empty() {
            return Err(Error::Invalid(diags));
        }
    }
    let start = Instant::now();
    let (out, summary) = simulate(&scenario)?;
    let wall = start.elapsed();
    write_artifacts(&out, &summary, out_dir)?;
    Ok(RunReport { summary, wall })
}

pub fn cmd_validate(config: &Path) -> Result<Vec<Diagnostic>> {
    Scenario::read(config).map(|(_, d)| d)
}

// ---- sweeps ----

/// Config field(s) to vary. Segments are object keys or array indices; an
/// array segment that is not a number selects the element whose `id` matches,
/// so `queues.hate_en.formula.alpha` works.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamPaths {
    One(String),
    Many(Vec<String>),
}

impl ParamPaths {
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ParamPaths::One(p) => vec![p.as_str()],
            ParamPaths::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Base scenario, relative to the sweep file.
    pub base: PathBuf,
    pub parameter: ParamPaths,
    pub values: Vec<toml::Value>,
    /// Seeds per point; defaults to the base scenario's seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

fn set_path(root: &mut Value, path: &str, new: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), new);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx = match part.parse::<usize>() {
                    Ok(n) if n < items.len() => n,
                    _ => items
                        .iter()
                        .position(|v| v.get("id").and_then(Value::as_str) == Some(part))
                        .ok_or_else(|| Error::config(format!("{path}: no element `{part}`")))?,
                };
                if last {
                    items[idx] = new;
                    return Ok(());
                }
                &mut items[idx]
            }
            _ => {
                return Err(Error::config(format!(
                    "{path}: `{part}` is not a table or list"
                )))
            }
        };
    }
    Err(Error::config(format!("{path}: empty parameter path")))
}

/// A copy of `config` with every path set to `value`.
pub fn with_parameter(
    config: &ScenarioConfig,
    paths: &[&str],
    value: &Value,
) -> Result<ScenarioConfig> {
    let mut v = serde_json::to_value(config).map_err(|e| Error::config(e.to_string()))?;
    for p in paths {
        set_path(&mut v, p, value.clone())?;
    }
    serde_json::from_value(v).map_err(|e| Error::config(format!("{}: {e}", paths.join(", "))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: Value,
    pub seed: u64,
    pub summary: RunSummary,
}

fn cmp_values(a: &Value, b: &Value) -> Ordering {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.to_string().cmp(&b.to_string()),
    }
}

/// Runs every (value, seed) point on `threads` workers (0 = all cores) and
/// returns rows sorted by (value, seed). Failures are returned per point.
pub fn run_sweep(
    base: &Scenario,
    paths: &[&str],
    values: &[Value],
    seeds: &[u64],
    threads: usize,
) -> Vec<(Value, u64, Result<RunSummary>)> {
    let points: Vec<(Value, u64)> = values
        .iter()
        .flat_map(|v| seeds.iter().map(move |&s| (v.clone(), s)))
        .collect();
    let run_point = |(value, seed): &(Value, u64)| {
        let res = with_parameter(&base.config, paths, value).and_then(|mut config| {
            config.seed = *seed;
            let scenario = Scenario::new(config, base.jobs.clone(), base.reviewers.clone());
            simulate(&scenario).map(|(_, s)| s)
        });
        (value.clone(), *seed, res)
    };
    let mut rows: Vec<_> = if threads == 1 {
        points.iter().map(run_point).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| points.par_iter().map(run_point).collect())
    };
    rows.sort_by(|a, b| cmp_values(&a.0, &b.0).then(a.1.cmp(&b.1)));
    rows
}

/// Scalar summary fields, flattened for a CSV row.
fn summary_columns(s: &RunSummary) -> Vec<(String, String)> {
    let v = serde_json::to_value(s).expect("summary serializes");
    let mut cols = Vec::new();
    if let Value::Object(map) = v {
        for (k, v) in map {
            match v {
                Value::Array(items) => {
                    for (i, x) in items.iter().enumerate() {
                        cols.push((format!("{k}_{}", i + 1), scalar(x)));
                    }
                }
                Value::Object(_) => {}
                other => cols.push((k, scalar(&other))),
            }
        }
    }
    cols
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if let Some(first) = rows.first() {
        let mut header = vec!["value".to_string(), "seed".to_string()];
        header.extend(summary_columns(&first.summary).into_iter().map(|c| c.0));
        wr.write_record(&header)?;
    }
    for r in rows {
        let mut rec = vec![scalar(&r.value), r.seed.to_string()];
        rec.extend(summary_columns(&r.summary).into_iter().map(|c| c.1));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    parameter: Vec<&'a str>,
    completed: Vec<(&'a Value, u64)>,
    failed: Vec<(&'a Value, u64, String)>,
}

pub fn cmd_sweep(spec_path: &Path, out_dir: &Path, threads: usize) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec: SweepSpec = toml::from_str(&text).map_err(|e| Error::config(e.to_string()))?;
    if spec.values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let dir = spec_path.parent().unwrap_or(Path::new("."));
    let base = Scenario::load(&dir.join(&spec.base))?;
    let seeds = if spec.seeds.is_empty() {
        vec![base.config.seed]
    } else {
        spec.seeds.clone()
    };
    let values: Vec<Value> = spec
        .values
        .iter()
        .map(|v| serde_json::to_value(v).map_err(|e| Error::config(e.to_string())))
        .collect::<Result<_>>()?;
    let paths = spec.parameter.paths();
    // Resolve the paths once up front so a typo fails before any run.
    with_parameter(&base.config, &paths, &values[0])?;

    let results = run_sweep(&base, &paths, &values, &seeds, threads);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let failed: Vec<_> = results
        .iter()
        .filter_map(|(v, s, r)| r.as_ref().err().map(|e| (v, *s, e.to_string())))
        .collect();
    if !failed.is_empty() {
        let manifest = Manifest {
            parameter: paths.clone(),
            completed: results
                .iter()
                .filter(|r| r.2.is_ok())
                .map(|(v, s, _)| (v, *s))
                .collect(),
            failed,
        };
        let p = out_dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&p, body + "\n").map_err(|e| Error::io(&p, e))?;
        return Err(Error::Runtime(format!(
            "{} of {} sweep points failed; see {}",
            manifest.failed.len(),
            results.len(),
            p.display()
        )));
    }

    let rows: Vec<SweepRow> = results
        .into_iter()
        .map(|(value, seed, r)| SweepRow {
            value,
            seed,
            summary: r.expect("checked above"),
        })
        .collect();
    let p = out_dir.join("sweep.csv");
    write_sweep_csv(&rows, create(&p)?).map_err(csv_err(&p))?;
    Ok(rows)
}

// ---- compare ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueDelta {
    pub queue: String,
    pub peak_load_a: u64,
    pub peak_load_b: u64,
    pub delta_peak_load: i64,
    pub delta_avg_tat_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub a: RunSummary,
    pub b: RunSummary,
    pub delta_utilization: Option<f64>,
    pub delta_avg_tat_s: Option<f64>,
    pub delta_total_rv: f64,
    pub queues: Vec<QueueDelta>,
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

/// Job sets as the engine would see them, for the same-trace check.
fn job_fingerprint(s: &Scenario) -> Result<Vec<JobTraceRecord>> {
    let (jobs, synthetic) = s.materialize_jobs()?;
    let mut recs: Vec<JobTraceRecord> = jobs
        .iter()
        .chain(&synthetic)
        .map(JobTraceRecord::from_job)
        .collect();
    recs.sort_by_key(|r| r.id);
    Ok(recs)
}

pub fn compare(a: &Scenario, b: &Scenario) -> Result<CompareReport> {
    let (fa, fb) = (job_fingerprint(a)?, job_fingerprint(b)?);
    if fa != fb {
        let first = fa
            .iter()
            .zip(&fb)
            .find(|(x, y)| x != y)
            .map(|(x, _)| format!("first difference at job {}", x.id))
            .unwrap_or_else(|| format!("{} vs {} jobs", fa.len(), fb.len()));
        return Err(Error::config(format!(
            "scenarios do not share the same job trace ({first})"
        )));
    }
    let (_, sa) = simulate(a)?;
    let (_, sb) = simulate(b)?;
    let mut names: Vec<&String> = sa.queues.keys().chain(sb.queues.keys()).collect();
    names.sort();
    names.dedup();
    let queues = names
        .into_iter()
        .map(|q| {
            let qa = sa.queues.get(q).cloned().unwrap_or_default();
            let qb = sb.queues.get(q).cloned().unwrap_or_default();
            QueueDelta {
                queue: q.clone(),
                peak_load_a: qa.peak_load,
                peak_load_b: qb.peak_load,
                delta_peak_load: qb.peak_load as i64 - qa.peak_load as i64,
                delta_avg_tat_s: delta(qa.avg_tat_s, qb.avg_tat_s),
            }
        })
        .collect();
    Ok(CompareReport {
        delta_utilization: delta(sa.utilization, sb.utilization),
        delta_avg_tat_s: delta(sa.avg_tat_s, sb.avg_tat_s),
        delta_total_rv: sb.total_rv - sa.total_rv,
        queues,
        a: sa,
        b: sb,
    })
}

pub fn cmd_compare(a: &Path, b: &Path, out_dir: &Path) -> Result<CompareReport> {
    let report = compare(&Scenario::load(a)?, &Scenario::load(b)?)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let p = out_dir.join("compare.json");
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&p, body + "\n").map_err(|e| Error::io(&p, e))?;

    let p = out_dir.join("compare.csv");
    let mut wr = csv::Writer::from_writer(create(&p)?);
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let write = |wr: &mut csv::Writer<_>, rec: [String; 4]| wr.write_record(&rec);
    let (sa, sb) = (&report.a, &report.b);
    let rows = [
        [
            "utilization".into(),
            opt(sa.utilization),
            opt(sb.utilization),
            opt(report.delta_utilization),
        ],
        [
            "avg_tat_s".into(),
            opt(sa.avg_tat_s),
            opt(sb.avg_tat_s),
            opt(report.delta_avg_tat_s),
        ],
        [
            "total_rv".into(),
            sa.total_rv.to_string(),
            sb.total_rv.to_string(),
            report.delta_total_rv.to_string(),
        ],
    ];
    write(
        &mut wr,
        ["metric".into(), "a".into(), "b".into(), "delta".into()],
    )
    .map_err(csv_err(&p))?;
    for r in rows {
        write(&mut wr, r).map_err(csv_err(&p))?;
    }
    for q in &report.queues {
        let qa = sa.queues.get(&q.queue).and_then(|x| x.avg_tat_s);
        let qb = sb.queues.get(&q.queue).and_then(|x| x.avg_tat_s);
        write(
            &mut wr,
            [
                format!("peak_load[{}]", q.queue),
                q.peak_load_a.to_string(),
                q.peak_load_b.to_string(),
                q.delta_peak_load.to_string(),
            ],
        )
        .map_err(csv_err(&p))?;
        write(
            &mut wr,
            [
                format!("avg_tat_s[{}]", q.queue),
                opt(qa),
                opt(qb),
                opt(q.delta_avg_tat_s),
            ],
        )
        .map_err(csv_err(&p))?;
    }
    wr.flush().map_err(|e| Error::io(&p, e))?;
    Ok(report)
}
