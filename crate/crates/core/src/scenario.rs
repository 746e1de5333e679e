//! Scenario configuration: a TOML file plus the trace and roster files it names.
//!
//! ```toml
//! seed = 7
//! horizon_ms = 86400000
//!
//! [inputs]
//! jobs = "jobs.ndjson"
//! shifts = "shifts.csv"
//! skills = "skills.csv"
//!
//! [[queues]]
//! id = "hate_en"
//! required_skills = ["en"]
//! formula = { kind = "escalation", alpha = 0.5 }
//! sla_window_ms = 86400000
//! reorder_period_ms = 600000
//! ```
//!
//! Relative input paths resolve against the config file's directory.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::{self, AllocationConfig, QueueNode, SegmentNode, Topology};
use crate::domain::{Job, Reviewer, Shift, SimTime, SlaPolicy};
use crate::engine::{Mode, QueueSetup, RunOutput, SimSetup, Simulation};
use crate::error::{Diagnostic, Error, Result};
use crate::policy::{PriorityFormula, SeverityWeights};
use crate::reaper::{splitmix64, ReaperCriteria};
use crate::workload::{self, HandleTime, SyntheticSpec};

pub const DEFAULT_PAUSE_MS: u64 = 30 * 60 * 1000;
const CONFIG_SOURCE: &str = "config";

fn default_pause() -> u64 {
    DEFAULT_PAUSE_MS
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skills: Option<PathBuf>,
    /// `reviewer_id,location` table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewers: Option<PathBuf>,
}

impl Inputs {
    fn is_empty(&self) -> bool {
        *self == Inputs::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub id: String,
    /// Lower ranks are served first; defaults to declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<i64>,
    pub queues: Vec<String>,
    /// Reviewer time the segment may absorb per simulated day.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_cap_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub required_skills: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
    /// Where jobs evicted by `max_size` go; without one they are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overflow_queue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reorder_period_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla_window_ms: Option<u64>,
    #[serde(default)]
    pub formula: PriorityFormula,
}

impl QueueConfig {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            required_skills: Vec::new(),
            max_size: None,
            overflow_queue: None,
            reorder_period_ms: None,
            sla_window_ms: None,
            formula: PriorityFormula::Fifo,
        }
    }
}

/// Reviewers declared inline instead of through roster files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewerPool {
    pub first_id: u64,
    pub count: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub location: String,
    #[serde(default)]
    pub skills: Vec<String>,
    /// `[start_ms, end_ms]` pairs shared by every pool member.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<(u64, u64)>,
    /// One shift covering the whole horizon.
    #[serde(default)]
    pub always_on: bool,
}

impl ReviewerPool {
    pub fn reviewers(&self, horizon: SimTime) -> Vec<Reviewer> {
        (0..self.count)
            .map(|k| {
                let mut r = Reviewer::new(self.first_id + k);
                r.location = self.location.clone();
                r.skills = self.skills.iter().cloned().collect();
                if self.always_on {
                    r.shifts.push(Shift::new(SimTime::ZERO, horizon));
                } else {
                    r.shifts = self
                        .shifts
                        .iter()
                        .map(|&(s, e)| Shift::new(SimTime(s), SimTime(e)))
                        .collect();
                }
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resampling {
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub demand: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub supply: f64,
}

impl Default for Resampling {
    fn default() -> Self {
        Self {
            demand: 1.0,
            supply: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default)]
    pub severity_weights: SeverityWeights,
    /// Views quantile that defines high-distribution content.
    #[serde(default = "MetricsConfig::default_percentile")]
    pub coverage_percentile: f64,
    #[serde(default = "MetricsConfig::default_half")]
    pub topic_threshold: f64,
    /// Jobs with `p_escalate` at or above this form the escalated class.
    #[serde(default = "MetricsConfig::default_half")]
    pub escalation_threshold: f64,
}

impl MetricsConfig {
    fn default_percentile() -> f64 {
        0.9
    }
    fn default_half() -> f64 {
        0.5
    }
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            severity_weights: SeverityWeights::default(),
            coverage_percentile: 0.9,
            topic_threshold: 0.5,
            escalation_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub horizon_ms: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_pause")]
    pub pause_duration_ms: u64,
    #[serde(default, skip_serializing_if = "Inputs::is_empty")]
    pub inputs: Inputs,
    #[serde(default)]
    pub resample: Resampling,
    #[serde(default)]
    pub allocation: AllocationConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentConfig>,
    pub queues: Vec<QueueConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sla: Vec<SlaPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reaper: Vec<ReaperCriteria>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthetic: Vec<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reviewer_pools: Vec<ReviewerPool>,
}

impl ScenarioConfig {
    pub fn new(horizon: SimTime, queues: Vec<QueueConfig>) -> Self {
        Self {
            seed: 0,
            horizon_ms: horizon.0,
            mode: Mode::Counterfactual,
            pause_duration_ms: DEFAULT_PAUSE_MS,
            inputs: Inputs::default(),
            resample: Resampling::default(),
            allocation: AllocationConfig::StackRank,
            metrics: MetricsConfig::default(),
            segments: Vec::new(),
            queues,
            sla: Vec::new(),
            reaper: Vec::new(),
            synthetic: Vec::new(),
            reviewer_pools: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn horizon(&self) -> SimTime {
        SimTime(self.horizon_ms)
    }

    /// Queue/segment layout. Without segments every queue sits in one
    /// implicit segment in declaration order.
    pub fn topology(&self) -> std::result::Result<Topology, Vec<String>> {
        let mut errs = Vec::new();
        let index: HashMap<&str, usize> = self
            .queues
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.as_str(), i))
            .collect();
        let mut queues: Vec<QueueNode> = self
            .queues
            .iter()
            .map(|q| QueueNode {
                id: q.id.clone(),
                segment: usize::MAX,
                position: 0,
                required_skills: q.required_skills.iter().cloned().collect(),
            })
            .collect();
        let segments = if self.segments.is_empty() {
            for (i, q) in queues.iter_mut().enumerate() {
                q.segment = 0;
                q.position = i;
            }
            vec![SegmentNode {
                id: "default".into(),
                rank: 0,
                queues: (0..queues.len()).collect(),
                daily_cap_ms: None,
            }]
        } else {
            let mut out = Vec::new();
            for (s, seg) in self.segments.iter().enumerate() {
                let mut members = Vec::new();
                for (pos, qid) in seg.queues.iter().enumerate() {
                    match index.get(qid.as_str()) {
                        None => errs.push(format!("segment {}: unknown queue `{qid}`", seg.id)),
                        Some(&q) if queues[q].segment != usize::MAX => {
                            errs.push(format!("queue {qid} is listed in more than one segment"))
                        }
                        Some(&q) => {
                            queues[q].segment = s;
                            queues[q].position = pos;
                            members.push(q);
                        }
                    }
                }
                out.push(SegmentNode {
                    id: seg.id.clone(),
                    rank: seg.rank.unwrap_or(s as i64),
                    queues: members,
                    daily_cap_ms: seg.daily_cap_ms,
                });
            }
            for q in &queues {
                if q.segment == usize::MAX {
                    errs.push(format!("queue {} belongs to no segment", q.id));
                }
            }
            out
        };
        if errs.is_empty() {
            Ok(Topology { queues, segments })
        } else {
            Err(errs)
        }
    }

    /// Seed for an independent random stream derived from the run seed.
    pub fn derived_seed(&self, stream: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(stream))
    }
}

const DEMAND_STREAM: u64 = 1;
const SUPPLY_STREAM: u64 = 2;
const SYNTHETIC_STREAM: u64 = 100;

/// A configuration together with its loaded trace and roster.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Jobs from the trace file, before resampling.
    pub jobs: Vec<Job>,
    /// Reviewers from the roster files; pools in the config come on top.
    pub reviewers: Vec<Reviewer>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, jobs: Vec<Job>, reviewers: Vec<Reviewer>) -> Self {
        Self {
            config,
            jobs,
            reviewers,
        }
    }

    /// Reads the config and its inputs. Unreadable or malformed files give
    /// an error; content problems are returned as diagnostics.
    pub fn read(path: &Path) -> Result<(Self, Vec<Diagnostic>)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ScenarioConfig::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| dir.join(p));

        let mut diags = Vec::new();
        let jobs = match resolve(&config.inputs.jobs) {
            Some(p) => {
                let (jobs, d) = workload::load_jobs(&p)?;
                diags.extend(d);
                jobs
            }
            None => Vec::new(),
        };
        let (reviewers, d) = workload::load_roster(
            resolve(&config.inputs.shifts).as_deref(),
            resolve(&config.inputs.skills).as_deref(),
            resolve(&config.inputs.reviewers).as_deref(),
        )?;
        diags.extend(d);

        for spec in &mut config.synthetic {
            if let HandleTime::Empirical {
                values_ms,
                file: Some(f),
            } = &mut spec.handle_time
            {
                if values_ms.is_empty() {
                    let p = dir.join(&*f);
                    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    for (n, line) in text.lines().enumerate() {
                        let line = line.trim();
                        if line.is_empty() {
                            continue;
                        }
                        match line.parse() {
                            Ok(v) => values_ms.push(v),
                            Err(e) => diags.push(Diagnostic::new(
                                p.display().to_string(),
                                format!("line {}", n + 1),
                                "handle_time_ms",
                                format!("{e}"),
                            )),
                        }
                    }
                }
            }
        }
        let scenario = Scenario::new(config, jobs, reviewers);
        diags.extend(scenario.validate());
        Ok((scenario, diags))
    }

    /// Reads and validates; any finding is an error.
    pub fn load(path: &Path) -> Result<Self> {
        let (s, diags) = Self::read(path)?;
        if diags.is_empty() {
            Ok(s)
        } else {
            Err(Error::Invalid(diags))
        }
    }

    /// Writes the config and its inputs into `dir` as a self-contained scenario.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut config = self.config.clone();
        // pools and synthetic specs stay in the config; only explicit entities go to files
        let roster = !self.reviewers.is_empty();
        config.inputs = Inputs {
            jobs: Some("jobs.ndjson".into()),
            shifts: roster.then(|| "shifts.csv".into()),
            skills: roster.then(|| "skills.csv".into()),
            reviewers: roster.then(|| "reviewers.csv".into()),
        };
        let file = |name: &str| -> Result<fs::File> {
            let p = dir.join(name);
            fs::File::create(&p).map_err(|e| Error::io(p, e))
        };
        let csv_err = |e: csv::Error| Error::Runtime(e.to_string());
        workload::write_jobs(&self.jobs, std::io::BufWriter::new(file("jobs.ndjson")?))
            .map_err(|e| Error::io(dir.join("jobs.ndjson"), e))?;
        if roster {
            workload::write_shifts(&self.reviewers, file("shifts.csv")?).map_err(csv_err)?;
            workload::write_skills(&self.reviewers, file("skills.csv")?).map_err(csv_err)?;
            workload::write_locations(&self.reviewers, file("reviewers.csv")?).map_err(csv_err)?;
        }
        let path = dir.join("scenario.toml");
        fs::write(&path, config.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Referential and parameter checks; every problem is reported.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let cfg = &self.config;
        let mut out = Vec::new();
        let mut diag = |record: String, field: &str, msg: String| {
            out.push(Diagnostic::new(CONFIG_SOURCE, record, field, msg));
        };

        if cfg.horizon_ms == 0 {
            diag("scenario".into(), "horizon_ms", "must be positive".into());
        }
        for (name, f) in [
            ("demand", cfg.resample.demand),
            ("supply", cfg.resample.supply),
        ] {
            if !(f.is_finite() && f > 0.0) {
                diag(
                    "resample".into(),
                    name,
                    format!("factor must be positive, got {f}"),
                );
            }
        }
        let mut ids = HashSet::new();
        for q in &cfg.queues {
            if q.id.is_empty() {
                diag("queue".into(), "id", "must not be empty".into());
            }
            if !ids.insert(q.id.as_str()) {
                diag(format!("queue {}", q.id), "id", "duplicate queue id".into());
            }
        }
        if cfg.queues.is_empty() {
            diag(
                "scenario".into(),
                "queues",
                "at least one queue is required".into(),
            );
        }
        let known = |q: &str| ids.contains(q);
        for q in &cfg.queues {
            let rec = format!("queue {}", q.id);
            if let Err(e) = q.formula.validate(q.sla_window_ms) {
                diag(rec.clone(), "formula", e);
            }
            if q.max_size == Some(0) {
                diag(rec.clone(), "max_size", "must be at least 1".into());
            }
            if q.reorder_period_ms == Some(0) {
                diag(rec.clone(), "reorder_period_ms", "must be positive".into());
            }
            if q.sla_window_ms == Some(0) {
                diag(rec.clone(), "sla_window_ms", "must be positive".into());
            }
            if let Some(o) = &q.overflow_queue {
                if !known(o) {
                    diag(
                        rec.clone(),
                        "overflow_queue",
                        format!("unknown queue `{o}`"),
                    );
                }
                if q.max_size.is_none() {
                    diag(rec, "overflow_queue", "needs max_size".into());
                }
            }
        }
        // overflow chains must end
        let next: HashMap<&str, &str> = cfg
            .queues
            .iter()
            .filter_map(|q| q.overflow_queue.as_deref().map(|o| (q.id.as_str(), o)))
            .collect();
        for q in &cfg.queues {
            let mut seen = HashSet::new();
            let mut cur = q.id.as_str();
            while let Some(&n) = next.get(cur) {
                if !seen.insert(cur) {
                    diag(
                        format!("queue {}", q.id),
                        "overflow_queue",
                        "overflow chain loops".into(),
                    );
                    break;
                }
                cur = n;
            }
        }

        match cfg.topology() {
            Ok(topo) => {
                for m in allocation::validate(&cfg.allocation, &topo) {
                    diag("allocation".into(), "groups", m);
                }
            }
            Err(errs) => {
                for m in errs {
                    diag("segments".into(), "queues", m);
                }
            }
        }

        for (i, p) in cfg.sla.iter().enumerate() {
            for q in p.queues.iter().filter(|q| !known(q)) {
                diag(format!("sla {i}"), "queues", format!("unknown queue `{q}`"));
            }
        }
        for (i, r) in cfg.reaper.iter().enumerate() {
            let rec = format!("reaper {i}");
            if !known(&r.target_queue) {
                diag(
                    rec.clone(),
                    "target_queue",
                    format!("unknown queue `{}`", r.target_queue),
                );
            }
            if r.scan_period_ms == 0 {
                diag(rec.clone(), "scan_period_ms", "must be positive".into());
            }
            if !(0.0..=1.0).contains(&r.sample_fraction) {
                diag(
                    rec,
                    "sample_fraction",
                    format!("{} is outside [0, 1]", r.sample_fraction),
                );
            }
        }
        for (i, s) in cfg.synthetic.iter().enumerate() {
            let rec = format!("synthetic {i}");
            if let Err(e) = s.validate() {
                diag(rec.clone(), "spec", e);
            }
            if let Some(q) = s.queue.as_deref().filter(|q| !known(q)) {
                diag(rec, "queue", format!("unknown queue `{q}`"));
            }
        }

        let mut rids = HashSet::new();
        let pools = cfg
            .reviewer_pools
            .iter()
            .flat_map(|p| p.reviewers(cfg.horizon()));
        for r in self.reviewers.iter().cloned().chain(pools) {
            if !rids.insert(r.id) {
                diag(
                    format!("reviewer {}", r.id),
                    "reviewer_id",
                    "duplicate reviewer".into(),
                );
            }
        }
        for (i, p) in cfg.reviewer_pools.iter().enumerate() {
            for &(s, e) in &p.shifts {
                if e <= s {
                    diag(
                        format!("reviewer_pools {i}"),
                        "shifts",
                        format!("[{s}, {e}] is empty"),
                    );
                }
            }
        }

        let mut job_ids = HashSet::new();
        for j in &self.jobs {
            let rec = format!("job {}", j.id);
            if !job_ids.insert(j.id) {
                diag(rec.clone(), "id", "duplicate job id".into());
            }
            if let Some(q) = j.initial_queue.as_deref().filter(|q| !known(q)) {
                diag(rec.clone(), "queue", format!("unknown queue `{q}`"));
            }
            if cfg.mode == Mode::Replay {
                if j.recorded.is_empty() {
                    diag(
                        rec,
                        "trajectory",
                        "replay mode needs a recorded trajectory".into(),
                    );
                    continue;
                }
                if let Some(d) = workload::check_recorded(j, CONFIG_SOURCE) {
                    diag(d.record, &d.field, d.message);
                }
                for ev in &j.recorded {
                    if let Some(q) = ev.queue.as_deref().filter(|q| !known(q)) {
                        diag(rec.clone(), "trajectory", format!("unknown queue `{q}`"));
                    }
                    if let Some(r) = ev.reviewer.filter(|r| !rids.contains(r)) {
                        diag(rec.clone(), "trajectory", format!("unknown reviewer {r}"));
                    }
                }
            }
        }
        out
    }

    /// Materializes the job set the engine will see: demand resampling, then
    /// synthetic injections appended with fresh ids.
    pub fn materialize_jobs(&self) -> Result<(Vec<Job>, Vec<Job>)> {
        let cfg = &self.config;
        let jobs = if cfg.resample.demand == 1.0 {
            let mut j = self.jobs.clone();
            j.sort_by_key(|j| (j.enqueue_time, j.id));
            j
        } else {
            workload::resample_demand(
                &self.jobs,
                cfg.resample.demand,
                cfg.derived_seed(DEMAND_STREAM),
            )?
        };
        let mut next_id = jobs.iter().map(|j| j.id.0 + 1).max().unwrap_or(0);
        let mut synthetic = Vec::new();
        for (k, spec) in cfg.synthetic.iter().enumerate() {
            let seed = cfg.derived_seed(SYNTHETIC_STREAM + k as u64 + spec.seed_offset);
            let batch = workload::generate_synthetic(spec, seed, next_id, &jobs)?;
            next_id += batch.len() as u64;
            synthetic.extend(batch);
        }
        synthetic.sort_by_key(|j| (j.enqueue_time, j.id));
        Ok((jobs, synthetic))
    }

    pub fn materialize_reviewers(&self) -> Result<Vec<Reviewer>> {
        let cfg = &self.config;
        let mut all = self.reviewers.clone();
        for p in &cfg.reviewer_pools {
            all.extend(p.reviewers(cfg.horizon()));
        }
        all.sort_by_key(|r| r.id);
        if cfg.resample.supply == 1.0 {
            Ok(all)
        } else {
            workload::resample_supply(&all, cfg.resample.supply, cfg.derived_seed(SUPPLY_STREAM))
        }
    }

    pub fn build(&self) -> Result<SimSetup> {
        let diags = self.validate();
        if !diags.is_empty() {
            return Err(Error::Invalid(diags));
        }
        let cfg = &self.config;
        let topology = cfg.topology().map_err(|e| Error::config(e.join("; ")))?;
        let index: HashMap<&str, usize> = cfg
            .queues
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.as_str(), i))
            .collect();
        let queues = cfg
            .queues
            .iter()
            .map(|q| QueueSetup {
                id: q.id.clone(),
                formula: q.formula.clone(),
                max_size: q.max_size,
                overflow: q.overflow_queue.as_deref().map(|o| index[o]),
                reorder_period_ms: q.reorder_period_ms,
                sla_window_ms: q.sla_window_ms,
            })
            .collect();
        let (jobs, synthetic_jobs) = self.materialize_jobs()?;
        let reapers = cfg
            .reaper
            .iter()
            .map(|r| (r.clone(), index[r.target_queue.as_str()]))
            .collect();
        Ok(SimSetup {
            mode: cfg.mode,
            seed: cfg.seed,
            pause_duration_ms: cfg.pause_duration_ms,
            topology,
            queues,
            allocation: cfg.allocation.clone(),
            jobs,
            synthetic_jobs,
            reviewers: self.materialize_reviewers()?,
            reapers,
        })
    }

    /// Builds, runs to the horizon and returns the finished run.
    pub fn run(&self) -> Result<RunOutput> {
        let mut sim = Simulation::new(self.build()?)?;
        sim.run_until(self.config.horizon())?;
        Ok(sim.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{JobState, Label};

    fn minimal() -> Scenario {
        let mut cfg = ScenarioConfig::new(SimTime(100_000), vec![QueueConfig::new("q")]);
        cfg.reviewer_pools.push(ReviewerPool {
            first_id: 1,
            count: 1,
            location: String::new(),
            skills: vec![],
            shifts: vec![],
            always_on: true,
        });
        let mut j = Job::new(1, SimTime(0), 10_000);
        j.initial_queue = Some("q".into());
        j.true_label = Label::Violating;
        Scenario::new(cfg, vec![j], vec![])
    }

    #[test]
    fn minimal_fixture_runs() {
        let out = minimal().run().unwrap();
        assert_eq!(out.jobs[0].state, JobState::Closed);
        assert_eq!(out.jobs[0].turnaround_time().unwrap(), 10_000);
    }

    #[test]
    fn toml_round_trip() {
        let mut s = minimal();
        s.config.queues[0].formula = PriorityFormula::Escalation { alpha: 0.5 };
        s.config.queues[0].sla_window_ms = Some(1000);
        s.config.segments.push(SegmentConfig {
            id: "a".into(),
            rank: None,
            queues: vec!["q".into()],
            daily_cap_ms: None,
        });
        let text = s.config.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), s.config);
    }

    #[test]
    fn write_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = minimal();
        let mut r = Reviewer::new(9);
        r.skills.insert("en".into());
        r.shifts.push(Shift::new(SimTime(0), SimTime(50)));
        s.reviewers.push(r);
        let path = s.write_to(dir.path()).unwrap();
        let back = Scenario::load(&path).unwrap();
        assert_eq!(back.jobs, s.jobs);
        assert_eq!(back.reviewers, s.reviewers);
    }

    #[test]
    fn dangling_queue_is_one_diagnostic() {
        let mut s = minimal();
        s.jobs[0].initial_queue = Some("nope".into());
        let d = s.validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].record, "job 1");
        assert_eq!(d[0].field, "queue");
    }

    #[test]
    fn overflow_cycle_is_reported() {
        let mut s = minimal();
        let mut b = QueueConfig::new("b");
        b.max_size = Some(1);
        b.overflow_queue = Some("q".into());
        s.config.queues[0].max_size = Some(1);
        s.config.queues[0].overflow_queue = Some("b".into());
        s.config.queues.push(b);
        assert!(s.validate().iter().any(|d| d.message.contains("loops")));
    }

    #[test]
    fn unknown_config_key_is_a_config_error() {
        let e = ScenarioConfig::from_toml("horizon_ms = 1\nqueues = []\nbogus = 3\n").unwrap_err();
        assert!(e.is_config_error());
    }
}
