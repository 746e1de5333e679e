//! Evaluation metrics computed from a finished run.
//!
//! Everything here reads the event log plus the static job and reviewer
//! tables; nothing depends on engine internals, so recomputing gives the same
//! numbers.
//!
//! A few definitions worth knowing:
//! - turnaround runs from a job's first `enqueued` record to its last human
//!   `decisioned` record, and only closed jobs have one;
//! - SLA violations also count jobs still open at the horizon whose deadline
//!   has already passed, so a starved queue cannot look compliant;
//! - high-distribution content is every human-routed job whose final actual
//!   views are at or above the chosen quantile of the run's view distribution;
//! - the misspecification rate is the share of violating, high or very-high
//!   severity reaper candidates that were never sampled for validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Job, JobId, Label, ReviewerId, Severity, SimTime, SlaPolicy, Source};
use crate::engine::{Action, EventLog, LogKind, LogRecord, Mode, RunOutput};
use crate::policy::SeverityWeights;
use crate::reaper;
use crate::scenario::MetricsConfig;

/// Step function sampled at change points; the value holds until the next point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub points: Vec<(SimTime, f64)>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            points: Vec::new(),
        }
    }

    /// Appends a point; a second value at the same instant replaces the first.
    pub fn push(&mut self, t: SimTime, v: f64) {
        match self.points.last_mut() {
            Some(last) if last.0 == t => last.1 = v,
            Some(last) => {
                assert!(t > last.0, "series times must increase");
                self.points.push((t, v));
            }
            None => self.points.push((t, v)),
        }
    }

    pub fn value_at(&self, t: SimTime) -> f64 {
        match self.points.partition_point(|p| p.0 <= t) {
            0 => 0.0,
            i => self.points[i - 1].1,
        }
    }

    pub fn max(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Time-weighted mean over `[from, to)`.
    pub fn time_average(&self, from: SimTime, to: SimTime) -> Option<f64> {
        if to <= from {
            return None;
        }
        let mut area = 0.0;
        let mut t = from;
        let mut v = self.value_at(from);
        for &(pt, pv) in self.points.iter().filter(|p| p.0 > from && p.0 < to) {
            area += v * (pt.0 - t.0) as f64;
            t = pt;
            v = pv;
        }
        area += v * (to.0 - t.0) as f64;
        Some(area / (to.0 - from.0) as f64)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_ms", "value"])?;
        for (t, v) in &self.points {
            wr.write_record([t.0.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Queue-load changes carried by one record, as (queue, delta).
pub fn load_deltas(rec: &LogRecord) -> Vec<(&str, i64)> {
    let q = rec.queue_id.as_deref();
    match (rec.kind, q) {
        (LogKind::Enqueued, Some(q)) => vec![(q, 1)],
        (LogKind::Assigned | LogKind::Dropped, Some(q)) => vec![(q, -1)],
        (LogKind::Transferred, Some(q)) => {
            let mut v = vec![(q, -1)];
            if let Some(to) = rec.detail.to_queue.as_deref() {
                v.push((to, 1));
            }
            v
        }
        _ => Vec::new(),
    }
}

/// Open jobs in `queue` after each instant at which it changes. Starts at (0, 0).
pub fn queue_load_series(log: &EventLog, queue: &str) -> MetricSeries {
    let mut s = MetricSeries::new(queue);
    s.push(SimTime::ZERO, 0.0);
    let mut load = 0i64;
    for rec in log.records() {
        for (q, d) in load_deltas(rec) {
            if q == queue {
                load += d;
                s.push(rec.time(), load as f64);
            }
        }
    }
    s
}

/// Open jobs across all queues.
pub fn total_load_series(log: &EventLog) -> MetricSeries {
    let mut s = MetricSeries::new("total");
    s.push(SimTime::ZERO, 0.0);
    let mut load = 0i64;
    for rec in log.records() {
        let d: i64 = load_deltas(rec).iter().map(|x| x.1).sum();
        if d != 0 {
            load += d;
            s.push(rec.time(), load as f64);
        }
    }
    s
}

pub fn peak_load(series: &MetricSeries) -> u64 {
    series.max() as u64
}

/// Review intervals per reviewer, from assignment to decision or skip.
/// Reviews still running are cut at `horizon`.
pub fn busy_intervals(
    log: &EventLog,
    horizon: SimTime,
) -> BTreeMap<ReviewerId, Vec<(SimTime, SimTime)>> {
    let mut open: HashMap<(ReviewerId, JobId), SimTime> = HashMap::new();
    let mut out: BTreeMap<ReviewerId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
    for rec in log.records() {
        let (Some(r), Some(j)) = (rec.reviewer_id, rec.job_id) else {
            continue;
        };
        match rec.kind {
            LogKind::Assigned => {
                open.insert((r, j), rec.time());
            }
            LogKind::Decisioned | LogKind::Skipped => {
                if let Some(start) = open.remove(&(r, j)) {
                    out.entry(r).or_default().push((start, rec.time()));
                }
            }
            _ => {}
        }
    }
    let mut rest: Vec<_> = open.into_iter().collect();
    rest.sort();
    for ((r, _), start) in rest {
        out.entry(r).or_default().push((start, horizon.max(start)));
    }
    for v in out.values_mut() {
        v.sort();
    }
    out
}

fn overlap(a: (SimTime, SimTime), b: (SimTime, SimTime)) -> u64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    hi.0.saturating_sub(lo.0)
}

/// Busy over scheduled; absent when nothing was scheduled.
pub fn utilization_ratio(busy: f64, scheduled: f64) -> Option<f64> {
    (scheduled > 0.0).then(|| busy / scheduled)
}

/// (busy, scheduled) milliseconds for the chosen reviewers inside `window`.
/// Busy time is counted only while the reviewer is on shift, so overtime
/// spent finishing a review after shift end does not inflate the ratio.
pub fn busy_and_scheduled_ms(
    out: &RunOutput,
    subset: Option<&[ReviewerId]>,
    window: (SimTime, SimTime),
) -> (u64, u64) {
    let busy = busy_intervals(&out.log, out.horizon);
    let keep: Option<HashSet<ReviewerId>> = subset.map(|s| s.iter().copied().collect());
    let mut b = 0;
    let mut s = 0;
    for r in &out.reviewers {
        if keep.as_ref().is_some_and(|k| !k.contains(&r.id)) {
            continue;
        }
        for shift in &r.shifts {
            let sw = (shift.start.max(window.0), shift.end.min(window.1));
            if sw.1 <= sw.0 {
                continue;
            }
            s += sw.1 .0 - sw.0 .0;
            if let Some(iv) = busy.get(&r.id) {
                b += iv.iter().map(|&i| overlap(i, sw)).sum::<u64>();
            }
        }
    }
    (b, s)
}

pub fn utilization(
    out: &RunOutput,
    subset: Option<&[ReviewerId]>,
    window: (SimTime, SimTime),
) -> Option<f64> {
    let (b, s) = busy_and_scheduled_ms(out, subset, window);
    utilization_ratio(b as f64, s as f64)
}

/// Total review time per reviewer without clipping to shifts.
pub fn raw_busy_ms(out: &RunOutput) -> BTreeMap<ReviewerId, u64> {
    busy_intervals(&out.log, out.horizon)
        .into_iter()
        .map(|(r, v)| (r, v.iter().map(|i| i.1 .0 - i.0 .0).sum()))
        .collect()
}

/// Timeline of one human-reviewed job as seen in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct JobTimeline {
    pub job: JobId,
    pub first_queue: String,
    pub first_enqueue: SimTime,
    pub first_assigned: Option<SimTime>,
    pub last_decision: Option<SimTime>,
    pub last_action: Option<Action>,
    pub closed: Option<SimTime>,
    pub final_queue: Option<String>,
    pub candidate: Option<JobId>,
}

impl JobTimeline {
    pub fn tat_ms(&self) -> Option<u64> {
        self.closed?;
        Some(self.last_decision?.since(self.first_enqueue))
    }
}

/// Timelines of every job that was enqueued at least once, in first-enqueue order.
pub fn timelines(log: &EventLog) -> Vec<JobTimeline> {
    let mut idx: HashMap<JobId, usize> = HashMap::new();
    let mut out: Vec<JobTimeline> = Vec::new();
    let mut candidates: HashMap<JobId, JobId> = HashMap::new();
    for rec in log.records() {
        let Some(j) = rec.job_id else { continue };
        if rec.kind == LogKind::ReaperEnqueued {
            if let Some(c) = rec.detail.candidate_id {
                candidates.insert(j, c);
            }
            continue;
        }
        if rec.kind == LogKind::Enqueued && !idx.contains_key(&j) {
            idx.insert(j, out.len());
            out.push(JobTimeline {
                job: j,
                first_queue: rec.queue_id.clone().unwrap_or_default(),
                first_enqueue: rec.time(),
                first_assigned: None,
                last_decision: None,
                last_action: None,
                closed: None,
                final_queue: None,
                candidate: candidates.get(&j).copied(),
            });
            continue;
        }
        let Some(&i) = idx.get(&j) else { continue };
        let tl = &mut out[i];
        match rec.kind {
            LogKind::Assigned if tl.first_assigned.is_none() => {
                tl.first_assigned = Some(rec.time())
            }
            LogKind::Decisioned => {
                tl.last_decision = Some(rec.time());
                tl.last_action = rec.detail.action;
            }
            LogKind::Closed => {
                tl.closed = Some(rec.time());
                tl.final_queue = rec.queue_id.clone();
            }
            _ => {}
        }
    }
    out
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs
        .into_iter()
        .fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

/// Nearest-rank percentile, `p` in (0, 1].
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Turnaround times in seconds for closed jobs accepted by `filter`.
pub fn tat_secs(tl: &[JobTimeline], mut filter: impl FnMut(&JobTimeline) -> bool) -> Vec<f64> {
    tl.iter()
        .filter(|t| filter(t))
        .filter_map(|t| t.tat_ms())
        .map(|ms| ms as f64 / 1000.0)
        .collect()
}

pub fn avg_tat(tl: &[JobTimeline], filter: impl FnMut(&JobTimeline) -> bool) -> Option<f64> {
    mean(tat_secs(tl, filter))
}

/// SLA bound for a job first enqueued in `queue`: the tightest applicable policy.
pub fn sla_bound(policies: &[SlaPolicy], queue: &str) -> Option<u64> {
    policies
        .iter()
        .filter(|p| p.queues.is_empty() || p.queues.iter().any(|q| q == queue))
        .map(|p| p.bound_ms)
        .min()
}

/// Share of jobs that miss their bound: closed late, or still open past the
/// deadline at `horizon`. Jobs still inside their window at the horizon are
/// left out, as are jobs no policy covers.
pub fn sla_violation_rate(
    tl: &[JobTimeline],
    policies: &[SlaPolicy],
    horizon: SimTime,
    mut filter: impl FnMut(&JobTimeline) -> bool,
) -> Option<f64> {
    let mut n = 0u64;
    let mut late = 0u64;
    for t in tl.iter().filter(|t| filter(t)) {
        let Some(bound) = sla_bound(policies, &t.first_queue) else {
            continue;
        };
        match t.tat_ms() {
            Some(tat) => {
                n += 1;
                late += u64::from(tat > bound);
            }
            None if horizon.since(t.first_enqueue) > bound => {
                n += 1;
                late += 1;
            }
            None => {}
        }
    }
    (n > 0).then(|| late as f64 / n as f64)
}

/// Bad experiences prevented per second of review. Zero unless the job is violating.
pub fn review_value(job: &Job, decision_time: SimTime, weights: &SeverityWeights) -> f64 {
    if job.true_label != Label::Violating || job.handle_time_ms == 0 {
        return 0.0;
    }
    let views = job.predicted_view_trajectory.views_at(decision_time) as f64;
    weights.weight(job.severity) * views / (job.handle_time_ms as f64 / 1000.0)
}

fn job_table(out: &RunOutput) -> HashMap<JobId, &Job> {
    out.jobs.iter().map(|j| (j.id, j)).collect()
}

/// Removal decisions on violating content, as (job, decision time).
fn actioned(out: &RunOutput) -> Vec<(JobId, SimTime, Option<&str>)> {
    let jobs = job_table(out);
    out.log
        .records()
        .iter()
        .filter(|r| r.kind == LogKind::Decisioned && r.detail.action == Some(Action::Remove))
        .filter_map(|r| {
            let j = r.job_id?;
            (jobs.get(&j)?.true_label == Label::Violating)
                .then(|| (j, r.time(), r.queue_id.as_deref()))
        })
        .collect()
}

pub fn total_rv(out: &RunOutput, weights: &SeverityWeights) -> f64 {
    let jobs = job_table(out);
    actioned(out)
        .iter()
        .map(|(j, t, _)| review_value(jobs[j], *t, weights))
        .fold(0.0, |a, b| a + b)
}

/// (closed, actioned): human final decisions, and those removing violating content.
pub fn jobs_closed_actioned(out: &RunOutput) -> (u64, u64) {
    let closed = timelines(&out.log)
        .iter()
        .filter(|t| t.closed.is_some())
        .count() as u64;
    (closed, actioned(out).len() as u64)
}

fn coverage_population(out: &RunOutput) -> Vec<(&Job, bool)> {
    let jobs = job_table(out);
    timelines(&out.log)
        .iter()
        .filter_map(|t| {
            let j = jobs.get(&t.job)?;
            (j.source != Source::ReaperValidation).then_some((*j, t.closed.is_some()))
        })
        .collect()
}

fn coverage_of(
    pop: &[(&Job, bool)],
    percentile_p: f64,
    keep: impl Fn(&Job) -> bool,
) -> Option<f64> {
    let views: Vec<f64> = pop
        .iter()
        .map(|(j, _)| j.content_view_trajectory.final_views() as f64)
        .collect();
    let threshold = percentile(&views, percentile_p)?;
    let high: Vec<bool> = pop
        .iter()
        .filter(|(j, _)| j.content_view_trajectory.final_views() as f64 >= threshold && keep(j))
        .map(|&(_, reviewed)| reviewed)
        .collect();
    (!high.is_empty()).then(|| high.iter().filter(|&&r| r).count() as f64 / high.len() as f64)
}

/// Fraction of high-distribution content that a human decided before the horizon.
pub fn coverage(out: &RunOutput, percentile_p: f64) -> Option<f64> {
    coverage_of(&coverage_population(out), percentile_p, |_| true)
}

/// Coverage restricted to jobs scoring at least `threshold` on topic `topic` (0-based).
pub fn topic_coverage(
    out: &RunOutput,
    topic: usize,
    percentile_p: f64,
    threshold: f64,
) -> Option<f64> {
    coverage_of(&coverage_population(out), percentile_p, |j| {
        j.topic_scores[topic] >= threshold
    })
}

/// Share of violating reaper candidates at or above `min_severity` never
/// sampled for validation. Absent when there are no such candidates.
pub fn misspecification_rate(out: &RunOutput, min_severity: Severity) -> Option<f64> {
    let sampled: HashSet<JobId> = out
        .log
        .records()
        .iter()
        .filter(|r| r.kind == LogKind::ReaperEnqueued)
        .filter_map(|r| r.detail.candidate_id)
        .collect();
    let pool: Vec<JobId> = out
        .jobs
        .iter()
        .filter(|j| {
            reaper::is_candidate(j)
                && j.true_label == Label::Violating
                && j.severity >= min_severity
        })
        .map(|j| j.id)
        .collect();
    let missed = pool.iter().filter(|id| !sampled.contains(id)).count();
    (!pool.is_empty()).then(|| missed as f64 / pool.len() as f64)
}

/// Mean seconds from first enqueue to first assignment over assigned jobs.
pub fn mean_wait_s(tl: &[JobTimeline]) -> Option<f64> {
    mean(
        tl.iter()
            .filter_map(|t| Some(t.first_assigned?.since(t.first_enqueue) as f64 / 1000.0)),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub enqueued: u64,
    pub jobs_closed: u64,
    pub jobs_actioned: u64,
    pub avg_tat_s: Option<f64>,
    pub p90_tat_s: Option<f64>,
    pub sla_violation_rate: Option<f64>,
    pub peak_load: u64,
    pub total_rv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: Mode,
    pub horizon_ms: u64,
    pub events_processed: u64,
    pub log_records: u64,
    pub jobs_created: u64,
    pub jobs_enqueued: u64,
    pub jobs_closed: u64,
    pub jobs_actioned: u64,
    pub jobs_auto_decisioned: u64,
    pub jobs_dropped: u64,
    pub jobs_open: u64,
    pub reaper_validations: u64,
    pub avg_tat_s: Option<f64>,
    pub p50_tat_s: Option<f64>,
    pub p90_tat_s: Option<f64>,
    pub p99_tat_s: Option<f64>,
    pub escalated_avg_tat_s: Option<f64>,
    pub other_avg_tat_s: Option<f64>,
    pub sla_violation_rate: Option<f64>,
    pub peak_load: u64,
    pub busy_hours: f64,
    pub scheduled_hours: f64,
    pub utilization: Option<f64>,
    pub total_rv: f64,
    pub coverage: Option<f64>,
    pub topic_coverage: [Option<f64>; 3],
    pub misspecification_rate: Option<f64>,
    pub queues: BTreeMap<String, QueueSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn summarize(out: &RunOutput, cfg: &MetricsConfig, sla: &[SlaPolicy]) -> RunSummary {
    let tl = timelines(&out.log);
    let jobs = job_table(out);
    let count = |k: LogKind| out.log.records().iter().filter(|r| r.kind == k).count() as u64;
    let tats = tat_secs(&tl, |_| true);
    let escalated = |t: &JobTimeline| {
        jobs.get(&t.job)
            .is_some_and(|j| j.p_escalate >= cfg.escalation_threshold)
    };
    let (busy, sched) = busy_and_scheduled_ms(out, None, (SimTime::ZERO, out.horizon));
    let weights = &cfg.severity_weights;
    let act = actioned(out);

    let mut queues: BTreeMap<String, QueueSummary> = BTreeMap::new();
    for q in &out.queue_ids {
        let final_q = |t: &JobTimeline| t.final_queue.as_deref() == Some(q.as_str());
        let qt = tat_secs(&tl, final_q);
        let acted: Vec<_> = act.iter().filter(|a| a.2 == Some(q.as_str())).collect();
        queues.insert(
            q.clone(),
            QueueSummary {
                enqueued: tl.iter().filter(|t| t.first_queue == *q).count() as u64,
                jobs_closed: qt.len() as u64,
                jobs_actioned: acted.len() as u64,
                avg_tat_s: mean(qt.iter().copied()),
                p90_tat_s: percentile(&qt, 0.9),
                sla_violation_rate: sla_violation_rate(&tl, sla, out.horizon, |t| {
                    t.first_queue == *q
                }),
                peak_load: peak_load(&queue_load_series(&out.log, q)),
                total_rv: acted
                    .iter()
                    .map(|(j, t, _)| review_value(jobs[j], *t, weights))
                    .fold(0.0, |a, b| a + b),
            },
        );
    }

    let pop = coverage_population(out);
    RunSummary {
        seed: out.seed,
        mode: out.mode,
        horizon_ms: out.horizon.0,
        events_processed: out.events_processed,
        log_records: out.log.len() as u64,
        jobs_created: count(LogKind::Created),
        jobs_enqueued: tl.len() as u64,
        jobs_closed: tats.len() as u64,
        jobs_actioned: act.len() as u64,
        jobs_auto_decisioned: count(LogKind::AutoDecisioned),
        jobs_dropped: count(LogKind::Dropped),
        jobs_open: tl.iter().filter(|t| t.closed.is_none()).count() as u64,
        reaper_validations: count(LogKind::ReaperEnqueued),
        avg_tat_s: mean(tats.iter().copied()),
        p50_tat_s: percentile(&tats, 0.5),
        p90_tat_s: percentile(&tats, 0.9),
        p99_tat_s: percentile(&tats, 0.99),
        escalated_avg_tat_s: avg_tat(&tl, escalated),
        other_avg_tat_s: avg_tat(&tl, |t| !escalated(t)),
        sla_violation_rate: sla_violation_rate(&tl, sla, out.horizon, |_| true),
        peak_load: queues.values().map(|q| q.peak_load).max().unwrap_or(0),
        busy_hours: busy as f64 / 3.6e6,
        scheduled_hours: sched as f64 / 3.6e6,
        utilization: utilization_ratio(busy as f64, sched as f64),
        total_rv: act
            .iter()
            .map(|(j, t, _)| review_value(jobs[j], *t, weights))
            .fold(0.0, |a, b| a + b),
        coverage: coverage_of(&pop, cfg.coverage_percentile, |_| true),
        topic_coverage: [0, 1, 2].map(|i| {
            coverage_of(&pop, cfg.coverage_percentile, |j| {
                j.topic_scores[i] >= cfg.topic_threshold
            })
        }),
        misspecification_rate: misspecification_rate(out, Severity::High),
        queues,
    }
}
