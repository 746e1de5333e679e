//! Entities of the review system and the job lifecycle.
//!
//! A job moves through the workflow
//!
//! ```text
//!   created ──► enqueued ──► assigned ──► decisioned ──► closed
//!      │            ▲                         │
//!      │            └──── reopen/transfer ◄───┤
//!      └────────── ML auto-decision ─────────►┘
//! ```
//!
//! `paused` is a waiting room on the reopen loop: a decisioned job that needs
//! another look later is paused and re-enters its queue from there.
//!
//! Ground truth (`severity`, `true_label`, the actual content-view
//! trajectory) lives on [`Job`] but prioritization code only ever sees a
//! [`JobView`], which has no accessors for it.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds since the scenario epoch.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1000)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    /// Elapsed milliseconds since `earlier`, zero if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;

    fn add(self, ms: u64) -> SimTime {
        SimTime(self.0.saturating_add(ms))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReviewerId(pub u64);

impl fmt::Display for ReviewerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    UserReport,
    ProactiveClassifier,
    Disaggregated,
    ReaperValidation,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ContentType {
    Text,
    Image,
    Video,
    #[default]
    Other,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[default]
    Low,
    Medium,
    High,
    VeryHigh,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Violating,
    #[default]
    Benign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Created,
    Enqueued,
    Assigned,
    Paused,
    Decisioned,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Enqueued,
    Transferred,
    Skipped,
    Reviewed,
    Decisioned,
    Reopened,
    Paused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    #[serde(rename = "time_ms")]
    pub time: SimTime,
    pub kind: TrajectoryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<ReviewerId>,
}

impl TrajectoryEvent {
    pub fn new(time: SimTime, kind: TrajectoryKind, queue: Option<&str>) -> Self {
        Self {
            time,
            kind,
            queue: queue.map(str::to_owned),
            reviewer: None,
        }
    }

    pub fn by(mut self, reviewer: ReviewerId) -> Self {
        self.reviewer = Some(reviewer);
        self
    }
}

/// Cumulative content views sampled over time, read as a step function.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u64, u64)>", into = "Vec<(u64, u64)>")]
pub struct ContentViewTrajectory {
    samples: Vec<(SimTime, u64)>,
}

impl ContentViewTrajectory {
    /// Fails unless sample times strictly increase and views never decrease.
    pub fn new(samples: Vec<(SimTime, u64)>) -> std::result::Result<Self, String> {
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(format!(
                    "sample {} time {} does not follow {}",
                    i + 1,
                    w[1].0,
                    w[0].0
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(format!(
                    "sample {} views decrease from {} to {}",
                    i + 1,
                    w[0].1,
                    w[1].1
                ));
            }
        }
        Ok(Self { samples })
    }

    pub fn constant(from: SimTime, views: u64) -> Self {
        Self {
            samples: vec![(from, views)],
        }
    }

    pub fn samples(&self) -> &[(SimTime, u64)] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Views of the last sample at or before `t`; zero before the first sample.
    pub fn views_at(&self, t: SimTime) -> u64 {
        let n = self.samples.partition_point(|&(s, _)| s <= t);
        if n == 0 {
            0
        } else {
            self.samples[n - 1].1
        }
    }

    /// Views at the final sample.
    pub fn final_views(&self) -> u64 {
        self.samples.last().map_or(0, |s| s.1)
    }

    /// Same curve moved by `delta_ms`. Samples pushed below zero collapse onto
    /// time zero, keeping the largest count.
    pub fn shifted(&self, delta_ms: i64) -> Self {
        let mut out: Vec<(SimTime, u64)> = Vec::with_capacity(self.samples.len());
        for &(t, v) in &self.samples {
            let moved = SimTime((t.0 as i64 + delta_ms).max(0) as u64);
            match out.last_mut() {
                Some(last) if last.0 == moved => last.1 = last.1.max(v),
                _ => out.push((moved, v)),
            }
        }
        Self { samples: out }
    }
}

impl TryFrom<Vec<(u64, u64)>> for ContentViewTrajectory {
    type Error = String;

    fn try_from(raw: Vec<(u64, u64)>) -> std::result::Result<Self, String> {
        Self::new(raw.into_iter().map(|(t, v)| (SimTime(t), v)).collect())
    }
}

impl From<ContentViewTrajectory> for Vec<(u64, u64)> {
    fn from(t: ContentViewTrajectory) -> Self {
        t.samples.into_iter().map(|(t, v)| (t.0, v)).collect()
    }
}

/// Step-function lookup of cumulative views.
pub fn content_views_at(traj: &ContentViewTrajectory, t: SimTime) -> u64 {
    traj.views_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shift {
    pub start: SimTime,
    pub end: SimTime,
}

impl Shift {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Self { start, end }
    }

    pub fn len_ms(&self) -> u64 {
        self.end.since(self.start)
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reviewer {
    pub id: ReviewerId,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub skills: BTreeSet<String>,
    #[serde(default)]
    pub shifts: Vec<Shift>,
}

impl Reviewer {
    pub fn new(id: u64) -> Self {
        Self {
            id: ReviewerId(id),
            location: String::new(),
            skills: BTreeSet::new(),
            shifts: Vec::new(),
        }
    }

    pub fn scheduled_ms(&self) -> u64 {
        self.shifts.iter().map(Shift::len_ms).sum()
    }

    pub fn is_on_shift(&self, t: SimTime) -> bool {
        self.shifts.iter().any(|s| s.contains(t))
    }

    pub fn qualifies_for(&self, required: &BTreeSet<String>) -> bool {
        required.is_subset(&self.skills)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaPolicy {
    pub bound_ms: u64,
    #[serde(default)]
    pub queues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub enqueue_time: SimTime,
    pub source: Source,
    pub content_type: ContentType,
    pub market: String,
    pub language: String,
    pub violation_type: String,
    pub classifier_score: f64,
    pub p_escalate: f64,
    pub topic_scores: [f64; 3],
    pub severity: Severity,
    pub predicted_severity: Option<Severity>,
    pub weight: Option<f64>,
    pub handle_time_ms: u64,
    pub true_label: Label,
    pub content_view_trajectory: ContentViewTrajectory,
    pub predicted_view_trajectory: ContentViewTrajectory,
    /// Queue the job is routed to on creation; `None` means an ML auto-decision.
    pub initial_queue: Option<String>,
    /// Number of times a review ends in a pause before the final decision.
    pub pauses: u32,
    pub state: JobState,
    pub current_queue: Option<String>,
    pub trajectory_log: Vec<TrajectoryEvent>,
    /// Historical trajectory, consumed in replay mode.
    pub recorded: Vec<TrajectoryEvent>,
}

impl Job {
    pub fn new(id: u64, enqueue_time: SimTime, handle_time_ms: u64) -> Self {
        Self {
            id: JobId(id),
            enqueue_time,
            source: Source::UserReport,
            content_type: ContentType::Other,
            market: String::new(),
            language: String::new(),
            violation_type: String::new(),
            classifier_score: 0.0,
            p_escalate: 0.0,
            topic_scores: [0.0; 3],
            severity: Severity::Low,
            predicted_severity: None,
            weight: None,
            handle_time_ms,
            true_label: Label::Benign,
            content_view_trajectory: ContentViewTrajectory::default(),
            predicted_view_trajectory: ContentViewTrajectory::default(),
            initial_queue: None,
            pauses: 0,
            state: JobState::Created,
            current_queue: None,
            trajectory_log: Vec::new(),
            recorded: Vec::new(),
        }
    }

    pub fn view(&self) -> JobView<'_> {
        JobView { job: self }
    }

    pub fn is_decisioned(&self) -> bool {
        matches!(self.state, JobState::Decisioned | JobState::Closed)
    }

    /// Time of the first enqueue, or creation time for jobs that never queued.
    pub fn first_enqueue_time(&self) -> SimTime {
        self.trajectory_log
            .iter()
            .find(|e| e.kind == TrajectoryKind::Enqueued)
            .map_or(self.enqueue_time, |e| e.time)
    }

    pub fn final_decision_time(&self) -> Option<SimTime> {
        self.trajectory_log
            .iter()
            .rev()
            .find(|e| e.kind == TrajectoryKind::Decisioned)
            .map(|e| e.time)
    }

    /// Milliseconds from first enqueue to final decision.
    pub fn turnaround_time(&self) -> Result<u64> {
        if !self.is_decisioned() {
            return Err(Error::NotDecisioned(self.id));
        }
        let decided = self
            .final_decision_time()
            .ok_or(Error::NotDecisioned(self.id))?;
        Ok(decided.since(self.first_enqueue_time()))
    }

    /// Applies one workflow step, appending it to the trajectory log.
    pub fn advance_state(&mut self, event: TrajectoryEvent) -> Result<()> {
        use JobState as S;
        use TrajectoryKind as K;

        if let Some(last) = self.trajectory_log.last() {
            if event.time < last.time {
                return Err(Error::TrajectoryTime {
                    job: self.id,
                    at: event.time.0,
                    last: last.time.0,
                });
            }
        }
        let next = match (self.state, event.kind) {
            (S::Created, K::Enqueued) => S::Enqueued,
            (S::Created, K::Decisioned) => S::Decisioned,
            (S::Enqueued, K::Transferred) => S::Enqueued,
            (S::Enqueued, K::Skipped) => S::Enqueued,
            (S::Enqueued, K::Reviewed) => S::Assigned,
            (S::Assigned, K::Skipped) => S::Enqueued,
            (S::Assigned, K::Decisioned) => S::Decisioned,
            (S::Decisioned, K::Reopened) => S::Enqueued,
            (S::Decisioned, K::Transferred) => S::Enqueued,
            (S::Decisioned, K::Paused) => S::Paused,
            (S::Paused, K::Reopened) => S::Enqueued,
            (from, kind) => {
                return Err(Error::IllegalTransition {
                    job: self.id,
                    from,
                    event: kind,
                })
            }
        };
        if matches!(event.kind, K::Enqueued | K::Transferred | K::Reopened) {
            if let Some(q) = &event.queue {
                self.current_queue = Some(q.clone());
            }
        }
        self.state = next;
        self.trajectory_log.push(event);
        Ok(())
    }

    pub fn close(&mut self) -> Result<()> {
        if self.state != JobState::Decisioned {
            return Err(Error::NotDecisioned(self.id));
        }
        self.state = JobState::Closed;
        Ok(())
    }
}

/// Redacted read-only view of a job for prioritization and allocation.
#[derive(Debug, Clone, Copy)]
pub struct JobView<'a> {
    job: &'a Job,
}

impl<'a> JobView<'a> {
    pub fn id(&self) -> JobId {
        self.job.id
    }
    pub fn enqueue_time(&self) -> SimTime {
        self.job.enqueue_time
    }
    pub fn source(&self) -> Source {
        self.job.source
    }
    pub fn content_type(&self) -> ContentType {
        self.job.content_type
    }
    pub fn market(&self) -> &'a str {
        &self.job.market
    }
    pub fn language(&self) -> &'a str {
        &self.job.language
    }
    pub fn violation_type(&self) -> &'a str {
        &self.job.violation_type
    }
    pub fn classifier_score(&self) -> f64 {
        self.job.classifier_score
    }
    pub fn p_escalate(&self) -> f64 {
        self.job.p_escalate
    }
    pub fn topic_scores(&self) -> [f64; 3] {
        self.job.topic_scores
    }
    pub fn handle_time_ms(&self) -> u64 {
        self.job.handle_time_ms
    }
    pub fn predicted_severity(&self) -> Option<Severity> {
        self.job.predicted_severity
    }
    pub fn weight(&self) -> Option<f64> {
        self.job.weight
    }
    pub fn predicted_views_at(&self, t: SimTime) -> u64 {
        self.job.predicted_view_trajectory.views_at(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(s: &[(u64, u64)]) -> ContentViewTrajectory {
        ContentViewTrajectory::try_from(s.to_vec()).unwrap()
    }

    #[test]
    fn step_interpolation() {
        let t = traj(&[(10, 5), (20, 9)]);
        assert_eq!(content_views_at(&t, SimTime(15)), 5);
        assert_eq!(content_views_at(&t, SimTime(5)), 0);
        assert_eq!(content_views_at(&t, SimTime(20)), 9);
        assert_eq!(content_views_at(&t, SimTime(10_000)), 9);
    }

    #[test]
    fn trajectory_rejects_decreasing_views() {
        assert!(ContentViewTrajectory::try_from(vec![(1, 5), (2, 4)]).is_err());
        assert!(ContentViewTrajectory::try_from(vec![(2, 5), (2, 6)]).is_err());
    }

    #[test]
    fn shifted_collapses_at_zero() {
        let t = traj(&[(10, 5), (20, 9), (40, 12)]).shifted(-25);
        assert_eq!(t.samples(), &[(SimTime(0), 9), (SimTime(15), 12)]);
    }

    fn enqueued(t: u64) -> TrajectoryEvent {
        TrajectoryEvent::new(SimTime(t), TrajectoryKind::Enqueued, Some("q"))
    }

    fn ev(t: u64, kind: TrajectoryKind) -> TrajectoryEvent {
        TrajectoryEvent::new(SimTime(t), kind, Some("q"))
    }

    #[test]
    fn human_review_path() {
        let mut j = Job::new(1, SimTime(0), 16_000);
        j.advance_state(enqueued(0)).unwrap();
        assert_eq!(j.state, JobState::Enqueued);
        assert_eq!(j.current_queue.as_deref(), Some("q"));
        j.advance_state(ev(0, TrajectoryKind::Reviewed)).unwrap();
        j.advance_state(ev(16_000, TrajectoryKind::Decisioned))
            .unwrap();
        assert_eq!(j.turnaround_time().unwrap(), 16_000);
        j.close().unwrap();
        assert_eq!(j.turnaround_time().unwrap(), 16_000);
    }

    #[test]
    fn reopen_loop() {
        let mut j = Job::new(1, SimTime(0), 10);
        j.advance_state(enqueued(0)).unwrap();
        j.advance_state(ev(1, TrajectoryKind::Reviewed)).unwrap();
        j.advance_state(ev(11, TrajectoryKind::Decisioned)).unwrap();
        j.advance_state(ev(20, TrajectoryKind::Reopened)).unwrap();
        assert_eq!(j.state, JobState::Enqueued);
        j.advance_state(ev(20, TrajectoryKind::Reviewed)).unwrap();
        j.advance_state(ev(30, TrajectoryKind::Decisioned)).unwrap();
        j.advance_state(ev(30, TrajectoryKind::Paused)).unwrap();
        assert_eq!(j.state, JobState::Paused);
        j.advance_state(ev(40, TrajectoryKind::Reopened)).unwrap();
        assert_eq!(j.state, JobState::Enqueued);
    }

    #[test]
    fn ml_auto_decision() {
        let mut j = Job::new(1, SimTime(5), 10);
        j.advance_state(TrajectoryEvent::new(
            SimTime(5),
            TrajectoryKind::Decisioned,
            None,
        ))
        .unwrap();
        assert_eq!(j.state, JobState::Decisioned);
        assert_eq!(j.turnaround_time().unwrap(), 0);
    }

    #[test]
    fn closed_is_terminal() {
        let mut j = Job::new(1, SimTime(0), 10);
        j.advance_state(TrajectoryEvent::new(
            SimTime(0),
            TrajectoryKind::Decisioned,
            None,
        ))
        .unwrap();
        j.close().unwrap();
        for kind in [
            TrajectoryKind::Enqueued,
            TrajectoryKind::Reviewed,
            TrajectoryKind::Reopened,
            TrajectoryKind::Decisioned,
        ] {
            assert!(matches!(
                j.advance_state(ev(1, kind)),
                Err(Error::IllegalTransition { .. })
            ));
        }
        assert!(j.close().is_err());
    }

    #[test]
    fn illegal_skip_from_created() {
        let mut j = Job::new(1, SimTime(0), 10);
        assert!(j.advance_state(ev(0, TrajectoryKind::Reviewed)).is_err());
        assert_eq!(j.state, JobState::Created);
        assert!(j.trajectory_log.is_empty());
    }

    #[test]
    fn tat_requires_decision() {
        let mut j = Job::new(1, SimTime(0), 10);
        j.advance_state(enqueued(0)).unwrap();
        assert!(matches!(j.turnaround_time(), Err(Error::NotDecisioned(_))));
    }

    #[test]
    fn log_times_must_not_go_backwards() {
        let mut j = Job::new(1, SimTime(0), 10);
        j.advance_state(enqueued(50)).unwrap();
        assert!(matches!(
            j.advance_state(ev(40, TrajectoryKind::Reviewed)),
            Err(Error::TrajectoryTime { .. })
        ));
    }

    proptest! {
        #[test]
        fn views_monotone_in_time(
            steps in prop::collection::vec((1u64..1000, 0u64..1000), 0..20),
            a in 0u64..30_000,
            b in 0u64..30_000,
        ) {
            let mut t = 0;
            let mut v = 0;
            let samples: Vec<_> = steps
                .into_iter()
                .map(|(dt, dv)| {
                    t += dt;
                    v += dv;
                    (SimTime(t), v)
                })
                .collect();
            let traj = ContentViewTrajectory::new(samples).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(traj.views_at(SimTime(lo)) <= traj.views_at(SimTime(hi)));
        }
    }
}
