//! On-disk input formats.
//!
//! Jobs are one JSON object per line:
//!
//! ```text
//! {"id":1,"enqueue_time_ms":0,"handle_time_ms":30000,"queue":"hate_en","label":"violating",
//!  "severity":"high","content_views":[[0,10],[3600000,900]]}
//! ```
//!
//! Shifts and skills are CSV tables with headers `reviewer_id,start_ms,end_ms`
//! and `reviewer_id,skill`. An optional `reviewer_id,location` table names locations.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    ContentType, ContentViewTrajectory, Job, JobState, Label, Reviewer, Severity, Shift, SimTime,
    Source, TrajectoryEvent,
};
use crate::error::{Diagnostic, Error, Result};

fn is_zero(x: &u32) -> bool {
    *x == 0
}

fn is_zero_f(x: &f64) -> bool {
    *x == 0.0
}

/// One job as stored in a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobTraceRecord {
    pub id: u64,
    pub enqueue_time_ms: u64,
    pub handle_time_ms: u64,
    /// Initial queue; omitted for jobs decided automatically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<String>,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub content_type: ContentType,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub market: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub language: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub violation_type: String,
    #[serde(default, skip_serializing_if = "is_zero_f")]
    pub classifier_score: f64,
    #[serde(default, skip_serializing_if = "is_zero_f")]
    pub p_escalate: f64,
    #[serde(default)]
    pub topic_scores: [f64; 3],
    #[serde(default)]
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_severity: Option<Severity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default)]
    pub label: Label,
    /// Cumulative (time_ms, views) samples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub content_views: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicted_views: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub pauses: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<TrajectoryEvent>,
}

impl JobTraceRecord {
    pub fn from_job(job: &Job) -> Self {
        let raw = |t: &ContentViewTrajectory| t.samples().iter().map(|&(t, v)| (t.0, v)).collect();
        let trajectory = if job.recorded.is_empty() {
            job.trajectory_log.clone()
        } else {
            job.recorded.clone()
        };
        Self {
            id: job.id.0,
            enqueue_time_ms: job.enqueue_time.0,
            handle_time_ms: job.handle_time_ms,
            queue: job.initial_queue.clone(),
            source: job.source,
            content_type: job.content_type,
            market: job.market.clone(),
            language: job.language.clone(),
            violation_type: job.violation_type.clone(),
            classifier_score: job.classifier_score,
            p_escalate: job.p_escalate,
            topic_scores: job.topic_scores,
            severity: job.severity,
            predicted_severity: job.predicted_severity,
            weight: job.weight,
            label: job.true_label,
            content_views: raw(&job.content_view_trajectory),
            predicted_views: raw(&job.predicted_view_trajectory),
            pauses: job.pauses,
            trajectory,
        }
    }

    /// Converts to a fresh job, reporting every bad field.
    pub fn into_job(self, source: &str) -> std::result::Result<Job, Vec<Diagnostic>> {
        let rec = format!("job {}", self.id);
        let mut diags = Vec::new();
        let mut bad = |field: &str, msg: String| {
            diags.push(Diagnostic::new(source, rec.clone(), field, msg));
        };
        let unit = |field: &str, x: f64, bad: &mut dyn FnMut(&str, String)| {
            if !(0.0..=1.0).contains(&x) {
                bad(field, format!("{x} is outside [0, 1]"));
            }
        };
        if self.handle_time_ms == 0 {
            bad("handle_time_ms", "must be positive".into());
        }
        unit("classifier_score", self.classifier_score, &mut bad);
        unit("p_escalate", self.p_escalate, &mut bad);
        for (i, p) in self.topic_scores.iter().enumerate() {
            unit(&format!("topic_scores[{i}]"), *p, &mut bad);
        }
        if let Some(w) = self.weight {
            if !(w.is_finite() && w > 0.0) {
                bad("weight", format!("{w} must be positive"));
            }
        }
        let mut traj = |field: &str, raw: Vec<(u64, u64)>| {
            let samples = raw.into_iter().map(|(t, v)| (SimTime(t), v)).collect();
            ContentViewTrajectory::new(samples).unwrap_or_else(|e| {
                bad(field, e);
                ContentViewTrajectory::default()
            })
        };
        let actual = traj("content_views", self.content_views);
        let predicted = traj("predicted_views", self.predicted_views);
        for w in self.trajectory.windows(2) {
            if w[1].time < w[0].time {
                bad(
                    "trajectory",
                    format!("event at {} ms precedes {} ms", w[1].time, w[0].time),
                );
                break;
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }

        let mut job = Job::new(self.id, SimTime(self.enqueue_time_ms), self.handle_time_ms);
        job.initial_queue = self.queue;
        job.source = self.source;
        job.content_type = self.content_type;
        job.market = self.market;
        job.language = self.language;
        job.violation_type = self.violation_type;
        job.classifier_score = self.classifier_score;
        job.p_escalate = self.p_escalate;
        job.topic_scores = self.topic_scores;
        job.severity = self.severity;
        job.predicted_severity = self.predicted_severity;
        job.weight = self.weight;
        job.true_label = self.label;
        job.content_view_trajectory = actual;
        job.predicted_view_trajectory = predicted;
        job.pauses = self.pauses;
        job.recorded = self.trajectory;
        Ok(job)
    }
}

/// Checks a recorded trajectory by replaying it through the job state machine.
pub fn check_recorded(job: &Job, source: &str) -> Option<Diagnostic> {
    let mut probe = job.clone();
    probe.state = JobState::Created;
    probe.trajectory_log.clear();
    for ev in &job.recorded {
        if let Err(e) = probe.advance_state(ev.clone()) {
            return Some(Diagnostic::new(
                source,
                format!("job {}", job.id),
                "trajectory",
                e.to_string(),
            ));
        }
    }
    None
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses a job trace, collecting diagnostics instead of stopping at the first problem.
pub fn read_jobs<R: BufRead>(r: R, source: &str) -> (Vec<Job>, Vec<Diagnostic>) {
    let mut jobs = Vec::new();
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in r.lines().enumerate() {
        let lineno = n + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                diags.push(Diagnostic::new(
                    source,
                    format!("line {lineno}"),
                    "-",
                    e.to_string(),
                ));
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let rec: JobTraceRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                diags.push(Diagnostic::new(
                    source,
                    format!("line {lineno}"),
                    "schema",
                    e.to_string(),
                ));
                continue;
            }
        };
        if !seen.insert(rec.id) {
            diags.push(Diagnostic::new(
                source,
                format!("job {}", rec.id),
                "id",
                format!("duplicate id on line {lineno}"),
            ));
            continue;
        }
        match rec.into_job(source) {
            Ok(j) => jobs.push(j),
            Err(d) => diags.extend(d),
        }
    }
    jobs.sort_by_key(|j| (j.enqueue_time, j.id));
    (jobs, diags)
}

pub fn load_jobs(path: &Path) -> Result<(Vec<Job>, Vec<Diagnostic>)> {
    Ok(read_jobs(open(path)?, &path.display().to_string()))
}

pub fn write_jobs<W: Write>(jobs: &[Job], mut w: W) -> std::io::Result<()> {
    for j in jobs {
        serde_json::to_writer(&mut w, &JobTraceRecord::from_job(j))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Serialize, Deserialize)]
struct ShiftRow {
    reviewer_id: u64,
    start_ms: u64,
    end_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SkillRow {
    reviewer_id: u64,
    skill: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct LocationRow {
    reviewer_id: u64,
    location: String,
}

fn read_rows<T, R>(r: R, source: &str, diags: &mut Vec<Diagnostic>) -> Vec<T>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut out = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    for (i, row) in rdr.deserialize().enumerate() {
        match row {
            Ok(v) => out.push(v),
            Err(e) => diags.push(Diagnostic::new(
                source,
                format!("row {}", i + 2),
                "schema",
                e.to_string(),
            )),
        }
    }
    out
}

/// Reviewer tables as read from disk, before assembly.
#[derive(Debug, Default)]
pub struct RosterSources<R> {
    pub shifts: Option<(String, R)>,
    pub skills: Option<(String, R)>,
    pub locations: Option<(String, R)>,
}

/// Builds reviewers from the shift, skill and location tables. A reviewer
/// exists if any table mentions them.
pub fn read_roster<R: Read>(src: RosterSources<R>) -> (Vec<Reviewer>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut by_id: BTreeMap<u64, Reviewer> = BTreeMap::new();
    if let Some((name, r)) = src.shifts {
        for row in read_rows::<ShiftRow, _>(r, &name, &mut diags) {
            if row.end_ms <= row.start_ms {
                diags.push(Diagnostic::new(
                    &name,
                    format!("reviewer {}", row.reviewer_id),
                    "end_ms",
                    format!(
                        "shift end {} is not after start {}",
                        row.end_ms, row.start_ms
                    ),
                ));
                continue;
            }
            by_id
                .entry(row.reviewer_id)
                .or_insert_with(|| Reviewer::new(row.reviewer_id))
                .shifts
                .push(Shift::new(SimTime(row.start_ms), SimTime(row.end_ms)));
        }
        for r in by_id.values_mut() {
            r.shifts.sort_by_key(|s| s.start);
            for w in r.shifts.windows(2) {
                if w[1].start < w[0].end {
                    diags.push(Diagnostic::new(
                        &name,
                        format!("reviewer {}", r.id),
                        "start_ms",
                        format!(
                            "shift starting {} overlaps shift ending {}",
                            w[1].start, w[0].end
                        ),
                    ));
                }
            }
        }
    }
    if let Some((name, r)) = src.skills {
        for row in read_rows::<SkillRow, _>(r, &name, &mut diags) {
            by_id
                .entry(row.reviewer_id)
                .or_insert_with(|| Reviewer::new(row.reviewer_id))
                .skills
                .insert(row.skill);
        }
    }
    if let Some((name, r)) = src.locations {
        for row in read_rows::<LocationRow, _>(r, &name, &mut diags) {
            by_id
                .entry(row.reviewer_id)
                .or_insert_with(|| Reviewer::new(row.reviewer_id))
                .location = row.location;
        }
    }
    (by_id.into_values().collect(), diags)
}

pub fn load_roster(
    shifts: Option<&Path>,
    skills: Option<&Path>,
    locations: Option<&Path>,
) -> Result<(Vec<Reviewer>, Vec<Diagnostic>)> {
    let named = |p: Option<&Path>| -> Result<Option<(String, BufReader<File>)>> {
        p.map(|p| Ok((p.display().to_string(), open(p)?)))
            .transpose()
    };
    Ok(read_roster(RosterSources {
        shifts: named(shifts)?,
        skills: named(skills)?,
        locations: named(locations)?,
    }))
}

pub fn write_shifts<W: Write>(reviewers: &[Reviewer], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reviewers {
        for s in &r.shifts {
            wr.serialize(ShiftRow {
                reviewer_id: r.id.0,
                start_ms: s.start.0,
                end_ms: s.end.0,
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_skills<W: Write>(reviewers: &[Reviewer], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reviewers {
        for s in &r.skills {
            wr.serialize(SkillRow {
                reviewer_id: r.id.0,
                skill: s.clone(),
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_locations<W: Write>(reviewers: &[Reviewer], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reviewers {
        wr.serialize(LocationRow {
            reviewer_id: r.id.0,
            location: r.location.clone(),
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_line_parses_with_defaults() {
        let line = r#"{"id":1,"enqueue_time_ms":5,"handle_time_ms":10,"queue":"q"}"#;
        let (jobs, diags) = read_jobs(line.as_bytes(), "jobs");
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(jobs[0].initial_queue.as_deref(), Some("q"));
        assert_eq!(jobs[0].true_label, Label::Benign);
    }

    #[test]
    fn decreasing_views_are_named() {
        let line =
            r#"{"id":4,"enqueue_time_ms":0,"handle_time_ms":10,"content_views":[[0,10],[5,3]]}"#;
        let (_, diags) = read_jobs(line.as_bytes(), "jobs");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].record, "job 4");
        assert_eq!(diags[0].field, "content_views");
    }

    #[test]
    fn bad_json_and_duplicates() {
        let text = "{\"id\":1,\"enqueue_time_ms\":0,\"handle_time_ms\":1}\n\
                    {\"id\":1,\"enqueue_time_ms\":0,\"handle_time_ms\":1}\n\
                    {nope}\n\
                    {\"id\":2,\"enqueue_time_ms\":0,\"handle_time_ms\":1,\"p_escalate\":1.5}\n";
        let (jobs, diags) = read_jobs(text.as_bytes(), "jobs");
        assert_eq!(jobs.len(), 1);
        let fields: Vec<_> = diags.iter().map(|d| d.field.as_str()).collect();
        assert_eq!(fields, ["id", "schema", "p_escalate"]);
    }

    #[test]
    fn overlapping_shifts_rejected() {
        let shifts = "reviewer_id,start_ms,end_ms\n1,0,100\n1,50,200\n2,0,10\n";
        let skills = "reviewer_id,skill\n1,en\n3,fr\n";
        let (revs, diags) = read_roster(RosterSources {
            shifts: Some(("shifts".into(), shifts.as_bytes())),
            skills: Some(("skills".into(), skills.as_bytes())),
            locations: None,
        });
        assert_eq!(revs.len(), 3);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].record, "reviewer 1");
    }

    #[test]
    fn round_trip() {
        let mut j = Job::new(9, SimTime(100), 2500);
        j.initial_queue = Some("q".into());
        j.true_label = Label::Violating;
        j.topic_scores = [0.1, 0.0, 0.9];
        j.content_view_trajectory =
            ContentViewTrajectory::new(vec![(SimTime(0), 1), (SimTime(9), 40)]).unwrap();
        let mut buf = Vec::new();
        write_jobs(std::slice::from_ref(&j), &mut buf).unwrap();
        let (back, diags) = read_jobs(&buf[..], "jobs");
        assert!(diags.is_empty());
        assert_eq!(back, vec![j]);
    }
}
