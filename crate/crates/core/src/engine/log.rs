//! Append-only run log, written as one JSON object per line:
//!
//! ```text
//! {"time_ms":0,"seq":0,"kind":"created","job_id":7}
//! {"time_ms":0,"seq":1,"kind":"enqueued","job_id":7,"queue_id":"hate_en"}
//! {"time_ms":0,"seq":2,"kind":"assigned","job_id":7,"reviewer_id":3,"queue_id":"hate_en"}
//! {"time_ms":10000,"seq":3,"kind":"decisioned","job_id":7,"reviewer_id":3,"queue_id":"hate_en","detail":{"action":"remove"}}
//! ```
//!
//! `seq` is the record's position in the log. Queue load is carried by
//! `enqueued` (+1), `assigned` (-1), `dropped` (-1) and `transferred`
//! (-1 on `queue_id`, +1 on `detail.to_queue`).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{JobId, ReviewerId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Created,
    Enqueued,
    Assigned,
    Decisioned,
    Closed,
    Transferred,
    Skipped,
    Paused,
    Reopened,
    Dropped,
    AutoDecisioned,
    ReaperEnqueued,
    ShiftStart,
    ShiftEnd,
    QueueResort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Remove,
    Keep,
    Pause,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detail {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_queue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_id: Option<JobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl Detail {
    pub fn is_empty(&self) -> bool {
        *self == Detail::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time_ms: u64,
    pub seq: u64,
    pub kind: LogKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<JobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer_id: Option<ReviewerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_id: Option<String>,
    #[serde(default, skip_serializing_if = "Detail::is_empty")]
    pub detail: Detail,
}

impl LogRecord {
    pub fn time(&self) -> SimTime {
        SimTime(self.time_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<LogRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Starts a record stamped with the next sequence number.
    pub fn push(&mut self, t: SimTime, kind: LogKind) -> &mut LogRecord {
        let seq = self.records.len() as u64;
        self.records.push(LogRecord {
            time_ms: t.0,
            seq,
            kind,
            job_id: None,
            reviewer_id: None,
            queue_id: None,
            detail: Detail::default(),
        });
        self.records.last_mut().expect("just pushed")
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> std::io::Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
        Ok(Self { records })
    }
}

/// Builder-style setters used by the engine.
pub(crate) trait RecordExt {
    fn job(&mut self, id: JobId) -> &mut Self;
    fn reviewer(&mut self, id: ReviewerId) -> &mut Self;
    fn queue(&mut self, id: &str) -> &mut Self;
}

impl RecordExt for LogRecord {
    fn job(&mut self, id: JobId) -> &mut Self {
        self.job_id = Some(id);
        self
    }
    fn reviewer(&mut self, id: ReviewerId) -> &mut Self {
        self.reviewer_id = Some(id);
        self
    }
    fn queue(&mut self, id: &str) -> &mut Self {
        self.queue_id = Some(id.to_owned());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_shape_is_stable() {
        let mut log = EventLog::new();
        log.push(SimTime(0), LogKind::Created).job(JobId(7));
        log.push(SimTime(10), LogKind::Decisioned)
            .job(JobId(7))
            .reviewer(ReviewerId(3))
            .queue("q")
            .detail
            .action = Some(Action::Remove);
        let mut buf = Vec::new();
        log.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"time_ms\":0,\"seq\":0,\"kind\":\"created\",\"job_id\":7}\n\
             {\"time_ms\":10,\"seq\":1,\"kind\":\"decisioned\",\"job_id\":7,\"reviewer_id\":3,\"queue_id\":\"q\",\"detail\":{\"action\":\"remove\"}}\n"
        );
        let back = EventLog::read_ndjson(&buf[..]).unwrap();
        assert_eq!(back, log);
    }
}
