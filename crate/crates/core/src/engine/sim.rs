use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calendar::{EventCalendar, EventKind};
use super::log::{Action, EventLog, LogKind, RecordExt};
use crate::allocation::{AllocationConfig, Allocator, Topology, DAY_MS};
use crate::domain::{
    Job, JobId, JobState, Label, Reviewer, ReviewerId, SimTime, TrajectoryEvent, TrajectoryKind,
};
use crate::error::{Error, Result};
use crate::policy::{PriorityFormula, QueueBook};
use crate::reaper::{self, ReaperCriteria, ReaperProcess};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Re-execute recorded trajectories verbatim.
    Replay,
    /// Routing, ordering and assignment come from the configured policies.
    #[default]
    Counterfactual,
}

#[derive(Debug, Clone)]
pub struct QueueSetup {
    pub id: String,
    pub formula: PriorityFormula,
    pub max_size: Option<usize>,
    pub overflow: Option<usize>,
    pub reorder_period_ms: Option<u64>,
    pub sla_window_ms: Option<u64>,
}

/// Everything a run needs, already validated and resolved to indices.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub mode: Mode,
    pub seed: u64,
    pub pause_duration_ms: u64,
    pub topology: Topology,
    pub queues: Vec<QueueSetup>,
    pub allocation: AllocationConfig,
    pub jobs: Vec<Job>,
    /// Jobs that arrive as one-off volume injections.
    pub synthetic_jobs: Vec<Job>,
    pub reviewers: Vec<Reviewer>,
    pub reapers: Vec<(ReaperCriteria, usize)>,
}

#[derive(Debug, Clone, Default)]
struct ReviewerRt {
    on_shift: bool,
    busy: Option<usize>,
    parked: bool,
    wake_pending: bool,
}

#[derive(Debug)]
struct QueueRt {
    setup: QueueSetup,
    book: QueueBook,
    /// Reviewers eligible for this queue, ascending id.
    reviewers: Vec<usize>,
}

/// Finished run: the log plus the final entity tables metrics need.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub jobs: Vec<Job>,
    pub reviewers: Vec<Reviewer>,
    pub queue_ids: Vec<String>,
    pub horizon: SimTime,
    pub mode: Mode,
    pub seed: u64,
    pub events_processed: u64,
}

impl RunOutput {
    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }
}

/// Single-threaded discrete-event kernel for one run.
pub struct Simulation {
    cal: EventCalendar,
    mode: Mode,
    seed: u64,
    rng: ChaCha8Rng,
    pause_duration_ms: u64,
    jobs: Vec<Job>,
    pauses_done: Vec<u32>,
    queues: Vec<QueueRt>,
    queue_index: HashMap<String, usize>,
    reviewers: Vec<Reviewer>,
    reviewer_rt: Vec<ReviewerRt>,
    reviewer_index: HashMap<ReviewerId, usize>,
    allocator: Allocator,
    topology: Topology,
    /// Per segment: (day, reviewer-ms assigned that day).
    cap_used: Vec<(u64, u64)>,
    reapers: Vec<ReaperProcess>,
    validated: Vec<bool>,
    next_job_id: u64,
    log: EventLog,
    events_processed: u64,
    horizon: SimTime,
}

impl Simulation {
    pub fn new(setup: SimSetup) -> Result<Self> {
        let SimSetup {
            mode,
            seed,
            pause_duration_ms,
            topology,
            queues,
            allocation,
            jobs,
            synthetic_jobs,
            mut reviewers,
            reapers,
        } = setup;

        reviewers.sort_by_key(|r| r.id);
        let allocator = Allocator::new(&allocation, &topology, &reviewers);
        let mut queue_rt: Vec<QueueRt> = queues
            .into_iter()
            .map(|q| QueueRt {
                setup: q,
                book: QueueBook::new(),
                reviewers: Vec::new(),
            })
            .collect();
        for r in 0..reviewers.len() {
            for &q in allocator.eligible(r) {
                queue_rt[q].reviewers.push(r);
            }
        }
        let queue_index = queue_rt
            .iter()
            .enumerate()
            .map(|(i, q)| (q.setup.id.clone(), i))
            .collect();
        let reviewer_index = reviewers
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id, i))
            .collect();

        let n_regular = jobs.len();
        let mut all_jobs = jobs;
        all_jobs.extend(synthetic_jobs);
        let next_job_id = all_jobs.iter().map(|j| j.id.0 + 1).max().unwrap_or(0);

        let mut sim = Simulation {
            cal: EventCalendar::new(),
            mode,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pause_duration_ms,
            pauses_done: vec![0; all_jobs.len()],
            validated: vec![false; all_jobs.len()],
            jobs: all_jobs,
            queues: queue_rt,
            queue_index,
            reviewer_rt: vec![ReviewerRt::default(); reviewers.len()],
            reviewers,
            reviewer_index,
            allocator,
            cap_used: vec![(0, 0); topology.segments.len()],
            topology,
            reapers: Vec::new(),
            next_job_id,
            log: EventLog::new(),
            events_processed: 0,
            horizon: SimTime::ZERO,
        };

        for (slot, job) in sim.jobs.iter().enumerate() {
            let kind = match mode {
                Mode::Replay => {
                    if job.recorded.is_empty() {
                        return Err(Error::config(format!(
                            "replay mode: job {} has no recorded trajectory",
                            job.id
                        )));
                    }
                    sim.cal.schedule(
                        job.recorded[0].time,
                        EventKind::ReplayStep { job: slot, step: 0 },
                    )?;
                    continue;
                }
                Mode::Counterfactual if slot >= n_regular => {
                    EventKind::SyntheticInjection { job: slot }
                }
                Mode::Counterfactual => EventKind::JobArrival { job: slot },
            };
            sim.cal.schedule(job.enqueue_time, kind)?;
        }
        for (r, rev) in sim.reviewers.iter().enumerate() {
            for s in &rev.shifts {
                sim.cal
                    .schedule(s.start, EventKind::ShiftStart { reviewer: r })?;
                sim.cal
                    .schedule(s.end, EventKind::ShiftEnd { reviewer: r })?;
            }
        }
        if mode == Mode::Counterfactual {
            for q in 0..sim.queues.len() {
                if let Some(p) = sim.queues[q].setup.reorder_period_ms {
                    if p > 0 {
                        sim.cal
                            .schedule(SimTime(p), EventKind::QueueResort { queue: q })?;
                    }
                }
            }
            let pool: Vec<(SimTime, usize)> = sim
                .jobs
                .iter()
                .enumerate()
                .filter(|(_, j)| reaper::is_candidate(j))
                .map(|(i, j)| (j.enqueue_time, i))
                .collect();
            for (k, (criteria, target)) in reapers.into_iter().enumerate() {
                sim.cal.schedule(
                    SimTime(criteria.first_scan_ms),
                    EventKind::ReaperScan { reaper: k },
                )?;
                sim.reapers
                    .push(ReaperProcess::new(criteria, target, pool.clone()));
            }
            if sim
                .topology
                .segments
                .iter()
                .any(|s| s.daily_cap_ms.is_some())
            {
                sim.cal.schedule(SimTime(DAY_MS), EventKind::CapReset)?;
            }
        }
        Ok(sim)
    }

    pub fn clock(&self) -> SimTime {
        self.cal.clock()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn events_processed(&self) -> u64 {
        self.events_processed
    }

    /// Open jobs currently held by queue `id`.
    pub fn queue_len(&self, id: &str) -> Option<usize> {
        self.queue_index.get(id).map(|&q| self.queues[q].book.len())
    }

    /// Processes every event due at or before `horizon`, then parks the clock there.
    pub fn run_until(&mut self, horizon: SimTime) -> Result<()> {
        self.horizon = self.horizon.max(horizon);
        while let Some(ev) = self.cal.pop_until(horizon) {
            self.events_processed += 1;
            self.dispatch(ev.kind)?;
        }
        self.cal.advance_to(horizon);
        Ok(())
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            log: self.log,
            jobs: self.jobs,
            reviewers: self.reviewers,
            queue_ids: self.queues.into_iter().map(|q| q.setup.id).collect(),
            horizon: self.cal.clock().max(self.horizon),
            mode: self.mode,
            seed: self.seed,
            events_processed: self.events_processed,
        }
    }

    fn now(&self) -> SimTime {
        self.cal.clock()
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::JobArrival { job } | EventKind::SyntheticInjection { job } => {
                self.on_arrival(job)
            }
            EventKind::JobReopen { job } => self.on_reopen(job),
            EventKind::ReplayStep { job, step } => self.on_replay_step(job, step),
            EventKind::ReaperScan { reaper } => self.on_reaper_scan(reaper),
            EventKind::QueueResort { queue } => self.on_resort(queue),
            EventKind::CapReset => self.on_cap_reset(),
            EventKind::ShiftStart { reviewer } => self.on_shift_start(reviewer),
            EventKind::ShiftEnd { reviewer } => self.on_shift_end(reviewer),
            EventKind::ReviewerAvailable { reviewer } => self.on_reviewer_available(reviewer),
            EventKind::ReviewComplete { reviewer, job } => self.on_review_complete(reviewer, job),
        }
    }

    fn advance(&mut self, slot: usize, kind: TrajectoryKind, queue: Option<usize>) -> Result<()> {
        let t = self.now();
        let q = queue.map(|q| self.queues[q].setup.id.as_str());
        self.jobs[slot].advance_state(TrajectoryEvent::new(t, kind, q))
    }

    fn advance_by(
        &mut self,
        slot: usize,
        kind: TrajectoryKind,
        queue: Option<usize>,
        reviewer: usize,
    ) -> Result<()> {
        let t = self.now();
        let q = queue.map(|q| self.queues[q].setup.id.as_str());
        let ev = TrajectoryEvent::new(t, kind, q).by(self.reviewers[reviewer].id);
        self.jobs[slot].advance_state(ev)
    }

    fn current_queue(&self, slot: usize) -> Option<usize> {
        self.jobs[slot]
            .current_queue
            .as_ref()
            .and_then(|q| self.queue_index.get(q).copied())
    }

    fn log_job(&mut self, kind: LogKind, slot: usize, queue: Option<usize>) {
        let t = self.now();
        let id = self.jobs[slot].id;
        let rec = self.log.push(t, kind);
        rec.job(id);
        if let Some(q) = queue {
            rec.queue(&self.queues[q].setup.id);
        }
    }

    // ---- counterfactual job flow ----

    fn on_arrival(&mut self, slot: usize) -> Result<()> {
        self.log_job(LogKind::Created, slot, None);
        let routed = self.jobs[slot]
            .initial_queue
            .as_ref()
            .map(|q| self.queue_index[q]);
        match routed {
            Some(q) => self.route_new(slot, q),
            None => {
                self.advance(slot, TrajectoryKind::Decisioned, None)?;
                self.log_job(LogKind::AutoDecisioned, slot, None);
                self.jobs[slot].close()?;
                self.log_job(LogKind::Closed, slot, None);
                Ok(())
            }
        }
    }

    fn route_new(&mut self, slot: usize, q: usize) -> Result<()> {
        self.advance(slot, TrajectoryKind::Enqueued, Some(q))?;
        self.log_job(LogKind::Enqueued, slot, Some(q));
        self.insert_into(q, slot)
    }

    fn score(&self, q: usize, slot: usize) -> Result<f64> {
        let setup = &self.queues[q].setup;
        Ok(setup
            .formula
            .score(&self.jobs[slot].view(), self.now(), setup.sla_window_ms)?
            .value)
    }

    /// Places a job into a queue's book, evicting the lowest-scored job if the
    /// queue is over capacity, and wakes parked reviewers.
    fn insert_into(&mut self, q: usize, slot: usize) -> Result<()> {
        let score = self.score(q, slot)?;
        let id = self.jobs[slot].id;
        self.queues[q].book.insert(slot, id, score);
        if let (Mode::Counterfactual, Some(max)) = (self.mode, self.queues[q].setup.max_size) {
            if self.queues[q].book.len() > max {
                let victim = self.queues[q].book.pop_lowest().expect("non-empty");
                self.evict(q, victim)?;
            }
        }
        if self.mode == Mode::Counterfactual {
            self.wake_reviewers(q)?;
        }
        Ok(())
    }

    fn evict(&mut self, q: usize, victim: usize) -> Result<()> {
        match self.queues[q].setup.overflow {
            Some(o) => {
                self.advance(victim, TrajectoryKind::Transferred, Some(o))?;
                let t = self.now();
                let id = self.jobs[victim].id;
                let to = self.queues[o].setup.id.clone();
                let rec = self.log.push(t, LogKind::Transferred);
                rec.job(id).queue(&self.queues[q].setup.id);
                rec.detail.to_queue = Some(to);
                self.insert_into(o, victim)
            }
            None => {
                self.log_job(LogKind::Dropped, victim, Some(q));
                self.jobs[victim].current_queue = None;
                Ok(())
            }
        }
    }

    fn wake_reviewers(&mut self, q: usize) -> Result<()> {
        let t = self.now();
        for i in 0..self.queues[q].reviewers.len() {
            let r = self.queues[q].reviewers[i];
            let rt = &mut self.reviewer_rt[r];
            if rt.parked && !rt.wake_pending {
                rt.parked = false;
                rt.wake_pending = true;
                self.cal
                    .schedule(t, EventKind::ReviewerAvailable { reviewer: r })?;
            }
        }
        Ok(())
    }

    fn on_reopen(&mut self, slot: usize) -> Result<()> {
        let q = self.current_queue(slot).ok_or_else(|| {
            Error::Runtime(format!(
                "job {} has no queue to reopen into",
                self.jobs[slot].id
            ))
        })?;
        self.advance(slot, TrajectoryKind::Reopened, Some(q))?;
        self.log_job(LogKind::Reopened, slot, Some(q));
        self.log_job(LogKind::Enqueued, slot, Some(q));
        self.insert_into(q, slot)
    }

    fn on_resort(&mut self, q: usize) -> Result<()> {
        let t = self.now();
        let setup = self.queues[q].setup.clone();
        let jobs = &self.jobs;
        self.queues[q].book.rescore(|slot| {
            Ok(setup
                .formula
                .score(&jobs[slot].view(), t, setup.sla_window_ms)?
                .value)
        })?;
        let n = self.queues[q].book.len() as u64;
        if n > 0 {
            let rec = self.log.push(t, LogKind::QueueResort);
            rec.queue(&setup.id);
            rec.detail.count = Some(n);
        }
        if let Some(p) = setup.reorder_period_ms {
            self.cal
                .schedule(t + p, EventKind::QueueResort { queue: q })?;
        }
        Ok(())
    }

    fn on_reaper_scan(&mut self, k: usize) -> Result<()> {
        let t = self.now();
        let validated = &self.validated;
        let picked = self.reapers[k].scan(t, &self.jobs, self.seed, |s| validated[s]);
        let target = self.reapers[k].target;
        for cand in picked {
            self.validated[cand] = true;
            let mut v = self.jobs[cand].clone();
            v.id = JobId(self.next_job_id);
            self.next_job_id += 1;
            v.source = crate::domain::Source::ReaperValidation;
            v.enqueue_time = t;
            v.initial_queue = Some(self.queues[target].setup.id.clone());
            v.pauses = 0;
            v.state = JobState::Created;
            v.current_queue = None;
            v.trajectory_log.clear();
            v.recorded.clear();
            let cand_id = self.jobs[cand].id;
            self.jobs.push(v);
            self.pauses_done.push(0);
            self.validated.push(false);
            let slot = self.jobs.len() - 1;

            let rec = self.log.push(t, LogKind::ReaperEnqueued);
            rec.job(self.jobs[slot].id)
                .queue(&self.queues[target].setup.id);
            rec.detail.candidate_id = Some(cand_id);
            self.log_job(LogKind::Created, slot, None);
            self.route_new(slot, target)?;
        }
        let next = self.reapers[k].next_scan(t);
        if next > t {
            self.cal
                .schedule(next, EventKind::ReaperScan { reaper: k })?;
        }
        Ok(())
    }

    fn on_cap_reset(&mut self) -> Result<()> {
        let t = self.now();
        for r in 0..self.reviewer_rt.len() {
            let rt = &mut self.reviewer_rt[r];
            if rt.parked && !rt.wake_pending {
                rt.parked = false;
                rt.wake_pending = true;
                self.cal
                    .schedule(t, EventKind::ReviewerAvailable { reviewer: r })?;
            }
        }
        self.cal.schedule(t + DAY_MS, EventKind::CapReset)?;
        Ok(())
    }

    // ---- reviewers ----

    fn on_shift_start(&mut self, r: usize) -> Result<()> {
        let t = self.now();
        self.log
            .push(t, LogKind::ShiftStart)
            .reviewer(self.reviewers[r].id);
        let rt = &mut self.reviewer_rt[r];
        rt.on_shift = true;
        if self.mode == Mode::Counterfactual && rt.busy.is_none() && !rt.wake_pending {
            rt.wake_pending = true;
            rt.parked = false;
            self.cal
                .schedule(t, EventKind::ReviewerAvailable { reviewer: r })?;
        }
        Ok(())
    }

    fn on_shift_end(&mut self, r: usize) -> Result<()> {
        let t = self.now();
        self.log
            .push(t, LogKind::ShiftEnd)
            .reviewer(self.reviewers[r].id);
        let rt = &mut self.reviewer_rt[r];
        rt.on_shift = false;
        rt.parked = false;
        Ok(())
    }

    fn on_reviewer_available(&mut self, r: usize) -> Result<()> {
        let rt = &mut self.reviewer_rt[r];
        rt.wake_pending = false;
        if !rt.on_shift || rt.busy.is_some() {
            return Ok(());
        }
        if !self.assign_next_job(r)? {
            self.reviewer_rt[r].parked = true;
        }
        Ok(())
    }

    /// Picks a queue with the configured strategy and starts the top job.
    /// Returns false when nothing is available to this reviewer.
    pub(crate) fn assign_next_job(&mut self, r: usize) -> Result<bool> {
        let t = self.now();
        let day = t.0 / DAY_MS;
        let choice = {
            let (queues, topo, caps) = (&self.queues, &self.topology, &self.cap_used);
            let open = |q: usize| !queues[q].book.is_empty() && segment_open(topo, caps, q, day);
            self.allocator.select(r, t, open, &mut self.rng)
        };
        let Some(q) = choice else { return Ok(false) };
        let slot = self.queues[q]
            .book
            .pop_top()
            .expect("chosen queue is non-empty");
        self.advance_by(slot, TrajectoryKind::Reviewed, Some(q), r)?;
        let id = self.jobs[slot].id;
        self.log
            .push(t, LogKind::Assigned)
            .job(id)
            .reviewer(self.reviewers[r].id)
            .queue(&self.queues[q].setup.id);

        let handle = self.jobs[slot].handle_time_ms;
        let seg = self.topology.queues[q].segment;
        if self.topology.segments[seg].daily_cap_ms.is_some() {
            let entry = &mut self.cap_used[seg];
            if entry.0 != day {
                *entry = (day, 0);
            }
            entry.1 += handle;
        }
        self.reviewer_rt[r].busy = Some(slot);
        self.cal.schedule(
            t + handle,
            EventKind::ReviewComplete {
                reviewer: r,
                job: slot,
            },
        )?;
        Ok(true)
    }

    fn on_review_complete(&mut self, r: usize, slot: usize) -> Result<()> {
        let t = self.now();
        let q = self.current_queue(slot);
        self.advance_by(slot, TrajectoryKind::Decisioned, q, r)?;
        let pause = self.pauses_done[slot] < self.jobs[slot].pauses;
        let action = if pause {
            Action::Pause
        } else if self.jobs[slot].true_label == Label::Violating {
            Action::Remove
        } else {
            Action::Keep
        };
        let id = self.jobs[slot].id;
        {
            let rec = self.log.push(t, LogKind::Decisioned);
            rec.job(id).reviewer(self.reviewers[r].id);
            if let Some(q) = q {
                rec.queue(&self.queues[q].setup.id);
            }
            rec.detail.action = Some(action);
        }
        if pause {
            self.pauses_done[slot] += 1;
            self.advance(slot, TrajectoryKind::Paused, q)?;
            self.log_job(LogKind::Paused, slot, q);
            self.cal.schedule(
                t + self.pause_duration_ms,
                EventKind::JobReopen { job: slot },
            )?;
        } else {
            self.jobs[slot].close()?;
            self.log_job(LogKind::Closed, slot, q);
        }

        let rt = &mut self.reviewer_rt[r];
        rt.busy = None;
        if rt.on_shift && !rt.wake_pending {
            rt.wake_pending = true;
            self.cal
                .schedule(t, EventKind::ReviewerAvailable { reviewer: r })?;
        }
        Ok(())
    }

    // ---- replay ----

    fn on_replay_step(&mut self, slot: usize, step: usize) -> Result<()> {
        use TrajectoryKind as K;
        let t = self.now();
        let ev = self.jobs[slot].recorded[step].clone();
        let id = self.jobs[slot].id;
        let named_queue = match &ev.queue {
            Some(name) => Some(*self.queue_index.get(name).ok_or_else(|| {
                Error::Runtime(format!("job {id}: unknown queue `{name}` in trajectory"))
            })?),
            None => None,
        };
        let reviewer = match ev.reviewer {
            Some(rid) => Some(*self.reviewer_index.get(&rid).ok_or_else(|| {
                Error::Runtime(format!("job {id}: unknown reviewer {rid} in trajectory"))
            })?),
            None => None,
        };
        let state = self.jobs[slot].state;
        let current = self.current_queue(slot);
        let mut stamped = ev.clone();
        stamped.time = t;

        match ev.kind {
            K::Enqueued => {
                let q = named_queue.ok_or_else(|| {
                    Error::Runtime(format!("job {id}: enqueued step without queue"))
                })?;
                self.jobs[slot].advance_state(stamped)?;
                self.log_job(LogKind::Created, slot, None);
                self.log_job(LogKind::Enqueued, slot, Some(q));
                self.insert_into(q, slot)?;
            }
            K::Transferred => {
                let to = named_queue.ok_or_else(|| {
                    Error::Runtime(format!("job {id}: transfer step without queue"))
                })?;
                self.jobs[slot].advance_state(stamped)?;
                match (state, current) {
                    (JobState::Enqueued, Some(from)) => {
                        self.queues[from].book.remove(slot);
                        let rec = self.log.push(t, LogKind::Transferred);
                        rec.job(id).queue(&self.queues[from].setup.id);
                        rec.detail.to_queue = Some(self.queues[to].setup.id.clone());
                    }
                    _ => self.log_job(LogKind::Enqueued, slot, Some(to)),
                }
                self.insert_into(to, slot)?;
            }
            K::Skipped => {
                self.jobs[slot].advance_state(stamped)?;
                {
                    let rec = self.log.push(t, LogKind::Skipped);
                    rec.job(id);
                    if let Some(q) = current {
                        rec.queue(&self.queues[q].setup.id);
                    }
                    if let Some(r) = reviewer {
                        rec.reviewer(self.reviewers[r].id);
                    }
                }
                if state == JobState::Assigned {
                    if let Some(r) = reviewer {
                        self.release(r, slot);
                    }
                    if let Some(q) = current {
                        self.log_job(LogKind::Enqueued, slot, Some(q));
                        self.insert_into(q, slot)?;
                    }
                }
            }
            K::Reviewed => {
                let r = reviewer.ok_or_else(|| {
                    Error::Runtime(format!("job {id}: reviewed step without reviewer"))
                })?;
                if let Some(q) = current {
                    self.queues[q].book.remove(slot);
                }
                self.jobs[slot].advance_state(stamped)?;
                let rec = self.log.push(t, LogKind::Assigned);
                rec.job(id).reviewer(self.reviewers[r].id);
                if let Some(q) = current {
                    rec.queue(&self.queues[q].setup.id);
                }
                self.reviewer_rt[r].busy = Some(slot);
            }
            K::Decisioned => {
                self.jobs[slot].advance_state(stamped)?;
                if state == JobState::Created {
                    self.log_job(LogKind::Created, slot, None);
                    self.log_job(LogKind::AutoDecisioned, slot, None);
                } else {
                    let recorded = &self.jobs[slot].recorded;
                    let action = match recorded.get(step + 1).map(|e| e.kind) {
                        Some(K::Paused) => Action::Pause,
                        Some(_) => Action::Keep,
                        None if self.jobs[slot].true_label == Label::Violating => Action::Remove,
                        None => Action::Keep,
                    };
                    let rec = self.log.push(t, LogKind::Decisioned);
                    rec.job(id);
                    if let Some(r) = reviewer {
                        rec.reviewer(self.reviewers[r].id);
                    }
                    if let Some(q) = current {
                        rec.queue(&self.queues[q].setup.id);
                    }
                    rec.detail.action = Some(action);
                    if let Some(r) = reviewer {
                        self.release(r, slot);
                    }
                }
            }
            K::Paused => {
                self.jobs[slot].advance_state(stamped)?;
                self.log_job(LogKind::Paused, slot, current);
            }
            K::Reopened => {
                let q = named_queue.or(current).ok_or_else(|| {
                    Error::Runtime(format!("job {id}: reopen step without queue"))
                })?;
                stamped.queue = Some(self.queues[q].setup.id.clone());
                self.jobs[slot].advance_state(stamped)?;
                self.log_job(LogKind::Reopened, slot, Some(q));
                self.log_job(LogKind::Enqueued, slot, Some(q));
                self.insert_into(q, slot)?;
            }
        }

        let next = step + 1;
        if let Some(e) = self.jobs[slot].recorded.get(next) {
            self.cal.schedule(
                e.time,
                EventKind::ReplayStep {
                    job: slot,
                    step: next,
                },
            )?;
        } else if self.jobs[slot].state == JobState::Decisioned {
            self.jobs[slot].close()?;
            let q = self.current_queue(slot);
            self.log_job(LogKind::Closed, slot, q);
        }
        Ok(())
    }

    fn release(&mut self, r: usize, slot: usize) {
        if self.reviewer_rt[r].busy == Some(slot) {
            self.reviewer_rt[r].busy = None;
        }
    }
}

fn segment_open(topo: &Topology, cap_used: &[(u64, u64)], q: usize, day: u64) -> bool {
    let seg = topo.queues[q].segment;
    match topo.segments[seg].daily_cap_ms {
        None => true,
        Some(cap) => {
            let (d, used) = cap_used[seg];
            d != day || used < cap
        }
    }
}
