use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::domain::SimTime;
use crate::error::{Error, Result};

/// What an event does, with the entity slots it touches. Variant order is the
/// tie-break rank between events scheduled at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ShiftEnd { reviewer: usize },
    JobArrival { job: usize },
    SyntheticInjection { job: usize },
    JobReopen { job: usize },
    ReplayStep { job: usize, step: usize },
    ReaperScan { reaper: usize },
    QueueResort { queue: usize },
    CapReset,
    ShiftStart { reviewer: usize },
    ReviewerAvailable { reviewer: usize },
    ReviewComplete { reviewer: usize, job: usize },
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::ShiftEnd { .. } => 0,
            EventKind::JobArrival { .. } => 1,
            EventKind::SyntheticInjection { .. } => 2,
            EventKind::JobReopen { .. } => 3,
            EventKind::ReplayStep { .. } => 4,
            EventKind::ReaperScan { .. } => 5,
            EventKind::QueueResort { .. } => 6,
            EventKind::CapReset => 7,
            EventKind::ShiftStart { .. } => 8,
            EventKind::ReviewerAvailable { .. } => 9,
            EventKind::ReviewComplete { .. } => 10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Future event list keyed by (time, kind rank, scheduling sequence).
#[derive(Debug, Default)]
pub struct EventCalendar {
    pending: BinaryHeap<Reverse<Event>>,
    clock: SimTime,
    next_seq: u64,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64> {
        if time < self.clock {
            return Err(Error::ClockViolation {
                at: time.0,
                clock: self.clock.0,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.push(Reverse(Event { time, seq, kind }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.peek().map(|Reverse(e)| e.time)
    }

    /// Pops the minimal event if it is due at or before `horizon`, moving the clock to it.
    pub fn pop_until(&mut self, horizon: SimTime) -> Option<Event> {
        if self.peek_time()? > horizon {
            return None;
        }
        let Reverse(e) = self.pending.pop()?;
        self.clock = e.time;
        Some(e)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.pop_until(SimTime::MAX)
    }

    /// Moves the clock forward without processing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.clock {
            self.clock = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_instant_runs_before_later() {
        let mut cal = EventCalendar::new();
        cal.schedule(SimTime(1), EventKind::CapReset).unwrap();
        cal.schedule(SimTime(0), EventKind::CapReset).unwrap();
        assert_eq!(cal.pop().unwrap().time, SimTime(0));
        assert_eq!(cal.pop().unwrap().time, SimTime(1));
    }

    #[test]
    fn fifo_tie_break_within_rank() {
        let mut cal = EventCalendar::new();
        let a = cal
            .schedule(SimTime(5), EventKind::JobArrival { job: 9 })
            .unwrap();
        let b = cal
            .schedule(SimTime(5), EventKind::JobArrival { job: 1 })
            .unwrap();
        assert!(a < b);
        assert_eq!(cal.pop().unwrap().seq, a);
        assert_eq!(cal.pop().unwrap().seq, b);
    }

    #[test]
    fn rank_orders_equal_times() {
        let mut cal = EventCalendar::new();
        let t = SimTime(10);
        cal.schedule(
            t,
            EventKind::ReviewComplete {
                reviewer: 0,
                job: 0,
            },
        )
        .unwrap();
        cal.schedule(t, EventKind::ReviewerAvailable { reviewer: 0 })
            .unwrap();
        cal.schedule(t, EventKind::ShiftStart { reviewer: 0 })
            .unwrap();
        cal.schedule(t, EventKind::QueueResort { queue: 0 })
            .unwrap();
        cal.schedule(t, EventKind::ReaperScan { reaper: 0 })
            .unwrap();
        cal.schedule(t, EventKind::JobReopen { job: 0 }).unwrap();
        cal.schedule(t, EventKind::JobArrival { job: 0 }).unwrap();
        cal.schedule(t, EventKind::ShiftEnd { reviewer: 0 })
            .unwrap();
        let ranks: Vec<u8> = std::iter::from_fn(|| cal.pop())
            .map(|e| e.kind.rank())
            .collect();
        let mut sorted = ranks.clone();
        sorted.sort();
        assert_eq!(ranks, sorted);
        assert_eq!(ranks.first(), Some(&0));
    }

    #[test]
    fn scheduling_into_past_fails() {
        let mut cal = EventCalendar::new();
        cal.schedule(SimTime(10), EventKind::CapReset).unwrap();
        cal.pop();
        assert!(cal.schedule(SimTime(10), EventKind::CapReset).is_ok());
        assert!(matches!(
            cal.schedule(SimTime(9), EventKind::CapReset),
            Err(Error::ClockViolation { at: 9, clock: 10 })
        ));
    }

    #[test]
    fn pop_until_respects_horizon() {
        let mut cal = EventCalendar::new();
        cal.schedule(SimTime(10), EventKind::CapReset).unwrap();
        assert!(cal.pop_until(SimTime(9)).is_none());
        assert_eq!(cal.clock(), SimTime(0));
        assert!(cal.pop_until(SimTime(10)).is_some());
    }
}
