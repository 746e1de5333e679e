//! Event calendar, run log and the simulation loop.

mod calendar;
mod log;
mod sim;

pub use calendar::{Event, EventCalendar, EventKind};
pub use log::{Action, Detail, EventLog, LogKind, LogRecord};
pub use sim::{Mode, QueueSetup, RunOutput, SimSetup, Simulation};
