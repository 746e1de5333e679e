//! Job traces, reviewer rosters, resampling and synthetic workloads.
//!
//! Shifts are taken to be productive time: anything like breaks or idle
//! detection must already be folded into the shift table.

mod resample;
mod synthetic;
mod trace;

pub use resample::{resample_demand, resample_supply, HOUR_MS};
pub use synthetic::{
    generate_synthetic, jobs_for_hours, mean_handle_secs, Arrival, Dist, HandleTime, SyntheticSpec,
};
pub use trace::{
    check_recorded, load_jobs, load_roster, read_jobs, read_roster, write_jobs, write_locations,
    write_shifts, write_skills, JobTraceRecord, RosterSources,
};
