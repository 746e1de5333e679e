// Calibrating against history: replay a recorded trace verbatim, then rerun
// the same jobs under the configured policies and see how far they drift.
//
//     cargo run --example replay_calibration

use std::path::Path;

use rqsim::engine::Mode;
use rqsim::runner::simulate;
use rqsim::scenario::Scenario;

fn main() -> rqsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay/scenario.toml");
    let replay = Scenario::load(&path)?;
    let (out, s) = simulate(&replay)?;

    let exact = out
        .jobs
        .iter()
        .filter(|j| {
            let rec = &j.recorded;
            let first = rec
                .iter()
                .find(|e| e.kind == rqsim::domain::TrajectoryKind::Enqueued);
            let last = rec
                .iter()
                .rev()
                .find(|e| e.kind == rqsim::domain::TrajectoryKind::Decisioned);
            let want = last.map(|l| l.time.since(first.map_or(j.enqueue_time, |f| f.time)));
            want == j.turnaround_time().ok()
        })
        .count();
    println!(
        "replay: {exact}/{} recorded TATs reproduced, avg TAT {:.0} s",
        out.jobs.len(),
        s.avg_tat_s.unwrap_or(0.0)
    );

    let mut counterfactual = replay.clone();
    counterfactual.config.mode = Mode::Counterfactual;
    let (_, c) = simulate(&counterfactual)?;
    println!(
        "counterfactual: avg TAT {:.0} s, utilization {:.1}%, {} open at horizon",
        c.avg_tat_s.unwrap_or(0.0),
        c.utilization.unwrap_or(0.0) * 100.0,
        c.jobs_open
    );
    Ok(())
}
