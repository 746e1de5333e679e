// Should a site that is already near capacity take on a second queue?
//
// Runs the status quo and the move over the same arrivals and reports the
// site's utilization and turnaround. A few points of utilization near 100%
// cost several times the waiting.
//
//     cargo run --release --example capacity_planning

use rqsim::casebook::CapacityCase;
use rqsim::domain::SimTime;
use rqsim::metrics;
use rqsim::runner::{self, simulate};

fn main() -> rqsim::Result<()> {
    let case = CapacityCase::default();
    let before = case.scenario(false);
    let after = case.scenario(true);

    println!(
        "{:<12} {:>10} {:>12} {:>10}",
        "scenario", "site util", "avg TAT s", "open"
    );
    for (name, s) in [("status quo", &before), ("moved", &after)] {
        let (out, summary) = simulate(s)?;
        let util = metrics::utilization(&out, Some(&case.site_ids()), (SimTime::ZERO, out.horizon));
        println!(
            "{name:<12} {:>9.1}% {:>12.0} {:>10}",
            util.unwrap_or(0.0) * 100.0,
            summary.avg_tat_s.unwrap_or(f64::NAN),
            summary.jobs_open
        );
    }

    let report = runner::compare(&before, &after)?;
    println!("\nper-queue change");
    for q in &report.queues {
        println!(
            "  {:<8} peak load {:>4} -> {:<4} avg TAT {:+.0} s",
            q.queue,
            q.peak_load_a,
            q.peak_load_b,
            q.delta_avg_tat_s.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
