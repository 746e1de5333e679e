// What happens to a queue if 200 extra review hours land on it?
//
// Sizes a synthetic injection from hours of work, adds it to a baseline and
// compares queue load and turnaround. The injected jobs are reproducible
// from the scenario seed.
//
//     cargo run --release --example volume_injection

use rqsim::casebook::{mm1, HOUR};
use rqsim::metrics;
use rqsim::runner::simulate;
use rqsim::workload::{jobs_for_hours, Arrival, HandleTime, SyntheticSpec};

fn main() -> rqsim::Result<()> {
    // ten reviewers on an M/M/1-style workload at 60% load for a week
    let mut base = mm1(0.05, 0.1, 30_000, 4);
    base.config.reviewer_pools[0].count = 10;
    base.config.synthetic[0].arrival = Arrival::Poisson { rate_per_s: 0.05 };
    base.config.synthetic[0].handle_time = HandleTime::Exponential {
        rate_per_s: 1.0 / 120.0,
    };

    let mut spec = SyntheticSpec::new(
        Arrival::Poisson { rate_per_s: 0.02 },
        HandleTime::Constant { ms: 120_000 },
    );
    spec.queue = Some("q".into());
    spec.target_hours = Some(200.0);
    spec.start_ms = 24 * HOUR;
    spec.seed_offset = 1;
    println!(
        "200 h at 120 s each is {} jobs",
        jobs_for_hours(200.0, 120.0)
    );

    let mut injected = base.clone();
    injected.config.synthetic.push(spec);

    for (name, s) in [("baseline", &base), ("injected", &injected)] {
        let (out, summary) = simulate(s)?;
        println!(
            "{name:<9} jobs {:>6}  peak load {:>5}  avg TAT {:>6.0} s  utilization {:>5.1}%",
            summary.jobs_created,
            metrics::peak_load(&metrics::total_load_series(&out.log)),
            summary.avg_tat_s.unwrap_or(0.0),
            summary.utilization.unwrap_or(0.0) * 100.0
        );
    }
    Ok(())
}
